"""Command-line interface: synth, ingest, pipeline, render, anova."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import classify, connectivity, pipeline, synth
from .classify import ForestConfig
from .connectivity import FixedCountGrid, FixedRulerGrid
from .pipeline import PipelineSettings
from .preprocess import BandpassSpec, WindowPlan
from .signal_io import GroupLabel, StageTag, parse_edf, render_csv


def render_heatmap(
    matrix: np.ndarray,
    pgm_path: str | Path | None = None,
    svg_path: str | Path | None = None,
    labels: list[str] | None = None,
) -> None:
    """Write a matrix as a grayscale PGM (P5, maxval 255) and/or a labeled SVG.

    Values are clamped to [0, 1]; pixel value is round(255 * v).
    """
    values = np.clip(np.atleast_2d(np.asarray(matrix, dtype=float)), 0.0, 1.0)
    p = values.shape[0]
    pixels = np.rint(values * 255).astype(np.uint8)
    if pgm_path is not None:
        header = f"P5\n{values.shape[1]} {p}\n255\n".encode("ascii")
        Path(pgm_path).write_bytes(header + pixels.tobytes())
    if svg_path is not None:
        cell = 12
        margin = 60
        size = margin + p * cell
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
            f'<rect width="{size}" height="{size}" fill="white"/>',
        ]
        for i in range(p):
            for j in range(values.shape[1]):
                shade = 255 - int(pixels[i, j])
                parts.append(
                    f'<rect x="{margin + j * cell}" y="{margin + i * cell}" '
                    f'width="{cell}" height="{cell}" fill="rgb({shade},{shade},{shade})"/>'
                )
        if labels:
            for i, lbl in enumerate(labels[:p]):
                y = margin + i * cell + cell
                parts.append(f'<text x="2" y="{y}" font-size="8">{lbl}</text>')
                parts.append(
                    f'<text x="{margin + i * cell}" y="{margin - 4}" font-size="8" '
                    f'transform="rotate(-60 {margin + i * cell} {margin - 4})">{lbl}</text>'
                )
        parts.append("</svg>")
        Path(svg_path).write_text("\n".join(parts))


def parse_grid(text: str):
    kind, _, rest = text.partition(":")
    if kind == "count":
        nr, _, nt = rest.partition("x")
        return FixedCountGrid(n_radial=int(nr), n_angular=int(nt))
    if kind == "ruler":
        dr, _, dt = rest.partition(",")
        return FixedRulerGrid(dr=float(dr), dtheta_deg=float(dt))
    raise ValueError(f"grid must look like count:5x5 or ruler:2,10 (got {text!r})")


def parse_threshold_sweep(text: str) -> tuple[float, ...]:
    start, stop, step = (float(v) for v in text.split(":"))
    count = int(round((stop - start) / step)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _settings_from(args, config: dict) -> PipelineSettings:
    def pick(flag, key, default):
        if flag is not None:
            return flag
        return config.get(key, default)

    thresholds = None
    if args.threshold_sweep:
        thresholds = parse_threshold_sweep(args.threshold_sweep)
    elif args.threshold is not None:
        thresholds = (args.threshold,)
    elif "threshold_sweep" in config:
        thresholds = parse_threshold_sweep(config["threshold_sweep"])
    elif "threshold" in config:
        thresholds = (float(config["threshold"]),)
    else:
        thresholds = (0.5,)

    stages_spec = pick(args.stages, "stages", None)
    stages = (
        tuple(StageTag.parse(s) for s in stages_spec.split(","))
        if isinstance(stages_spec, str)
        else tuple(StageTag)
    )
    metrics_spec = pick(args.metrics, "metrics", "D")
    metrics = tuple(m.strip() for m in metrics_spec.split(","))

    forest = ForestConfig(
        n_trees=int(pick(args.trees, "trees", 100)),
        min_samples_split=int(pick(args.min_samples_split, "min_samples_split", 2)),
        seed=int(pick(args.seed, "seed", 0)),
    )
    return PipelineSettings(
        features=pick(args.features, "features", "raw"),
        order=int(pick(args.order, "order", 6)),
        method=pick(args.method, "method", connectivity.PLI),
        grid=parse_grid(pick(args.grid, "grid", "count:5x5")),
        invert_cpte=bool(args.invert_cpte or config.get("invert_cpte", False)),
        thresholds=thresholds,
        metrics=metrics,
        stages=stages,
        bandpass=BandpassSpec(
            low_cut=float(pick(args.low, "low", 0.5)),
            high_cut=float(pick(args.high, "high", 40.0)),
            order=int(pick(args.filter_order, "filter_order", 4)),
        ),
        window=WindowPlan(
            width=int(pick(args.window, "window", 500)),
            step=int(pick(args.step, "step", 250)),
        ),
        forest=forest,
        group_by_subject=bool(args.group_by_subject or config.get("group_by_subject", False)),
        seed=int(pick(args.seed, "seed", 0)),
        workers=int(pick(args.workers, "workers", 1)),
    )


def _add_pipeline_flags(sub):
    sub.add_argument("--config", help="TOML configuration file; flags override it")
    sub.add_argument("--manifest", help="cohort manifest CSV from `wmfc synth`")
    sub.add_argument("--out", help="output directory for results")
    sub.add_argument("--features", choices=["raw", "sh", "hh"])
    sub.add_argument("--order", type=int, help="harmonic decomposition order")
    sub.add_argument("--method", choices=[connectivity.PLI, connectivity.CPTE])
    sub.add_argument("--grid", help="count:5x5 or ruler:2,10")
    sub.add_argument("--threshold", type=float)
    sub.add_argument("--threshold-sweep", help="start:stop:step, e.g. 0.1:0.9:0.1")
    sub.add_argument("--invert-cpte", action="store_true")
    sub.add_argument("--metrics", help="comma list of D,C,EC,BC,Cc")
    sub.add_argument("--stages", help="comma list of stage names")
    sub.add_argument("--low", type=float, help="bandpass low cut (Hz)")
    sub.add_argument("--high", type=float, help="bandpass high cut (Hz)")
    sub.add_argument("--filter-order", type=int)
    sub.add_argument("--window", type=int, help="sliding window width (samples)")
    sub.add_argument("--step", type=int, help="sliding window step (samples)")
    sub.add_argument("--trees", type=int, help="random forest size")
    sub.add_argument("--min-samples-split", type=int)
    sub.add_argument("--group-by-subject", action="store_true")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--workers", type=int)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="wmfc", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_synth = subs.add_parser("synth", help="generate a synthetic cohort")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--channels", type=int, default=63)
    p_synth.add_argument("--subjects", type=int, default=8, help="subjects per group")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument(
        "--trials",
        default=None,
        help="per-stage trial counts as encoding,retro_cue,recall,retrieval (default 100,50,50,200)",
    )
    p_synth.add_argument("--kappa", default=None, help="HC,MCI,AD coupling strengths (default 0.2,0.5,0.8)")

    p_ingest = subs.add_parser("ingest", help="inspect an EDF file or convert it to CSV")
    p_ingest.add_argument("edf")
    p_ingest.add_argument("--csv", help="write the recording as a CSV matrix")

    p_pipe = subs.add_parser("pipeline", help="run the full sweep over a cohort")
    _add_pipeline_flags(p_pipe)

    p_render = subs.add_parser("render", help="render a matrix CSV as PGM + SVG heatmaps")
    p_render.add_argument("matrix", help="matrix CSV (as written by the pipeline)")
    p_render.add_argument("--out", required=True, help="output basename; writes .pgm and .svg")

    p_anova = subs.add_parser("anova", help="two-way ANOVA of one feature column")
    p_anova.add_argument("table", help="feature CSV written by the pipeline")
    p_anova.add_argument("--feature", required=True, help="column name, e.g. f_000, or 'mean'")

    args = parser.parse_args(argv)

    if args.command == "synth":
        cfg = synth.SynthConfig(channels=args.channels, subjects_per_group=args.subjects, seed=args.seed)
        if args.trials:
            counts = [int(v) for v in args.trials.split(",")]
            cfg.trials = dict(zip(StageTag, counts))
        kappas = (
            [float(v) for v in args.kappa.split(",")]
            if args.kappa
            else [synth.DEFAULT_PROFILES_KAPPA[g] for g in (GroupLabel.HC, GroupLabel.MCI, GroupLabel.AD)]
        )
        profiles = {
            GroupLabel.HC: synth.GroupProfile(kappa=kappas[0]),
            GroupLabel.MCI: synth.GroupProfile(kappa=kappas[1]),
            GroupLabel.AD: synth.GroupProfile(kappa=kappas[2]),
        }
        manifest = synth.generate_cohort(profiles, cfg, args.out)
        print(manifest)
        return 0

    if args.command == "ingest":
        rec = parse_edf(Path(args.edf).read_bytes())
        print(f"channels: {rec.n_channels}", file=sys.stderr)
        print(f"samples:  {rec.n_samples}", file=sys.stderr)
        print(f"rate:     {rec.sample_rate:g} Hz", file=sys.stderr)
        if args.csv:
            Path(args.csv).write_text(render_csv(rec))
        else:
            print(f"{rec.n_channels},{rec.n_samples},{rec.sample_rate:g}")
        return 0

    if args.command == "pipeline":
        config = _load_config(args.config)
        settings = _settings_from(args, config)
        manifest = args.manifest or config.get("manifest")
        out_dir = args.out or config.get("out")
        if not manifest:
            parser.error("pipeline needs --manifest (or `manifest` in the config file)")
        print("processing cohort...", file=sys.stderr)
        outputs = pipeline.collect_from_manifest(manifest, settings)
        print(f"processed {len(outputs)} subjects", file=sys.stderr)
        result = pipeline.run_sweep(outputs, settings, out_dir)
        sys.stdout.write(pipeline.render_sweep_csv(result))
        return 0

    if args.command == "render":
        matrix = pipeline.parse_matrix_csv(Path(args.matrix).read_text())
        base = Path(args.out)
        render_heatmap(matrix, pgm_path=base.with_suffix(".pgm"), svg_path=base.with_suffix(".svg"))
        return 0

    if args.command == "anova":
        table = classify.parse_feature_csv(Path(args.table).read_text())
        if args.feature == "mean":
            values = table.x.mean(axis=1)
        else:
            values = table.x[:, table.feature_names.index(args.feature)]
        report = classify.anova_two_way(values, table.labels, table.stages)
        print(f"group:       F({report.df_group},{report.df_error}) = {report.f_group:.4f}, p = {report.p_group:.3g}")
        print(f"stage:       F({report.df_stage},{report.df_error}) = {report.f_stage:.4f}, p = {report.p_stage:.3g}")
        print(
            f"interaction: F({report.df_interaction},{report.df_error}) = "
            f"{report.f_interaction:.4f}, p = {report.p_interaction:.3g}"
        )
        return 0

    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
