"""End-to-end orchestration: ingest, preprocess, connectivity, networks, classification sweep."""

from __future__ import annotations

import csv
import io
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import classify, connectivity, harmonics, network, preprocess, synth
from .classify import CvReport, FeatureTable, ForestConfig
from .connectivity import CrossPlotGrid, FixedCountGrid
from .preprocess import BandpassSpec, WindowPlan
from .signal_io import (
    GroupLabel,
    Marker,
    Montage,
    Recording,
    StageTag,
    default_montage,
    extract_epochs,
    parse_edf,
    parse_markers,
)

METRIC_CODES = {
    "D": "degree",
    "C": "clustering",
    "EC": "eigenvector",
    "BC": "betweenness",
    "Cc": "coreness",
}

_METRIC_FUNCS = {
    "degree": network.degree,
    "clustering": network.clustering,
    "eigenvector": network.eigenvector_centrality,
    "betweenness": network.betweenness,
    "coreness": network.coreness_centrality,
}


@dataclass
class PipelineSettings:
    features: str = "raw"  # raw | sh | hh
    order: int = 6
    method: str = connectivity.PLI
    grid: CrossPlotGrid = field(default_factory=FixedCountGrid)
    invert_cpte: bool = False
    thresholds: tuple[float, ...] = (0.5,)
    metrics: tuple[str, ...] = ("degree",)
    stages: tuple[StageTag, ...] = tuple(StageTag)
    bandpass: BandpassSpec = field(default_factory=BandpassSpec)
    window: WindowPlan = field(default_factory=WindowPlan)
    epoch_len: int = 1000
    forest: ForestConfig = field(default_factory=ForestConfig)
    cv_folds: int = 10
    group_by_subject: bool = False
    seed: int = 0
    workers: int = 1
    montage: Montage | None = None

    def __post_init__(self):
        if self.features not in ("raw", "sh", "hh"):
            raise ValueError(f"unknown feature kind {self.features!r}")
        self.metrics = tuple(METRIC_CODES.get(m, m) for m in self.metrics)
        for m in self.metrics:
            if m not in _METRIC_FUNCS:
                raise ValueError(f"unknown metric {m!r}")


@dataclass
class SweepRow:
    stage: StageTag
    threshold: float
    metric: str
    mean_accuracy: float | None
    std_accuracy: float | None
    n_rows: int
    error: str = ""


@dataclass
class SweepResult:
    rows: list[SweepRow]


@dataclass
class _SubjectOutput:
    subject_id: str
    group: GroupLabel
    # per window: (stage, {(threshold, metric): vector})
    windows: list[tuple[StageTag, dict[tuple[float, str], np.ndarray]]]
    nom_sums: dict[StageTag, np.ndarray]
    nom_counts: dict[StageTag, int]


def _resolve_basis(settings: PipelineSettings, n_channels: int) -> harmonics.HarmonicBasis | None:
    if settings.features == "raw":
        return None
    montage = settings.montage or default_montage()
    if len(montage.entries) != n_channels:
        raise ValueError(
            f"montage has {len(montage.entries)} electrodes but recording has {n_channels} channels"
        )
    if settings.features == "sh":
        return harmonics.build_sh_basis(montage, settings.order)
    return harmonics.build_head_basis(montage, settings.order)


def process_subject(
    subject_id: str,
    rec: Recording,
    markers: list[Marker],
    group: GroupLabel,
    settings: PipelineSettings,
) -> _SubjectOutput:
    """Filter, epoch, (optionally) decompose, and reduce one subject to metric vectors."""
    sections = preprocess.design_bandpass(settings.bandpass, rec.sample_rate)
    filtered = preprocess.filter_recording(sections, rec)
    epochs = extract_epochs(filtered, markers, group, fixed_len=settings.epoch_len)
    basis = _resolve_basis(settings, rec.n_channels)

    windows_out: list[tuple[StageTag, dict[tuple[float, str], np.ndarray]]] = []
    nom_sums: dict[StageTag, np.ndarray] = {}
    nom_counts: dict[StageTag, int] = {}
    for epoch in epochs:
        if epoch.stage not in settings.stages:
            continue
        epoch = preprocess.average_reference(epoch)
        rows = epoch.data
        if basis is not None:
            rows = harmonics.decompose(basis, None, rows).coeffs
        if settings.method == connectivity.PLI:
            phases = connectivity.analytic_phase_rows(rows)
        plan = settings.window
        length = rows.shape[1]
        for offset in range(0, length - plan.width + 1, plan.step):
            if settings.method == connectivity.PLI:
                values = connectivity.pli_matrix_from_phases(phases[:, offset : offset + plan.width])
            else:
                values = connectivity.connectivity_matrix(
                    rows[:, offset : offset + plan.width],
                    method=settings.method,
                    grid=settings.grid,
                ).values
            nom = network.minmax_normalize(values)
            if settings.invert_cpte and settings.method == connectivity.CPTE:
                inverted = 1.0 - nom.values
                np.fill_diagonal(inverted, 0.0)
                nom = network.NOM(values=inverted, method=nom.method)
            nom_sums.setdefault(epoch.stage, np.zeros_like(nom.values))
            nom_sums[epoch.stage] += nom.values
            nom_counts[epoch.stage] = nom_counts.get(epoch.stage, 0) + 1
            cell: dict[tuple[float, str], np.ndarray] = {}
            for tau in settings.thresholds:
                adj = network.binarize(nom, tau)
                for metric in settings.metrics:
                    cell[(tau, metric)] = _METRIC_FUNCS[metric](adj)
            windows_out.append((epoch.stage, cell))
    return _SubjectOutput(
        subject_id=subject_id,
        group=group,
        windows=windows_out,
        nom_sums=nom_sums,
        nom_counts=nom_counts,
    )


def _process_manifest_entry(args) -> _SubjectOutput:
    subject_id, group, edf_path, marker_path, settings = args
    rec = parse_edf(Path(edf_path).read_bytes())
    markers = parse_markers(Path(marker_path).read_text())
    return process_subject(subject_id, rec, markers, group, settings)


def _process_synth_entry(args) -> _SubjectOutput:
    subject_id, group, seed, profile, synth_cfg, settings = args
    rec, markers = synth.generate_subject(profile, synth_cfg, seed)
    return process_subject(subject_id, rec, markers, group, settings)


def _map_subjects(func, tasks, workers: int):
    if workers <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


def collect_from_manifest(manifest_path: str | Path, settings: PipelineSettings) -> list[_SubjectOutput]:
    entries = synth.parse_manifest(manifest_path)
    tasks = [(sid, group, edf, mk, settings) for sid, group, edf, mk in entries]
    return _map_subjects(_process_manifest_entry, tasks, settings.workers)


def collect_from_profiles(
    profiles: dict[GroupLabel, synth.GroupProfile],
    synth_cfg: synth.SynthConfig,
    settings: PipelineSettings,
) -> list[_SubjectOutput]:
    """Generate and process a synthetic cohort without touching disk."""
    tasks = [
        (sid, group, seed, profiles[group], synth_cfg, settings)
        for sid, group, seed in synth.cohort_members(profiles, synth_cfg)
    ]
    return _map_subjects(_process_synth_entry, tasks, settings.workers)


def _cell_seed(base_seed: int, stage: StageTag, tau: float, metric: str) -> int:
    tag = f"{stage.value}:{tau:.6f}:{metric}".encode()
    return base_seed ^ zlib.crc32(tag)


def cell_feature_table(
    outputs: list[_SubjectOutput], stage: StageTag, tau: float, metric: str
) -> tuple[FeatureTable, list[str]]:
    rows, labels, stages, subject_ids = [], [], [], []
    for out in outputs:
        for w_stage, cell in out.windows:
            if w_stage != stage:
                continue
            rows.append(cell[(tau, metric)])
            labels.append(out.group)
            stages.append(w_stage)
            subject_ids.append(out.subject_id)
    if not rows:
        table = FeatureTable(x=np.empty((0, 0)), labels=[], stages=[], feature_names=[], metric=metric)
        return table, subject_ids
    x = np.array(rows)
    names = [f"f_{i:03d}" for i in range(x.shape[1])]
    return FeatureTable(x=x, labels=labels, stages=stages, feature_names=names, metric=metric), subject_ids


def cross_validate_by_subject(
    table: FeatureTable, subject_ids: list[str], cfg: ForestConfig, k: int
) -> CvReport:
    """Leakage-free variant: folds partition subjects, not windows."""
    subjects = sorted(set(subject_ids))
    rng = np.random.default_rng(cfg.seed)
    by_group: dict[GroupLabel, list[str]] = {}
    subj_group = {s: table.labels[subject_ids.index(s)] for s in subjects}
    for s in subjects:
        by_group.setdefault(subj_group[s], []).append(s)
    folds: list[list[str]] = [[] for _ in range(k)]
    for group in GroupLabel:
        members = by_group.get(group, [])
        order = rng.permutation(len(members))
        for i, j in enumerate(order):
            folds[i % k].append(members[j])

    ids = np.array(subject_ids)
    accuracies = []
    confusion = np.zeros((3, 3), dtype=np.int64)
    y = classify._encode_labels(table.labels)
    for fold_id, test_subjects in enumerate(folds):
        test_mask = np.isin(ids, test_subjects)
        if not test_mask.any():
            continue
        train = np.flatnonzero(~test_mask)
        test = np.flatnonzero(test_mask)
        sub = FeatureTable(
            x=table.x[train],
            labels=[table.labels[i] for i in train],
            stages=[table.stages[i] for i in train],
            feature_names=table.feature_names,
            metric=table.metric,
        )
        fold_cfg = replace(cfg, seed=cfg.seed ^ (0x9E3779B9 * (fold_id + 1)))
        forest = classify.train_forest(sub, fold_cfg)
        preds = classify._encode_labels(classify.predict_batch(forest, table.x[test]))
        truth = y[test]
        accuracies.append(float(np.mean(preds == truth)))
        for t, p in zip(truth, preds):
            confusion[t, p] += 1
    return CvReport(
        fold_accuracies=accuracies,
        mean_accuracy=float(np.mean(accuracies)) if accuracies else 0.0,
        confusion=confusion,
        seed=cfg.seed,
    )


def run_sweep(
    outputs: list[_SubjectOutput],
    settings: PipelineSettings,
    out_dir: str | Path | None = None,
) -> SweepResult:
    """Cross-validate every (stage, threshold, metric) grid cell.

    Failed cells become error-marked rows instead of aborting the sweep.
    With an output directory, writes the sweep CSV, per-cell feature CSVs,
    and per-group mean NOM matrices.
    """
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
    rows = []
    for stage in settings.stages:
        for tau in settings.thresholds:
            for metric in settings.metrics:
                table, subject_ids = cell_feature_table(outputs, stage, tau, metric)
                cfg = replace(settings.forest, seed=_cell_seed(settings.seed, stage, tau, metric))
                try:
                    if settings.group_by_subject:
                        report = cross_validate_by_subject(table, subject_ids, cfg, settings.cv_folds)
                    else:
                        report = classify.cross_validate(table, cfg, k=settings.cv_folds)
                    row = SweepRow(
                        stage=stage,
                        threshold=tau,
                        metric=metric,
                        mean_accuracy=report.mean_accuracy,
                        std_accuracy=float(np.std(report.fold_accuracies)),
                        n_rows=table.n_rows,
                    )
                except Exception as exc:  # noqa: BLE001 - cell errors become rows
                    row = SweepRow(
                        stage=stage,
                        threshold=tau,
                        metric=metric,
                        mean_accuracy=None,
                        std_accuracy=None,
                        n_rows=table.n_rows,
                        error=str(exc),
                    )
                rows.append(row)
                if out_path is not None:
                    name = f"features_{stage.value}_t{tau:.1f}_{metric}.csv"
                    (out_path / name).write_text(classify.render_feature_csv(table))
                    # flush partial results so an aborted sweep is resumable
                    (out_path / "sweep_results.csv").write_text(render_sweep_csv(SweepResult(rows)))
    result = SweepResult(rows=rows)
    if out_path is not None:
        (out_path / "sweep_results.csv").write_text(render_sweep_csv(result))
        write_group_noms(outputs, out_path)
    return result


def render_sweep_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["stage", "threshold", "metric", "mean_accuracy", "std_accuracy", "n_rows", "error"])
    for row in result.rows:
        writer.writerow(
            [
                row.stage.value,
                f"{row.threshold:.3f}",
                row.metric,
                "" if row.mean_accuracy is None else f"{row.mean_accuracy:.6f}",
                "" if row.std_accuracy is None else f"{row.std_accuracy:.6f}",
                row.n_rows,
                row.error,
            ]
        )
    return buf.getvalue()


def aggregate_group_nom(noms: list[np.ndarray]) -> np.ndarray:
    """Element-wise mean of NOM value matrices."""
    if not noms:
        raise ValueError("need at least one NOM to aggregate")
    first = np.asarray(noms[0], dtype=float)
    total = np.zeros_like(first)
    for nom in noms:
        nom = np.asarray(nom, dtype=float)
        if nom.shape != first.shape:
            raise ValueError("inconsistent NOM shapes")
        total += nom
    return total / len(noms)


def write_group_noms(outputs: list[_SubjectOutput], out_path: Path):
    sums: dict[tuple[GroupLabel, StageTag], np.ndarray] = {}
    counts: dict[tuple[GroupLabel, StageTag], int] = {}
    for out in outputs:
        for stage, total in out.nom_sums.items():
            key = (out.group, stage)
            sums.setdefault(key, np.zeros_like(total))
            sums[key] += total
            counts[key] = counts.get(key, 0) + out.nom_counts[stage]
    for (group, stage), total in sums.items():
        mean = total / counts[(group, stage)]
        name = f"nom_{group.value}_{stage.value}.csv"
        (out_path / name).write_text(render_matrix_csv(mean))


def render_matrix_csv(matrix: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in np.atleast_2d(matrix):
        writer.writerow([f"{v:.17g}" for v in row])
    return buf.getvalue()


def parse_matrix_csv(text: str) -> np.ndarray:
    rows = [
        [float(cell) for cell in line]
        for line in csv.reader(io.StringIO(text))
        if line
    ]
    return np.array(rows)
