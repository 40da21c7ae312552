#!/usr/bin/env python3
"""Reproduce the headline synthetic study end to end.

Generates a graded-coupling cohort, runs the stage x threshold x metric
sweep, renders the group NOM heatmaps, and prints a two-way ANOVA for
the mid-threshold degree table. Results land in --out (default study/).

This is the full-size study; on one core it takes a while. Pass --small
for a quick smoke-scale version (minutes instead of hours).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from wmfc import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="study", help="output directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--small", action="store_true", help="smoke-scale run")
    args = ap.parse_args()

    out = Path(args.out)
    cohort = out / "cohort"
    results = out / "results"
    out.mkdir(parents=True, exist_ok=True)

    synth_flags = ["--out", str(cohort), "--seed", str(args.seed)]
    pipe_flags = [
        "--manifest", str(cohort / "manifest.csv"),
        "--out", str(results),
        "--threshold-sweep", "0.1:0.9:0.1",
        "--metrics", "D,C,EC,BC,Cc",
        "--seed", str(args.seed),
    ]
    if args.small:
        synth_flags += ["--channels", "16", "--subjects", "2", "--trials", "4,2,2,6"]
        pipe_flags += ["--window", "500", "--step", "250", "--trees", "10"]

    t0 = time.time()
    print("== synth ==", file=sys.stderr)
    if not (cohort / "manifest.csv").exists():
        rc = cli.main(["synth", *synth_flags])
        if rc:
            return rc
    else:
        print("cohort already present, reusing", file=sys.stderr)

    print("== pipeline ==", file=sys.stderr)
    rc = cli.main(["pipeline", *pipe_flags])
    if rc:
        return rc

    print("== render ==", file=sys.stderr)
    for nom in sorted(results.glob("nom_*.csv")):
        cli.main(["render", str(nom), "--out", str(results / nom.stem)])
        print(f"  {nom.stem}.pgm / .svg", file=sys.stderr)

    print("== anova (degree, tau=0.5, all stages) ==", file=sys.stderr)
    feats = sorted(results.glob("features_*_t0.5_degree.csv"))
    if feats:
        merged = results / "features_all_t0.5_degree.csv"
        lines: list[str] = []
        for f in feats:
            body = f.read_text().splitlines()
            if not lines:
                lines.append(body[0])
            lines += body[1:]
        merged.write_text("\n".join(lines) + "\n")
        cli.main(["anova", str(merged), "--feature", "mean"])

    print(f"done in {time.time() - t0:.0f}s; results in {results}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
