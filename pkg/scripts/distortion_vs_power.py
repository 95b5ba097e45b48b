#!/usr/bin/env python3
"""Distortion of the weak stream versus total interferer power.

Writes two CSVs: the saturating LNA (clip-only) for several ADC resolutions,
and the cubic-only LNA comparing beam-space and per-antenna compensation.
"""

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from mmwlin.harness import AdcSpec, LnaSpec, ScenarioConfig, emit_results, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    powers = np.arange(-49.0, -39.0, 1.0)

    base = ScenarioConfig(trials=args.trials, master_seed=args.seed)
    rows = []
    for bits in (3, 4, 5, 6):
        cfg = replace(base, lna=LnaSpec(mode="clip-only", iip3_dbm=-30.0), adc=AdcSpec(bits=bits),
                      methods=("floor", "none", "sat-recovery"))
        part = sweep(cfg, "input_power", powers, n_jobs=args.jobs)
        # fold the bit depth into the method label so one file holds all curves
        rows += [replace(r, method=f"{r.method}@B{bits}") for r in part]
    emit_results(rows, out / "clip_only_vs_power.csv")

    cfg = replace(base, lna=LnaSpec(mode="poly-only", iip3_dbm=-30.0), interferer_profile="dominant",
                  methods=("floor", "none", "beamspace", "per-antenna"))
    emit_results(sweep(cfg, "input_power", powers, n_jobs=args.jobs), out / "poly_only_vs_power.csv")
    print(f"wrote {out}/clip_only_vs_power.csv and {out}/poly_only_vs_power.csv")


if __name__ == "__main__":
    main()
