#!/usr/bin/env python3
"""Plot result CSVs (needs matplotlib; not part of the tested surface)."""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("--xlabel", default="sweep value")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    curves = defaultdict(list)
    with open(args.csv) as fh:
        for row in csv.DictReader(fh):
            curves[row["method"]].append((float(row["sweep_value"]), float(row["d_bar_db"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for method, pts in sorted(curves.items()):
        x, y = zip(*sorted(pts))
        ax.plot(x, y, marker="o", ms=3, ls="--" if method.startswith("floor") else "-", label=method)
    ax.set_xlabel(args.xlabel)
    ax.set_ylabel("normalized distortion (dB)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    out = args.out or args.csv.rsplit(".", 1)[0] + ".png"
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
