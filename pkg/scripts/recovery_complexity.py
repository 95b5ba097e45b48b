#!/usr/bin/env python3
"""Per-sample solve time of saturation recovery versus null-space size."""

import argparse
import json

from mmwlin.harness import recovery_timing


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nr", default="16,32,64,128")
    ap.add_argument("--users", type=int, default=8)
    ap.add_argument("--out", default=None, help="optional JSON output")
    args = ap.parse_args()
    res = recovery_timing(tuple(int(v) for v in args.nr.split(",")), args.users)
    for m, tg, tr in zip(res["null_dim"], res["t_general"], res["t_rank1"]):
        print(f"Nr-U={m:4d}  general {tg * 1e6:10.2f} us   single antenna {tr * 1e6:8.3f} us")
    print(f"log-log slope: general {res['slope_general']:.2f}, single antenna {res['slope_rank1']:.2f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(res, fh, indent=2)


if __name__ == "__main__":
    main()
