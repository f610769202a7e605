"""Run every replication example and print whether its verdicts match the expected regime."""

import argparse
from pathlib import Path

from matweight.replicate import SCENARIOS, replicate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="runs")
    ap.add_argument("--skip", default="", help="comma-separated example ids to skip")
    args = ap.parse_args()
    skip = {int(s) for s in args.skip.split(",") if s}
    bad = 0
    for ex in sorted(SCENARIOS):
        if ex in skip:
            continue
        res = replicate(ex, args.seed, Path(args.out) / f"example{ex}")
        bad += not res.matches
        print(f"example {ex}: expected {res.expected}, got {', '.join(res.verdicts)}")
    raise SystemExit(1 if bad else 0)


if __name__ == "__main__":
    main()
