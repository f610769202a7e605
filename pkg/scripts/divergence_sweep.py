"""Count async and sync divergences as the step size moves past the admissible upper bound."""

import argparse
import json

import numpy as np

from matweight.dynamics import Mode, simulate
from matweight.replicate import build_network
from matweight.weights import step_size_upper


def sweep(factors, seeds, max_steps, threshold=1e6):
    rows = []
    for factor in factors:
        for mode in (Mode.ASYNC, Mode.SYNC):
            hits = 0
            for seed in range(seeds):
                g = build_network(1, seed)
                tr = simulate(g, factor * step_size_upper(g).upper, mode, seed=seed,
                              max_steps=max_steps, check_tau=False)
                hits += tr.diverged or bool(np.nanmax(tr.max_abs_history()) > threshold)
            rows.append({"factor": factor, "mode": mode.value, "diverged": hits, "runs": seeds})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--factors", default="1,1.5,2,3,4,5,6")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--steps", type=int, default=10_000)
    args = ap.parse_args()
    factors = [float(f) for f in args.factors.split(",")]
    for row in sweep(factors, args.seeds, args.steps):
        print(json.dumps(row))


if __name__ == "__main__":
    main()
