"""Command-line front end.

Exit codes: 0 success, 2 network generation failed, 3 run diverged (without
``--override-tau``), 4 step size outside the admissible range (without
``--override-tau``), 5 trace and network do not match, 6 a verification
property failed. Agent ids on the command line are 1-based.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io
from .analysis import CheckReport, classify, product_checks
from .dynamics import DEFAULT_MAX_STEPS, Mode, build_sync_operator, simulate
from .graph import GraphError, GraphGenerationError, gen_regular_ring, gen_rgg
from .replicate import SCENARIOS, replicate
from .seeding import SEED_ENV, check_seed, default_seed
from .suites import SUITES, run_suites
from .weights import (
    StepSizeError, WeightMode, WeightPolicy, assign_weights, balanced_signs, default_tau, flip_pairs,
    step_size_upper,
)

EXIT_OK = 0
EXIT_GEN = 2
EXIT_DIVERGED = 3
EXIT_TAU = 4
EXIT_DIGEST = 5
EXIT_VERIFY = 6


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def parse_ids(text: str) -> list[int]:
    """``"1,3,5"`` to 0-based ids."""
    try:
        ids = [int(t) - 1 for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated agent ids, got {text!r}") from None
    if any(i < 0 for i in ids):
        raise argparse.ArgumentTypeError("agent ids are 1-based")
    return ids


def parse_pairs(text: str) -> list[tuple[int, int]]:
    """``"1-3,6-8"`` to 0-based pairs."""
    out = []
    for tok in filter(None, (t.strip() for t in text.split(","))):
        try:
            a, b = tok.split("-")
            out.append((int(a) - 1, int(b) - 1))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected pairs like 1-3,6-8, got {text!r}") from None
    return out


def _say(payload: dict) -> None:
    print(json.dumps(io._jsonable(payload), sort_keys=True))


def _policy(args, topo) -> WeightPolicy:
    mode = WeightMode(args.policy)
    if mode is WeightMode.BALANCED_FROM_PARTITION:
        if not args.v1:
            raise CliError(EXIT_GEN, "--policy balanced needs --v1")
        return WeightPolicy.balanced(args.v1, topo.n, magnitude_scale=args.scale, seed=args.seed)
    if mode is WeightMode.SIGN_PATTERN:
        signs = balanced_signs(topo, args.v1) if args.v1 else {p: 1 for p in topo.undirected_pairs()}
        signs = flip_pairs(signs, args.flip or [])
        return WeightPolicy(mode, args.scale, args.seed, signs=signs)
    return WeightPolicy(mode, args.scale, args.seed)


def cmd_gen(args) -> int:
    try:
        if args.kind == "ring":
            topo = gen_regular_ring(args.n, args.k, args.d, args.seed)
        elif args.kind == "rgg":
            topo = gen_rgg(args.n, args.radius, args.d, args.seed)
        else:
            if not args.input:
                raise CliError(EXIT_GEN, "gen file needs --in")
            topo = io.read_network(args.input)
        g = topo if args.kind == "file" and args.keep_weights else assign_weights(topo, _policy(args, topo))
        rng = step_size_upper(g)
    except (GraphError, GraphGenerationError, StepSizeError, io.FileFormatError, ValueError, OSError) as e:
        raise CliError(EXIT_GEN, f"generation failed: {e}") from e
    io.write_network(g, args.out)
    _say({"out": str(args.out), "n": g.n, "d": g.d, "edges": len(g.weights),
          "tau_upper": rng.upper, "default_tau": default_tau(rng), "digest": g.digest()})
    return EXIT_OK


def cmd_sim(args) -> int:
    g = io.read_network(args.net)
    rng = step_size_upper(g)
    tau = args.tau if args.tau is not None else args.tau_factor * rng.upper
    if not rng.contains(tau) and not args.override_tau:
        raise CliError(EXIT_TAU, f"tau={tau!r} is outside (0, {rng.upper!r}); pass --override-tau to run anyway")
    mode = Mode(args.mode)
    trace = simulate(
        g, tau, mode, seed=args.seed, max_steps=args.steps, record_stride=args.stride, check_tau=not args.override_tau,
    )
    extra = {"tau_upper": rng.upper, "override_tau": bool(args.override_tau)}
    io.write_trace(trace, args.out, include_sequence=args.track_products and mode is Mode.ASYNC, extra=extra)
    _say({"out": str(args.out), "stop_reason": trace.stop_reason.value, "steps_run": trace.steps_run, "tau": tau})
    if trace.diverged and not args.override_tau:
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_analyze(args) -> int:
    manifest, trace = io.read_trace(args.trace)
    g = io.read_network(args.net)
    if manifest.get("graph_digest") != g.digest():
        raise CliError(EXIT_DIGEST, "trace was produced from a different network (digest mismatch)")
    verdict = classify(trace)
    checks: list[CheckReport] = []
    if "agent_sequence" in manifest:
        ops = build_sync_operator(g, float(manifest["tau"]), check_tau=False)
        checks = product_checks(trace, ops)
    extra = {"trace": str(args.trace), "network": str(args.net), "graph_digest": g.digest(),
             "stop_reason": trace.stop_reason.value, "steps_run": trace.steps_run}
    io.write_report(args.out, verdict, checks, extra)
    _say({"out": str(args.out), "verdict": verdict.kind.value, "checks": len(checks)})
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_suites(args.suite, args.seed, args.trials)
    doc = {
        "format": io.REPORT_FORMAT,
        "version": io.VERSION,
        "suites": [r.as_dict() for r in results],
        "all_pass": all(r.all_pass for r in results),
    }
    io.write_atomic(args.out, json.dumps(io._jsonable(doc), indent=1) + "\n")
    _say({"out": str(args.out), **{r.suite: f"{r.passed}/{r.trials}" for r in results}})
    return EXIT_OK if doc["all_pass"] else EXIT_VERIFY


def cmd_replicate(args) -> int:
    res = replicate(args.example, args.seed, args.out)
    summary = {**res.summary, "verdicts": res.verdicts, "matches_expected": res.matches,
               "files": [str(p.relative_to(res.out_dir)) for p in res.files]}
    io.write_atomic(Path(args.out) / "summary.json", json.dumps(io._jsonable(summary), indent=1) + "\n")
    _say({"out": str(args.out), "example": args.example, "verdicts": res.verdicts, "expected": res.expected})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    seed_help = f"64-bit unsigned seed (default: ${SEED_ENV} or 0)"
    p = argparse.ArgumentParser(prog="matweight", description="Consensus on matrix-weighted networks.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a network and write it to a file")
    g.add_argument("kind", choices=["ring", "rgg", "file"])
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--k", type=int, default=4, help="ring degree (even)")
    g.add_argument("--d", type=int, default=3)
    g.add_argument("--radius", type=float, default=0.4)
    g.add_argument("--in", dest="input", type=Path, help="network file to re-weight (kind=file)")
    g.add_argument("--keep-weights", action="store_true", help="with kind=file, keep the stored weights")
    g.add_argument("--policy", choices=[m.value for m in WeightMode], default="pd")
    g.add_argument("--v1", type=parse_ids, help="1-based agents of the first part, e.g. 1,3,5")
    g.add_argument("--flip", type=parse_pairs, help="pairs whose sign is flipped, e.g. 1-3,6-8")
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--seed", type=check_seed, default=None, help=seed_help)
    g.add_argument("--out", type=Path, required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("sim", help="simulate one run and write a trace")
    s.add_argument("--net", type=Path, required=True)
    s.add_argument("--mode", choices=[m.value for m in Mode], default="async")
    tau = s.add_mutually_exclusive_group()
    tau.add_argument("--tau", type=float)
    tau.add_argument("--tau-factor", type=float, default=0.5, help="multiple of the upper bound (default 0.5)")
    s.add_argument("--seed", type=check_seed, default=None, help=seed_help)
    s.add_argument("--steps", type=int, default=None,
                   help=f"max steps (default {DEFAULT_MAX_STEPS[Mode.ASYNC]} async, {DEFAULT_MAX_STEPS[Mode.SYNC]} sync)")
    s.add_argument("--stride", type=int, default=None, help="record every this many steps")
    s.add_argument("--track-products", action="store_true", help="store the agent sequence for product checks")
    s.add_argument("--override-tau", action="store_true", help="allow a step size outside the admissible range")
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_sim)

    a = sub.add_parser("analyze", help="classify a trace and write a report")
    a.add_argument("--trace", type=Path, required=True)
    a.add_argument("--net", type=Path, required=True)
    a.add_argument("--out", type=Path, required=True)
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("verify", help="run seeded property suites")
    v.add_argument("suite", choices=[*SUITES, "all"])
    v.add_argument("--seed", type=check_seed, default=None, help=seed_help)
    v.add_argument("--trials", type=int, default=None, help="trials per suite (default per suite)")
    v.add_argument("--out", type=Path, required=True)
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("replicate", help="run one reference example")
    r.add_argument("example", type=int, choices=sorted(SCENARIOS))
    r.add_argument("--seed", type=check_seed, default=None, help=seed_help)
    r.add_argument("--out", type=Path, required=True, help="output directory")
    r.set_defaults(func=cmd_replicate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", 0) is None:
        args.seed = default_seed()
    try:
        return args.func(args)
    except CliError as e:
        print(f"matweight: {e}", file=sys.stderr)
        return e.code
    except (io.FileFormatError, GraphError, StepSizeError, OSError, json.JSONDecodeError) as e:
        print(f"matweight: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
