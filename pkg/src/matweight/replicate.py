"""Reference scenarios: topology, weight policy and run settings for each example id."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .analysis import CheckReport, antisymmetry_residual, classify, product_checks, verify_partition
from .dynamics import Mode, build_sync_operator, initial_state, simulate
from .graph import (
    FIVE_AGENT_EDGES, MatrixWeightedGraph, gen_directed, gen_regular_ring, gen_rgg, has_spanning_tree,
    make_partition,
)
from .io import verdict_to_dict, write_dimension_csvs, write_network, write_report, write_trace
from .weights import (
    WeightMode, WeightPolicy, assign_weights, balanced_signs, flip_pairs, step_size_upper,
)

ODD_AGENTS = (0, 2, 4, 6, 8)
UNBALANCING_FLIPS = ((0, 2), (5, 7))
# Asynchronous runs at twice the upper bound rarely blow up; six times does reliably.
DIVERGENCE_TAU_FACTOR = 6.0
TRACKING_LIMIT = 60  # largest n*d for which product tracking is attempted


@dataclass(frozen=True)
class Scenario:
    example: int
    title: str
    expected: str
    mode: Mode = Mode.ASYNC
    tau_factor: float = 0.5
    max_steps: int | None = None
    paths: int = 1


SCENARIOS = {
    1: Scenario(1, "ten-agent 4-regular ring, all positive definite", "Global"),
    2: Scenario(2, "ten-agent 4-regular ring, balanced with odd agents on one side", "Bipartite"),
    3: Scenario(3, "ten-agent 4-regular ring, all negative definite", "Zero"),
    4: Scenario(4, "random geometric graph, 200 agents, radius 0.4", "Global", max_steps=2_000_000),
    5: Scenario(5, "ten-agent ring, balanced pattern with two pairs flipped", "Zero"),
    6: Scenario(6, "ten-agent ring, two selection sequences from one initial state", "Global", paths=2),
    7: Scenario(7, "ten-agent ring, step size above the admissible range", "Diverged",
                tau_factor=DIVERGENCE_TAU_FACTOR, max_steps=10_000),
    8: Scenario(8, "five agents, directed, spanning tree but not strongly connected", "Global"),
}


def build_network(example: int, seed: int) -> MatrixWeightedGraph:
    if example not in SCENARIOS:
        raise ValueError(f"example id must be one of {sorted(SCENARIOS)}, got {example}")
    if example == 4:
        return assign_weights(gen_rgg(200, 0.4, 3, seed), WeightPolicy(seed=seed))
    if example == 8:
        return assign_weights(gen_directed(5, 2, FIVE_AGENT_EDGES), WeightPolicy(seed=seed))
    ring = gen_regular_ring(10, 4, 3, seed)
    if example == 2:
        return assign_weights(ring, WeightPolicy.balanced(ODD_AGENTS, 10, seed=seed))
    if example == 3:
        return assign_weights(ring, WeightPolicy(WeightMode.ALL_NEGATIVE_DEFINITE, seed=seed))
    if example == 5:
        signs = flip_pairs(balanced_signs(ring, ODD_AGENTS), UNBALANCING_FLIPS)
        return assign_weights(ring, WeightPolicy(WeightMode.SIGN_PATTERN, seed=seed, signs=signs))
    return assign_weights(ring, WeightPolicy(seed=seed))


@dataclass
class ReplicationResult:
    example: int
    expected: str
    verdicts: list[str]
    out_dir: Path
    files: list[Path] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)

    @property
    def matches(self) -> bool:
        return all(v == self.expected for v in self.verdicts)


def replicate(example: int, seed: int, out_dir) -> ReplicationResult:
    """Build, run and analyse one example; write network, traces, reports and per-dimension CSVs."""
    sc = SCENARIOS.get(example)
    if sc is None:
        raise ValueError(f"example id must be one of {sorted(SCENARIOS)}, got {example}")
    out_dir = Path(out_dir)
    g = build_network(example, seed)
    rng = step_size_upper(g)
    tau = sc.tau_factor * rng.upper
    files = [out_dir / "network.json"]
    write_network(g, files[0])

    x0 = initial_state(g.n, g.d, seed) if sc.paths > 1 else None
    verdicts, paths = [], []
    for p in range(sc.paths):
        trace = simulate(
            g, tau, sc.mode, seed=seed + p, max_steps=sc.max_steps, initial=x0, check_tau=tau < rng.upper,
        )
        verdict = classify(trace)
        verdicts.append(verdict.kind.value)
        tag = f"path{p + 1}_" if sc.paths > 1 else ""
        track = trace.mode is Mode.ASYNC and g.n * g.d <= TRACKING_LIMIT and not trace.diverged
        checks: list[CheckReport] = product_checks(trace, build_sync_operator(g, tau, check_tau=False)) if track else []
        extra = {
            "example": example,
            "title": sc.title,
            "expected": sc.expected,
            "tau": tau,
            "tau_upper": rng.upper,
            "tau_factor": sc.tau_factor,
            "graph_digest": g.digest(),
            "steps_run": trace.steps_run,
            "stop_reason": trace.stop_reason.value,
            "peak_state_inf_norm": float(np.nanmax(np.abs(trace.samples))) if trace.samples.size else None,
        }
        if example == 2 and verdict.kind.value == "Bipartite":
            planted = make_partition(ODD_AGENTS, g.n)
            extra["partition_matches_planted"] = verify_partition(verdict, planted)
            extra["antisymmetry_residual"] = antisymmetry_residual(trace.final, planted)
        if example == 8:
            extra["spanning_tree_root"] = has_spanning_tree(g) + 1
        trace_path = out_dir / f"{tag}trace.csv"
        report_path = out_dir / f"{tag}report.json"
        write_trace(trace, trace_path, include_sequence=track)
        write_report(report_path, verdict, checks, extra)
        files += [trace_path, report_path]
        files += write_dimension_csvs(trace, out_dir, prefix=tag)
        paths.append({"seed": seed + p, **verdict_to_dict(verdict), "steps_run": trace.steps_run})
    return ReplicationResult(
        example, sc.expected, verdicts, out_dir, files,
        {"example": example, "title": sc.title, "expected": sc.expected, "tau": tau, "paths": paths},
    )
