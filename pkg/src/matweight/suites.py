"""Seeded property suites run by ``matweight verify``.

Every trial draws from its own sub-stream ``(seed, suite, trial)``, so a
failing trial can be replayed alone from its index.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .analysis import RegimeError, verify_block_spectra, verify_sync_zero
from .dynamics import build_sync_operator
from .graph import (
    BalanceKind, MatrixWeightedGraph, gen_regular_ring, induced_graph, structural_balance, union_graphs,
)
from .linalg import TOL_STEP, sum_product_limit
from .seeding import substream
from .weights import WeightMode, WeightPolicy, assign_weights, balanced_signs, flip_pairs, step_size_upper

TAIL_ITERATIONS = 50
MAX_REJECTIONS = 1000


@dataclass
class SuiteResult:
    suite: str
    seed: int
    trials: int
    passed: int = 0
    rejected: int = 0
    failures: list[dict[str, Any]] = field(default_factory=list)
    notes: dict[str, Any] = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return self.passed == self.trials and not self.failures

    def as_dict(self) -> dict[str, Any]:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "trials": self.trials,
            "passed": self.passed,
            "pass_rate": self.passed / self.trials if self.trials else 1.0,
            "rejected_draws": self.rejected,
            "all_pass": self.all_pass,
            "failures": self.failures,
            "notes": self.notes,
        }


def _network_doc(g: MatrixWeightedGraph) -> dict:
    from .io import network_to_text
    return json.loads(network_to_text(g))


def random_pd_instance(rng: np.random.Generator) -> tuple[MatrixWeightedGraph, float]:
    """Small all-positive ring with a step size drawn inside the admissible range."""
    n = int(rng.integers(3, 8))
    k = 2 * int(rng.integers(1, (n - 1) // 2 + 1))
    d = int(rng.integers(1, 4))
    g = assign_weights(
        gen_regular_ring(n, k, d),
        WeightPolicy(WeightMode.ALL_POSITIVE_DEFINITE, float(rng.uniform(0.2, 2.0)), int(rng.integers(2**32))),
    )
    tau = float(rng.uniform(0.05, 0.95)) * step_size_upper(g).upper
    return g, tau


def nd_instance(rng: np.random.Generator) -> MatrixWeightedGraph:
    """All-negative ring with ``k >= 4``, so the skeleton has triangles and is not bipartite."""
    n = int(rng.integers(5, 11))
    k = 2 * int(rng.integers(2, (n - 1) // 2 + 1))
    d = int(rng.integers(1, 4))
    return assign_weights(
        gen_regular_ring(n, k, d),
        WeightPolicy(WeightMode.ALL_NEGATIVE_DEFINITE, float(rng.uniform(0.2, 2.0)), int(rng.integers(2**32))),
    )


def unbalanced_instance(rng: np.random.Generator) -> MatrixWeightedGraph:
    """Ring with mixed signs that admits no two-colouring.

    Starts from a balanced sign pattern for a random split and flips one
    randomly chosen pair; every edge of a ring with ``k >= 4`` lies on a
    triangle, so one flip always breaks the balance.
    """
    n = int(rng.integers(5, 11))
    k = 2 * int(rng.integers(2, (n - 1) // 2 + 1))
    d = int(rng.integers(1, 4))
    ring = gen_regular_ring(n, k, d)
    v1 = [a for a in range(n) if rng.random() < 0.5] or [0]
    pairs = ring.undirected_pairs()
    flip = pairs[int(rng.integers(len(pairs)))]
    signs = flip_pairs(balanced_signs(ring, v1), [flip])
    g = assign_weights(
        ring,
        WeightPolicy(WeightMode.SIGN_PATTERN, float(rng.uniform(0.2, 2.0)), int(rng.integers(2**32)), signs=signs),
    )
    if structural_balance(g).kind is not BalanceKind.UNBALANCED:
        raise RegimeError("flipped ring is still balanced")
    return g


def sum_product_suite(seed: int, trials: int = 100) -> SuiteResult:
    """``(A + B)**t`` converges whenever ``||A|| <= 1``, ``A**t`` converges and ``B**t -> 0``.

    ``A`` and ``B`` are the diagonal-block and off-diagonal-block parts of a
    synchronous operator on a random all-positive ring. Draws that miss a
    hypothesis are rejected and redrawn. After convergence the iteration is
    continued for a fixed tail to confirm the step deltas stay below the
    tolerance.
    """
    res = SuiteResult("sum-product", seed, trials)
    statuses: dict[str, int] = {}
    for trial in range(trials):
        rng = substream(seed, "sum-product", trial)
        for _ in range(MAX_REJECTIONS):
            g, tau = random_pd_instance(rng)
            ops = build_sync_operator(g, tau)
            a, b = ops.script_P(), ops.script_Q()
            rep = sum_product_limit(a, b)
            if rep.hypotheses_hold:
                break
            res.rejected += 1
        else:
            res.failures.append({"trial": trial, "reason": "no hypothesis-satisfying draw"})
            continue
        status = rep.limit.status
        statuses[status.value] = statuses.get(status.value, 0) + 1
        ok = status.converged
        tail_max = None
        if ok:
            f = a + b
            cur = rep.limit.limit
            tail = []
            for _ in range(TAIL_ITERATIONS):
                nxt = cur @ f
                tail.append(float(np.abs(nxt - cur).sum(axis=1).max()))
                cur = nxt
            tail_max = max(tail)
            ok = tail_max < TOL_STEP
        if ok:
            res.passed += 1
        else:
            res.failures.append({
                "trial": trial, "status": status.value, "tail_max_delta": tail_max,
                "tau": tau, "network": _network_doc(g),
            })
    res.notes["limit_status_counts"] = statuses
    res.notes["tail_iterations"] = TAIL_ITERATIONS
    return res


def random_stochastic(rng: np.random.Generator, n: int, density: float) -> np.ndarray:
    """Row-stochastic with a positive diagonal and a random off-diagonal pattern."""
    mask = rng.random((n, n)) < density
    np.fill_diagonal(mask, True)
    m = np.where(mask, rng.uniform(0.05, 1.0, size=(n, n)), 0.0)
    return m / m.sum(axis=1, keepdims=True)


def product_graph_suite(seed: int, trials: int = 100) -> SuiteResult:
    """The graph induced by ``A B`` contains the union of those of ``A`` and ``B``."""
    res = SuiteResult("product-graph", seed, trials)
    for trial in range(trials):
        rng = substream(seed, "product-graph", trial)
        n = int(rng.integers(2, 9))
        density = float(rng.uniform(0.05, 0.6))
        a = random_stochastic(rng, n, density)
        b = random_stochastic(rng, n, density)
        union = union_graphs([induced_graph(a), induced_graph(b)])
        if induced_graph(a @ b).issuperset(union):
            res.passed += 1
        else:
            res.failures.append({"trial": trial, "a": a.tolist(), "b": b.tolist()})
    return res


def _regime_suite(
    name: str, seed: int, trials: int, check: Callable[[MatrixWeightedGraph, float], Any]
) -> SuiteResult:
    res = SuiteResult(name, seed, 2 * trials)
    for regime, make in (("nd", nd_instance), ("unbalanced", unbalanced_instance)):
        for trial in range(trials):
            rng = substream(seed, name, regime, trial)
            g = make(rng)
            tau = float(rng.uniform(0.05, 0.95)) * step_size_upper(g).upper
            rep = check(g, tau)
            if rep.passed:
                res.passed += 1
            else:
                res.failures.append({
                    "trial": trial, "regime": regime, "tau": tau, "report": rep.as_dict(),
                    "network": _network_doc(g),
                })
    return res


def spectra_suite(seed: int, trials: int = 20) -> SuiteResult:
    """Diagonal blocks have spectral radius below one and the off-diagonal row bound holds."""
    return _regime_suite("spectra", seed, trials, verify_block_spectra)


def sync_zero_suite(seed: int, trials: int = 20) -> SuiteResult:
    """Synchronous powers vanish on all-negative and unbalanced networks."""
    return _regime_suite("sync-zero", seed, trials, verify_sync_zero)


SUITES: dict[str, tuple[Callable[[int, int], SuiteResult], int]] = {
    "sum-product": (sum_product_suite, 100),
    "product-graph": (product_graph_suite, 100),
    "spectra": (spectra_suite, 20),
    "sync-zero": (sync_zero_suite, 20),
}


def run_suites(name: str, seed: int, trials: int | None = None) -> list[SuiteResult]:
    names = list(SUITES) if name == "all" else [name]
    out = []
    for nm in names:
        fn, default = SUITES[nm]
        out.append(fn(seed, default if trials is None else trials))
    return out

