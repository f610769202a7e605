"""Run classification, partition recovery and numeric checks on operator products."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .dynamics import (
    Mode, RunTrace, StateEnsemble, UpdateOperators, assemble_blocks, async_blocks, build_sync_operator,
)
from .graph import (
    BalanceKind, MatrixWeightedGraph, Partition, has_spanning_tree, induced_graph, same_partition,
    skeleton_is_bipartite, structural_balance,
)
from .linalg import LimitStatus, inf_norm, power_limit, spectrum

TOL_CONSENSUS = 1e-6
TOL_NONZERO = 1e-3


class VerdictKind(enum.Enum):
    GLOBAL = "Global"
    BIPARTITE = "Bipartite"
    ZERO = "Zero"
    DIVERGED = "Diverged"
    UNDECIDED = "Undecided"


@dataclass(frozen=True, eq=False)
class ConsensusVerdict:
    kind: VerdictKind
    consensus_vector: np.ndarray | None = None
    partition: Partition | None = None
    residual: float = math.inf
    steps_to_converge: int | None = None

    def __post_init__(self):
        if self.kind is VerdictKind.GLOBAL and self.consensus_vector is None:
            raise ValueError("Global verdict needs a consensus vector")
        if self.kind is VerdictKind.BIPARTITE and (self.consensus_vector is None or self.partition is None):
            raise ValueError("Bipartite verdict needs a vector and a partition")
        if self.kind is VerdictKind.ZERO and self.partition is not None:
            raise ValueError("Zero verdict carries no partition")


def classify_state(
    state: StateEnsemble,
    *,
    converged: bool = True,
    diverged: bool = False,
    steps: int | None = None,
    tol_consensus: float = TOL_CONSENSUS,
    tol_nonzero: float = TOL_NONZERO,
) -> ConsensusVerdict:
    if diverged or not state.finite:
        return ConsensusVerdict(VerdictKind.DIVERGED)
    if not converged:
        return ConsensusVerdict(VerdictKind.UNDECIDED, residual=math.nan)
    X = state.as_matrix()
    max_norm = float(np.abs(X).max())
    if max_norm < tol_consensus:
        return ConsensusVerdict(VerdictKind.ZERO, residual=max_norm, steps_to_converge=steps)

    spread = float(np.ptp(X, axis=0).max())
    if spread < tol_consensus:
        c = X.mean(axis=0)
        if np.abs(c).max() > tol_nonzero:
            return ConsensusVerdict(VerdictKind.GLOBAL, c, residual=spread, steps_to_converge=steps)
        return ConsensusVerdict(VerdictKind.ZERO, residual=max_norm, steps_to_converge=steps)

    ref = X[int(np.argmax(np.linalg.norm(X, axis=1)))]
    side = np.where(X @ ref >= 0.0, 1.0, -1.0)
    Y = side[:, None] * X
    residual = float(np.ptp(Y, axis=0).max())
    if residual < tol_consensus:
        c = Y.mean(axis=0)
        if np.abs(c).max() > tol_nonzero:
            v1 = frozenset(np.flatnonzero(side > 0).tolist())
            v2 = frozenset(np.flatnonzero(side < 0).tolist())
            return ConsensusVerdict(VerdictKind.BIPARTITE, c, (v1, v2), residual, steps)
        return ConsensusVerdict(VerdictKind.ZERO, residual=max_norm, steps_to_converge=steps)
    return ConsensusVerdict(VerdictKind.UNDECIDED, residual=min(spread, residual))


def classify(
    trace: RunTrace, tol_consensus: float = TOL_CONSENSUS, tol_nonzero: float = TOL_NONZERO
) -> ConsensusVerdict:
    return classify_state(
        trace.final,
        converged=trace.converged,
        diverged=trace.diverged,
        steps=trace.steps_run if trace.converged else None,
        tol_consensus=tol_consensus,
        tol_nonzero=tol_nonzero,
    )


def verify_partition(verdict: ConsensusVerdict, planted: Partition) -> bool:
    if verdict.kind is not VerdictKind.BIPARTITE:
        raise ValueError(f"verdict is {verdict.kind.value}, not Bipartite")
    return same_partition(verdict.partition, (frozenset(planted[0]), frozenset(planted[1])))


def antisymmetry_residual(state: StateEnsemble, partition: Partition) -> float:
    """Largest ``||X_i + X_j||_inf`` over agents on opposite sides."""
    X = state.as_matrix()
    a = X[sorted(partition[0])]
    b = X[sorted(partition[1])]
    if not len(a) or not len(b):
        return 0.0
    return float(np.abs(a[:, None, :] + b[None, :, :]).max())


def epoch_coverage(sequence, n: int) -> np.ndarray:
    """For each complete length-``n`` epoch, whether every agent was selected."""
    seq = np.asarray(sequence, dtype=np.int64)
    epochs = seq[: (seq.size // n) * n].reshape(-1, n)
    return np.array([np.unique(e).size == n for e in epochs], dtype=bool)


def full_coverage_probability(n: int) -> float:
    return math.factorial(n) / n**n


@dataclass(eq=False)
class ProductTracker:
    """Running products of the dimension-major factors along one sample path.

    Products are left-accumulated: after ``t`` steps ``F_prod`` is
    ``F(t-1) ... F(1) F(0)``.
    """

    n: int
    d: int
    P_prod: np.ndarray
    Q_prod: np.ndarray
    F_prod: np.ndarray
    P_norms: np.ndarray
    Q_norms: np.ndarray
    F_norms: np.ndarray
    F_deltas: np.ndarray
    spanning_tree_time: int | None
    epoch_coverage: np.ndarray
    steps: int

    def p_block(self, i: int, j: int | None = None) -> np.ndarray:
        j = i if j is None else j
        n = self.n
        return self.P_prod[i * n:(i + 1) * n, j * n:(j + 1) * n]


def _blocks_have_spanning_tree(P_prod: np.ndarray, n: int, d: int) -> bool:
    return all(
        has_spanning_tree(induced_graph(P_prod[i * n:(i + 1) * n, i * n:(i + 1) * n])) is not None
        for i in range(d)
    )


def track_products(trace: RunTrace, ops: UpdateOperators) -> ProductTracker:
    if trace.mode is not Mode.ASYNC:
        raise ValueError("product tracking needs an asynchronous trace with its agent sequence")
    n, d = ops.n, ops.d
    nd = n * d
    factors = []
    for l in range(n):
        pb, qb = async_blocks(ops, l)
        rows = np.arange(d) * n + l
        zeros = np.zeros_like(pb)
        factors.append((
            rows,
            _rows_of(pb, np.zeros_like(qb), rows),
            _rows_of(zeros, qb, rows),
            _rows_of(pb, qb, rows),
        ))
    P = np.eye(nd)
    Q = np.eye(nd)
    F = np.eye(nd)
    steps = len(trace.agent_sequence)
    p_norms = np.empty(steps)
    q_norms = np.empty(steps)
    f_norms = np.empty(steps)
    f_deltas = np.empty(steps)
    st_time = 0 if _blocks_have_spanning_tree(P, n, d) else None
    for t, l in enumerate(trace.agent_sequence):
        rows, p_rows, q_rows, f_rows = factors[l]
        P[rows] = p_rows @ P
        Q = _rows_only(q_rows @ Q, rows, nd)
        new_f = f_rows @ F
        f_deltas[t] = float(np.abs(new_f - F[rows]).sum(axis=1).max())
        F[rows] = new_f
        p_norms[t] = inf_norm(P)
        q_norms[t] = inf_norm(Q)
        f_norms[t] = inf_norm(F)
        if st_time is None and _blocks_have_spanning_tree(P, n, d):
            st_time = t + 1
    return ProductTracker(
        n, d, P, Q, F, p_norms, q_norms, f_norms, f_deltas, st_time,
        epoch_coverage(trace.agent_sequence, n), steps,
    )


def _rows_of(p_blocks, q_blocks, rows):
    return assemble_blocks(p_blocks, q_blocks)[rows]


def _rows_only(values: np.ndarray, rows: np.ndarray, nd: int) -> np.ndarray:
    out = np.zeros((nd, nd))
    out[rows] = values
    return out


@dataclass(frozen=True)
class CheckReport:
    check: str
    passed: bool
    measured: dict[str, Any] = field(default_factory=dict)
    tolerance: dict[str, float] = field(default_factory=dict)
    applicable: bool = True
    note: str = ""

    def as_dict(self) -> dict[str, Any]:
        return {
            "check": self.check,
            "pass": bool(self.passed),
            "applicable": bool(self.applicable),
            "measured": self.measured,
            "tolerance": self.tolerance,
            "note": self.note,
        }


def verify_p_rank_one(tracker: ProductTracker, tol_rank1: float = 1e-8, tol_rowsum: float = 1e-12) -> CheckReport:
    """Each diagonal block of the P-product has identical rows summing to one."""
    n, d = tracker.n, tracker.d
    spread = max(float(np.ptp(tracker.p_block(i), axis=0).max()) for i in range(d))
    rowsum = max(float(np.abs(tracker.p_block(i).sum(axis=1) - 1.0).max()) for i in range(d))
    off = max(
        (float(np.abs(tracker.p_block(i, j)).max()) for i in range(d) for j in range(d) if i != j),
        default=0.0,
    )
    return CheckReport(
        "p_product_rank_one",
        spread <= tol_rank1 and rowsum <= tol_rowsum and off == 0.0,
        {"row_spread": spread, "row_sum_error": rowsum, "off_diagonal_max": off, "blocks": d},
        {"rank1": tol_rank1, "row_sum": tol_rowsum},
    )


def verify_q_vanishes(tracker: ProductTracker, tol: float = 1e-8) -> CheckReport:
    q = float(tracker.Q_norms[-1]) if tracker.steps else 1.0
    return CheckReport("q_product_zero", q < tol, {"q_product_inf_norm": q}, {"zero": tol})


def verify_f_spectrum(
    source, d: int, tol_eig: float = 1e-6, tol_modulus: float = 1e-9, check: str = "f_product_spectrum"
) -> CheckReport:
    """Exactly ``d`` eigenvalues at one and none outside the unit disc.

    ``source`` is a :class:`ProductTracker` (its final F-product) or a matrix
    such as a synchronous operator.
    """
    if isinstance(source, ProductTracker):
        if source.spanning_tree_time is None:
            return CheckReport(
                check, False, {}, {"near_one": tol_eig, "modulus": tol_modulus}, applicable=False,
                note="the P-product never acquired a spanning tree on this sample path",
            )
        m = source.F_prod
    else:
        m = source
    sp = spectrum(m, tol_eig)
    passed = sp.count_near_one == d and sp.max_modulus <= 1.0 + tol_modulus
    return CheckReport(
        check,
        passed,
        {
            "count_near_one": sp.count_near_one,
            "expected": d,
            "max_modulus": sp.max_modulus,
            "max_modulus_excluding_near_one": sp.max_modulus_excluding_near_one,
        },
        {"near_one": tol_eig, "modulus": tol_modulus},
    )


class RegimeError(ValueError):
    pass


def zero_regime(g: MatrixWeightedGraph) -> BalanceKind | None:
    """Balance kind if the network is one where states should vanish, else ``None``.

    All-negative networks on a bipartite skeleton are excluded: flipping one
    side of the bipartition turns them all-positive.
    """
    kind = structural_balance(g).kind
    if kind is BalanceKind.UNBALANCED:
        return kind
    if kind is BalanceKind.ALL_NEGATIVE and not skeleton_is_bipartite(g):
        return kind
    return None


def q_gershgorin_bound(ops: UpdateOperators) -> np.ndarray:
    """Per-row bound ``2 tau sum_{j != i} sum_{m in N_k} |W_km^(i,j)|`` for the Q-part.

    Returned dimension-major (entry ``i*n + k`` is dimension ``i`` of agent ``k``).
    """
    g, n, d = ops.graph, ops.n, ops.d
    totals = np.zeros((n, d))
    for (k, m), w in g.weights.items():
        a = np.abs(w)
        totals[k] += a.sum(axis=1) - np.diag(a)
    return (2.0 * ops.tau * totals).T.ravel()


def _regime_name(g: MatrixWeightedGraph) -> str:
    kind = structural_balance(g).kind
    if kind is BalanceKind.ALL_NEGATIVE and skeleton_is_bipartite(g):
        return "AllNegativeBipartite"
    return kind.value


def verify_block_spectra(g: MatrixWeightedGraph, tau: float, tol: float = 1e-9) -> CheckReport:
    kind = zero_regime(g)
    if kind is None:
        raise RegimeError(
            f"spectral checks need an unbalanced or non-bipartite all-negative network, got {_regime_name(g)}"
        )
    ops = build_sync_operator(g, tau)
    radii, worst_imag, min_real = [], 0.0, math.inf
    for block in ops.P_blocks:
        eig = np.linalg.eigvals(block)
        radii.append(float(np.abs(eig).max()))
        worst_imag = max(worst_imag, float(np.abs(eig.imag).max()))
        min_real = min(min_real, float(eig.real.min()))
    rho = max(radii)
    ok = rho < 1.0 - tol
    if kind is BalanceKind.ALL_NEGATIVE:
        ok = ok and worst_imag <= tol and min_real > 0.0
    script_q = ops.script_Q()
    bound = q_gershgorin_bound(ops)
    actual = np.abs(script_q).sum(axis=1)
    q_rho = float(np.abs(np.linalg.eigvals(script_q)).max())
    bound_ok = bool(np.all(bound < 1.0))
    ok = ok and bound_ok and q_rho < 1.0
    return CheckReport(
        "nd_block_spectra" if kind is BalanceKind.ALL_NEGATIVE else "unbalanced_block_spectra",
        bool(ok),
        {
            "regime": kind.value,
            "p_block_spectral_radii": radii,
            "max_imag": worst_imag,
            "min_real": min_real,
            "q_bound_max": float(bound.max()),
            "q_radius_max": float(actual.max()),
            "q_bound_holds": bound_ok,
            "q_spectral_radius": q_rho,
        },
        {"radius": tol, "imag": tol},
    )


def verify_sync_zero(g: MatrixWeightedGraph, tau: float, *, require_regime: bool = True) -> CheckReport:
    kind = zero_regime(g)
    if require_regime and kind is None:
        raise RegimeError(
            f"zero-consensus check needs an unbalanced or non-bipartite all-negative network, got {_regime_name(g)}"
        )
    res = power_limit(build_sync_operator(g, tau).script_F())
    return CheckReport(
        "sync_zero",
        res.status is LimitStatus.CONVERGED_TO_ZERO,
        {
            "regime": _regime_name(g),
            "status": res.status.value,
            "iterations": res.iterations_used,
            "limit_inf_norm": inf_norm(res.limit) if res.limit is not None else None,
        },
        {"step": 1e-12, "zero": 1e-8},
    )


def product_checks(trace: RunTrace, ops: UpdateOperators) -> list[CheckReport]:
    """Product checks for a tracked asynchronous run.

    The rank-one and spectrum checks describe all-positive networks; on other
    networks they are reported as not applicable.
    """
    tracker = track_products(trace, ops)
    reports = [verify_p_rank_one(tracker), verify_q_vanishes(tracker), verify_f_spectrum(tracker, ops.d)]
    kind = structural_balance(ops.graph).kind
    if kind is BalanceKind.ALL_POSITIVE and trace.converged:
        return reports
    why = "network is not all-positive" if kind is not BalanceKind.ALL_POSITIVE else "run did not converge"
    return [replace(r, applicable=False, note=why) for r in reports]
