"""Update operators, the bipartition gauge transform and the simulation engines.

Two orderings of the stacked state are used throughout:

* agent-major: ``x[i*d + k]`` is dimension ``k`` of agent ``i`` (the order of
  the full operator ``P``);
* dimension-major: ``x[k*n + i]``, the order in which the operator splits
  into diagonal blocks ``P_k`` (n x n) and off-diagonal blocks ``Q_kj``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any

import numpy as np

from .graph import GraphError, MatrixWeightedGraph, Partition
from .linalg import OVERFLOW_BOUND, matrix_sign
from .seeding import check_seed, substream
from .weights import step_size_upper


class TauRangeError(ValueError):
    pass


class SignError(ValueError):
    pass


def agent_to_dim_permutation(n: int, d: int) -> np.ndarray:
    """``perm[i*d + k] = k*n + i``: where each agent-major index lands dimension-major."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    i, k = np.divmod(np.arange(n * d), d)
    return k * n + i


def permutation_matrix(perm: np.ndarray) -> np.ndarray:
    """``Pi`` with ``(Pi @ x)[perm[a]] = x[a]``."""
    pi = np.zeros((len(perm), len(perm)))
    pi[perm, np.arange(len(perm))] = 1.0
    return pi


def to_dimension_major(x: np.ndarray, n: int, d: int) -> np.ndarray:
    return np.asarray(x).reshape(n, d).T.ravel()


def to_agent_major(x: np.ndarray, n: int, d: int) -> np.ndarray:
    return np.asarray(x).reshape(d, n).T.ravel()


def assemble_blocks(p_blocks: np.ndarray, q_blocks: np.ndarray) -> np.ndarray:
    """Dimension-major ``(P-part + Q-part)`` from ``(d, n, n)`` and ``(d, d, n, n)`` blocks."""
    d, n, _ = p_blocks.shape
    out = np.zeros((n * d, n * d))
    for i in range(d):
        for j in range(d):
            out[i * n:(i + 1) * n, j * n:(j + 1) * n] = p_blocks[i] if i == j else q_blocks[i, j]
    return out


@dataclass(frozen=True, eq=False)
class StateEnsemble:
    n: int
    d: int
    x: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).ravel()
        if x.size != self.n * self.d:
            raise ValueError(f"state has {x.size} entries, expected n*d = {self.n * self.d}")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x)))

    def agent(self, i: int) -> np.ndarray:
        return self.x[i * self.d:(i + 1) * self.d]

    def as_matrix(self) -> np.ndarray:
        """Rows are agents, columns are dimensions."""
        return self.x.reshape(self.n, self.d)

    def dimension_major(self) -> np.ndarray:
        return to_dimension_major(self.x, self.n, self.d)

    def inf_norm(self) -> float:
        return float(np.abs(self.x).max())


def _edge_sign(e, w) -> int:
    s = matrix_sign(w)
    if not s.definite:
        raise SignError(f"weight on edge {e} is {s.name.lower()}; operators need definite weights")
    return int(s)


@dataclass(frozen=True, eq=False)
class UpdateOperators:
    graph: MatrixWeightedGraph
    tau: float
    P_full: np.ndarray
    P_blocks: np.ndarray  # (d, n, n)
    Q_blocks: np.ndarray  # (d, d, n, n); cells [i, i] are zero

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def d(self) -> int:
        return self.graph.d

    def script_P(self) -> np.ndarray:
        return assemble_blocks(self.P_blocks, np.zeros_like(self.Q_blocks))

    def script_Q(self) -> np.ndarray:
        return assemble_blocks(np.zeros_like(self.P_blocks), self.Q_blocks)

    def script_F(self) -> np.ndarray:
        return assemble_blocks(self.P_blocks, self.Q_blocks)

    def agent_rows(self, l: int) -> slice:
        return slice(l * self.d, (l + 1) * self.d)


def build_sync_operator(g: MatrixWeightedGraph, tau: float, *, check_tau: bool = True) -> UpdateOperators:
    """Assemble ``P`` (agent-major) and, independently, the blocks ``P_k`` and ``Q_kj``.

    Pass ``check_tau=False`` to build operators outside the admissible range
    (divergence experiments).
    """
    n, d = g.n, g.d
    signs = {e: _edge_sign(e, w) for e, w in g.weights.items()}
    if check_tau and g.weights:
        r = step_size_upper(g)
        if not r.contains(tau):
            raise TauRangeError(f"tau = {tau!r} outside (0, {r.upper!r})")
    elif check_tau and not tau > 0:
        raise TauRangeError(f"tau must be positive, got {tau!r}")

    P = np.eye(n * d)
    p_blocks = np.stack([np.eye(n)] * d)
    q_blocks = np.zeros((d, d, n, n))
    for k in range(n):
        rk = slice(k * d, (k + 1) * d)
        for l in g.in_neighbors(k):
            w = g.weights[(k, l)]
            s = signs[(k, l)]
            rl = slice(l * d, (l + 1) * d)
            P[rk, rk] -= (tau * s) * w
            P[rk, rl] += tau * w
            for i in range(d):
                p_blocks[i, k, k] -= (tau * s) * w[i, i]
                p_blocks[i, k, l] += tau * w[i, i]
                for j in range(d):
                    if i != j:
                        q_blocks[i, j, k, k] -= (tau * s) * w[i, j]
                        q_blocks[i, j, k, l] += tau * w[i, j]
    for a in (P, p_blocks, q_blocks):
        a.setflags(write=False)
    return UpdateOperators(g, float(tau), P, p_blocks, q_blocks)


def _check_agent(n: int, l: int) -> None:
    if not 0 <= l < n:
        raise GraphError(f"invalid agent id {l}")


def build_async_operator(ops: UpdateOperators, l: int) -> np.ndarray:
    """``U = E_l E_l^T P - E_l E_l^T + I``: agent ``l``'s rows from ``P``, identity elsewhere."""
    _check_agent(ops.n, l)
    u = np.eye(ops.n * ops.d)
    rows = ops.agent_rows(l)
    u[rows] = ops.P_full[rows]
    return u


def async_blocks(ops: UpdateOperators, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Blocks of the dimension-major operator when only agent ``l`` updates."""
    _check_agent(ops.n, l)
    p = np.stack([np.eye(ops.n)] * ops.d)
    q = np.zeros_like(ops.Q_blocks)
    p[:, l, :] = ops.P_blocks[:, l, :]
    q[:, :, l, :] = ops.Q_blocks[:, :, l, :]
    return p, q


class LocalStepper:
    """Per-agent update kernel: recomputes one agent's ``d`` entries in place.

    ``new_l = (I - tau sum_j sgn(W_lj) W_lj) x_l + tau sum_j W_lj x_j``
    """

    def __init__(self, ops: UpdateOperators):
        n, d = ops.n, ops.d
        self.n, self.d = n, d
        self.self_blocks = []
        self.nbr_index = []
        self.nbr_blocks = []
        for l in range(n):
            rows = ops.agent_rows(l)
            nb = np.array(ops.graph.in_neighbors(l), dtype=np.intp)
            self.self_blocks.append(np.ascontiguousarray(ops.P_full[rows, rows]))
            self.nbr_index.append(nb)
            if nb.size:
                self.nbr_blocks.append(np.hstack([ops.P_full[rows, j * d:(j + 1) * d] for j in nb]))
            else:
                self.nbr_blocks.append(None)

    def step(self, x2: np.ndarray, l: int) -> float:
        """Update agent ``l`` of the ``(n, d)`` view ``x2``; return the inf-norm of the change."""
        new = self.self_blocks[l] @ x2[l]
        nb = self.nbr_index[l]
        if nb.size:
            new = new + self.nbr_blocks[l] @ x2[nb].ravel()
        delta = float(np.abs(new - x2[l]).max())
        x2[l] = new
        return delta


def _as_state(state, n: int, d: int) -> StateEnsemble:
    if isinstance(state, StateEnsemble):
        if (state.n, state.d) != (n, d):
            raise ValueError(f"state is {state.n}x{state.d}, operator is {n}x{d}")
        return state
    return StateEnsemble(n, d, state)


def step_sync(ops: UpdateOperators, state) -> StateEnsemble:
    s = _as_state(state, ops.n, ops.d)
    return StateEnsemble(ops.n, ops.d, ops.P_full @ s.x)


def step_async_local(g: MatrixWeightedGraph, tau: float, state, l: int, *, stepper: LocalStepper | None = None) -> StateEnsemble:
    _check_agent(g.n, l)
    s = _as_state(state, g.n, g.d)
    if stepper is None:
        stepper = LocalStepper(build_sync_operator(g, tau, check_tau=False))
    x2 = s.as_matrix().copy()
    stepper.step(x2, l)
    return StateEnsemble(g.n, g.d, x2.ravel())


class Mode(enum.Enum):
    SYNC = "sync"
    ASYNC = "async"


class StopReason(enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    MAX_STEPS = "max_steps"


@dataclass(frozen=True)
class StopRule:
    """Converged once every step-delta in the last ``window`` steps is below ``tol``.

    ``window=None`` means ``n`` for asynchronous runs and 1 for synchronous runs.
    Asynchronous runs additionally need every agent to have made a small
    update since the last large one; an agent with no in-neighbours always
    moves by zero and would otherwise fill the window by itself.
    """

    tol: float = 1e-10
    window: int | None = None
    overflow_bound: float = OVERFLOW_BOUND

    def window_for(self, mode: Mode, n: int) -> int:
        if self.window is not None:
            return self.window
        return n if mode is Mode.ASYNC else 1


DEFAULT_MAX_STEPS = {Mode.ASYNC: 200_000, Mode.SYNC: 10_000}
_DRAW_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class RunTrace:
    config: dict[str, Any]
    agent_sequence: np.ndarray  # 0-based, one entry per async step; empty for sync
    sample_steps: np.ndarray
    sample_agents: np.ndarray  # -1 for step 0 and for sync samples
    samples: np.ndarray  # (num_samples, n*d), agent-major
    step_deltas: np.ndarray
    steps_run: int
    stop_reason: StopReason
    n: int
    d: int

    @property
    def mode(self) -> Mode:
        return Mode(self.config["mode"])

    @property
    def converged(self) -> bool:
        return self.stop_reason is StopReason.CONVERGED

    @property
    def diverged(self) -> bool:
        return self.stop_reason is StopReason.DIVERGED

    @property
    def initial(self) -> StateEnsemble:
        return StateEnsemble(self.n, self.d, self.samples[0])

    @property
    def final(self) -> StateEnsemble:
        return StateEnsemble(self.n, self.d, self.samples[-1])

    @property
    def states(self) -> list[StateEnsemble]:
        return [StateEnsemble(self.n, self.d, row) for row in self.samples]

    def max_abs_history(self) -> np.ndarray:
        return np.abs(self.samples).max(axis=1)


def initial_state(n: int, d: int, seed: int) -> np.ndarray:
    """Entries uniform on (-1, 1), drawn from the ``(seed, "initial")`` sub-stream."""
    return substream(seed, "initial").uniform(-1.0, 1.0, size=n * d)


def simulate(
    g: MatrixWeightedGraph,
    tau: float,
    mode: Mode | str = Mode.ASYNC,
    seed: int = 0,
    max_steps: int | None = None,
    record_stride: int | None = None,
    stop: StopRule | None = None,
    initial=None,
    *,
    check_tau: bool = True,
) -> RunTrace:
    """Run one seeded trajectory.

    Asynchronous runs draw the updating agent uniformly from the
    ``(seed, "selection")`` sub-stream; the initial state, unless given,
    comes from the ``(seed, "initial")`` sub-stream. Samples are kept at
    step 0, every ``record_stride`` steps, and at the final step.
    """
    mode = Mode(mode)
    seed = check_seed(seed)
    stop = stop or StopRule()
    n, d = g.n, g.d
    max_steps = DEFAULT_MAX_STEPS[mode] if max_steps is None else int(max_steps)
    record_stride = max(1, max_steps // 1000) if record_stride is None else int(record_stride)
    ops = build_sync_operator(g, tau, check_tau=check_tau)
    window = stop.window_for(mode, n)

    if initial is None:
        x = initial_state(n, d, seed)
        init_source = "seed"
    else:
        x = np.array(_as_state(initial, n, d).x, dtype=float)
        init_source = "given"

    steps, agents, rows = [0], [-1], [x.copy()]
    deltas = np.empty(max_steps)
    sequence = np.empty(max_steps if mode is Mode.ASYNC else 0, dtype=np.int64)
    reason = StopReason.MAX_STEPS
    last_big = 0  # last step whose delta was >= tol (step 0 counts as big)
    t = 0
    x2 = x.reshape(n, d)

    if mode is Mode.ASYNC:
        stepper = LocalStepper(ops)
        rng = substream(seed, "selection")
        draws = np.empty(0, dtype=np.int64)
        pos = 0
        stamp = np.zeros(n, dtype=np.int64)  # epoch in which the agent last made a small update
        epoch, covered = 1, 0
        while t < max_steps:
            if pos == draws.size:
                draws = rng.integers(0, n, size=_DRAW_CHUNK)
                pos = 0
            l = int(draws[pos])
            pos += 1
            delta = stepper.step(x2, l)
            sequence[t] = l
            deltas[t] = delta
            t += 1
            row = x2[l]
            if not (np.all(np.isfinite(row)) and np.abs(row).max() <= stop.overflow_bound):
                reason = StopReason.DIVERGED
                break
            if not delta < stop.tol:
                last_big = t
                epoch += 1
                covered = 0
            elif stamp[l] != epoch:
                stamp[l] = epoch
                covered += 1
            if t - last_big >= window and covered == n:
                reason = StopReason.CONVERGED
                break
            if t % record_stride == 0:
                steps.append(t)
                agents.append(l)
                rows.append(x.copy())
        last_agent = int(sequence[t - 1]) if t else -1
    else:
        P = ops.P_full
        while t < max_steps:
            new = P @ x
            delta = float(np.abs(new - x).max()) if np.all(np.isfinite(new)) else np.inf
            x = new
            deltas[t] = delta
            t += 1
            if not (np.all(np.isfinite(x)) and np.abs(x).max() <= stop.overflow_bound):
                reason = StopReason.DIVERGED
                break
            if not delta < stop.tol:
                last_big = t
            if t - last_big >= window:
                reason = StopReason.CONVERGED
                break
            if t % record_stride == 0:
                steps.append(t)
                agents.append(-1)
                rows.append(x.copy())
        last_agent = -1

    if steps[-1] != t:
        steps.append(t)
        agents.append(last_agent)
        rows.append(x.copy())

    config = {
        "graph_digest": g.digest(),
        "n": n,
        "d": d,
        "policy": g.metadata.get("policy"),
        "tau": float(tau),
        "tau_checked": bool(check_tau),
        "mode": mode.value,
        "seed": seed,
        "max_steps": max_steps,
        "record_stride": record_stride,
        "stop_tol": stop.tol,
        "stop_window": window,
        "overflow_bound": stop.overflow_bound,
        "initial": init_source,
    }
    return RunTrace(
        config=config,
        agent_sequence=sequence[:t].copy() if mode is Mode.ASYNC else np.empty(0, dtype=np.int64),
        sample_steps=np.array(steps, dtype=np.int64),
        sample_agents=np.array(agents, dtype=np.int64),
        samples=np.array(rows),
        step_deltas=deltas[:t].copy(),
        steps_run=t,
        stop_reason=reason,
        n=n,
        d=d,
    )


@dataclass(frozen=True, eq=False)
class GaugeOperators:
    partition: Partition
    delta: np.ndarray  # agent-major block diagonal of +I_d (V1) / -I_d (V2)
    D_full: np.ndarray
    S_blocks: np.ndarray  # (d, n, n)
    T_blocks: np.ndarray  # (d, d, n, n)

    def script_D(self) -> np.ndarray:
        return assemble_blocks(self.S_blocks, self.T_blocks)


def gauge_build(ops: UpdateOperators, partition: Partition) -> GaugeOperators:
    """Flip the sign of every ``V2`` agent's state: ``D = Delta P Delta``.

    The ``S``/``T`` blocks are built from the weights directly, with same-part
    in-neighbours entering with ``+tau W`` and cross-part in-neighbours with
    ``-tau W``. They match the rearranged ``D`` when the network is
    structurally balanced with respect to ``partition``.
    """
    g, tau, n, d = ops.graph, ops.tau, ops.n, ops.d
    v1, v2 = (frozenset(p) for p in partition)
    if (v1 | v2) != frozenset(range(n)) or (v1 & v2):
        raise GraphError("partition does not cover the agent set")
    side = np.array([1.0 if a in v1 else -1.0 for a in range(n)])
    delta = np.diag(np.repeat(side, d))
    D_full = delta @ ops.P_full @ delta

    s_blocks = np.stack([np.eye(n)] * d)
    t_blocks = np.zeros((d, d, n, n))
    for k in range(n):
        for l in g.in_neighbors(k):
            w = g.weights[(k, l)]
            c = 1.0 if side[k] == side[l] else -1.0
            for i in range(d):
                s_blocks[i, k, k] -= (c * tau) * w[i, i]
                s_blocks[i, k, l] += (c * tau) * w[i, i]
                for j in range(d):
                    if i != j:
                        t_blocks[i, j, k, k] -= (c * tau) * w[i, j]
                        t_blocks[i, j, k, l] += (c * tau) * w[i, j]
    return GaugeOperators((v1, v2), delta, D_full, s_blocks, t_blocks)

