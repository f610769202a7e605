"""Matrix-weighted directed graphs, generators, reachability and structural balance.

Agents are numbered ``0..n-1`` inside the library. An edge ``(i, j)`` means
agent ``i`` receives information from agent ``j``; information therefore
flows ``j -> i``. The same convention holds for :class:`DirectedGraph`
built from a matrix, where ``(i, j)`` is present when entry ``(i, j)`` is
positive, i.e. row ``i`` draws on column ``j``.
"""
from __future__ import annotations

import enum
import hashlib
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .linalg import TOL_SYM, Sign, as_matrix, inf_norm, matrix_sign
from .seeding import substream

TOL_POS = 1e-12
RGG_RETRY_CAP = 100

Edge = tuple[int, int]
Partition = tuple[frozenset, frozenset]


class GraphError(ValueError):
    pass


class GraphGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DirectedGraph:
    n: int
    adjacency: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "adjacency", frozenset(self.adjacency))
        for i, j in self.adjacency:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"pair {(i, j)} references an agent outside 0..{self.n - 1}")

    def cross_edges(self) -> frozenset:
        return frozenset((i, j) for i, j in self.adjacency if i != j)

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.adjacency

    def issuperset(self, other: "DirectedGraph") -> bool:
        return self.adjacency >= other.adjacency


@dataclass(frozen=True, eq=False)
class MatrixWeightedGraph:
    """``n`` agents with ``d``-dimensional states; ``weights[(i, j)]`` is ``W_ij``."""

    n: int
    d: int
    weights: Mapping[Edge, np.ndarray] = field(default_factory=dict)
    metadata: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise GraphError(f"need n >= 1 and d >= 1, got n={self.n}, d={self.d}")
        clean = {}
        for (i, j), w in sorted(self.weights.items()):
            i, j = int(i), int(j)
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"edge {(i, j)} references an agent outside 0..{self.n - 1}")
            if i == j:
                raise GraphError(f"self-loop at agent {i}")
            w = as_matrix(w, square=True).copy()
            if w.shape != (self.d, self.d):
                raise GraphError(f"weight on {(i, j)} has shape {w.shape}, expected {(self.d, self.d)}")
            if np.abs(w - w.T).max() > TOL_SYM * inf_norm(w):
                raise GraphError(f"weight on {(i, j)} is not symmetric")
            w.setflags(write=False)
            clean[(i, j)] = w
        object.__setattr__(self, "weights", clean)
        nbrs = [[] for _ in range(self.n)]
        for i, j in clean:
            nbrs[i].append(j)
        object.__setattr__(self, "_in_nbrs", tuple(tuple(sorted(x)) for x in nbrs))

    @property
    def edges(self) -> list[Edge]:
        return list(self.weights)

    def in_neighbors(self, i: int) -> tuple[int, ...]:
        if not 0 <= i < self.n:
            raise GraphError(f"invalid agent id {i}")
        return self._in_nbrs[i]

    def topology(self) -> DirectedGraph:
        return DirectedGraph(self.n, frozenset(self.weights))

    def undirected_pairs(self) -> list[Edge]:
        return sorted({(min(e), max(e)) for e in self.weights})

    def signs(self) -> dict[Edge, Sign]:
        return {e: matrix_sign(w) for e, w in self.weights.items()}

    def with_weights(self, weights: Mapping[Edge, np.ndarray], **metadata) -> "MatrixWeightedGraph":
        if set(weights) != set(self.weights):
            raise GraphError("new weights must cover exactly the existing edge set")
        return MatrixWeightedGraph(self.n, self.d, weights, {**self.metadata, **metadata})

    def relabel(self, perm) -> "MatrixWeightedGraph":
        """Rename agent ``a`` to ``perm[a]``."""
        perm = [int(p) for p in perm]
        if sorted(perm) != list(range(self.n)):
            raise GraphError("relabel needs a permutation of 0..n-1")
        return MatrixWeightedGraph(
            self.n, self.d, {(perm[i], perm[j]): w for (i, j), w in self.weights.items()}, self.metadata
        )

    def digest(self) -> str:
        """SHA-256 over ``n``, ``d`` and every weight entry (bit-exact)."""
        h = hashlib.sha256(f"{self.n}:{self.d}".encode())
        for (i, j), w in self.weights.items():
            h.update(f"|{i},{j}:".encode())
            h.update(",".join(float(x).hex() for x in w.ravel()).encode())
        return h.hexdigest()


def in_neighbors(g: MatrixWeightedGraph, i: int) -> set[int]:
    return set(g.in_neighbors(i))


def _reach_from(n: int, out: list[list[int]], root: int) -> int:
    seen = [False] * n
    seen[root] = True
    queue = deque([root])
    count = 1
    while queue:
        u = queue.popleft()
        for v in out[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(v)
    return count


def has_spanning_tree(g: DirectedGraph | MatrixWeightedGraph) -> int | None:
    """Return an agent whose information reaches every agent, or ``None``.

    Self-pairs are ignored. Candidates are tried in increasing id order, so
    the smallest valid root is returned.
    """
    if isinstance(g, MatrixWeightedGraph):
        g = g.topology()
    out = [[] for _ in range(g.n)]
    has_in = [False] * g.n
    for i, j in g.adjacency:
        if i != j:
            out[j].append(i)
            has_in[i] = True
    sources = [v for v in range(g.n) if not has_in[v]]
    if len(sources) > 1:
        return None
    candidates = sources if sources else range(g.n)
    for r in candidates:
        if _reach_from(g.n, out, r) == g.n:
            return r
    return None


def induced_graph(m, tol_pos: float = TOL_POS) -> DirectedGraph:
    a = as_matrix(m, square=True)
    rows, cols = np.nonzero(a > tol_pos)
    return DirectedGraph(a.shape[0], frozenset(zip(rows.tolist(), cols.tolist())))


def union_graphs(gs: Iterable[DirectedGraph]) -> DirectedGraph:
    gs = list(gs)
    if not gs:
        raise GraphError("union of no graphs")
    n = gs[0].n
    if any(g.n != n for g in gs):
        raise GraphError("union of graphs with different agent counts")
    return DirectedGraph(n, frozenset().union(*(g.adjacency for g in gs)))


class BalanceKind(enum.Enum):
    ALL_POSITIVE = "AllPositive"
    BALANCED = "Balanced"
    UNBALANCED = "Unbalanced"
    ALL_NEGATIVE = "AllNegative"
    CONTAINS_INDEFINITE = "ContainsIndefinite"


@dataclass(frozen=True)
class BalanceVerdict:
    kind: BalanceKind
    partition: Partition | None = None

    def __post_init__(self):
        if (self.partition is not None) != (self.kind is BalanceKind.BALANCED):
            raise ValueError("partition is present exactly for Balanced verdicts")


def make_partition(v1: Iterable[int], n: int) -> Partition:
    v1 = frozenset(int(v) for v in v1)
    if not v1 or not v1 <= set(range(n)):
        raise GraphError(f"V1 must be a non-empty subset of 0..{n - 1}")
    return v1, frozenset(range(n)) - v1


def same_partition(a: Partition, b: Partition) -> bool:
    return (a[0] == b[0] and a[1] == b[1]) or (a[0] == b[1] and a[1] == b[0])


def structural_balance(g: MatrixWeightedGraph) -> BalanceVerdict:
    signs = g.signs()
    if any(not s.definite for s in signs.values()):
        return BalanceVerdict(BalanceKind.CONTAINS_INDEFINITE)
    values = set(signs.values())
    if values <= {Sign.POSITIVE}:
        return BalanceVerdict(BalanceKind.ALL_POSITIVE)
    if values == {Sign.NEGATIVE}:
        return BalanceVerdict(BalanceKind.ALL_NEGATIVE)

    pair_sign: dict[Edge, int] = {}
    for (i, j), s in signs.items():
        key = (min(i, j), max(i, j))
        if pair_sign.setdefault(key, int(s)) != int(s):
            return BalanceVerdict(BalanceKind.UNBALANCED)
    adj = [[] for _ in range(g.n)]
    for (i, j), s in pair_sign.items():
        adj[i].append((j, s))
        adj[j].append((i, s))

    color = [-1] * g.n
    for start in range(g.n):
        if color[start] >= 0:
            continue
        color[start] = 0
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v, s in adj[u]:
                want = color[u] if s > 0 else 1 - color[u]
                if color[v] < 0:
                    color[v] = want
                    queue.append(v)
                elif color[v] != want:
                    return BalanceVerdict(BalanceKind.UNBALANCED)
    v1 = frozenset(v for v in range(g.n) if color[v] == 0)
    return BalanceVerdict(BalanceKind.BALANCED, (v1, frozenset(range(g.n)) - v1))


def skeleton_is_bipartite(g: MatrixWeightedGraph) -> bool:
    """Whether the undirected skeleton has no odd cycle.

    An all-negative network on a bipartite skeleton is balanced with respect
    to the two-colouring even though every sign is the same.
    """
    adj = [[] for _ in range(g.n)]
    for i, j in g.undirected_pairs():
        adj[i].append(j)
        adj[j].append(i)
    color = [-1] * g.n
    for start in range(g.n):
        if color[start] >= 0:
            continue
        color[start] = 0
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if color[v] < 0:
                    color[v] = 1 - color[u]
                    queue.append(v)
                elif color[v] == color[u]:
                    return False
    return True


def _placeholder(d: int) -> np.ndarray:
    return np.eye(d)


def gen_regular_ring(n: int, k: int, d: int, seed: int = 0) -> MatrixWeightedGraph:
    """Circulant graph: each agent linked both ways to its ``k/2`` nearest agents on each side.

    ``seed`` is accepted for a uniform generator signature; the topology is
    deterministic. Weights are identity placeholders.
    """
    if k % 2 or k < 0 or k >= n:
        raise GraphError(f"ring needs an even k with 0 <= k < n, got n={n}, k={k}")
    weights = {}
    for i in range(n):
        for s in range(1, k // 2 + 1):
            j = (i + s) % n
            weights[(i, j)] = _placeholder(d)
            weights[(j, i)] = _placeholder(d)
    return MatrixWeightedGraph(n, d, weights, {"generator": "ring", "n": n, "k": k, "seed": seed})


def gen_rgg(
    n: int, radius: float, d: int, seed: int = 0, retry_cap: int = RGG_RETRY_CAP
) -> MatrixWeightedGraph:
    """Random geometric graph in the unit square, redrawn until it has a spanning tree."""
    if not 0.0 <= radius <= np.sqrt(2.0):
        raise GraphError(f"radius must lie in [0, sqrt(2)], got {radius}")
    rng = substream(seed, "rgg")
    iu, ju = np.triu_indices(n, k=1)
    for attempt in range(retry_cap):
        pts = rng.uniform(0.0, 1.0, size=(n, 2))
        dist = np.hypot(*(pts[iu] - pts[ju]).T)
        close = dist <= radius
        weights = {}
        for i, j in zip(iu[close].tolist(), ju[close].tolist()):
            weights[(i, j)] = _placeholder(d)
            weights[(j, i)] = _placeholder(d)
        g = MatrixWeightedGraph(
            n, d, weights,
            {"generator": "rgg", "n": n, "radius": radius, "seed": seed, "attempt": attempt},
        )
        if has_spanning_tree(g) is not None:
            return g
    raise GraphGenerationError(f"no spanning tree in {retry_cap} draws of G({n}, {radius})")


def gen_directed(n: int, d: int, edges: Iterable[Edge]) -> MatrixWeightedGraph:
    """Graph with exactly the listed directed edges and identity placeholder weights."""
    return MatrixWeightedGraph(n, d, {tuple(e): _placeholder(d) for e in edges}, {"generator": "directed"})


# Five agents, agent 0 hears nobody: not strongly connected, rooted at 0.
FIVE_AGENT_EDGES: tuple[Edge, ...] = ((1, 0), (2, 1), (1, 2), (3, 2), (4, 3), (2, 4))
