"""Definite weight generation and the admissible step-size range."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .graph import Edge, GraphError, MatrixWeightedGraph, Partition, make_partition
from .linalg import Sign, matrix_sign
from .seeding import substream


class WeightMode(enum.Enum):
    ALL_POSITIVE_DEFINITE = "pd"
    ALL_NEGATIVE_DEFINITE = "nd"
    BALANCED_FROM_PARTITION = "balanced"
    SIGN_PATTERN = "pattern"


@dataclass(frozen=True)
class WeightPolicy:
    mode: WeightMode = WeightMode.ALL_POSITIVE_DEFINITE
    magnitude_scale: float = 1.0
    seed: int = 0
    partition: Partition | None = None
    # keyed by unordered pair (min, max); +1 or -1
    signs: Mapping[Edge, int] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.magnitude_scale <= 0:
            raise ValueError("magnitude_scale must be positive")
        if self.mode is WeightMode.BALANCED_FROM_PARTITION and self.partition is None:
            raise ValueError("balanced mode needs a partition")
        if self.mode is WeightMode.SIGN_PATTERN and self.signs is None:
            raise ValueError("sign-pattern mode needs per-edge signs")

    @classmethod
    def balanced(cls, v1, n: int, **kw) -> "WeightPolicy":
        return cls(WeightMode.BALANCED_FROM_PARTITION, partition=make_partition(v1, n), **kw)

    def sign_of(self, i: int, j: int) -> int:
        if self.mode is WeightMode.ALL_POSITIVE_DEFINITE:
            return 1
        if self.mode is WeightMode.ALL_NEGATIVE_DEFINITE:
            return -1
        if self.mode is WeightMode.BALANCED_FROM_PARTITION:
            v1 = self.partition[0]
            return 1 if (i in v1) == (j in v1) else -1
        return int(self.signs[(min(i, j), max(i, j))])

    def describe(self) -> dict:
        """JSON-ready summary with 1-based agent ids."""
        out = {"mode": self.mode.value, "magnitude_scale": self.magnitude_scale, "seed": self.seed}
        if self.partition is not None:
            out["v1"] = sorted(a + 1 for a in self.partition[0])
        if self.signs is not None:
            out["negative_pairs"] = sorted([p[0] + 1, p[1] + 1] for p, s in self.signs.items() if s < 0)
        return out


def gen_definite(d: int, sign: int, scale: float = 1.0, seed=0) -> np.ndarray:
    """``sign * (G G^T + 0.1 scale I)`` with ``G`` uniform on ``(-scale, scale)``.

    ``seed`` may be an integer or a ``numpy.random.Generator``.
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    rng = seed if isinstance(seed, np.random.Generator) else substream(seed, "definite")
    g = rng.uniform(-scale, scale, size=(d, d))
    return sign * (g @ g.T + 0.1 * scale * np.eye(d))


def balanced_signs(g: MatrixWeightedGraph, v1) -> dict[Edge, int]:
    v1 = set(v1)
    return {p: (1 if (p[0] in v1) == (p[1] in v1) else -1) for p in g.undirected_pairs()}


def flip_pairs(signs: Mapping[Edge, int], pairs) -> dict[Edge, int]:
    out = dict(signs)
    for i, j in pairs:
        key = (min(i, j), max(i, j))
        if key not in out:
            raise GraphError(f"no edge between agents {i} and {j}")
        out[key] = -out[key]
    return out


def assign_weights(g: MatrixWeightedGraph, policy: WeightPolicy) -> MatrixWeightedGraph:
    """Draw a definite matrix per agent pair and mirror it onto both directions.

    Each pair's draw comes from its own sub-stream ``(seed, min, max)``, so the
    result does not depend on edge iteration order.
    """
    if policy.partition is not None:
        v1, v2 = policy.partition
        if (v1 | v2) != frozenset(range(g.n)) or (v1 & v2):
            raise GraphError("policy partition does not cover the agent set")
    weights = {}
    for i, j in g.undirected_pairs():
        w = gen_definite(g.d, policy.sign_of(i, j), policy.magnitude_scale, substream(policy.seed, "edge", i, j))
        for e in ((i, j), (j, i)):
            if e in g.weights:
                weights[e] = w
    return g.with_weights(weights, policy=policy.describe())


class StepSizeError(ValueError):
    pass


@dataclass(frozen=True)
class StepSizeRange:
    upper: float
    denominator_witness: tuple[int, int, int]  # (agent, row, col)

    def __post_init__(self):
        if not self.upper > 0:
            raise StepSizeError("upper bound must be positive")

    def contains(self, tau: float) -> bool:
        return 0.0 < tau < self.upper


def signed_weight_sums(g: MatrixWeightedGraph) -> np.ndarray:
    """``sum_j sgn(W_ij) W_ij`` per agent, shape ``(n, d, d)``; raises on indefinite weights."""
    out = np.zeros((g.n, g.d, g.d))
    for (i, j), w in g.weights.items():
        s = matrix_sign(w)
        if not s.definite:
            raise StepSizeError(f"weight on edge {(i, j)} is {s.name.lower()}, not definite")
        out[i] += int(s) * w
    return out


def step_size_upper(g: MatrixWeightedGraph) -> StepSizeRange:
    sums = signed_weight_sums(g)
    denom = 2.0 * sums
    flat = int(np.argmax(denom))
    d_star = float(denom.flat[flat])
    if not d_star > 0:
        raise StepSizeError(f"largest signed weight sum is {d_star}; network has no usable edges")
    i, k, m = np.unravel_index(flat, denom.shape)
    return StepSizeRange(1.0 / d_star, (int(i), int(k), int(m)))


def default_tau(r: StepSizeRange) -> float:
    return 0.5 * r.upper
