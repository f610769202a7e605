"""Dense matrix kernel: norms, definiteness, spectra, Gershgorin discs and
iterated-product limit oracles.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Everything in
this module is a pure function of its inputs.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

TOL_SYM = 1e-9
TOL_DEF = 1e-9
TOL_EIG = 1e-6
TOL_STEP = 1e-12
TOL_ZERO_MAT = 1e-8
OVERFLOW_BOUND = 1e12
DEFAULT_MAX_ITER = 100_000


class DimensionError(ValueError):
    pass


class ShapeError(ValueError):
    pass


def as_matrix(m, *, square: bool = False) -> np.ndarray:
    """Coerce ``m`` to a finite 2-D float array, raising on bad input."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    if a.size == 0:
        raise DimensionError("empty matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def inf_norm(m) -> float:
    """Maximum absolute row sum."""
    a = as_matrix(m)
    return float(np.abs(a).sum(axis=1).max())


class Sign(enum.IntEnum):
    NEGATIVE = -1
    ZERO = 0
    POSITIVE = 1
    INDEFINITE = 2

    @property
    def definite(self) -> bool:
        return self in (Sign.POSITIVE, Sign.NEGATIVE)


def _check_symmetric(a: np.ndarray, tol_sym: float) -> None:
    asym = float(np.abs(a - a.T).max())
    if asym > tol_sym * inf_norm(a):
        raise ShapeError(f"matrix is not symmetric (max |m - m^T| = {asym:.3e})")


def matrix_sign(m, tol_def: float = TOL_DEF, tol_sym: float = TOL_SYM) -> Sign:
    a = as_matrix(m, square=True)
    _check_symmetric(a, tol_sym)
    eig = np.linalg.eigvalsh(0.5 * (a + a.T))
    if eig[0] > tol_def:
        return Sign.POSITIVE
    if eig[-1] < -tol_def:
        return Sign.NEGATIVE
    if np.abs(a).max() <= tol_def:
        return Sign.ZERO
    return Sign.INDEFINITE


def is_positive_definite(m, tol_def: float = TOL_DEF) -> bool:
    return matrix_sign(m, tol_def) is Sign.POSITIVE


def is_negative_definite(m, tol_def: float = TOL_DEF) -> bool:
    return matrix_sign(m, tol_def) is Sign.NEGATIVE


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    count_near_one: int
    max_modulus: float
    max_modulus_excluding_near_one: float


def spectrum(m, tol_eig: float = TOL_EIG) -> SpectrumReport:
    a = as_matrix(m, square=True)
    eig = np.linalg.eigvals(a).astype(complex)
    near = np.abs(eig - 1.0) <= tol_eig
    mod = np.abs(eig)
    rest = mod[~near]
    return SpectrumReport(
        eigenvalues=eig,
        count_near_one=int(near.sum()),
        max_modulus=float(mod.max()),
        max_modulus_excluding_near_one=float(rest.max()) if rest.size else 0.0,
    )


def gershgorin_discs(m) -> list[tuple[float, float]]:
    a = as_matrix(m, square=True)
    centers = np.diag(a)
    radii = np.abs(a).sum(axis=1) - np.abs(centers)
    return [(float(c), float(r)) for c, r in zip(centers, radii)]


def in_gershgorin_union(z: complex, discs, tol: float = 1e-9) -> bool:
    return any(abs(z - c) <= r + tol for c, r in discs)


class LimitStatus(enum.Enum):
    CONVERGED_TO_MATRIX = "ConvergedToMatrix"
    CONVERGED_TO_ZERO = "ConvergedToZero"
    DIVERGED = "Diverged"
    UNDECIDED = "Undecided"

    @property
    def converged(self) -> bool:
        return self in (LimitStatus.CONVERGED_TO_MATRIX, LimitStatus.CONVERGED_TO_ZERO)


@dataclass(frozen=True)
class ProductLimitResult:
    status: LimitStatus
    limit: np.ndarray | None
    iterations_used: int
    final_step_delta: float
    deltas: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))

    def __post_init__(self):
        if (self.limit is not None) != self.status.converged:
            raise ValueError("limit must be present exactly when the status is converged")


def power_limit(
    m,
    max_iter: int = DEFAULT_MAX_ITER,
    tol_step: float = TOL_STEP,
    *,
    tol_zero_mat: float = TOL_ZERO_MAT,
    overflow_bound: float = OVERFLOW_BOUND,
) -> ProductLimitResult:
    """Iterate ``m**t`` by repeated right-multiplication until it settles.

    The running product is multiplied by ``m`` once per iteration (no
    squaring), so ``deltas[t-1]`` is the inf-norm of ``m**(t+1) - m**t``.
    """
    a = as_matrix(m, square=True)
    cur = a.copy()
    deltas = []
    for t in range(1, max_iter + 1):
        nxt = cur @ a
        if not np.all(np.isfinite(nxt)) or np.abs(nxt).max() > overflow_bound:
            deltas.append(np.inf)
            return ProductLimitResult(LimitStatus.DIVERGED, None, t, np.inf, np.asarray(deltas))
        delta = float(np.abs(nxt - cur).sum(axis=1).max())
        deltas.append(delta)
        cur = nxt
        if delta < tol_step:
            status = (
                LimitStatus.CONVERGED_TO_ZERO
                if inf_norm(cur) <= tol_zero_mat
                else LimitStatus.CONVERGED_TO_MATRIX
            )
            return ProductLimitResult(status, cur, t, delta, np.asarray(deltas))
    return ProductLimitResult(
        LimitStatus.UNDECIDED, None, max_iter, deltas[-1] if deltas else np.inf, np.asarray(deltas)
    )


@dataclass(frozen=True)
class SumProductReport:
    """Outcome of checking the hypotheses for ``lim (A + B)**t`` and computing it."""

    a_norm: float
    a_norm_ok: bool
    a_limit: ProductLimitResult
    b_limit: ProductLimitResult
    limit: ProductLimitResult

    @property
    def a_converges(self) -> bool:
        return self.a_limit.status.converged

    @property
    def b_vanishes(self) -> bool:
        return self.b_limit.status is LimitStatus.CONVERGED_TO_ZERO

    @property
    def hypotheses_hold(self) -> bool:
        return self.a_norm_ok and self.a_converges and self.b_vanishes

    @property
    def violations(self) -> list[str]:
        out = []
        if not self.a_norm_ok:
            out.append(f"||A|| = {self.a_norm:.6g} > 1")
        if not self.a_converges:
            out.append(f"A^t does not converge ({self.a_limit.status.value})")
        if not self.b_vanishes:
            out.append(f"B^t does not vanish ({self.b_limit.status.value})")
        return out


def sum_product_limit(
    a, b, max_iter: int = DEFAULT_MAX_ITER, tol_step: float = TOL_STEP, tol_eig: float = TOL_EIG
) -> SumProductReport:
    a = as_matrix(a, square=True)
    b = as_matrix(b, square=True)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    a_norm = inf_norm(a)
    return SumProductReport(
        a_norm=a_norm,
        a_norm_ok=a_norm <= 1.0 + tol_eig,
        a_limit=power_limit(a, max_iter, tol_step),
        b_limit=power_limit(b, max_iter, tol_step),
        limit=power_limit(a + b, max_iter, tol_step),
    )
