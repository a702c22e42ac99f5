"""Numeric primitives shared across the package.

Minimum-norm symmetric solves, order-statistic quantiles, column
standardization and seeded random streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateScaleError, InvalidInputError

DEFAULT_RANK_TOL = 1e-10
SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class RandomStream:
    """Seeded, addressable source of random draws.

    The pair ``(seed, stream_id)`` fully determines the draw sequence, so
    replication ``r`` or bootstrap index ``b`` can be evaluated on any worker
    in any order.
    """

    seed: int
    stream_id: int = 0
    sub: tuple = ()

    def __post_init__(self):
        if self.seed < 0 or self.seed >= 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")
        if self.stream_id < 0:
            raise InvalidInputError("stream_id must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, *self.sub))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "RandomStream":
        """Sibling stream under the same seed (e.g. bootstrap index ``b``)."""
        return RandomStream(self.seed, stream_id)

    def substream(self, key: int) -> "RandomStream":
        """Independent stream nested under this one (data vs. folds vs. weights)."""
        return RandomStream(self.seed, self.stream_id, (*self.sub, key))


@dataclass(frozen=True)
class SolveReport:
    solution: np.ndarray
    rank_deficient: bool
    residual_norm: float
    effective_rank: int


def _as_finite(a, name):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def solve_min_norm(A, b, rank_tol: float = DEFAULT_RANK_TOL) -> SolveReport:
    """Minimum-norm least-squares solution of ``A x = b`` for symmetric PSD ``A``.

    Spectral components with ``|eigenvalue| < rank_tol * max|eigenvalue|``
    are treated as null directions and dropped, so the returned ``x`` lies
    in the numerical range of ``A``.
    """
    A = _as_finite(A, "A")
    b = _as_finite(b, "b")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"A must be square, got shape {A.shape}")
    if b.shape != (A.shape[0],):
        raise InvalidInputError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
    if rank_tol <= 0:
        raise InvalidInputError("rank_tol must be positive")
    scale = max(np.max(np.abs(A)), 1e-300)
    if np.max(np.abs(A - A.T)) > SYMMETRY_TOL * scale:
        raise InvalidInputError("A is not symmetric")

    n = A.shape[0]
    evals, evecs = np.linalg.eigh(0.5 * (A + A.T))
    top = np.max(np.abs(evals)) if n else 0.0
    keep = np.abs(evals) > rank_tol * top if top > 0 else np.zeros(n, dtype=bool)
    coef = (evecs[:, keep].T @ b) / evals[keep]
    x = evecs[:, keep] @ coef
    rank = int(keep.sum())
    return SolveReport(
        solution=x,
        rank_deficient=rank < n,
        residual_norm=float(np.linalg.norm(A @ x - b)),
        effective_rank=rank,
    )


def empirical_quantile(draws, level: float) -> float:
    """Smallest ``c`` with at least a ``level`` fraction of draws ``<= c``.

    This is the ``ceil(level * B)``-th order statistic; no interpolation.
    """
    draws = np.asarray(draws, dtype=float).ravel()
    if draws.size == 0:
        raise InvalidInputError("draws must be non-empty")
    if not np.all(np.isfinite(draws)):
        raise InvalidInputError("draws contain non-finite values")
    if not 0.0 < level < 1.0:
        raise InvalidInputError("level must lie in (0, 1)")
    B = draws.size
    # guard against level*B landing a hair above an integer in floating point
    k = math.ceil(round(level * B, 9))
    k = min(max(k, 1), B)
    return float(np.sort(draws)[k - 1])


def standardize(column):
    """Center by the mean and scale by the population standard deviation.

    Returns
    -------
    standardized : ndarray
    center : float
    scale : float
    """
    column = _as_finite(column, "column").ravel()
    if column.size < 2 or np.ptp(column) == 0.0:
        raise DegenerateScaleError("column must contain at least two distinct values")
    center = float(column.mean())
    scale = float(column.std())
    if scale == 0.0:
        raise DegenerateScaleError("column has zero standard deviation")
    return (column - center) / scale, center, scale
