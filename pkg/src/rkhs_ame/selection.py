"""Two-fold cross-validated choice of the penalty.

Each fold is fit on the other half, out-of-fold residuals are stacked in the
original row order, and the criterion is the weighted quadratic form
``(1/n**2) r' F r`` with the full-sample weighting matrix ``F``. That is the
same charfn-weighted (Cramer-von Mises type) distance the estimator
minimizes, evaluated out of sample.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimator import Dataset, FitConfig, Fit, fit, predict_h, prepare, solve_system
from .exceptions import InsufficientDataError, NumericError, SelectionError
from .kernels import kernel_matrix
from .numerics import RandomStream

DEFAULT_GRID = np.geomspace(1e-8, 1e1, 30)


@dataclass(frozen=True)
class FoldSplit:
    S1: np.ndarray
    S2: np.ndarray
    seed: int | None = None


@dataclass(frozen=True)
class LambdaGrid:
    values: np.ndarray
    criteria: np.ndarray
    argmin: int

    @property
    def best(self) -> float:
        return float(self.values[self.argmin])


def make_folds(n: int, stream: RandomStream) -> FoldSplit:
    """Random halves with ``|S1| = ceil(n/2)``; indices sorted within folds."""
    if n < 4:
        raise InsufficientDataError("two-fold cross-validation needs n >= 4")
    perm = stream.generator().permutation(n)
    k = (n + 1) // 2
    return FoldSplit(np.sort(perm[:k]), np.sort(perm[k:]), stream.seed)


def geometric_grid(lo: float, hi: float, count: int) -> np.ndarray:
    if not (0 < lo <= hi) or count < 1:
        raise ValueError("grid needs 0 < lo <= hi and count >= 1")
    return np.geomspace(lo, hi, int(count))


def _out_of_fold(fold_fit: Fit, data: Dataset, idx, cfg: FitConfig) -> np.ndarray:
    sub = data.subset(idx)
    X = sub.X
    if cfg.include_intercept:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
    return sub.Y - X @ fold_fit.beta - predict_h(fold_fit, sub.Z)


def pooled_residuals(data: Dataset, cfg: FitConfig, split: FoldSplit) -> np.ndarray:
    """Out-of-fold residuals stacked back into the original row order."""
    r = np.empty(data.n)
    fit_2 = fit(data.subset(split.S2), cfg)
    fit_1 = fit(data.subset(split.S1), cfg)
    r[split.S1] = _out_of_fold(fit_2, data, split.S1, cfg)
    r[split.S2] = _out_of_fold(fit_1, data, split.S2, cfg)
    return r


def cv_criterion(data: Dataset, cfg: FitConfig, split: FoldSplit, F_full=None) -> float:
    if min(split.S1.size, split.S2.size) < data.p + 2 + int(cfg.include_intercept):
        raise InsufficientDataError("folds are too small for the number of covariates")
    if F_full is None:
        F_full = prepare(data, cfg).F
    r = pooled_residuals(data, cfg, split)
    return float(r @ F_full @ r / data.n**2)


class _FoldCache:
    """Per-fold designs reused across the grid; only the penalty changes."""

    def __init__(self, data, cfg, split):
        self.data, self.cfg, self.split = data, cfg, split
        self.full = prepare(data, cfg)
        self.parts = []
        for train, test in ((split.S2, split.S1), (split.S1, split.S2)):
            sub = data.subset(train)
            design = prepare(sub, cfg)
            self.parts.append((design, train, test))

    def criterion(self, lam: float) -> float:
        data, cfg = self.data, self.cfg
        r = np.empty(data.n)
        for design, _train, test in self.parts:
            sol = solve_system(design, design.F, lam, cfg.solver, cfg.rank_tol)
            held = data.subset(test)
            X = held.X
            if cfg.include_intercept:
                X = np.hstack([X, np.ones((X.shape[0], 1))])
            zs = design.z_transform.apply(held.Z)
            h = kernel_matrix(cfg.kernel, zs, design.Z_std) @ sol.alpha
            r[test] = held.Y - X @ sol.beta - h
        return float(r @ self.full.F @ r / data.n**2)


def select_lambda(
    data: Dataset,
    cfg: FitConfig,
    grid=None,
    stream: RandomStream | None = None,
    split: FoldSplit | None = None,
    workers: int = 1,
):
    """Grid search for the penalty minimizing the two-fold criterion.

    One fold split is shared by every grid point. Exact ties go to the
    smaller penalty.

    Returns
    -------
    lam : float
    grid : LambdaGrid
    """
    values = np.asarray(DEFAULT_GRID if grid is None else grid, dtype=float).ravel()
    if values.size == 0:
        raise SelectionError("lambda grid is empty")
    if np.any(values <= 0):
        raise SelectionError("lambda grid values must be positive")
    values = np.unique(values)
    if split is None:
        split = make_folds(data.n, stream or RandomStream(0))
    if min(split.S1.size, split.S2.size) < data.p + 2 + int(cfg.include_intercept):
        raise InsufficientDataError("folds are too small for the number of covariates")
    cache = _FoldCache(data, cfg, split)

    def evaluate(lam):
        try:
            return cache.criterion(lam)
        except (NumericError, np.linalg.LinAlgError):
            return np.nan

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            crit = np.asarray(list(pool.map(evaluate, values)))
    else:
        crit = np.asarray([evaluate(v) for v in values])
    finite = np.isfinite(crit)
    if not finite.any():
        raise SelectionError("cross-validation criterion is non-finite at every grid point")
    masked = np.where(finite, crit, np.inf)
    k = int(np.argmin(masked))  # first occurrence = smallest lambda on ties
    return float(values[k]), LambdaGrid(values=values, criteria=crit, argmin=k)
