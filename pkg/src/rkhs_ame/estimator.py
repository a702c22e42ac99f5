"""One-step penalized RKHS estimator of the partially linear IV model.

The model is ``Y = h(Z) + X @ beta + eps`` with ``E[eps | X, W] = 0``. For a
fixed penalty ``lam`` the estimator minimizes

    (1/n**2) r' F r + lam * ||h||_H**2,      r = Y - X beta - h(Z),

over ``beta`` and ``h`` in the RKHS of the chosen kernel. By the representer
theorem ``h = sum_i alpha_i K(., Z_i)``, and the coefficients solve the
symmetric system

    (K M K + n**2 lam K) alpha = K M Y,      M = F - F X C^{-1} X' F,

with ``C = X' F X``; ``alpha`` is taken as the minimum-norm solution and
``beta = C^{-1} X' F (Y - K alpha)``. The average marginal effect is the
sample mean of ``h'(Z_i)``.

The default solver works in the eigenbasis of ``K``. Writing
``K = U S U'`` over the numerically nonzero spectrum and ``alpha = U c``,
the system reduces to

    (S^{1/2} U' M U S^{1/2} + n**2 lam I) d = S^{1/2} U' M Y,   c = S^{-1/2} d,

whose matrix is bounded below by ``n**2 lam``. Its solution is the
minimum-norm solution of the full system restricted to the range of ``K``.
``solver="full"`` instead assembles the n x n system and hands it to
:func:`rkhs_ame.numerics.solve_min_norm`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import (
    CollinearityError,
    ConfigError,
    DataError,
    InsufficientDataError,
)
from .kernels import GramPair, KernelSpec, gram, kernel_deriv_matrix, kernel_matrix
from .numerics import DEFAULT_RANK_TOL, solve_min_norm
from .weighting import MuSpec, build_F

CONDITIONING_MODES = ("xw", "w")
SOLVERS = ("spectral", "full")


@dataclass(frozen=True)
class Dataset:
    """Outcome ``Y``, treatment ``Z``, covariates ``X`` (n x p) and instruments ``W`` (n x m)."""

    Y: np.ndarray
    Z: np.ndarray
    X: np.ndarray
    W: np.ndarray
    x_names: tuple = ()
    w_names: tuple = ()

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float).ravel()
        Z = np.asarray(self.Z, dtype=float).ravel()
        n = Y.shape[0]
        X = np.asarray(self.X, dtype=float) if self.X is not None else np.empty((n, 0))
        W = np.asarray(self.W, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.size == 0:
            X = np.empty((n, 0))
        if W.ndim == 1:
            W = W[:, None]
        if Z.shape[0] != n or X.shape[0] != n or W.shape[0] != n:
            raise DataError("Y, Z, X and W must have the same number of rows")
        if W.shape[1] < 1:
            raise DataError("at least one instrument is required")
        for name, a in (("Y", Y), ("Z", Z), ("X", X), ("W", W)):
            if not np.all(np.isfinite(a)):
                raise DataError(f"{name} contains non-finite values")
        if n < X.shape[1] + 2:
            raise InsufficientDataError(f"n={n} is too small for p={X.shape[1]} covariates")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "W", W)
        if not self.x_names:
            object.__setattr__(self, "x_names", tuple(f"x{k}" for k in range(X.shape[1])))
        if not self.w_names:
            object.__setattr__(self, "w_names", tuple(f"w{k}" for k in range(W.shape[1])))

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.Y[idx], self.Z[idx], self.X[idx], self.W[idx], self.x_names, self.w_names)


@dataclass(frozen=True)
class FitConfig:
    kernel: KernelSpec = field(default_factory=KernelSpec)
    mu: MuSpec = field(default_factory=MuSpec)
    lam: float = 1e-3
    standardize_inputs: bool = True
    conditioning: str = "xw"
    include_intercept: bool = False
    rank_tol: float = DEFAULT_RANK_TOL
    solver: str = "spectral"

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.conditioning not in CONDITIONING_MODES:
            raise ConfigError(f"conditioning must be one of {CONDITIONING_MODES}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}")

    def with_lambda(self, lam: float) -> "FitConfig":
        return replace(self, lam=float(lam))


@dataclass(frozen=True)
class Transform:
    """Affine map ``(x - center) / scale`` applied before a kernel or weighting."""

    center: np.ndarray | float = 0.0
    scale: np.ndarray | float = 1.0

    def apply(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.scale


@dataclass(frozen=True)
class Design:
    """Everything the linear system needs, built once per sample."""

    Y: np.ndarray
    X: np.ndarray
    Z_std: np.ndarray
    gram: GramPair
    F: np.ndarray
    z_transform: Transform
    v_transform: Transform
    K_basis: np.ndarray
    K_spectrum: np.ndarray


@dataclass(frozen=True)
class Fit:
    alpha: np.ndarray
    beta: np.ndarray
    lam: float
    Z_train: np.ndarray
    design: Design
    kernel: KernelSpec
    foc_residual: float
    rhs_norm: float
    effective_rank: int
    beta_names: tuple = ()

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def z_transform(self) -> Transform:
        return self.design.z_transform

    @property
    def K(self) -> np.ndarray:
        return self.design.gram.K_mat

    @property
    def F(self) -> np.ndarray:
        return self.design.F


def _z_transform(kernel: KernelSpec, Z, standardize: bool) -> Transform:
    if not standardize:
        return Transform()
    if kernel.family == "sobolev":
        lo, hi = float(Z.min()), float(Z.max())
        if hi == lo:
            raise DataError("treatment is constant")
        return Transform(lo, hi - lo)
    sd = float(Z.std())
    if sd == 0.0:
        raise DataError("treatment is constant")
    return Transform(float(Z.mean()), sd)


def conditioning_rows(data: Dataset, cfg: FitConfig) -> np.ndarray:
    if cfg.conditioning == "w" or data.p == 0:
        return data.W
    return np.hstack([data.X, data.W])


def _v_transform(V, standardize: bool) -> Transform:
    if not standardize:
        return Transform()
    sd = V.std(axis=0)
    # constant columns drop out of every pairwise difference
    sd = np.where(sd > 0, sd, 1.0)
    return Transform(V.mean(axis=0), sd)


def design_matrix(data: Dataset, cfg: FitConfig) -> np.ndarray:
    if cfg.include_intercept:
        return np.hstack([data.X, np.ones((data.n, 1))])
    return data.X


def prepare(data: Dataset, cfg: FitConfig) -> Design:
    """Standardize inputs and build the Gram and weighting matrices."""
    if data.n < 3:
        raise InsufficientDataError("at least three observations are required")
    zt = _z_transform(cfg.kernel, data.Z, cfg.standardize_inputs)
    Z_std = zt.apply(data.Z)
    V = conditioning_rows(data, cfg)
    vt = _v_transform(V, cfg.standardize_inputs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        G = gram(cfg.kernel, Z_std)
        F = build_F(cfg.mu, vt.apply(V))
    basis, spectrum = kernel_eigen(G.K_mat, cfg.rank_tol)
    return Design(
        Y=data.Y,
        X=design_matrix(data, cfg),
        Z_std=Z_std,
        gram=G,
        F=F,
        z_transform=zt,
        v_transform=vt,
        K_basis=basis,
        K_spectrum=spectrum,
    )


def kernel_eigen(K, rank_tol=DEFAULT_RANK_TOL):
    """Eigenvectors and eigenvalues of ``K`` above ``rank_tol * max eigenvalue``."""
    evals, evecs = np.linalg.eigh(K)
    keep = evals > rank_tol * evals.max()
    return evecs[:, keep], evals[keep]


def _check_rank(X):
    p = X.shape[1]
    if p and np.linalg.matrix_rank(X) < p:
        raise CollinearityError("covariate matrix X does not have full column rank")


@dataclass(frozen=True)
class SystemSolution:
    alpha: np.ndarray
    beta: np.ndarray
    foc_residual: float
    rhs_norm: float
    effective_rank: int


def _projection(F, X):
    """``(M, FX, C)`` with ``M = F - F X C^{-1} X' F``; ``M = F`` when ``X`` is empty."""
    if not X.shape[1]:
        return F, None, None
    FX = F @ X
    C = X.T @ FX
    d = np.sqrt(np.abs(np.diag(C)))
    if np.any(d == 0):
        raise CollinearityError("X' F X is singular")
    # scale-free conditioning check: unit-diagonal version of C
    cond = np.linalg.cond(C / np.outer(d, d))
    if not np.isfinite(cond) or cond > 1e12:
        raise CollinearityError("X' F X is singular")
    M = F - FX @ np.linalg.solve(C, FX.T)
    return 0.5 * (M + M.T), FX, C


def solve_system(design: Design, F, lam, solver="spectral", rank_tol=DEFAULT_RANK_TOL) -> SystemSolution:
    """Solve for ``(alpha, beta)`` given a prepared design and a weighting matrix.

    ``F`` is passed separately so bootstrap-reweighted matrices can reuse the
    design (and its eigendecomposition of ``K``).
    """
    K, X, Y = design.gram.K_mat, design.X, design.Y
    n = K.shape[0]
    M, FX, C = _projection(F, X)
    MY = M @ Y
    if solver == "full":
        KM = K @ M
        A = KM @ K + (n**2 * lam) * K
        rep = solve_min_norm(0.5 * (A + A.T), K @ MY, rank_tol)
        alpha, rank = rep.solution, rep.effective_rank
    else:
        U, s = design.K_basis, design.K_spectrum
        r = np.sqrt(s)
        H = r[:, None] * (U.T @ M @ U) * r[None, :]
        H[np.diag_indices_from(H)] += n**2 * lam
        d = np.linalg.solve(0.5 * (H + H.T), r * (U.T @ MY))
        alpha, rank = U @ (d / r), s.shape[0]
    Ka = K @ alpha
    rhs = K @ MY
    resid = K @ (M @ Ka) + (n**2 * lam) * Ka - rhs
    beta = np.linalg.solve(C, FX.T @ (Y - Ka)) if FX is not None else np.empty(0)
    return SystemSolution(
        alpha=alpha,
        beta=beta,
        foc_residual=float(np.linalg.norm(resid)),
        rhs_norm=float(np.linalg.norm(rhs)),
        effective_rank=int(rank),
    )


def fit(data: Dataset, cfg: FitConfig) -> Fit:
    """Fit ``(alpha, beta)`` at the penalty ``cfg.lam``."""
    design = prepare(data, cfg)
    _check_rank(design.X)
    sol = solve_system(design, design.F, cfg.lam, cfg.solver, cfg.rank_tol)
    names = tuple(data.x_names) + (("intercept",) if cfg.include_intercept else ())
    return Fit(
        alpha=sol.alpha,
        beta=sol.beta,
        lam=cfg.lam,
        Z_train=data.Z,
        design=design,
        kernel=cfg.kernel,
        foc_residual=sol.foc_residual,
        rhs_norm=sol.rhs_norm,
        effective_rank=sol.effective_rank,
        beta_names=names,
    )


def predict_h(fit: Fit, z_points) -> np.ndarray:
    """Evaluate the fitted treatment function at ``z_points`` (original units)."""
    z = fit.z_transform.apply(np.atleast_1d(z_points))
    return kernel_matrix(fit.kernel, z, fit.design.Z_std) @ fit.alpha


def predict_h_deriv(fit: Fit, z_points) -> np.ndarray:
    """Derivative of the fitted treatment function in original ``z`` units."""
    z = fit.z_transform.apply(np.atleast_1d(z_points))
    return kernel_deriv_matrix(fit.kernel, z, fit.design.Z_std) @ fit.alpha / fit.z_transform.scale


def ame(fit: Fit) -> float:
    """Average marginal effect: mean of ``h'(Z_i)`` over the training sample."""
    D = fit.design.gram.D_mat
    if D is None:
        # raises the appropriate unsupported-derivative error
        kernel_deriv_matrix(fit.kernel, [0.0], [0.0])
    return float(np.mean(D @ fit.alpha) / fit.z_transform.scale)


def objective_value(data: Dataset, cfg: FitConfig, alpha, beta, design: Design | None = None) -> float:
    """Penalized criterion ``(1/n**2) r' F r + lam * alpha' K alpha``."""
    if design is None:
        design = prepare(data, cfg)
    K = design.gram.K_mat
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    r = design.Y - design.X @ beta - K @ alpha
    n = r.shape[0]
    return float(r @ design.F @ r / n**2 + cfg.lam * alpha @ K @ alpha)
