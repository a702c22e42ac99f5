"""Reproducing kernels on the real line and their Gram matrices.

Two families are supported: the Gaussian kernel
``exp(-(z - u)**2 / (2 * ell**2))`` and the Sobolev kernel of order
``kappa`` on ``[0, 1]``::

    K(z, u) = sum_{j < kappa} z**j u**j / (j!)**2
              + int_0^1 (z - t)_+**(kappa-1) (u - t)_+**(kappa-1) / ((kappa-1)!)**2 dt
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .exceptions import ConfigError, InvalidInputError, NumericError

DUPLICATE_TOL = 1e-12
_DOMAIN_SLACK = 1e-12


class KernelDomainError(NumericError, ValueError):
    """Sobolev kernel evaluated outside ``[0, 1]``."""


class UnsupportedDerivativeError(NumericError, ValueError):
    """Kernel is not continuously differentiable in its first argument."""


class DuplicatePointsWarning(UserWarning):
    pass


@dataclass(frozen=True)
class KernelSpec:
    family: str = "gaussian"
    length_scale: float = 1.0
    order: int = 2

    def __post_init__(self):
        if self.family not in ("gaussian", "sobolev"):
            raise ConfigError(f"unknown kernel family {self.family!r}")
        if not self.length_scale > 0:
            raise ConfigError("length_scale must be positive")
        if self.family == "sobolev" and (int(self.order) != self.order or self.order < 1):
            raise ConfigError("sobolev order must be an integer >= 1")

    @property
    def differentiable(self) -> bool:
        return self.family == "gaussian" or self.order >= 2


@dataclass(frozen=True)
class GramPair:
    """``K_mat[i, j] = K(Z_i, Z_j)`` and ``D_mat[i, j] = dK(z, Z_j)/dz at z = Z_i``.

    ``D_mat`` is ``None`` for kernels without a first derivative.
    """

    K_mat: np.ndarray
    D_mat: np.ndarray | None
    has_duplicates: bool


def _check_domain(spec, *arrays):
    if spec.family != "sobolev":
        return
    for a in arrays:
        if np.any(a < -_DOMAIN_SLACK) or np.any(a > 1 + _DOMAIN_SLACK):
            raise KernelDomainError("sobolev kernel is defined on [0, 1] only")


def _sobolev_quad(z, u, kappa, deriv):
    # integral term for general order; deriv=True differentiates in z
    m = min(z, u)
    if m <= 0.0:
        return 0.0
    cu = math.factorial(kappa - 1)
    if deriv:
        cz = math.factorial(kappa - 2)
        f = lambda t: (z - t) ** (kappa - 2) * (u - t) ** (kappa - 1) / (cz * cu)
    else:
        f = lambda t: (z - t) ** (kappa - 1) * (u - t) ** (kappa - 1) / (cu * cu)
    val, _ = integrate.quad(f, 0.0, m, epsabs=1e-10, epsrel=1e-10)
    return val


def _sobolev_matrix(z, u, kappa, deriv):
    Zg, Ug = np.meshgrid(z, u, indexing="ij")
    m = np.minimum(Zg, Ug)
    if kappa == 1:
        return 1.0 + m
    if kappa == 2:
        if deriv:
            inner = np.where(Zg < Ug, Zg * Ug - 0.5 * Zg**2, 0.5 * Ug**2)
            return Ug + inner
        M = np.maximum(Zg, Ug)
        return 1.0 + Zg * Ug + 0.5 * m**2 * M - m**3 / 6.0
    poly = np.zeros_like(Zg)
    for j in range(kappa):
        cj = math.factorial(j) ** 2
        if deriv:
            if j >= 1:
                poly += j * Zg ** (j - 1) * Ug**j / cj
        else:
            poly += Zg**j * Ug**j / cj
    quad = np.vectorize(lambda a, b: _sobolev_quad(a, b, kappa, deriv))(Zg, Ug)
    return poly + quad


def kernel_matrix(spec: KernelSpec, z, u) -> np.ndarray:
    """Cross-kernel matrix ``[K(z_i, u_j)]``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    _check_domain(spec, z, u)
    if spec.family == "gaussian":
        diff = z[:, None] - u[None, :]
        return np.exp(-0.5 * diff**2 / spec.length_scale**2)
    return _sobolev_matrix(z, u, spec.order, deriv=False)


def kernel_deriv_matrix(spec: KernelSpec, z, u) -> np.ndarray:
    """Cross matrix of first-argument derivatives ``[dK(z_i, u_j)/dz]``."""
    if not spec.differentiable:
        raise UnsupportedDerivativeError(
            "sobolev kernel of order 1 has no continuous derivative"
        )
    z = np.atleast_1d(np.asarray(z, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    _check_domain(spec, z, u)
    if spec.family == "gaussian":
        ell2 = spec.length_scale**2
        diff = z[:, None] - u[None, :]
        return -(diff / ell2) * np.exp(-0.5 * diff**2 / ell2)
    return _sobolev_matrix(z, u, spec.order, deriv=True)


def kernel_value(spec: KernelSpec, z: float, u: float) -> float:
    return float(kernel_matrix(spec, [z], [u])[0, 0])


def kernel_deriv(spec: KernelSpec, z: float, u: float) -> float:
    return float(kernel_deriv_matrix(spec, [z], [u])[0, 0])


def gram(spec: KernelSpec, Z) -> GramPair:
    """Gram and derivative-Gram matrices at the sample points ``Z``.

    Coincident points are allowed but flagged: the resulting Gram matrix is
    singular and downstream solves fall back to the minimum-norm solution.
    """
    Z = np.asarray(Z, dtype=float).ravel()
    if not np.all(np.isfinite(Z)):
        raise InvalidInputError("Z contains non-finite values")
    if Z.size < 2:
        raise InvalidInputError("need at least two points")
    K_mat = kernel_matrix(spec, Z, Z)
    K_mat = 0.5 * (K_mat + K_mat.T)
    D_mat = kernel_deriv_matrix(spec, Z, Z) if spec.differentiable else None
    sz = np.sort(Z)
    dup = bool(np.any(np.diff(sz) <= DUPLICATE_TOL))
    if dup:
        warnings.warn("treatment values are not distinct", DuplicatePointsWarning, stacklevel=2)
    return GramPair(K_mat=K_mat, D_mat=D_mat, has_duplicates=dup)
