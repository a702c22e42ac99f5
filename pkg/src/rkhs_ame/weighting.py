"""Characteristic-function weighting matrices.

The weighting measure ``mu`` is a product of independent unit-variance
marginals, so its characteristic function factorizes over coordinates:

* ``laplace``:  prod_k 1 / (1 + v_k**2 / 2)
* ``gaussian``: prod_k exp(-v_k**2 / 2)
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, InvalidInputError

DUPLICATE_TOL = 1e-12


class DuplicateRowsWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MuSpec:
    family: str = "laplace"

    def __post_init__(self):
        if self.family not in ("laplace", "gaussian"):
            raise ConfigError(f"unknown weighting family {self.family!r}")

    def sample(self, rng: np.random.Generator, size: int, q: int) -> np.ndarray:
        """Draw ``size`` points ``t ~ mu`` in ``R**q``."""
        if self.family == "laplace":
            return rng.laplace(0.0, 1.0 / np.sqrt(2.0), size=(size, q))
        return rng.standard_normal((size, q))


def _charfn_coords(family, d):
    if family == "laplace":
        return np.prod(1.0 / (1.0 + 0.5 * d**2), axis=-1)
    return np.exp(-0.5 * np.sum(d**2, axis=-1))


def charfn_value(spec: MuSpec, v) -> float:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("v contains non-finite values")
    return float(_charfn_coords(spec.family, v))


def _as_rows(V):
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    if V.ndim != 2 or V.shape[1] < 1:
        raise InvalidInputError("conditioning matrix must be n x q with q >= 1")
    if not np.all(np.isfinite(V)):
        raise InvalidInputError("conditioning matrix contains non-finite values")
    return V


def has_duplicate_rows(V, tol: float = DUPLICATE_TOL) -> bool:
    V = _as_rows(V)
    diff = np.abs(V[:, None, :] - V[None, :, :]).max(axis=-1)
    np.fill_diagonal(diff, np.inf)
    return bool(np.any(diff <= tol))


def build_F(spec: MuSpec, V) -> np.ndarray:
    """``F[i, j] = charfn(V_i - V_j)`` for the rows of ``V``."""
    V = _as_rows(V)
    d = V[:, None, :] - V[None, :, :]
    F = _charfn_coords(spec.family, d)
    F = 0.5 * (F + F.T)
    np.fill_diagonal(F, 1.0)
    if has_duplicate_rows(V):
        warnings.warn("conditioning rows are not distinct", DuplicateRowsWarning, stacklevel=2)
    return F


def scale_F_bootstrap(F, xi) -> np.ndarray:
    """Reweight ``F`` by ``xi_i * xi_j / mean(xi)**2``."""
    F = np.asarray(F, dtype=float)
    xi = np.asarray(xi, dtype=float).ravel()
    if xi.shape[0] != F.shape[0]:
        raise InvalidInputError("weight vector length does not match F")
    if not np.all(np.isfinite(xi)) or np.any(xi <= 0):
        raise InvalidInputError("bootstrap weights must be positive and finite")
    w = xi / xi.mean()
    return F * np.outer(w, w)
