"""Bayesian-bootstrap test and confidence intervals for the average marginal effect.

Each bootstrap draw reweights observation ``i`` by ``xi_i / mean(xi)`` with
i.i.d. unit-mean, unit-variance weights, refits at the original penalty, and
returns the weighted mean of the refitted derivative. The test rejects
``theta = theta_H0`` when ``|theta_hat - theta_H0|`` exceeds the ``1 - level``
order-statistic quantile of ``|theta_b - theta_hat|``; inverting it gives the
interval ``theta_hat +/- q``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimator import Dataset, Fit, FitConfig, ame, fit, solve_system
from .exceptions import ConfigError, InvalidInputError
from .numerics import RandomStream, empirical_quantile
from .weighting import scale_F_bootstrap

WEIGHT_FAMILIES = ("exponential", "lognormal", "mammen")
MIN_RELIABLE_B = 20


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap settings; see :func:`draw_weights` for the weight families."""

    B: int = 499
    level: float = 0.05
    seed: int = 0
    weight_family: str = "exponential"
    workers: int = 1

    def __post_init__(self):
        if self.B < 1:
            raise ConfigError("B must be a positive integer")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")
        if self.weight_family not in WEIGHT_FAMILIES:
            raise ConfigError(f"weight_family must be one of {WEIGHT_FAMILIES}")


@dataclass(frozen=True)
class TestResult:
    theta_hat: float
    theta_H0: float
    draws: np.ndarray
    level: float
    q_hat: float
    c_hat: float
    reject: bool
    p_value: float
    ci: tuple
    n: int
    small_B: bool = False
    equal_tail: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class


_MAMMEN_LOW = 1.0 - (np.sqrt(5.0) - 1.0) / 2.0
_MAMMEN_HIGH = 1.0 + (np.sqrt(5.0) + 1.0) / 2.0
_MAMMEN_P_LOW = (np.sqrt(5.0) + 1.0) / (2.0 * np.sqrt(5.0))
_LOGNORMAL_SIGMA2 = np.log(2.0)


def draw_weights(bcfg: BootstrapConfig, n: int, stream: RandomStream) -> np.ndarray:
    """Positive i.i.d. weights with mean one and variance one.

    ``exponential``: Exp(1). ``lognormal``: exp(N(-log(2)/2, log 2)).
    ``mammen``: one plus Mammen's two-point variable, taking the values
    ``(3 - sqrt(5))/2`` and ``(3 + sqrt(5))/2``.
    """
    rng = stream.generator()
    if bcfg.weight_family == "exponential":
        return rng.exponential(1.0, size=n)
    if bcfg.weight_family == "lognormal":
        return np.exp(rng.normal(-0.5 * _LOGNORMAL_SIGMA2, np.sqrt(_LOGNORMAL_SIGMA2), size=n))
    low = rng.random(n) < _MAMMEN_P_LOW
    return np.where(low, _MAMMEN_LOW, _MAMMEN_HIGH)


def _theta_from_alpha(design, alpha, w=None) -> float:
    deriv = design.gram.D_mat @ alpha
    if w is not None:
        deriv = w * deriv
    return float(np.mean(deriv) / design.z_transform.scale)


def bootstrap_draw_from_fit(fitted: Fit, xi, solver: str = "spectral") -> float:
    """One bootstrap AME reusing the Gram matrix and ``F`` of ``fitted``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (fitted.n,):
        raise InvalidInputError("weight vector length does not match the sample")
    Fb = scale_F_bootstrap(fitted.design.F, xi)
    sol = solve_system(fitted.design, Fb, fitted.lam, solver)
    return _theta_from_alpha(fitted.design, sol.alpha, xi / xi.mean())


def bootstrap_draw(data: Dataset, cfg: FitConfig, xi) -> float:
    """Bootstrap AME for weights ``xi`` at the fixed penalty ``cfg.lam``."""
    return bootstrap_draw_from_fit(fit(data, cfg), xi, cfg.solver)


def bootstrap_draws(
    fitted: Fit,
    bcfg: BootstrapConfig,
    solver: str = "spectral",
    stream: RandomStream | None = None,
) -> np.ndarray:
    """``B`` bootstrap AMEs.

    Draw ``b`` uses its own sub-stream of ``stream`` (default: the stream
    seeded by ``bcfg.seed``), so results do not depend on execution order.
    """
    root = stream if stream is not None else RandomStream(bcfg.seed)

    def one(b):
        return bootstrap_draw_from_fit(fitted, draw_weights(bcfg, fitted.n, root.substream(b)), solver)

    if bcfg.workers > 1:
        with ThreadPoolExecutor(bcfg.workers) as pool:
            out = list(pool.map(one, range(bcfg.B)))
    else:
        out = [one(b) for b in range(bcfg.B)]
    return np.asarray(out)


def symmetric_p_value(theta_hat, theta_H0, draws) -> float:
    """Share of ``|theta_b - theta_hat|`` at least as large as ``|theta_hat - theta_H0|``."""
    dev = np.abs(np.asarray(draws) - theta_hat)
    return float(np.mean(dev >= abs(theta_hat - theta_H0)))


def equal_tail(theta_hat, theta_H0, draws, level) -> dict:
    """Equal-tail alternative built from quantiles of ``theta_b - theta_hat``."""
    centered = np.asarray(draws) - theta_hat
    lo = empirical_quantile(centered, level / 2)
    hi = empirical_quantile(centered, 1 - level / 2)
    stat = theta_hat - theta_H0
    p = 2.0 * min(np.mean(centered <= stat), np.mean(centered >= stat))
    return {
        "lower_q": lo,
        "upper_q": hi,
        "ci": (theta_hat - hi, theta_hat - lo),
        "reject": bool(stat < lo or stat > hi),
        "p_value": float(min(1.0, p)),
    }


def result_from_draws(theta_hat, draws, theta_H0, level, n) -> TestResult:
    draws = np.asarray(draws, dtype=float)
    q = empirical_quantile(np.abs(draws - theta_hat), 1.0 - level)
    return TestResult(
        theta_hat=float(theta_hat),
        theta_H0=float(theta_H0),
        draws=draws,
        level=level,
        q_hat=q,
        c_hat=float(np.sqrt(n) * q),
        reject=bool(abs(theta_hat - theta_H0) > q),
        p_value=symmetric_p_value(theta_hat, theta_H0, draws),
        ci=(theta_hat - q, theta_hat + q),
        n=n,
        small_B=draws.size < MIN_RELIABLE_B,
        equal_tail=equal_tail(theta_hat, theta_H0, draws, level),
    )


def test(data: Dataset, cfg: FitConfig, bcfg: BootstrapConfig, theta_H0: float, fitted: Fit | None = None) -> TestResult:
    """Bootstrap test of ``theta = theta_H0`` at the fixed penalty ``cfg.lam``."""
    if fitted is None:
        fitted = fit(data, cfg)
    draws = bootstrap_draws(fitted, bcfg, cfg.solver)
    return result_from_draws(ame(fitted), draws, theta_H0, bcfg.level, fitted.n)


test.__test__ = False


def confidence_interval(theta_hat: float, draws, level: float) -> tuple:
    """Symmetric interval ``theta_hat +/- q`` from inverting the bootstrap test."""
    q = empirical_quantile(np.abs(np.asarray(draws, dtype=float) - theta_hat), 1.0 - level)
    return (theta_hat - q, theta_hat + q)
