"""Simulation designs and warp-speed Monte Carlo size/power experiments.

Data are generated as

    Z   = (b W + V) / sqrt(1 + b**2),   b = sqrt(rho_zw**2 / (1 - rho_zw**2))
    eps = (a V + U) / sqrt(1 + a**2),   a = sqrt(rho_eps_v**2 / (1 - rho_eps_v**2))
    Y   = h0(Z) [+ beta_x X] + eps

with ``W, V, U`` independent standard normals. In the partially linear
design ``(X, W)`` is bivariate normal with unit variances and correlation
``corr_xw``. Two treatment functions are available, both with unit variance
under ``Z ~ N(0, 1)``: ``z**2 / sqrt(2)`` and
``sqrt(3 sqrt(3)) z exp(-z**2 / 2)``.

Warp-speed Monte Carlo draws a single bootstrap statistic per replication and
uses the pooled collection ``{|theta_b,r - theta_r|}`` as the reference
distribution for every replication.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .estimator import Dataset, FitConfig, ame, fit
from .exceptions import ConfigError
from .inference import BootstrapConfig, bootstrap_draws
from .numerics import RandomStream, empirical_quantile
from .selection import DEFAULT_GRID, select_lambda

DESIGNS = ("nonparametric", "partially_linear")
H0_VARIANTS = ("quadratic", "nonpolynomial")

_C2 = math.sqrt(3.0 * math.sqrt(3.0))


@dataclass(frozen=True)
class DgpSpec:
    design: str = "nonparametric"
    h0: str = "quadratic"
    rho_eps_v: float = 0.5
    rho_zw: float = 0.8
    n: int = 100
    beta_x: float = 1.0
    corr_xw: float = 0.5

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ConfigError(f"design must be one of {DESIGNS}")
        if self.h0 not in H0_VARIANTS:
            raise ConfigError(f"h0 must be one of {H0_VARIANTS}")
        if not 0.0 <= self.rho_eps_v < 1.0:
            raise ConfigError("rho_eps_v must lie in [0, 1)")
        if not 0.0 < self.rho_zw < 1.0:
            raise ConfigError("rho_zw must lie in (0, 1)")
        if not -1.0 < self.corr_xw < 1.0:
            raise ConfigError("corr_xw must lie in (-1, 1)")
        if self.n < 4:
            raise ConfigError("n must be at least 4")

    @property
    def a(self) -> float:
        return math.sqrt(self.rho_eps_v**2 / (1.0 - self.rho_eps_v**2))

    @property
    def b(self) -> float:
        return math.sqrt(self.rho_zw**2 / (1.0 - self.rho_zw**2))


def h0_value(variant: str, z):
    z = np.asarray(z, dtype=float)
    if variant == "quadratic":
        return z**2 / math.sqrt(2.0)
    if variant == "nonpolynomial":
        return _C2 * z * np.exp(-0.5 * z**2)
    raise ConfigError(f"unknown h0 variant {variant!r}")


def h0_deriv(variant: str, z):
    z = np.asarray(z, dtype=float)
    if variant == "quadratic":
        return math.sqrt(2.0) * z
    if variant == "nonpolynomial":
        return _C2 * (1.0 - z**2) * np.exp(-0.5 * z**2)
    raise ConfigError(f"unknown h0 variant {variant!r}")


def true_ame(variant: str) -> float:
    """``E[h0'(Z)]`` for ``Z ~ N(0, 1)``.

    For the non-polynomial case ``E[(1 - Z**2) exp(-Z**2/2)] = 1/(2 sqrt(2))``,
    giving ``3**(3/4) / (2 sqrt(2))``.
    """
    if variant == "quadratic":
        return 0.0
    if variant == "nonpolynomial":
        return 3.0**0.75 / (2.0 * math.sqrt(2.0))
    raise ConfigError(f"unknown h0 variant {variant!r}")


def draw_sample(spec: DgpSpec, stream: RandomStream) -> Dataset:
    rng = stream.generator()
    n = spec.n
    W, V, U = rng.standard_normal((3, n))
    Z = (spec.b * W + V) / math.sqrt(1.0 + spec.b**2)
    eps = (spec.a * V + U) / math.sqrt(1.0 + spec.a**2)
    Y = h0_value(spec.h0, Z) + eps
    if spec.design == "nonparametric":
        return Dataset(Y, Z, None, W[:, None])
    E = rng.standard_normal(n)
    X = spec.corr_xw * W + math.sqrt(1.0 - spec.corr_xw**2) * E
    Y = Y + spec.beta_x * X
    return Dataset(Y, Z, X[:, None], W[:, None])


def tsls(data: Dataset):
    """Linear 2SLS of ``Y`` on ``(Z, X, 1)`` with instruments ``(W, X, 1)``.

    Returns the coefficient on ``Z`` and its heteroskedasticity-robust
    standard error.
    """
    n = data.n
    one = np.ones((n, 1))
    R = np.hstack([data.Z[:, None], data.X, one])
    Q = np.hstack([data.W, data.X, one])
    QtQ_inv = np.linalg.pinv(Q.T @ Q)
    P_R = Q @ (QtQ_inv @ (Q.T @ R))
    coef = np.linalg.lstsq(P_R, data.Y, rcond=None)[0]
    u = data.Y - R @ coef
    bread = np.linalg.pinv(P_R.T @ P_R)
    meat = (P_R * u[:, None] ** 2).T @ P_R
    cov = bread @ meat @ bread * n / (n - R.shape[1])
    return float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0)))


@dataclass(frozen=True)
class Replication:
    theta_hat: float
    draws: np.ndarray
    lam: float
    tsls_theta: float
    tsls_se: float


@dataclass
class SimReport:
    spec: DgpSpec
    R: int
    levels: tuple
    gammas: tuple
    rates: np.ndarray
    tsls_rates: np.ndarray
    seed: int
    mode: str
    theta0: float
    theta_hats: np.ndarray = field(repr=False)
    reference: np.ndarray = field(repr=False)
    lambdas: np.ndarray = field(repr=False)
    wall_time: float = 0.0

    def rate(self, level: float, gamma: float = 0.0) -> float:
        i = self.gammas.index(gamma)
        j = self.levels.index(level)
        return float(self.rates[i, j])

    @property
    def mc_stderr(self) -> np.ndarray:
        return np.sqrt(self.rates * (1.0 - self.rates) / self.R)

    def size_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["design", "h0", "rho", "n", "level", "rate", "mc_stderr", "tsls_rate"])
        i = self.gammas.index(0.0) if 0.0 in self.gammas else 0
        for j, lev in enumerate(self.levels):
            w.writerow([
                self.spec.design, self.spec.h0, _fmt(self.spec.rho_eps_v), self.spec.n,
                _fmt(lev), _fmt(self.rates[i, j]), _fmt(self.mc_stderr[i, j]),
                _fmt(self.tsls_rates[i, j]),
            ])
        return buf.getvalue()

    def power_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gamma", "level", "rejection_rate", "mc_stderr", "tsls_rate"])
        for i, g in enumerate(self.gammas):
            for j, lev in enumerate(self.levels):
                w.writerow([
                    _fmt(g), _fmt(lev), _fmt(self.rates[i, j]),
                    _fmt(self.mc_stderr[i, j]), _fmt(self.tsls_rates[i, j]),
                ])
        return buf.getvalue()

    def summary(self) -> dict:
        out = {k: v for k, v in asdict(self.spec).items()}
        out.update(R=self.R, seed=self.seed, mode=self.mode, theta0=self.theta0)
        return out


def _fmt(x) -> str:
    return repr(float(x))


def _one_replication(args):
    spec, cfg, grid, seed, r, B = args
    stream = RandomStream(seed, r)
    data = draw_sample(spec, stream.substream(0))
    lam, _ = select_lambda(data, cfg, grid, stream.substream(1))
    fitted = fit(data, cfg.with_lambda(lam))
    theta = ame(fitted)
    bcfg = BootstrapConfig(B=B, level=0.05, seed=seed)
    draws = bootstrap_draws(fitted, bcfg, cfg.solver, stream.substream(2))
    t2, se2 = tsls(data)
    return Replication(theta, draws, lam, t2, se2)


def run_replications(spec, R, seed, cfg=None, grid=None, B=1, workers=1):
    cfg = cfg or FitConfig()
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=float)
    jobs = [(spec, cfg, grid, seed, r, B) for r in range(R)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_one_replication, jobs, chunksize=max(1, R // (8 * workers))))
    return [_one_replication(j) for j in jobs]


def _rates(reps, theta0, levels, gammas, mode):
    theta = np.array([rep.theta_hat for rep in reps])
    R = theta.size
    if mode == "warp":
        reference = np.array([abs(rep.draws[0] - rep.theta_hat) for rep in reps])
        q = np.array([[empirical_quantile(reference, 1.0 - lev)] * R for lev in levels])
    else:
        reference = np.concatenate([np.abs(rep.draws - rep.theta_hat) for rep in reps])
        q = np.array([
            [empirical_quantile(np.abs(rep.draws - rep.theta_hat), 1.0 - lev) for rep in reps]
            for lev in levels
        ])
    t2 = np.array([rep.tsls_theta for rep in reps])
    se2 = np.array([rep.tsls_se for rep in reps])
    rates = np.empty((len(gammas), len(levels)))
    tsls_rates = np.empty_like(rates)
    for i, g in enumerate(gammas):
        dev = np.abs(theta - (theta0 + g))
        for j, lev in enumerate(levels):
            rates[i, j] = np.mean(dev > q[j])
            crit = stats.norm.ppf(1.0 - lev / 2.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                tsls_rates[i, j] = np.mean(np.abs(t2 - (theta0 + g)) / se2 > crit)
    return rates, tsls_rates, theta, reference


def run_power_curve(
    spec: DgpSpec,
    gammas=(0.0, 0.25, 0.5, 0.75, 1.0),
    levels=(0.05, 0.10),
    R: int = 1000,
    seed: int = 0,
    B_per_rep: int = 1,
    cfg: FitConfig | None = None,
    grid=None,
    workers: int = 1,
) -> SimReport:
    """Rejection rates of ``theta = theta0 + gamma`` for each ``gamma``.

    ``B_per_rep = 1`` is the warp-speed scheme; larger values run a full
    bootstrap inside every replication (each replication then uses its own
    critical value).
    """
    gammas = tuple(float(g) for g in gammas)
    levels = tuple(float(a) for a in levels)
    if not gammas:
        raise ConfigError("gamma grid must be non-empty")
    if B_per_rep < 1:
        raise ConfigError("B_per_rep must be positive")
    start = time.perf_counter()
    reps = run_replications(spec, R, seed, cfg, grid, B_per_rep, workers)
    mode = "warp" if B_per_rep == 1 else "full"
    theta0 = true_ame(spec.h0)
    rates, tsls_rates, theta, reference = _rates(reps, theta0, levels, gammas, mode)
    return SimReport(
        spec=spec,
        R=R,
        levels=levels,
        gammas=gammas,
        rates=rates,
        tsls_rates=tsls_rates,
        seed=seed,
        mode=mode,
        theta0=theta0,
        theta_hats=theta,
        reference=reference,
        lambdas=np.array([rep.lam for rep in reps]),
        wall_time=time.perf_counter() - start,
    )


def run_size_experiment(
    spec: DgpSpec,
    levels=(0.05, 0.10),
    R: int = 1000,
    seed: int = 0,
    B_per_rep: int = 1,
    cfg: FitConfig | None = None,
    grid=None,
    workers: int = 1,
    min_R: int = 100,
) -> SimReport:
    """Rejection rates under the null ``theta = theta0``."""
    if R < min_R:
        raise ConfigError(f"size experiments need R >= {min_R}")
    return run_power_curve(spec, (0.0,), levels, R, seed, B_per_rep, cfg, grid, workers)
