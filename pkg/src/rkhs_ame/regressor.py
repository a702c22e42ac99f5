"""scikit-learn style front end for the estimator, penalty selection and bootstrap."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .estimator import Dataset, FitConfig, ame, fit, predict_h, predict_h_deriv
from .exceptions import ConfigError
from .inference import BootstrapConfig, bootstrap_draws, confidence_interval, result_from_draws
from .kernels import KernelSpec, UnsupportedDerivativeError
from .numerics import RandomStream
from .selection import select_lambda
from .weighting import MuSpec

_CV_STREAM = 1
_BOOT_STREAM = 2


def _as_column(a, name):
    a = check_array(a, ensure_2d=False, dtype=float, input_name=name)
    if a.ndim == 2:
        if a.shape[1] != 1:
            raise ValueError(f"{name} must be one-dimensional or a single column")
        a = a[:, 0]
    return a


class AMERegressor(RegressorMixin, BaseEstimator):
    """Kernel IV regression of ``y`` on a scalar treatment with its average marginal effect.

    Parameters
    ----------
    kernel : {"gaussian", "sobolev"}
    length_scale : float
        Gaussian bandwidth on the standardized treatment.
    sobolev_order : int
        Order of the Sobolev kernel; derivatives need order >= 2.
    mu : {"laplace", "gaussian"}
        Spectral measure behind the instrument weighting.
    lam : float or None
        Penalty. ``None`` selects it by two-fold cross-validation over
        ``lambda_grid``.
    lambda_grid : array-like or None
        Candidate penalties; ``None`` uses 30 log-spaced values in ``[1e-8, 10]``.
    standardize : bool
    conditioning : {"xw", "w"}
        Which columns the moment condition conditions on.
    fit_intercept : bool
    solver : {"spectral", "full"}
    n_bootstrap : int
    level : float
        Significance level for :meth:`test` and :meth:`confidence_interval`.
    weight_family : {"exponential", "lognormal", "mammen"}
    random_state : int, RandomState or None
    n_jobs : int
        Threads used for the bootstrap and the penalty grid.

    Attributes
    ----------
    ame_ : float
    alpha_, beta_ : ndarray
    lambda_ : float
    cv_results_ : dict or None
        ``{"lambda": grid, "criterion": values}`` when the penalty was selected.
    fit_ : Fit
    seed_ : int
    """

    def __init__(
        self,
        kernel="gaussian",
        length_scale=1.0,
        sobolev_order=2,
        mu="laplace",
        lam=None,
        lambda_grid=None,
        standardize=True,
        conditioning="xw",
        fit_intercept=False,
        solver="spectral",
        n_bootstrap=499,
        level=0.05,
        weight_family="exponential",
        random_state=0,
        n_jobs=1,
    ):
        self.kernel = kernel
        self.length_scale = length_scale
        self.sobolev_order = sobolev_order
        self.mu = mu
        self.lam = lam
        self.lambda_grid = lambda_grid
        self.standardize = standardize
        self.conditioning = conditioning
        self.fit_intercept = fit_intercept
        self.solver = solver
        self.n_bootstrap = n_bootstrap
        self.level = level
        self.weight_family = weight_family
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self, lam):
        return FitConfig(
            kernel=KernelSpec(self.kernel, length_scale=self.length_scale, order=self.sobolev_order),
            mu=MuSpec(self.mu),
            lam=lam,
            standardize_inputs=bool(self.standardize),
            conditioning=self.conditioning,
            include_intercept=bool(self.fit_intercept),
            solver=self.solver,
        )

    def _bootstrap_config(self):
        return BootstrapConfig(
            B=int(self.n_bootstrap),
            level=float(self.level),
            seed=self.seed_,
            weight_family=self.weight_family,
            workers=int(self.n_jobs),
        )

    def _seed(self):
        rs = self.random_state
        if isinstance(rs, numbers.Integral):
            if rs < 0:
                raise ConfigError("random_state must be non-negative")
            return int(rs)
        return int(check_random_state(rs).randint(0, 2**31 - 1))

    def fit(self, Z, y, *, W, X=None):
        """Fit on treatment ``Z``, outcome ``y``, instruments ``W`` and optional covariates ``X``."""
        Z = _as_column(Z, "Z")
        y = _as_column(y, "y")
        W = check_array(W, ensure_2d=False, dtype=float, input_name="W")
        if X is not None:
            X = check_array(X, ensure_2d=False, dtype=float, input_name="X")
            check_consistent_length(Z, y, W, X)
        else:
            check_consistent_length(Z, y, W)
        self.seed_ = self._seed()
        data = Dataset(y, Z, X, W)
        if self.lam is None:
            lam, res = select_lambda(
                data,
                self._config(1.0),
                grid=self.lambda_grid,
                stream=RandomStream(self.seed_, _CV_STREAM),
                workers=int(self.n_jobs),
            )
            self.cv_results_ = {"lambda": res.values, "criterion": res.criteria}
        else:
            lam, self.cv_results_ = float(self.lam), None
        self.fit_ = fit(data, self._config(lam))
        self.data_ = data
        self.lambda_ = lam
        self.alpha_ = self.fit_.alpha
        self.beta_ = self.fit_.beta
        self.ame_ = ame(self.fit_) if self.fit_.kernel.differentiable else float("nan")
        self.n_features_in_ = 1
        self._draws = None
        return self

    def predict(self, Z, X=None):
        """Structural function at ``Z``, plus ``X @ beta`` when ``X`` is given."""
        check_is_fitted(self, "fit_")
        Z = _as_column(Z, "Z")
        out = predict_h(self.fit_, Z)
        if X is not None:
            X = check_array(X, ensure_2d=False, dtype=float, input_name="X")
            if X.ndim == 1:
                X = X[:, None]
            check_consistent_length(Z, X)
            beta = self.beta_[: self.data_.p]
            out = out + X @ beta
            if self.fit_intercept:
                out = out + self.beta_[-1]
        return out

    def predict_derivative(self, Z):
        check_is_fitted(self, "fit_")
        return predict_h_deriv(self.fit_, _as_column(Z, "Z"))

    def transform(self, Z):
        """Columns ``[h(Z), h'(Z)]`` of the fitted structural function."""
        check_is_fitted(self, "fit_")
        Z = _as_column(Z, "Z")
        return np.column_stack([predict_h(self.fit_, Z), predict_h_deriv(self.fit_, Z)])

    def bootstrap_draws(self):
        """Bootstrap AMEs at the fitted penalty, computed once and cached."""
        check_is_fitted(self, "fit_")
        if not self.fit_.kernel.differentiable:
            raise UnsupportedDerivativeError("the bootstrap needs a differentiable kernel")
        if self._draws is None:
            self._draws = bootstrap_draws(
                self.fit_, self._bootstrap_config(), self.solver, RandomStream(self.seed_, _BOOT_STREAM)
            )
        return self._draws

    def test(self, theta0=0.0):
        """Bootstrap test of ``AME = theta0``; returns a :class:`~rkhs_ame.inference.TestResult`."""
        draws = self.bootstrap_draws()
        return result_from_draws(self.ame_, draws, theta0, float(self.level), self.fit_.n)

    def confidence_interval(self, level=None):
        level = float(self.level if level is None else level)
        if not 0.0 < level < 1.0:
            raise ConfigError("level must lie in (0, 1)")
        return confidence_interval(self.ame_, self.bootstrap_draws(), level)
