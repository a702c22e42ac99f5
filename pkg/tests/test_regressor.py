import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from rkhs_ame.estimator import FitConfig, ame, fit, predict_h
from rkhs_ame.exceptions import ConfigError
from rkhs_ame.kernels import UnsupportedDerivativeError
from rkhs_ame.regressor import AMERegressor
from rkhs_ame.selection import select_lambda
from rkhs_ame.numerics import RandomStream


def test_params_round_trip():
    est = AMERegressor(lam=0.1, kernel="sobolev")
    params = est.get_params()
    assert params["lam"] == 0.1 and params["kernel"] == "sobolev"
    est.set_params(lam=0.2)
    assert clone(est).get_params()["lam"] == 0.2


def test_fixed_penalty_matches_core(small_data_x):
    d = small_data_x
    est = AMERegressor(lam=1e-3).fit(d.Z, d.Y, W=d.W, X=d.X)
    core = fit(d, FitConfig(lam=1e-3))
    np.testing.assert_array_equal(est.alpha_, core.alpha)
    np.testing.assert_array_equal(est.beta_, core.beta)
    assert est.ame_ == ame(core)
    assert est.cv_results_ is None
    np.testing.assert_allclose(est.predict(d.Z), predict_h(core, d.Z))
    np.testing.assert_allclose(est.predict(d.Z, d.X), predict_h(core, d.Z) + d.X @ core.beta)
    assert est.predict_derivative(d.Z).mean() == pytest.approx(est.ame_)
    feats = est.transform(d.Z)
    assert feats.shape == (d.n, 2)
    np.testing.assert_allclose(feats[:, 1], est.predict_derivative(d.Z))


def test_cross_validated_penalty(small_data):
    d = small_data
    est = AMERegressor(random_state=4).fit(d.Z.reshape(-1, 1), d.Y, W=d.W)
    lam, res = select_lambda(d, FitConfig(), stream=RandomStream(4, 1))
    assert est.lambda_ == lam
    np.testing.assert_array_equal(est.cv_results_["criterion"], res.criteria)


def test_inference_methods(small_data):
    d = small_data
    est = AMERegressor(lam=1e-3, n_bootstrap=49, random_state=1).fit(d.Z, d.Y, W=d.W)
    res = est.test(0.0)
    assert res.draws.shape == (49,)
    assert est.confidence_interval() == res.ci
    lo, hi = est.confidence_interval(level=0.5)
    assert res.ci[0] <= lo <= hi <= res.ci[1]
    again = AMERegressor(lam=1e-3, n_bootstrap=49, random_state=1).fit(d.Z, d.Y, W=d.W)
    np.testing.assert_array_equal(again.test(0.0).draws, res.draws)
    with pytest.raises(ConfigError):
        est.confidence_interval(level=1.5)


def test_intercept_prediction(small_data_x):
    d = small_data_x
    est = AMERegressor(lam=1e-3, fit_intercept=True).fit(d.Z, d.Y + 3.0, W=d.W, X=d.X)
    assert est.beta_.shape == (3,)
    pred = est.predict(d.Z, d.X)
    assert pred.shape == (d.n,)
    np.testing.assert_allclose(pred - est.predict(d.Z), d.X @ est.beta_[:2] + est.beta_[2])


def test_score_is_r2(small_data):
    d = small_data
    est = AMERegressor(lam=1e-3).fit(d.Z, d.Y, W=d.W)
    assert est.score(d.Z, d.Y) <= 1.0


def test_validation(small_data):
    d = small_data
    with pytest.raises(NotFittedError):
        AMERegressor().predict(d.Z)
    with pytest.raises(ValueError):
        AMERegressor(lam=1e-3).fit(np.column_stack([d.Z, d.Z]), d.Y, W=d.W)
    with pytest.raises(ValueError):
        AMERegressor(lam=1e-3).fit(d.Z[:-1], d.Y, W=d.W)
    bad = d.Y.copy()
    bad[0] = np.nan
    with pytest.raises(ValueError):
        AMERegressor(lam=1e-3).fit(d.Z, bad, W=d.W)
    with pytest.raises(ConfigError):
        AMERegressor(lam=-1.0).fit(d.Z, d.Y, W=d.W)
    with pytest.raises(ConfigError):
        AMERegressor(kernel="cosine").fit(d.Z, d.Y, W=d.W)
    with pytest.raises(ConfigError):
        AMERegressor(random_state=-3).fit(d.Z, d.Y, W=d.W)


def test_random_state_variants(small_data):
    d = small_data
    est = AMERegressor(lam=1e-3, random_state=np.random.RandomState(0)).fit(d.Z, d.Y, W=d.W)
    assert isinstance(est.seed_, int)
    assert AMERegressor(lam=1e-3, random_state=None).fit(d.Z, d.Y, W=d.W).seed_ >= 0


def test_non_differentiable_kernel(small_data):
    d = small_data
    est = AMERegressor(lam=1e-3, kernel="sobolev", sobolev_order=1).fit(d.Z, d.Y, W=d.W)
    assert np.isnan(est.ame_)
    assert est.predict(d.Z).shape == (d.n,)
    with pytest.raises(UnsupportedDerivativeError):
        est.test(0.0)
