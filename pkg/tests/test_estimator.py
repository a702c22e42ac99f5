import numpy as np
import pytest

from conftest import simulate
from oracles import brute_force_ame, brute_force_fit, matrices, mc_integral_objective, standardized
from rkhs_ame.estimator import (
    Dataset,
    FitConfig,
    ame,
    fit,
    objective_value,
    predict_h,
    predict_h_deriv,
    prepare,
)
from rkhs_ame.exceptions import CollinearityError, ConfigError, InsufficientDataError
from rkhs_ame.kernels import KernelSpec, UnsupportedDerivativeError, kernel_value


@pytest.mark.parametrize("p", [0, 1, 2])
def test_matches_brute_force_minimizer(p):
    rng = np.random.default_rng(100 + p)
    data = simulate(6, rng, p=p)
    lam = 1e-2
    f = fit(data, FitConfig(lam=lam))
    alpha, beta = brute_force_fit(data, lam)
    K, _ = matrices(data)
    np.testing.assert_allclose(f.K @ f.alpha, K @ alpha, rtol=1e-4, atol=1e-8)
    np.testing.assert_allclose(f.beta, beta, rtol=1e-4, atol=1e-8)
    assert ame(f) == pytest.approx(brute_force_ame(data, alpha), rel=1e-4)


def test_internal_matrices_match_independent_construction(small_data_x):
    d = prepare(small_data_x, FitConfig())
    K, F = matrices(small_data_x)
    np.testing.assert_allclose(d.gram.K_mat, K, atol=1e-14)
    np.testing.assert_allclose(d.F, F, atol=1e-14)


def test_fit_dominates_zero_candidate(small_data):
    cfg = FitConfig(lam=1e-3)
    f = fit(small_data, cfg)
    at_fit = objective_value(small_data, cfg, f.alpha, f.beta)
    at_zero = objective_value(small_data, cfg, np.zeros(small_data.n), [])
    Y = small_data.Y
    assert at_zero == pytest.approx(Y @ f.F @ Y / small_data.n**2)
    assert at_fit <= at_zero


def test_local_minimality(small_data_x):
    cfg = FitConfig(lam=1e-3)
    f = fit(small_data_x, cfg)
    design = prepare(small_data_x, cfg)
    best = objective_value(small_data_x, cfg, f.alpha, f.beta, design)
    rng = np.random.default_rng(0)
    for _ in range(100):
        da = rng.standard_normal(f.alpha.size)
        db = rng.standard_normal(f.beta.size)
        da *= 0.1 * rng.uniform() / np.linalg.norm(da)
        db *= 0.1 * rng.uniform() / np.linalg.norm(db)
        assert objective_value(small_data_x, cfg, f.alpha + da, f.beta + db, design) >= best - 1e-15


def test_huge_penalty_kills_nonparametric_part(small_data_x):
    f = fit(small_data_x, FitConfig(lam=1e9))
    F, X, Y = f.F, small_data_x.X, small_data_x.Y
    beta_lin = np.linalg.solve(X.T @ F @ X, X.T @ F @ Y)
    assert np.linalg.norm(f.alpha) < 1e-6
    np.testing.assert_allclose(f.beta, beta_lin, rtol=1e-6)


def test_quadratic_form_matches_integral_form(small_data_x):
    cfg = FitConfig(lam=1e-3)
    f = fit(small_data_x, cfg)
    d = prepare(small_data_x, cfg)
    r = small_data_x.Y - small_data_x.X @ f.beta - f.K @ f.alpha
    quad = r @ d.F @ r / small_data_x.n**2
    V = standardized(np.hstack([small_data_x.X, small_data_x.W]))
    est, se = mc_integral_objective(r, V, np.random.default_rng(9))
    assert abs(est - quad) <= 3 * se


@pytest.mark.parametrize("n", [20, 80, 200])
@pytest.mark.parametrize("p", [0, 2])
@pytest.mark.parametrize("lam", [1e-8, 1e-4, 1.0])
def test_first_order_conditions(n, p, lam):
    data = simulate(n, np.random.default_rng(n + p), p=p)
    f = fit(data, FitConfig(lam=lam))
    assert f.foc_residual <= 1e-8 * f.rhs_norm


def test_beta_self_consistency(small_data_x):
    f = fit(small_data_x, FitConfig(lam=1e-3))
    F, X, Y = f.F, small_data_x.X, small_data_x.Y
    beta = np.linalg.solve(X.T @ F @ X, X.T @ F @ (Y - f.K @ f.alpha))
    np.testing.assert_allclose(f.beta, beta, rtol=1e-10)


def test_alpha_in_range_of_K_with_duplicates(rng):
    data = simulate(30, rng, p=1)
    Z = data.Z.copy()
    Z[5] = Z[4]
    Z[20] = Z[3]
    dup = Dataset(data.Y, Z, data.X, data.W)
    f = fit(dup, FitConfig(lam=1e-3))
    s, U = np.linalg.eigh(f.K)
    null = U[:, s < 1e-10 * s.max()]
    assert null.shape[1] >= 2
    assert np.linalg.norm(null.T @ f.alpha) <= 1e-8 * np.linalg.norm(f.alpha)
    # any solution differing by a null-space vector gives the same function
    shifted = f.alpha + null @ rng.standard_normal(null.shape[1]) * 10
    np.testing.assert_allclose(f.K @ shifted, f.K @ f.alpha, atol=1e-8)
    assert f.foc_residual <= 1e-8 * f.rhs_norm


def test_full_solver_agrees(small_data_x):
    a = fit(small_data_x, FitConfig(lam=1e-2))
    b = fit(small_data_x, FitConfig(lam=1e-2, solver="full"))
    np.testing.assert_allclose(a.K @ a.alpha, b.K @ b.alpha, atol=1e-7)
    np.testing.assert_allclose(a.beta, b.beta, atol=1e-7)


def test_scale_equivariance(small_data_x):
    c = 3.7
    base = fit(small_data_x, FitConfig(lam=1e-3))
    d = small_data_x
    scaled = fit(Dataset(c * d.Y, d.Z, d.X, d.W), FitConfig(lam=1e-3))
    np.testing.assert_allclose(scaled.alpha, c * base.alpha, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(scaled.beta, c * base.beta, rtol=1e-8)
    assert ame(scaled) == pytest.approx(c * ame(base), rel=1e-8)


def test_empty_covariates_equivalent(small_data):
    d = small_data
    a = fit(Dataset(d.Y, d.Z, None, d.W), FitConfig())
    b = fit(Dataset(d.Y, d.Z, np.empty((d.n, 0)), d.W), FitConfig())
    np.testing.assert_array_equal(a.alpha, b.alpha)
    assert a.beta.size == 0


def test_predict_h(small_data_x):
    f = fit(small_data_x, FitConfig(lam=1e-3))
    np.testing.assert_allclose(predict_h(f, small_data_x.Z), f.K @ f.alpha, atol=1e-12)
    zt = f.z_transform
    spec = f.kernel
    pts = np.linspace(-3, 3, 13)
    loop = [
        sum(a * kernel_value(spec, zt.apply(z), zi) for a, zi in zip(f.alpha, f.design.Z_std))
        for z in pts
    ]
    np.testing.assert_allclose(predict_h(f, pts), loop, atol=1e-12)


def test_zero_alpha_gives_zero_function(small_data):
    f = fit(small_data, FitConfig(lam=1e-3))
    from dataclasses import replace

    z = replace(f, alpha=np.zeros_like(f.alpha))
    assert np.all(predict_h(z, [0.0, 1.0]) == 0)
    assert np.all(predict_h_deriv(z, [0.0, 1.0]) == 0)
    assert ame(z) == 0.0


@pytest.mark.parametrize("scale", [1.0, 2.0, 10.0])
def test_derivative_finite_difference(small_data_x, scale):
    d = small_data_x
    f = fit(Dataset(d.Y, scale * d.Z + 1.0, d.X, d.W), FitConfig(lam=1e-3))
    pts = np.linspace(-2, 2, 21) * scale + 1.0
    h = 1e-5
    fd = (predict_h(f, pts + h) - predict_h(f, pts - h)) / (2 * h)
    assert np.max(np.abs(predict_h_deriv(f, pts) - fd)) <= 1e-6


def test_chain_rule_scale_two(rng):
    data = simulate(30, rng, p=1)
    z, X, W = standardized(data.Z), standardized(data.X), standardized(data.W)
    f_off = fit(Dataset(data.Y, z, X, W), FitConfig(lam=1e-3, standardize_inputs=False))
    f_on = fit(Dataset(data.Y, 2 * z, X, W), FitConfig(lam=1e-3))
    pts = np.linspace(-1.5, 1.5, 7)
    np.testing.assert_allclose(predict_h(f_on, 2 * pts), predict_h(f_off, pts), rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(
        predict_h_deriv(f_on, 2 * pts), 0.5 * predict_h_deriv(f_off, pts), rtol=1e-7, atol=1e-9
    )


def test_ame_two_paths(small_data_x):
    f = fit(small_data_x, FitConfig(lam=1e-3))
    assert ame(f) == pytest.approx(np.mean(predict_h_deriv(f, small_data_x.Z)), abs=1e-12)


def test_sobolev_kernel_fit(small_data):
    f = fit(small_data, FitConfig(kernel=KernelSpec("sobolev", order=2), lam=1e-4))
    assert f.foc_residual <= 1e-8 * f.rhs_norm
    pts = np.linspace(small_data.Z.min() + 0.01, small_data.Z.max() - 0.01, 9)
    h = 1e-5
    fd = (predict_h(f, pts + h) - predict_h(f, pts - h)) / (2 * h)
    assert np.max(np.abs(predict_h_deriv(f, pts) - fd)) <= 1e-5
    f1 = fit(small_data, FitConfig(kernel=KernelSpec("sobolev", order=1), lam=1e-4))
    with pytest.raises(UnsupportedDerivativeError):
        ame(f1)


def test_intercept_and_conditioning_modes(small_data_x):
    d = small_data_x
    shifted = Dataset(d.Y + 5.0, d.Z, d.X, d.W)
    f = fit(shifted, FitConfig(lam=1e-3, include_intercept=True))
    assert f.beta.shape == (3,)
    assert f.beta_names[-1] == "intercept"
    g = fit(d, FitConfig(lam=1e-3, conditioning="w"))
    assert g.F.shape == (d.n, d.n)
    assert not np.allclose(g.F, fit(d, FitConfig(lam=1e-3)).F)


def test_errors(small_data_x):
    d = small_data_x
    with pytest.raises(ConfigError):
        FitConfig(lam=0.0)
    with pytest.raises(ConfigError):
        FitConfig(lam=-1.0)
    collinear = Dataset(d.Y, d.Z, np.column_stack([d.X[:, 0], 2 * d.X[:, 0]]), d.W)
    with pytest.raises(CollinearityError):
        fit(collinear, FitConfig())
    tiny = Dataset([1.0, 2.0], [0.1, 0.5], None, [0.3, 0.2])
    with pytest.raises(InsufficientDataError):
        fit(tiny, FitConfig())
