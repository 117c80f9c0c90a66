import numpy as np
import pandas as pd
import pytest

from sparsereg.dataset import Dataset, Role, make_folds, prepare_design
from sparsereg.errors import ConfigError, DataError
from sparsereg.models.lasso_gaussian import (GaussianSolver, cv_lasso, fit_gaussian_arrays,
                                             fit_lasso_path, kkt_violation, lambda_max_gaussian,
                                             nonzero_report, soft_threshold)
from sparsereg.models.path import LambdaRule, PathConfig, solve_at


def _data(n=150, p=20, seed=0, noise=1.0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[[0, 3, 7]] = [2.0, -1.5, 1.0]
    y = 0.5 + x @ beta + noise * rng.standard_normal(n)
    names = [f'GENE{j + 1:05d}' for j in range(p)]
    frame = pd.DataFrame(x, columns=names)
    frame['MMSE'] = y
    return Dataset.from_frame(frame, roles={'MMSE': Role.Outcome}), names


def test_soft_threshold():
    assert soft_threshold(np.array([3.0, -3.0, 0.5]), 1.0).tolist() == [2.0, -2.0, 0.0]
    assert soft_threshold(-0.2, 0.0) == -0.2
    with pytest.raises(ConfigError):
        soft_threshold(1.0, -1.0)


def test_path_starts_at_zero_and_satisfies_kkt():
    d, names = _data()
    path = fit_lasso_path(d, 'MMSE', names, PathConfig(n_lambda=30))
    assert path.lambdas.size == 30
    assert np.all(np.diff(path.lambdas) < 0)
    assert np.all(path.coefficients[0] == 0)
    assert path.n_nonzero[1] >= 1
    assert path.lambdas[-1] == pytest.approx(1e-3 * path.lambdas[0])
    for lam in path.lambdas:
        assert kkt_violation(d, 'MMSE', path.fit_at(lam)) < 1e-6

    x = prepare_design(d.matrix(names))[0]
    y = d.column('MMSE')
    assert path.lambdas[0] == pytest.approx(lambda_max_gaussian(x, y - y.mean()))


def test_wide_design_uses_larger_lambda_floor():
    d, names = _data(n=15, p=20)
    path = fit_lasso_path(d, 'MMSE', names, PathConfig(n_lambda=10))
    assert path.lambdas[-1] == pytest.approx(1e-2 * path.lambdas[0])


def test_zero_penalty_is_least_squares():
    d, names = _data(p=5)
    path = fit_lasso_path(d, 'MMSE', names, PathConfig(lambdas=[0.5, 0.1, 0.0]))
    fit = path.fit_at(0.0)
    x = d.matrix(names)
    design = np.column_stack([np.ones(d.n_rows), x])
    coef, *_ = np.linalg.lstsq(design, d.column('MMSE'), rcond=None)
    assert fit.intercept == pytest.approx(coef[0], abs=1e-5)
    assert np.allclose(fit.coefficients, coef[1:], atol=1e-5)


def test_orthonormal_design_is_soft_thresholding():
    rng = np.random.default_rng(5)
    n = 100
    raw = rng.standard_normal((n, 4))
    q, _ = np.linalg.qr(raw - raw.mean(axis=0))
    x = q * np.sqrt(n)
    y = x @ np.array([1.0, -0.5, 0.2, 0.0]) + 0.3 * rng.standard_normal(n)
    lams = np.array([0.4, 0.15, 0.05])
    _, _, coefs, _, _ = fit_gaussian_arrays(x, y, PathConfig(standardize=False, lambdas=lams))
    z = x.T @ (y - y.mean()) / n
    for i, lam in enumerate(lams):
        assert np.allclose(coefs[i], soft_threshold(z, lam), atol=1e-8)


def test_gram_and_naive_updates_agree():
    d, names = _data(n=80, p=30)
    x = prepare_design(d.matrix(names))[0]
    y = d.column('MMSE')
    y = y - y.mean()
    lam = 0.05 * lambda_max_gaussian(x, y)
    betas = []
    for use_gram in (False, True):
        solver = GaussianSolver(x, y, use_gram=use_gram)
        solve_at(solver, lam, tol=1e-10, kkt_tol=1e-9, max_sweeps=10_000)
        betas.append(solver.beta.copy())
    assert np.allclose(betas[0], betas[1], atol=1e-8)


def test_objective_never_increases():
    d, names = _data()
    seen = []
    fit_lasso_path(d, 'MMSE', names, PathConfig(lambdas=[0.2]), on_sweep=seen.append)
    assert len(seen) >= 2
    assert np.all(np.diff(seen) <= 1e-12)


def test_constant_predictor_never_enters():
    d, names = _data()
    d = d.with_columns({'FLAT': np.full(d.n_rows, 3.0)})
    path = fit_lasso_path(d, 'MMSE', names + ['FLAT'], PathConfig(n_lambda=20))
    assert path.constant == ['FLAT']
    assert np.all(path.coefficients[:, -1, 0] == 0)


def test_cross_validation_and_report():
    d, names = _data(n=200)
    folds = make_folds(d.n_rows, 5, seed=1)
    cv = cv_lasso(d, 'MMSE', names, folds, PathConfig(n_lambda=40))
    assert cv.fold_losses.shape == (5, 40)
    assert cv.lambda_1se >= cv.lambda_min
    i = int(np.argmin(cv.cv_mean))
    j = cv.path.index_of(cv.lambda_1se)
    assert cv.cv_mean[j] <= cv.cv_mean[i] + cv.cv_se[i]
    assert cv.cv_se[i] == pytest.approx(cv.fold_losses[:, i].std(ddof=1) / np.sqrt(5))

    fit = cv.fit(LambdaRule.MIN)
    assert {'GENE00001', 'GENE00004', 'GENE00008'} <= set(fit.nonzero)

    report = nonzero_report(cv.path, cv.lambda_min, top_k=2)
    assert list(report.columns) == ['rank', 'name', 'coefficient', 'abs_weight']
    assert report['name'].tolist() == ['GENE00001', 'GENE00004']
    assert report['abs_weight'].tolist() == sorted(report['abs_weight'], reverse=True)

    frame = cv.to_frame()
    assert list(frame.columns) == ['lambda', 'cv_mean', 'cv_se', 'n_nonzero']

    # concurrent folds give the same curve
    again = cv_lasso(d, 'MMSE', names, folds, PathConfig(n_lambda=40, threads=2))
    assert np.array_equal(again.cv_mean, cv.cv_mean)


def test_strong_signal_selected_over_seeds():
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(50 + seed)
        x = rng.standard_normal((100, 20))
        names = [f'GENE{j + 1:05d}' for j in range(20)]
        frame = pd.DataFrame(x, columns=names)
        frame['Y'] = x[:, 0] + rng.standard_normal(100)
        d = Dataset.from_frame(frame)
        cv = cv_lasso(d, 'Y', names, make_folds(100, 5, seed), PathConfig(n_lambda=20))
        hits += 'GENE00001' in cv.fit().nonzero
    assert hits >= 9


def test_bad_inputs():
    d, names = _data()
    flat = d.with_columns({'MMSE': np.ones(d.n_rows)})
    with pytest.raises(DataError):
        fit_lasso_path(flat, 'MMSE', names)
    with pytest.raises(ConfigError):
        fit_lasso_path(d, 'MMSE', names, PathConfig(lambdas=[0.1, 0.2]))
    with pytest.raises(ConfigError):
        fit_lasso_path(d, 'MMSE', names, PathConfig(n_lambda=0))
    path = fit_lasso_path(d, 'MMSE', names, PathConfig(n_lambda=5))
    with pytest.raises(ConfigError):
        path.fit_at(123.0)


def test_warm_start_matches_cold_start():
    d, names = _data()
    x, y = d.matrix(names), d.column('MMSE')
    lams, _, warm, _, _ = fit_gaussian_arrays(x, y, PathConfig(n_lambda=20, tol=1e-12, kkt_tol=1e-11))
    for i in (3, 10, 19):
        _, _, cold, _, _ = fit_gaussian_arrays(x, y, PathConfig(lambdas=[lams[i]], tol=1e-12, kkt_tol=1e-11))
        assert np.allclose(cold[0], warm[i], atol=1e-8)


def test_column_order_does_not_matter():
    d, names = _data()
    x, y = d.matrix(names), d.column('MMSE')
    perm = np.random.default_rng(7).permutation(len(names))
    config = PathConfig(n_lambda=20, tol=1e-12, kkt_tol=1e-11)
    lams, b0, b, _, _ = fit_gaussian_arrays(x, y, config)
    p_lams, p_b0, p_b, _, _ = fit_gaussian_arrays(x[:, perm], y, config)
    assert np.allclose(p_lams, lams, rtol=1e-12)
    assert np.allclose(p_b, b[:, perm], atol=1e-8)
    assert np.allclose(p_b0, b0, atol=1e-8)


if __name__ == "__main__":
    test_soft_threshold()
    test_path_starts_at_zero_and_satisfies_kkt()
    test_wide_design_uses_larger_lambda_floor()
    test_zero_penalty_is_least_squares()
    test_orthonormal_design_is_soft_thresholding()
    test_gram_and_naive_updates_agree()
    test_objective_never_increases()
    test_constant_predictor_never_enters()
    test_cross_validation_and_report()
    test_strong_signal_selected_over_seeds()
    test_bad_inputs()
    test_warm_start_matches_cold_start()
    test_column_order_does_not_matter()
