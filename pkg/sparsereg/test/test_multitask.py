import numpy as np
import pandas as pd
import pytest

from sparsereg.dataset import Dataset, Role, make_folds, prepare_design
from sparsereg.errors import ConfigError
from sparsereg.models.lasso_gaussian import fit_gaussian_arrays
from sparsereg.models.multitask import (cv_multitask, fit_multitask_arrays, fit_multitask_path,
                                        group_soft_threshold, kkt_violation, lambda_max_multitask,
                                        rank_rows)
from sparsereg.models.path import PathConfig


def _data(n=120, p=15, m=5, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    b = np.zeros((p, m))
    b[1] = 0.8
    b[6] = rng.uniform(-1.0, -0.5, m)
    y = 2.0 + x @ b + 0.5 * rng.standard_normal((n, m))
    genes = [f'GENE{j + 1:05d}' for j in range(p)]
    responses = [f'FA_LB{i + 1:02d}' for i in range(m)]
    frame = pd.concat([pd.DataFrame(x, columns=genes), pd.DataFrame(y, columns=responses)], axis=1)
    d = Dataset.from_frame(frame, roles={r: Role.Outcome for r in responses})
    return d, genes, responses


def test_group_soft_threshold():
    assert np.allclose(group_soft_threshold([3.0, 4.0], 1.0), [2.4, 3.2])
    assert group_soft_threshold([3.0, 4.0], 5.0).tolist() == [0.0, 0.0]
    with pytest.raises(ConfigError):
        group_soft_threshold([1.0], -0.1)


def test_rows_enter_and_leave_together():
    d, genes, responses = _data()
    config = PathConfig(n_lambda=30)
    path = fit_multitask_path(d, responses, genes, config)
    assert np.all(path.coefficients[0] == 0)
    for i, lam in enumerate(path.lambdas):
        coef = path.coefficients[i]
        for row in coef:
            assert np.all(row == 0) or np.all(row != 0)
        assert kkt_violation(d, path.fit_at(lam), config) < 1e-6

    fit = path.fit_at(path.lambdas[12])
    assert {1, 6} <= fit.active_rows


def test_single_response_is_the_lasso():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((90, 8))
    y = x[:, 0] - 0.7 * x[:, 3] + rng.standard_normal(90)
    config = PathConfig(n_lambda=15, standardize_responses=False)
    lams, b0, b, _, _ = fit_multitask_arrays(x, y[:, None], config)
    g_lams, g_b0, g_b, _, _ = fit_gaussian_arrays(x, y, config)
    assert np.allclose(lams, g_lams)
    assert np.allclose(b[:, :, 0], g_b, atol=1e-6)
    assert np.allclose(b0[:, 0], g_b0, atol=1e-6)


def test_duplicate_responses_rescale_the_penalty():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((100, 6))
    y = 1.0 + x[:, 2] + rng.standard_normal(100)
    lam = 0.1
    config = PathConfig(lambdas=[lam], standardize_responses=False)
    _, _, b, _, _ = fit_multitask_arrays(x, np.column_stack([y, y]), config)
    _, _, g, _, _ = fit_gaussian_arrays(x, y, PathConfig(lambdas=[lam / np.sqrt(2)]))
    assert np.allclose(b[0, :, 0], b[0, :, 1])
    assert np.allclose(b[0, :, 0], g[0], atol=1e-6)


def test_sqrt_m_weight_scales_lambda_max():
    d, genes, responses = _data(m=4)
    xs = prepare_design(d.matrix(genes))[0]
    y = d.matrix(responses)
    yc = y - y.mean(axis=0)
    assert lambda_max_multitask(xs, yc, weight=2.0) == pytest.approx(lambda_max_multitask(xs, yc) / 2)
    plain = fit_multitask_path(d, responses, genes, PathConfig(n_lambda=5))
    weighted = fit_multitask_path(d, responses, genes, PathConfig(n_lambda=5, sqrt_m_weight=True))
    assert weighted.lambdas[0] == pytest.approx(plain.lambdas[0] / 2)


def test_cross_validation_and_ranking():
    d, genes, responses = _data()
    folds = make_folds(d.n_rows, 4, seed=0)
    cv = cv_multitask(d, responses, genes, folds, PathConfig(n_lambda=20))
    assert cv.fold_losses.shape == (4, 20)
    assert cv.lambda_1se >= cv.lambda_min
    fit = cv.fit()
    ranking = rank_rows(fit, top_k=2)
    assert list(ranking.columns) == ['rank', 'predictor', 'row_norm']
    assert set(ranking['predictor']) == {'GENE00002', 'GENE00007'}
    assert ranking['row_norm'].iloc[0] >= ranking['row_norm'].iloc[1]
    assert rank_rows(fit, top_k=50).shape[0] == len(fit.active_rows)
    with pytest.raises(ConfigError):
        rank_rows(fit, top_k=0)
    doc = fit.to_json()
    assert doc['responses'] == responses


def test_no_responses():
    d, genes, _ = _data()
    with pytest.raises(ConfigError):
        fit_multitask_path(d, [], genes)


def test_response_order_does_not_matter():
    d, genes, responses = _data()
    x, y = d.matrix(genes), d.matrix(responses)
    perm = [3, 0, 4, 2, 1]
    config = PathConfig(n_lambda=15, tol=1e-12, kkt_tol=1e-11)
    lams, b0, b, _, _ = fit_multitask_arrays(x, y, config)
    p_lams, p_b0, p_b, _, _ = fit_multitask_arrays(x, y[:, perm], config)
    assert np.allclose(p_lams, lams, rtol=1e-12)
    assert np.allclose(p_b, b[:, :, perm], atol=1e-8)
    assert np.allclose(p_b0, b0[:, perm], atol=1e-8)


if __name__ == "__main__":
    test_group_soft_threshold()
    test_rows_enter_and_leave_together()
    test_single_response_is_the_lasso()
    test_duplicate_responses_rescale_the_penalty()
    test_sqrt_m_weight_scales_lambda_max()
    test_cross_validation_and_ranking()
    test_no_responses()
    test_response_order_does_not_matter()
