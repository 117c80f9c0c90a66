import numpy as np
import pandas as pd
import pytest

from sparsereg.dataset import Dataset, Role
from sparsereg.errors import ConfigError, DataError, ModelingError, RankDeficientError
from sparsereg.models.linear_inference import (INTERCEPT, coefficient_table, correlation_filter,
                                               expand_design, fit_ols, ols_arrays, wald_ci)


def _regression(n=60, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 3))
    y = 1.5 + x @ np.array([2.0, 0.0, -1.0]) + 0.5 * rng.standard_normal(n)
    return x, y


def test_ols_matches_least_squares():
    x, y = _regression()
    fit = ols_arrays(x, y, ['a', 'b', 'c'], 'y')
    design = np.column_stack([np.ones(x.shape[0]), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    assert np.allclose(fit.coefficients, coef, atol=1e-10)

    resid = y - design @ coef
    sigma2 = resid @ resid / (x.shape[0] - 4)
    se = np.sqrt(np.diag(sigma2 * np.linalg.inv(design.T @ design)))
    assert np.allclose(fit.std_errors, se, rtol=1e-8)
    assert fit.residual_df == x.shape[0] - 4
    assert fit.terms == [INTERCEPT, 'a', 'b', 'c']

    tss = ((y - y.mean()) ** 2).sum()
    assert fit.r_squared == pytest.approx(1 - resid @ resid / tss)
    assert fit.adjusted_r_squared < fit.r_squared

    table = coefficient_table(fit)
    assert list(table.columns) == ['term', 'estimate', 'std_error', 't_value', 'p_value']
    sig = dict(zip(fit.terms, fit.significant(0.05)))
    assert sig['a'] and sig['c']


def test_rank_deficient():
    x, y = _regression()
    x = np.column_stack([x, x[:, 0] + x[:, 1]])
    with pytest.raises(RankDeficientError) as e:
        ols_arrays(x, y, ['a', 'b', 'c', 'ab'])
    assert len(e.value.columns) == 1
    assert e.value.columns[0] in ('a', 'b', 'ab')


def test_too_few_rows():
    x, y = _regression(n=4)
    with pytest.raises(ModelingError):
        ols_arrays(x, y, ['a', 'b', 'c'])


def test_treatment_dummies():
    frame = pd.DataFrame({'DX': [0, 1, 2, 0, 1, 2, 0, 2],
                          'AGE': [70, 71, 72, 73, 74, 75, 76, 77],
                          'Y': [1.0, 2.1, 3.3, 0.9, 2.2, 2.8, 1.1, 3.0]})
    d = Dataset.from_frame(frame, roles={'Y': Role.Outcome}, levels={'DX': ['CN', 'MCI', 'AD']})
    with pytest.raises(ConfigError, match='reference'):
        expand_design(d, ['DX', 'AGE'])
    with pytest.raises(ConfigError):
        expand_design(d, ['DX'], {'DX': 'XX'})

    x, names = expand_design(d, ['DX', 'AGE'], {'DX': 'MCI'})
    assert names == ['DX[CN]', 'DX[AD]', 'AGE']
    assert x[:, 0].tolist() == [1, 0, 0, 1, 0, 0, 1, 0]
    assert x[:, 1].tolist() == [0, 0, 1, 0, 0, 1, 0, 1]

    fit = fit_ols(d, 'Y', ['DX', 'AGE'], {'DX': 'CN'})
    assert fit.terms == [INTERCEPT, 'DX[MCI]', 'DX[AD]', 'AGE']
    assert fit.summary()['n'] == 8


def test_wald_ci():
    lo, hi = wald_ci(1.0, 1.0, 0.95)
    assert lo == pytest.approx(1.0 - 1.959964, abs=1e-6)
    assert hi == pytest.approx(1.0 + 1.959964, abs=1e-6)
    lo, hi = wald_ci(np.array([0.0, 2.0]), np.array([0.5, 0.0]))
    assert hi[1] == lo[1] == 2.0
    with pytest.raises(ConfigError):
        wald_ci(1.0, 1.0, 1.0)


def test_correlation_filter():
    rng = np.random.default_rng(3)
    tau = rng.normal(300, 80, 200)
    frame = pd.DataFrame({'TAU': tau,
                          'PTAU': 0.1 * tau + rng.normal(0, 0.5, 200),
                          'ABETA': rng.normal(1000, 200, 200),
                          'FLAT': np.ones(200)})
    d = Dataset.from_frame(frame)
    result = correlation_filter(d, ['TAU', 'PTAU', 'ABETA', 'FLAT'], 0.9)
    assert result.retained == ['TAU', 'ABETA', 'FLAT']
    assert result.constant == ['FLAT']
    assert [r[:2] for r in result.dropped] == [('PTAU', 'TAU')]
    assert result.dropped[0][2] > 0.9
    assert list(result.to_frame().columns) == ['dropped', 'retained_partner', 'correlation']

    # column order decides which member of a pair survives
    result = correlation_filter(d, ['PTAU', 'TAU'], 0.9)
    assert result.retained == ['PTAU']

    with pytest.raises(ConfigError):
        correlation_filter(d, ['TAU'], 0.0)
    holes = Dataset.from_frame(pd.DataFrame({'a': [1.0, np.nan, 2.0]}))
    with pytest.raises(DataError):
        correlation_filter(holes, ['a'], 0.9)


def test_row_order_does_not_matter():
    x, y = _regression(n=45, seed=4)
    perm = np.random.default_rng(8).permutation(45)
    fit = ols_arrays(x, y, ['a', 'b', 'c'], 'y')
    shuffled = ols_arrays(x[perm], y[perm], ['a', 'b', 'c'], 'y')
    assert np.allclose(shuffled.coefficients, fit.coefficients, atol=1e-10)
    assert np.allclose(shuffled.std_errors, fit.std_errors, rtol=1e-8)
    assert shuffled.adjusted_r_squared == pytest.approx(fit.adjusted_r_squared, abs=1e-12)


if __name__ == "__main__":
    test_ols_matches_least_squares()
    test_rank_deficient()
    test_too_few_rows()
    test_treatment_dummies()
    test_wald_ci()
    test_correlation_filter()
    test_row_order_does_not_matter()
