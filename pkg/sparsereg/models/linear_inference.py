from typing import Dict, List, Optional, Sequence, Tuple, Union
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from loguru import logger
from scipy import linalg, stats

from sparsereg.dataset import Dataset, standardize_array
from sparsereg.errors import ConfigError, DataError, ModelingError, RankDeficientError
import sparsereg.strs as strs

INTERCEPT = '(Intercept)'


@dataclass
class OlsFit:
    terms: List[str]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    residual_df: int
    r_squared: float
    adjusted_r_squared: float
    residuals: np.ndarray
    outcome: str = ''

    @property
    def n(self) -> int:
        return int(self.residuals.size)

    def significant(self, alpha: float = 0.05) -> np.ndarray:
        return self.p_values < alpha

    def summary(self, alpha: float = 0.05) -> dict:
        return {strs.OUTCOME: self.outcome,
                'n': self.n,
                'p': len(self.terms) - 1,
                'residual_df': self.residual_df,
                'r_squared': float(self.r_squared),
                'adjusted_r_squared': float(self.adjusted_r_squared),
                'significance_level': alpha,
                'significant_terms': [t for t, s in zip(self.terms, self.significant(alpha))
                                      if s and t != INTERCEPT]}


def expand_design(d: Dataset, predictors: Sequence[str],
                  references: Optional[Dict[str, str]] = None) -> Tuple[np.ndarray, List[str]]:
    """Numeric design columns; categorical predictors become treatment dummies.

    A predictor is categorical when the dataset declares levels for it and
    it must then have an explicit reference level.
    """
    references = dict(references or {})
    columns, names = [], []
    for pred in predictors:
        d.require([pred])
        values = d.column(pred)
        if pred in d.levels or pred in references:
            if pred not in references:
                raise ConfigError(f'Categorical predictor {pred} needs an explicit reference level')
            cat = d.categorical(pred)
            ref = references[pred]
            if ref not in cat.labels:
                raise ConfigError(f'Reference level {ref!r} is not a level of {pred} {list(cat.labels)}')
            for i, label in enumerate(cat.labels):
                if label == ref:
                    continue
                columns.append((cat.codes == i).astype(float))
                names.append(f'{pred}[{label}]')
        else:
            columns.append(values)
            names.append(pred)
    x = np.column_stack(columns) if columns else np.zeros((d.n_rows, 0))
    return x, names


def ols_arrays(x: np.ndarray, y: np.ndarray, names: Sequence[str], outcome: str = '') -> OlsFit:
    n, p = x.shape
    if np.isnan(x).any() or np.isnan(y).any():
        raise DataError('OLS needs complete data; call drop_incomplete first')
    if n <= p + 1:
        raise ModelingError(f'OLS needs n > p + 1 (n={n}, p={p})')
    design = np.column_stack([np.ones(n), x])
    terms = [INTERCEPT] + list(names)
    q, r, piv = linalg.qr(design, mode='economic', pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(design.shape) * np.finfo(float).eps * diag[0]
    rank = int((diag > tol).sum())
    if rank < design.shape[1]:
        bad = [terms[i] for i in piv[rank:]]
        raise RankDeficientError(f'Rank-deficient design: {bad} are linear combinations '
                                 f'of other columns', columns=bad)

    coef_piv = linalg.solve_triangular(r, q.T @ y)
    coef = np.empty_like(coef_piv)
    coef[piv] = coef_piv
    fitted = design @ coef
    resid = y - fitted
    df = n - p - 1
    rss = float(resid @ resid)
    sigma2 = rss / df
    r_inv = linalg.solve_triangular(r, np.eye(r.shape[0]))
    cov_piv = (r_inv @ r_inv.T) * sigma2
    se = np.empty(p + 1)
    se[piv] = np.sqrt(np.diag(cov_piv))
    with np.errstate(divide='ignore', invalid='ignore'):
        t = np.where(se > 0, coef / se, np.nan)
    pv = 2.0 * stats.t.sf(np.abs(t), df)

    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    r2 = float(min(max(r2, 0.0), 1.0))
    adj = 1.0 - (1.0 - r2) * (n - 1) / df
    return OlsFit(terms=terms, coefficients=coef, std_errors=se, t_values=t, p_values=pv,
                  residual_df=df, r_squared=r2, adjusted_r_squared=adj, residuals=resid,
                  outcome=outcome)


def fit_ols(d: Dataset, outcome: str, predictors: Sequence[str],
            references: Optional[Dict[str, str]] = None) -> OlsFit:
    x, names = expand_design(d, predictors, references)
    y = d.column(outcome)
    fit = ols_arrays(x, y, names, outcome)
    logger.debug(f'OLS {outcome}: n={fit.n:,} terms={len(fit.terms)} R2={fit.r_squared:.4f}')
    return fit


def coefficient_table(fit: OlsFit) -> pd.DataFrame:
    return pd.DataFrame({strs.TERM: fit.terms,
                         strs.ESTIMATE: fit.coefficients,
                         strs.STD_ERROR: fit.std_errors,
                         strs.T_VALUE: fit.t_values,
                         strs.P_VALUE: fit.p_values})


@dataclass
class CorrelationFilterResult:
    retained: List[str]
    # (dropped column, retained column it collides with, correlation)
    dropped: List[Tuple[str, str, float]] = field(default_factory=list)
    constant: List[str] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.dropped, columns=['dropped', 'retained_partner', 'correlation'])


def correlation_filter(d: Dataset, predictors: Sequence[str], threshold: float) -> CorrelationFilterResult:
    """Greedy scan in column order dropping columns too correlated with a retained one."""
    if not 0 < threshold <= 1:
        raise ConfigError(f'threshold must be in (0, 1], got {threshold}')
    predictors = list(predictors)
    x = d.matrix(predictors)
    if np.isnan(x).any():
        raise DataError('correlation_filter needs complete data; call drop_incomplete first')
    xs, _, _, constant = standardize_array(x)
    # exact collinearity rounds to |r| just under 1
    cutoff = min(threshold, 1.0 - 1e-12)
    result = CorrelationFilterResult(retained=[])
    kept = []
    n = x.shape[0]
    for j, name in enumerate(predictors):
        if constant[j]:
            logger.warning(f'{name} is constant; correlation undefined, retained')
            result.constant.append(name)
            result.retained.append(name)
            continue
        hit = None
        for k in kept:
            r = float(xs[:, j] @ xs[:, k] / n)
            if abs(r) > cutoff:
                hit = (name, predictors[k], r)
                break
        if hit is None:
            kept.append(j)
            result.retained.append(name)
        else:
            logger.info(f'Dropping {name}: correlation {hit[2]:.3f} with {hit[1]}')
            result.dropped.append(hit)
    return result


def wald_ci(estimate: Union[float, np.ndarray], std_error: Union[float, np.ndarray],
            level: float = 0.95):
    if not 0 < level < 1:
        raise ConfigError(f'level must be in (0, 1), got {level}')
    if np.any(np.asarray(std_error) < 0):
        raise ConfigError('std_error must be nonnegative')
    z = stats.norm.ppf((1.0 + level) / 2.0)
    return estimate - z * std_error, estimate + z * std_error
