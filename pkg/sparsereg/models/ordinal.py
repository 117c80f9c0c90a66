"""Proportional-odds (cumulative logit) regression.

    logit P(Y <= j | x) = theta_j - x' beta,   j = 1 .. J-1

so positive slopes push mass toward later (worse) categories. Thresholds
are searched through theta_1 and log-increments, which keeps them strictly
increasing without constraints.
"""
from typing import List, Optional, Sequence, Tuple
from dataclasses import dataclass

import numpy as np
import pandas as pd
from loguru import logger
from scipy import stats
from scipy.special import expit, logit

from sparsereg.dataset import CategoricalOutcome, Dataset
from sparsereg.errors import ConvergenceError, DataError, ModelingError, RankDeficientError, SeparationError
from sparsereg.models.linear_inference import wald_ci
import sparsereg.strs as strs

GRAD_TOL = 1e-8
REL_LL_TOL = 1e-10
SEPARATION_NORM = 1e3
MAX_HALVINGS = 40


@dataclass
class OrdinalFit:
    thresholds: np.ndarray
    slopes: np.ndarray
    threshold_std_errors: np.ndarray
    std_errors: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int
    predictors: List[str]
    labels: List[str]
    covariance: Optional[np.ndarray] = None

    @property
    def n_levels(self) -> int:
        return self.thresholds.size + 1

    def to_json(self) -> dict:
        return {'labels': list(self.labels),
                'thresholds': [float(t) for t in self.thresholds],
                'threshold_std_errors': [float(s) for s in self.threshold_std_errors],
                'slopes': {p: float(b) for p, b in zip(self.predictors, self.slopes)},
                'slope_std_errors': {p: float(s) for p, s in zip(self.predictors, self.std_errors)},
                'log_likelihood': float(self.log_likelihood),
                'converged': bool(self.converged),
                'iterations': int(self.iterations)}


def _free_to_thresholds(free: np.ndarray) -> np.ndarray:
    return free[0] + np.concatenate([[0.0], np.cumsum(np.exp(free[1:]))])


def _thresholds_to_free(theta: np.ndarray) -> np.ndarray:
    return np.concatenate([[theta[0]], np.log(np.diff(theta))])


def _threshold_jacobian(free: np.ndarray) -> np.ndarray:
    """d theta / d free, lower triangular with ones in the first column."""
    k = free.size
    jac = np.zeros((k, k))
    jac[:, 0] = 1.0
    inc = np.exp(free[1:])
    for j in range(1, k):
        jac[j, 1:j + 1] = inc[:j]
    return jac


def _category_terms(theta: np.ndarray, eta: np.ndarray, codes: np.ndarray):
    """Upper/lower cumulative terms per row with p = F(a) - F(b)."""
    j = theta.size + 1
    ext = np.concatenate([[-np.inf], theta, [np.inf]])
    a = ext[codes + 1] - eta
    b = ext[codes] - eta
    fa, fb = expit(a), expit(b)
    # complement form keeps precision when both terms are near 1
    prob = np.where(b > 0, expit(-b) - expit(-a), fa - fb)
    prob = np.maximum(prob, np.finfo(float).tiny)
    da = np.where(codes < j - 1, fa * (1 - fa), 0.0)
    db = np.where(codes > 0, fb * (1 - fb), 0.0)
    d2a = da * (1 - 2 * fa)
    d2b = db * (1 - 2 * fb)
    return prob, da, db, d2a, d2b


def log_likelihood(theta: np.ndarray, beta: np.ndarray, x: np.ndarray, codes: np.ndarray,
                   weights: Optional[np.ndarray] = None) -> float:
    w = np.ones(codes.size) if weights is None else weights
    prob = _category_terms(theta, x @ beta, codes)[0]
    return float(w @ np.log(prob))


def score_and_hessian(theta: np.ndarray, beta: np.ndarray, x: np.ndarray, codes: np.ndarray,
                      weights: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Analytic gradient and Hessian of the log-likelihood in (theta, beta)."""
    n, p = x.shape
    k = theta.size
    w = np.ones(n) if weights is None else weights
    prob, da, db, d2a, d2b = _category_terms(theta, x @ beta, codes)
    ga, gb = da / prob, db / prob
    # d log p / d eta
    ge = -(ga - gb)
    upper = np.zeros((n, k))
    lower = np.zeros((n, k))
    rows = np.arange(n)
    has_up = codes < k
    has_low = codes > 0
    upper[rows[has_up], codes[has_up]] = 1.0
    lower[rows[has_low], codes[has_low] - 1] = 1.0

    grad = np.concatenate([upper.T @ (w * ga) - lower.T @ (w * gb), x.T @ (w * ge)])

    h_aa = d2a / prob - ga ** 2
    h_bb = -d2b / prob - gb ** 2
    h_ab = ga * gb
    h_ae = -d2a / prob - ga * ge
    h_be = d2b / prob + gb * ge
    h_ee = (d2a - d2b) / prob - ge ** 2

    h_tt = (upper.T * (w * h_aa)) @ upper + (lower.T * (w * h_bb)) @ lower
    cross = (upper.T * (w * h_ab)) @ lower
    h_tt += cross + cross.T
    h_tb = (upper.T * (w * h_ae)) @ x + (lower.T * (w * h_be)) @ x
    h_bb_ = (x.T * (w * h_ee)) @ x
    hess = np.block([[h_tt, h_tb], [h_tb.T, h_bb_]])
    return grad, hess


def _inputs(d: Dataset, outcome: str, predictors: Sequence[str]):
    predictors = list(predictors)
    d.require([outcome] + predictors)
    x = d.matrix(predictors)
    if np.isnan(x).any():
        raise DataError('Ordinal fits need complete data; call drop_incomplete first')
    return x, d.categorical(outcome)


def fit_ordinal(d: Dataset, outcome: str, predictors: Sequence[str],
                weights: Optional[np.ndarray] = None, max_iter: int = 100,
                reverse: bool = False) -> OrdinalFit:
    """Maximum-likelihood proportional-odds fit by Newton steps with step-halving.

    `weights` are frequency weights; `reverse` fits the reversed category order.
    """
    x, cat = _inputs(d, outcome, predictors)
    if reverse:
        cat = cat.reversed()
    return fit_ordinal_arrays(x, cat, list(predictors), weights, max_iter)


def fit_ordinal_arrays(x: np.ndarray, cat: CategoricalOutcome, predictors: List[str],
                       weights: Optional[np.ndarray] = None, max_iter: int = 100) -> OrdinalFit:
    n, p = x.shape
    j = cat.n_levels
    if j < 2:
        raise DataError('Ordinal outcome needs at least 2 categories')
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0):
        raise DataError('weights must be a nonnegative vector with one entry per row')
    counts = np.bincount(cat.codes, weights=w, minlength=j)
    if np.any(counts <= 0):
        missing = [lb for lb, c in zip(cat.labels, counts) if c <= 0]
        raise DataError(f'Every category must be observed; missing {missing}')
    codes = cat.codes
    total = w.sum()

    theta = logit(np.cumsum(counts)[:-1] / total)
    beta = np.zeros(p)
    free = _thresholds_to_free(theta)
    ll = log_likelihood(theta, beta, x, codes, w)
    converged = False
    it = 0
    for it in range(max_iter + 1):
        grad, hess = score_and_hessian(theta, beta, x, codes, w)
        if np.max(np.abs(grad)) < GRAD_TOL:
            converged = True
            break
        if it == max_iter:
            break
        jac = _threshold_jacobian(free)
        full_jac = np.eye(j - 1 + p)
        full_jac[:j - 1, :j - 1] = jac
        g_free = full_jac.T @ grad
        h_free = full_jac.T @ hess @ full_jac
        try:
            step = np.linalg.solve(-h_free, g_free)
        except np.linalg.LinAlgError:
            raise RankDeficientError('Singular information matrix; predictors are collinear',
                                     columns=list(predictors))
        accepted = False
        for _ in range(MAX_HALVINGS):
            cand_free = free + step[:j - 1]
            cand_beta = beta + step[j - 1:]
            cand_theta = _free_to_thresholds(cand_free)
            cand_ll = log_likelihood(cand_theta, cand_beta, x, codes, w)
            if np.isfinite(cand_ll) and cand_ll >= ll:
                accepted = True
                break
            step = step / 2.0
        if not accepted:
            # no ascent left at machine precision
            converged = True
            break
        rel = abs(cand_ll - ll) / max(abs(ll), 1.0)
        free, theta, beta = cand_free, cand_theta, cand_beta
        improving = cand_ll > ll
        ll = cand_ll
        if np.linalg.norm(beta) > SEPARATION_NORM and improving:
            raise SeparationError(f'Complete separation: slope norm {np.linalg.norm(beta):.3g} '
                                  f'diverging while the likelihood still improves')
        if rel < REL_LL_TOL:
            grad, hess = score_and_hessian(theta, beta, x, codes, w)
            converged = True
            it += 1
            break

    if ll > -1e-6 * total and p > 0:
        raise SeparationError('Complete separation: the fitted model predicts every category '
                              'with probability 1')
    if not converged:
        raise ConvergenceError(f'Ordinal fit did not converge in {max_iter} iterations',
                               iterations=max_iter)

    info = -hess
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise RankDeficientError('Singular information matrix; predictors are collinear',
                                 columns=list(predictors))
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    logger.debug(f'Ordinal fit: n={n:,} J={j} p={p} iterations={it} loglik={ll:.4f}')
    return OrdinalFit(thresholds=theta, slopes=beta, threshold_std_errors=se[:j - 1],
                      std_errors=se[j - 1:], log_likelihood=ll, converged=converged,
                      iterations=it, predictors=list(predictors), labels=list(cat.labels),
                      covariance=cov)


def predict_category_probs(fit: OrdinalFit, x) -> np.ndarray:
    """Category probabilities for one row (vector) or many rows (matrix)."""
    x = np.asarray(x, dtype=float)
    eta = x @ fit.slopes
    cum = expit(fit.thresholds - np.expand_dims(eta, -1))
    zeros = np.zeros(cum.shape[:-1] + (1,))
    ones = np.ones(cum.shape[:-1] + (1,))
    return np.diff(np.concatenate([zeros, cum, ones], axis=-1), axis=-1)


def forest_data(fit: OrdinalFit, level: float = 0.95, odds_ratio: bool = False) -> pd.DataFrame:
    """One row per slope: log odds ratio, Wald interval and two-sided p-value."""
    if not fit.converged:
        raise ModelingError('forest_data needs a converged fit')
    lo, hi = wald_ci(fit.slopes, fit.std_errors, level)
    with np.errstate(divide='ignore', invalid='ignore'):
        z = np.where(fit.std_errors > 0, fit.slopes / fit.std_errors, np.nan)
    p = 2.0 * stats.norm.sf(np.abs(z))
    table = pd.DataFrame({strs.TERM: fit.predictors,
                          strs.ESTIMATE: fit.slopes,
                          'lo': lo,
                          'hi': hi,
                          'p': p})
    if odds_ratio:
        table['odds_ratio'] = np.exp(fit.slopes)
        table['or_lo'] = np.exp(lo)
        table['or_hi'] = np.exp(hi)
    return table
