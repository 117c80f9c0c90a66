"""Multi-response gaussian regression with a row-wise group lasso penalty.

Each predictor row of the p x m coefficient matrix is selected or dropped
for all responses together.
"""
from typing import Callable, List, Optional, Sequence, Set
from dataclasses import dataclass

import numpy as np
import pandas as pd
from loguru import logger

from sparsereg.dataset import Dataset, FoldAssignment, column_scales, prepare_design
from sparsereg.errors import ConfigError, DataError
from sparsereg.models.path import (CvResult, LassoPath, PathConfig, Solver,
                                   check_fold_rows, cross_validate, lambda_grid, solve_at)
import sparsereg.strs as strs

TOL = 1e-7
KKT_TOL = 1e-7


def group_soft_threshold(v, gamma: float) -> np.ndarray:
    if gamma < 0:
        raise ConfigError(f'group_soft_threshold needs gamma >= 0, got {gamma}')
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm <= gamma:
        return np.zeros_like(v)
    return v * (1.0 - gamma / norm)


class MultiTaskSolver(Solver):
    """Block coordinate descent for (1/2n)||Y - X B||_F^2 + lam w sum_j ||B_j||_2."""

    def __init__(self, x: np.ndarray, y: np.ndarray, weight: float = 1.0):
        self.x = x
        self.y = y
        self.n, self.p = x.shape
        self.m = y.shape[1]
        self.weight = weight
        self.v = (x ** 2).sum(axis=0) / self.n
        self.usable = np.flatnonzero(self.v > 0)
        self.beta = np.zeros((self.p, self.m))
        self.r = y.copy()

    def candidates(self) -> np.ndarray:
        return self.usable

    def active(self) -> np.ndarray:
        return np.flatnonzero(np.any(self.beta != 0, axis=1))

    def sweep(self, coords: np.ndarray, lam: float) -> float:
        change = 0.0
        x, beta, v = self.x, self.beta, self.v
        gamma = lam * self.weight
        for j in coords:
            xj = x[:, j]
            z = xj @ self.r / self.n + v[j] * beta[j]
            new = group_soft_threshold(z, gamma) / v[j]
            delta = new - beta[j]
            if np.any(delta != 0):
                beta[j] = new
                self.r -= np.outer(xj, delta)
                change = max(change, float(np.abs(delta).max()))
        return change

    def kkt(self, lam: float) -> float:
        self.r = self.y - self.x @ self.beta
        grad = self.x.T @ self.r / self.n
        return group_kkt(grad, self.beta, lam * self.weight, self.usable)

    def objective(self, lam: float) -> float:
        r = self.y - self.x @ self.beta
        return float(0.5 * (r ** 2).sum() / self.n
                     + lam * self.weight * np.linalg.norm(self.beta, axis=1).sum())


def group_kkt(grad: np.ndarray, beta: np.ndarray, gamma: float, coords: np.ndarray) -> float:
    worst = 0.0
    for j in coords:
        norm = np.linalg.norm(beta[j])
        if norm == 0:
            worst = max(worst, np.linalg.norm(grad[j]) - gamma)
        else:
            worst = max(worst, np.linalg.norm(grad[j] - gamma * beta[j] / norm))
    return float(worst)


@dataclass
class MultiTaskFit:
    intercepts: np.ndarray
    coefficients: np.ndarray
    lam: float
    predictors: List[str]
    responses: List[str]

    @property
    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.coefficients, axis=1)

    @property
    def active_rows(self) -> Set[int]:
        return set(np.flatnonzero(self.row_norms > 0).tolist())

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.intercepts + np.asarray(x, dtype=float) @ self.coefficients

    def to_json(self) -> dict:
        return {strs.RESPONSES: list(self.responses),
                strs.LAMBDA: float(self.lam),
                strs.INTERCEPTS: [float(v) for v in self.intercepts],
                'active_rows': [[self.predictors[j], [float(v) for v in self.coefficients[j]]]
                                for j in sorted(self.active_rows)]}


@dataclass
class MultiTaskPath(LassoPath):
    def fit_at(self, lam: float) -> MultiTaskFit:
        i = self.index_of(lam)
        return MultiTaskFit(intercepts=self.intercepts[i].copy(),
                            coefficients=self.coefficients[i].copy(),
                            lam=float(self.lambdas[i]),
                            predictors=list(self.predictors),
                            responses=list(self.responses))


def lambda_max_multitask(xs: np.ndarray, yc: np.ndarray, weight: float = 1.0) -> float:
    """max_j ||x_j' (Y - Ybar)||_2 / (n w)."""
    if xs.shape[1] == 0:
        return 0.0
    return float(np.linalg.norm(xs.T @ yc, axis=1).max() / (xs.shape[0] * weight))


def fit_multitask_arrays(x: np.ndarray, y: np.ndarray,
                         config: PathConfig = PathConfig(),
                         lambdas: Optional[np.ndarray] = None,
                         on_sweep: Optional[Callable[[float], None]] = None):
    """Returns (lambdas, intercepts (L, m), coefficients (L, p, m), constant mask, sweeps)."""
    n, p = x.shape
    m = y.shape[1]
    xs, mean, sd, constant = prepare_design(x, config.standardize)
    y_mean = y.mean(axis=0)
    y_sd = np.ones(m)
    if config.standardize_responses:
        _, y_sd, _ = column_scales(y)
    yc = (y - y_mean) / y_sd
    weight = np.sqrt(m) if config.sqrt_m_weight else 1.0
    null_start = lambdas is None and config.lambdas is None
    if lambdas is None:
        lambdas = lambda_grid(lambda_max_multitask(xs, yc, weight), n, p, config)
    solver = MultiTaskSolver(xs, yc, weight)
    tol, kkt_tol = config.tolerances(TOL, KKT_TOL)
    intercepts = np.empty((lambdas.size, m))
    coefs = np.zeros((lambdas.size, p, m))
    sweeps = []
    for i, lam in enumerate(lambdas):
        if i == 0 and null_start:
            # the null model is the solution at lambda_max
            sweeps.append(0)
        else:
            sweeps.append(solve_at(solver, float(lam), tol, kkt_tol, config.max_sweeps, on_sweep))
        coefs[i] = solver.beta * y_sd[None, :] / sd[:, None]
        intercepts[i] = y_mean - mean @ coefs[i]
    return lambdas, intercepts, coefs, constant, sweeps


def _multitask_inputs(d: Dataset, outcomes: Sequence[str], predictors: Sequence[str]):
    outcomes, predictors = list(outcomes), list(predictors)
    if not outcomes:
        raise ConfigError('Multitask fits need at least one response (m = 0)')
    d.require(outcomes + predictors)
    x = d.matrix(predictors)
    y = d.matrix(outcomes)
    if np.isnan(x).any() or np.isnan(y).any():
        raise DataError('Multitask fits need complete data; call drop_incomplete first')
    if not np.isfinite(y).all():
        raise DataError('Responses must be finite')
    return x, y


def fit_multitask_path(d: Dataset, outcomes: Sequence[str], predictors: Sequence[str],
                       config: PathConfig = PathConfig(),
                       on_sweep: Optional[Callable[[float], None]] = None) -> MultiTaskPath:
    config.validate()
    outcomes, predictors = list(outcomes), list(predictors)
    x, y = _multitask_inputs(d, outcomes, predictors)
    lambdas, intercepts, coefs, constant, sweeps = fit_multitask_arrays(x, y, config, on_sweep=on_sweep)
    logger.debug(f'Multitask path: n={d.n_rows:,} p={len(predictors):,} m={len(outcomes)} '
                 f'L={lambdas.size} sweeps={sum(sweeps):,}')
    return MultiTaskPath(family=strs.MULTITASK, lambdas=lambdas, intercepts=intercepts,
                         coefficients=coefs, predictors=predictors, responses=outcomes,
                         constant=[predictors[j] for j in np.flatnonzero(constant)],
                         sweeps=sweeps)


def cv_multitask(d: Dataset, outcomes: Sequence[str], predictors: Sequence[str],
                 folds: FoldAssignment, config: PathConfig = PathConfig()) -> CvResult:
    """k-fold CV; held-out loss is the mean squared Frobenius residual per row."""
    check_fold_rows(folds, d.n_rows)
    path = fit_multitask_path(d, outcomes, predictors, config)
    x, y = _multitask_inputs(d, outcomes, predictors)

    def fold_loss(train, test):
        _, b0, b, _, _ = fit_multitask_arrays(x[train], y[train], config, lambdas=path.lambdas)
        out = np.empty(path.lambdas.size)
        for i in range(path.lambdas.size):
            resid = y[test] - (b0[i] + x[test] @ b[i])
            out[i] = (resid ** 2).sum(axis=1).mean()
        return out

    return cross_validate(path, folds, fold_loss, config.threads)


def rank_rows(fit: MultiTaskFit, top_k: int = 50) -> pd.DataFrame:
    """Active rows by descending row norm, truncated to `top_k`."""
    if top_k < 1:
        raise ConfigError(f'top_k must be >= 1, got {top_k}')
    norms = fit.row_norms
    idx = np.flatnonzero(norms > 0)
    order = idx[np.argsort(-norms[idx], kind='stable')][:top_k]
    return pd.DataFrame({strs.RANK: np.arange(1, order.size + 1),
                         strs.PREDICTOR: [fit.predictors[j] for j in order],
                         strs.ROW_NORM: norms[order]})


def kkt_violation(d: Dataset, fit: MultiTaskFit, config: PathConfig = PathConfig()) -> float:
    """Largest group KKT violation of `fit` on the scaled problem it solved."""
    x, y = _multitask_inputs(d, fit.responses, fit.predictors)
    xs, mean, sd, constant = prepare_design(x, config.standardize)
    y_sd = column_scales(y)[1] if config.standardize_responses else np.ones(y.shape[1])
    beta = fit.coefficients * sd[:, None] / y_sd[None, :]
    r = (y - y.mean(axis=0)) / y_sd - xs @ beta
    weight = np.sqrt(y.shape[1]) if config.sqrt_m_weight else 1.0
    return group_kkt(xs.T @ r / d.n_rows, beta, fit.lam * weight, np.flatnonzero(~constant))
