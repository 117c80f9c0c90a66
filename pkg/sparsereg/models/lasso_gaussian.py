from typing import Callable, List, Optional, Sequence, Tuple
from dataclasses import dataclass

import numpy as np
import pandas as pd
from loguru import logger

from sparsereg.dataset import Dataset, FoldAssignment, prepare_design
from sparsereg.errors import ConfigError, DataError
from sparsereg.models.path import (CvResult, LassoPath, PathConfig, Solver,
                                   check_fold_rows, cross_validate, lambda_grid, solve_at)
import sparsereg.strs as strs

# above this many predictors the solver keeps gradients through Gram columns
GRAM_THRESHOLD = 500
TOL = 1e-7
KKT_TOL = 1e-7


def soft_threshold(z, gamma: float):
    if gamma < 0:
        raise ConfigError(f'soft_threshold needs gamma >= 0, got {gamma}')
    return np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)


def lambda_max_gaussian(x: np.ndarray, y: np.ndarray) -> float:
    """max_j |x_j' y| / n for standardized `x` and centered `y`."""
    y = np.asarray(y, dtype=float)
    if y.size == 0 or np.ptp(y) == 0:
        logger.warning('Outcome has zero variance: lambda_max is 0, degenerate path')
        return 0.0
    if x.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(x.T @ y)) / y.size)


def gaussian_objective(x: np.ndarray, y: np.ndarray, beta: np.ndarray, lam: float) -> float:
    r = y - x @ beta
    return float(0.5 * np.mean(r ** 2) + lam * np.abs(beta).sum())


class GaussianSolver(Solver):
    """Coordinate descent for (1/2n)||y - X b||^2 + lam ||b||_1 on centered data.

    Naive residual updates for narrow designs; for wide designs the full
    gradient is carried and refreshed through cached Gram columns.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray, use_gram: Optional[bool] = None):
        self.x = x
        self.y = y
        self.n, self.p = x.shape
        self.v = (x ** 2).sum(axis=0) / self.n
        self.usable = np.flatnonzero(self.v > 0)
        self.beta = np.zeros(self.p)
        self.use_gram = self.p > GRAM_THRESHOLD if use_gram is None else use_gram
        if self.use_gram:
            self.xty = x.T @ y / self.n
            self.grad = self.xty.copy()
            self.gram = dict()
        else:
            self.r = y.copy()

    def _gram_col(self, j: int) -> np.ndarray:
        col = self.gram.get(j)
        if col is None:
            col = self.x.T @ self.x[:, j] / self.n
            self.gram[j] = col
        return col

    def candidates(self) -> np.ndarray:
        return self.usable

    def active(self) -> np.ndarray:
        return np.flatnonzero(self.beta)

    def sweep(self, coords: np.ndarray, lam: float) -> float:
        change = 0.0
        beta, v, x = self.beta, self.v, self.x
        for j in coords:
            old = beta[j]
            g = self.grad[j] if self.use_gram else x[:, j] @ self.r / self.n
            z = g + v[j] * old
            new = np.sign(z) * max(abs(z) - lam, 0.0) / v[j]
            delta = new - old
            if delta != 0.0:
                beta[j] = new
                if self.use_gram:
                    self.grad -= self._gram_col(j) * delta
                else:
                    self.r -= x[:, j] * delta
                change = max(change, abs(delta))
        return change

    def gradient(self) -> np.ndarray:
        """Exact x' r / n at the current iterate."""
        if self.use_gram:
            g = self.xty.copy()
            for j in np.flatnonzero(self.beta):
                g -= self._gram_col(j) * self.beta[j]
            self.grad = g
            return g.copy()
        self.r = self.y - self.x @ self.beta
        return self.x.T @ self.r / self.n

    def kkt(self, lam: float) -> float:
        return kkt_residual(self.gradient(), self.beta, lam, self.usable)

    def objective(self, lam: float) -> float:
        return gaussian_objective(self.x, self.y, self.beta, lam)


def kkt_residual(grad: np.ndarray, beta: np.ndarray, lam: float,
                 coords: Optional[np.ndarray] = None) -> float:
    if coords is not None:
        grad, beta = grad[coords], beta[coords]
    if grad.size == 0:
        return 0.0
    active = beta != 0
    zero_viol = np.maximum(np.abs(grad[~active]) - lam, 0.0)
    active_viol = np.abs(grad[active] - lam * np.sign(beta[active]))
    return float(max(zero_viol.max(initial=0.0), active_viol.max(initial=0.0)))


@dataclass
class GaussianFit:
    intercept: float
    coefficients: np.ndarray
    lam: float
    predictors: List[str]
    outcome: str

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.intercept + np.asarray(x, dtype=float) @ self.coefficients

    @property
    def nonzero(self) -> List[str]:
        return [self.predictors[j] for j in np.flatnonzero(self.coefficients)]


@dataclass
class GaussianPath(LassoPath):
    def fit_at(self, lam: float) -> GaussianFit:
        i = self.index_of(lam)
        return GaussianFit(intercept=float(self.intercepts[i, 0]),
                           coefficients=self.coefficients[i, :, 0].copy(),
                           lam=float(self.lambdas[i]),
                           predictors=list(self.predictors),
                           outcome=self.responses[0])


def fit_gaussian_arrays(x: np.ndarray, y: np.ndarray,
                        config: PathConfig = PathConfig(),
                        lambdas: Optional[np.ndarray] = None,
                        on_sweep: Optional[Callable[[float], None]] = None
                        ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, List[int]]:
    """Warm-started path on raw arrays.

    Returns (lambdas, intercepts (L,), coefficients (L, p), constant mask, sweeps).
    """
    n, p = x.shape
    xs, mean, sd, constant = prepare_design(x, config.standardize)
    y_mean = float(y.mean())
    yc = y - y_mean
    null_start = lambdas is None and config.lambdas is None
    if lambdas is None:
        lambdas = lambda_grid(lambda_max_gaussian(xs, yc), n, p, config)
    solver = GaussianSolver(xs, yc)
    tol, kkt_tol = config.tolerances(TOL, KKT_TOL)
    intercepts = np.empty(lambdas.size)
    coefs = np.zeros((lambdas.size, p))
    sweeps = []
    for i, lam in enumerate(lambdas):
        if i == 0 and null_start:
            # the null model is the solution at lambda_max
            sweeps.append(0)
        else:
            sweeps.append(solve_at(solver, float(lam), tol, kkt_tol, config.max_sweeps, on_sweep))
        coefs[i] = solver.beta / sd
        intercepts[i] = y_mean - mean @ coefs[i]
    return lambdas, intercepts, coefs, constant, sweeps


def _gaussian_inputs(d: Dataset, outcome: str, predictors: Sequence[str]):
    predictors = list(predictors)
    d.require([outcome] + predictors)
    x = d.matrix(predictors)
    y = d.column(outcome)
    if np.isnan(x).any() or np.isnan(y).any():
        raise DataError('Lasso fits need complete data; call drop_incomplete first')
    if np.unique(y).size < 2:
        raise DataError(f'Outcome {outcome} needs at least 2 distinct values')
    return x, y


def fit_lasso_path(d: Dataset, outcome: str, predictors: Sequence[str],
                   config: PathConfig = PathConfig(),
                   on_sweep: Optional[Callable[[float], None]] = None) -> GaussianPath:
    config.validate()
    predictors = list(predictors)
    x, y = _gaussian_inputs(d, outcome, predictors)
    lambdas, intercepts, coefs, constant, sweeps = fit_gaussian_arrays(x, y, config, on_sweep=on_sweep)
    const_names = [predictors[j] for j in np.flatnonzero(constant)]
    if const_names:
        logger.warning(f'{len(const_names)} constant predictors excluded from the lasso fit')
    logger.debug(f'Gaussian path: n={d.n_rows:,} p={len(predictors):,} '
                 f'L={lambdas.size} sweeps={sum(sweeps):,}')
    return GaussianPath(family=strs.GAUSSIAN, lambdas=lambdas,
                        intercepts=intercepts[:, None], coefficients=coefs[:, :, None],
                        predictors=predictors, responses=[outcome],
                        constant=const_names, sweeps=sweeps)


def cv_lasso(d: Dataset, outcome: str, predictors: Sequence[str], folds: FoldAssignment,
             config: PathConfig = PathConfig()) -> CvResult:
    """k-fold CV of the gaussian path; held-out loss is mean squared error."""
    check_fold_rows(folds, d.n_rows)
    path = fit_lasso_path(d, outcome, predictors, config)
    x, y = _gaussian_inputs(d, outcome, predictors)

    def fold_loss(train, test):
        lams, b0, b, _, _ = fit_gaussian_arrays(x[train], y[train], config, lambdas=path.lambdas)
        pred = b0[None, :] + x[test] @ b.T
        return np.mean((y[test][:, None] - pred) ** 2, axis=0)

    return cross_validate(path, folds, fold_loss, config.threads)


def nonzero_report(path: LassoPath, lam: float, top_k: int = 75) -> pd.DataFrame:
    """Nonzero coefficients at `lam` ranked by magnitude; the weight is |coefficient|."""
    if top_k < 1:
        raise ConfigError(f'top_k must be >= 1, got {top_k}')
    fit = path.fit_at(lam)
    coef = fit.coefficients
    idx = np.flatnonzero(coef)
    order = idx[np.argsort(-np.abs(coef[idx]), kind='stable')][:top_k]
    return pd.DataFrame({strs.RANK: np.arange(1, order.size + 1),
                         strs.NAME: [path.predictors[j] for j in order],
                         strs.COEFFICIENT: coef[order],
                         strs.ABS_WEIGHT: np.abs(coef[order])})


def kkt_violation(d: Dataset, outcome: str, fit: GaussianFit, standardize: bool = True) -> float:
    """Largest KKT violation of `fit` on the (standardized) problem it solved."""
    x, y = _gaussian_inputs(d, outcome, fit.predictors)
    xs, mean, sd, constant = prepare_design(x, standardize)
    beta = fit.coefficients * sd
    r = (y - y.mean()) - xs @ beta
    return kkt_residual(xs.T @ r / y.size, beta, fit.lam, np.flatnonzero(~constant))

