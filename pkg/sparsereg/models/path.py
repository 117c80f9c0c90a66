"""Regularization paths, cross-validation and the shared coordinate-descent driver."""
from typing import Callable, Dict, List, Optional, Sequence, Tuple
from dataclasses import dataclass, field
from abc import ABC, abstractmethod

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from loguru import logger

from sparsereg.dataset import FoldAssignment
from sparsereg.errors import ConfigError, ConvergenceError
import sparsereg.strs as strs


class LambdaRule:
    MIN = 'min'
    ONE_SE = '1se'
    ALL = (MIN, ONE_SE)


@dataclass(frozen=True)
class PathConfig:
    n_lambda: int = 100
    # None picks 1e-3 when n > p and 1e-2 otherwise
    lambda_min_ratio: Optional[float] = None
    lambdas: Optional[Sequence[float]] = None
    standardize: bool = True
    # None picks the family defaults for the sweep and KKT tolerances
    tol: Optional[float] = None
    kkt_tol: Optional[float] = None
    max_sweeps: int = 100_000
    threads: int = 1
    # multinomial only: end the path once the training deviance stops moving
    early_exit: bool = True
    # multitask only
    sqrt_m_weight: bool = False
    standardize_responses: bool = True

    def validate(self):
        if self.n_lambda < 1:
            raise ConfigError(f'n_lambda must be >= 1, got {self.n_lambda}')
        if self.lambda_min_ratio is not None and not 0 < self.lambda_min_ratio < 1:
            raise ConfigError(f'lambda_min_ratio must be in (0, 1), got {self.lambda_min_ratio}')
        if (self.tol is not None and self.tol <= 0) or self.max_sweeps < 1:
            raise ConfigError('tol must be positive and max_sweeps >= 1')
        if self.threads < 1:
            raise ConfigError(f'threads must be >= 1, got {self.threads}')
        return self

    def tolerances(self, tol: float, kkt_tol: float) -> Tuple[float, float]:
        """(sweep, KKT) tolerances, the given family defaults filling unset values."""
        return (self.tol if self.tol is not None else tol,
                self.kkt_tol if self.kkt_tol is not None else kkt_tol)


def lambda_grid(lam_max: float, n: int, p: int, config: PathConfig) -> np.ndarray:
    """Decreasing log-spaced grid from `lam_max`, or the user grid when given."""
    if config.lambdas is not None:
        lams = np.asarray(config.lambdas, dtype=float)
        if lams.size == 0 or np.any(lams < 0) or np.any(np.diff(lams) >= 0):
            raise ConfigError('Explicit lambdas must be nonnegative and strictly decreasing')
        return lams
    if lam_max <= 0:
        logger.warning('lambda_max is 0: degenerate path with a single zero solution')
        return np.array([0.0])
    ratio = config.lambda_min_ratio
    if ratio is None:
        ratio = 1e-3 if n > p else 1e-2
    if config.n_lambda == 1:
        return np.array([lam_max])
    grid = np.geomspace(lam_max, ratio * lam_max, config.n_lambda)
    grid[0] = lam_max
    return grid


class Solver(ABC):
    """Coordinate-wise minimizer of one penalized problem, warm-started across calls."""

    @abstractmethod
    def candidates(self) -> np.ndarray:
        """Coordinates eligible for updates (non-constant predictors)."""

    @abstractmethod
    def active(self) -> np.ndarray:
        """Coordinates currently nonzero."""

    @abstractmethod
    def sweep(self, coords: np.ndarray, lam: float) -> float:
        """One pass over `coords`; returns the largest absolute coefficient change."""

    @abstractmethod
    def kkt(self, lam: float) -> float:
        """Largest optimality-condition violation at the current iterate."""

    @abstractmethod
    def objective(self, lam: float) -> float:
        pass


def solve_at(solver: Solver, lam: float, tol: float, kkt_tol: float, max_sweeps: int,
             on_sweep: Optional[Callable[[float], None]] = None) -> int:
    """Run full and active-set sweeps until both the coefficient change and
    the KKT residual are under tolerance. Returns the sweep count."""
    sweeps = 0

    def one(coords):
        nonlocal sweeps
        change = solver.sweep(coords, lam)
        sweeps += 1
        if on_sweep is not None:
            on_sweep(solver.objective(lam))
        return change

    while sweeps < max_sweeps:
        if one(solver.candidates()) < tol:
            if solver.kkt(lam) <= kkt_tol:
                return sweeps
            continue
        active = solver.active()
        while sweeps < max_sweeps:
            if one(active) < tol:
                break
    raise ConvergenceError(f'No convergence at lambda={lam:.6g} after {sweeps:,} sweeps',
                           lam=lam, iterations=sweeps)


@dataclass
class LassoPath(ABC):
    """Solutions along a decreasing lambda grid, on the original data scale.

    `coefficients` has shape (L, p, m) and `intercepts` (L, m), where m is
    1 for gaussian fits, the class count for multinomial fits and the
    response count for multitask fits.
    """
    family: str
    lambdas: np.ndarray
    intercepts: np.ndarray
    coefficients: np.ndarray
    predictors: List[str]
    responses: List[str]
    constant: List[str] = field(default_factory=list)
    sweeps: List[int] = field(default_factory=list)

    @property
    def n_nonzero(self) -> np.ndarray:
        """Predictors with at least one nonzero coefficient, per lambda."""
        return np.any(self.coefficients != 0, axis=2).sum(axis=1)

    def index_of(self, lam: float) -> int:
        hits = np.flatnonzero(np.isclose(self.lambdas, lam, rtol=1e-10, atol=0.0))
        if hits.size == 0:
            raise ConfigError(f'lambda {lam:.6g} is not on the fitted path')
        return int(hits[0])

    @abstractmethod
    def fit_at(self, lam: float):
        pass

    def to_json(self) -> dict:
        path = []
        for i, lam in enumerate(self.lambdas):
            rows, cols = np.nonzero(self.coefficients[i])
            if self.family == strs.GAUSSIAN:
                nz = [[self.predictors[r], float(self.coefficients[i, r, 0])] for r in rows]
            else:
                nz = [[self.predictors[r], self.responses[c], float(self.coefficients[i, r, c])]
                      for r, c in zip(rows, cols)]
            path.append({strs.LAMBDA: float(lam),
                         strs.INTERCEPTS: [float(v) for v in self.intercepts[i]],
                         strs.NONZERO: nz})
        return {strs.FAMILY: self.family,
                strs.RESPONSES: list(self.responses),
                'predictors': list(self.predictors),
                'constant_predictors': list(self.constant),
                'path': path}


@dataclass
class CvResult:
    lambdas: np.ndarray
    cv_mean: np.ndarray
    cv_se: np.ndarray
    fold_losses: np.ndarray
    lambda_min: float
    lambda_1se: float
    path: LassoPath

    def selected(self, rule: str = LambdaRule.MIN) -> float:
        if rule == LambdaRule.MIN:
            return self.lambda_min
        if rule == LambdaRule.ONE_SE:
            return self.lambda_1se
        raise ConfigError(f"Unknown lambda rule '{rule}' (expected one of {LambdaRule.ALL})")

    def fit(self, rule: str = LambdaRule.MIN):
        """Full-data model at the selected lambda."""
        return self.path.fit_at(self.selected(rule))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({strs.LAMBDA: self.lambdas,
                             strs.CV_MEAN: self.cv_mean,
                             strs.CV_SE: self.cv_se,
                             'n_nonzero': self.path.n_nonzero})

    def summary(self) -> Dict[str, float]:
        return {strs.LAMBDA_MIN: float(self.lambda_min),
                strs.LAMBDA_1SE: float(self.lambda_1se),
                strs.FOLDS: int(self.fold_losses.shape[0])}


def select_lambdas(lambdas: np.ndarray, cv_mean: np.ndarray, cv_se: np.ndarray):
    i_min = int(np.argmin(cv_mean))
    bound = cv_mean[i_min] + cv_se[i_min]
    # lambdas decrease, so the first index within the bound is the largest lambda
    i_1se = int(np.flatnonzero(cv_mean <= bound)[0])
    return float(lambdas[i_min]), float(lambdas[i_1se])


def cross_validate(path: LassoPath,
                   folds: FoldAssignment,
                   fold_loss: Callable[[np.ndarray, np.ndarray], np.ndarray],
                   threads: int = 1) -> CvResult:
    """Evaluate `fold_loss(train_mask, test_mask)` per fold, on the lambdas of `path`.

    Folds may run concurrently; results are combined in fold order.
    """
    sizes = folds.sizes()
    if np.any(folds.n - sizes < 2):
        raise ConfigError(f'Every fold must leave at least 2 training rows (fold sizes {sizes.tolist()})')
    if np.any(sizes == 0):
        raise ConfigError('Every fold must hold at least one row')

    def run(f):
        train, test = folds.split(f)
        return fold_loss(train, test)

    losses = Parallel(n_jobs=threads, prefer='threads')(delayed(run)(f) for f in range(folds.k))
    losses = np.vstack(losses)
    cv_mean = losses.mean(axis=0)
    if folds.k > 1:
        cv_se = losses.std(axis=0, ddof=1) / np.sqrt(folds.k)
    else:
        cv_se = np.zeros_like(cv_mean)
    lam_min, lam_1se = select_lambdas(path.lambdas, cv_mean, cv_se)
    logger.debug(f'{path.family} CV over {folds.k} folds: lambda_min={lam_min:.4g}, '
                 f'lambda_1se={lam_1se:.4g}')
    return CvResult(lambdas=path.lambdas, cv_mean=cv_mean, cv_se=cv_se,
                    fold_losses=losses, lambda_min=lam_min, lambda_1se=lam_1se, path=path)


def check_fold_rows(folds: FoldAssignment, n_rows: int):
    if folds.n != n_rows:
        raise ConfigError(f'Fold assignment covers {folds.n} rows but the data has {n_rows}')
