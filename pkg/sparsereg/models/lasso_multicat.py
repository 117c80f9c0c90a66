"""l1-penalized multinomial logistic regression.

Coefficient rows are kept in the sum-to-zero parameterization: every
predictor row and the intercept vector sum to zero across classes. Each
block (the intercepts or one predictor row) moves to the constrained
minimizer of a quadratic model of the loss, with per-class curvature taken
from the current fitted probabilities. A step that does not lower the
objective is replaced by the majorizing step, which uses the bound that the
Hessian of the softmax log-partition never exceeds half the identity on
sum-to-zero directions.
"""
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple
from dataclasses import dataclass

import numpy as np
from loguru import logger
from scipy.special import logsumexp, softmax

from sparsereg.dataset import Dataset, FoldAssignment, prepare_design
from sparsereg.errors import DataError, ModelingError
from sparsereg.models.lasso_gaussian import soft_threshold
from sparsereg.models.path import (CvResult, LassoPath, PathConfig, Solver,
                                   check_fold_rows, cross_validate, lambda_grid, solve_at)
import sparsereg.strs as strs

# sweeps stop on this coefficient change; the KKT residual certifies the solution
TOL = 1e-5
KKT_TOL = 1e-6
CURVATURE_FLOOR = 1e-5
# path early exit on the fraction of null deviance explained
DEV_RATIO_MAX = 0.999
DEV_CHANGE_TOL = 1e-5
MIN_LAMBDAS = 5


def softmax_probs(intercepts, coefficients, x) -> np.ndarray:
    """Class probabilities for one row (vector `x`) or many rows (matrix `x`)."""
    x = np.asarray(x, dtype=float)
    eta = np.asarray(intercepts, dtype=float) + x @ np.asarray(coefficients, dtype=float)
    return softmax(eta, axis=-1)


def constrained_soft_threshold(z: np.ndarray, gamma: float,
                               weights: Optional[np.ndarray] = None) -> np.ndarray:
    """argmin_b 0.5 sum_k w_k (b_k - z_k)^2 + gamma ||b||_1 subject to sum(b) = 0.

    The solution is S(w z - c, gamma) / w where c zeroes the (piecewise
    linear, non-increasing) sum; c is found exactly between breakpoints.
    Unit weights when `weights` is None.
    """
    w = np.ones_like(z) if weights is None else np.asarray(weights, dtype=float)
    u = w * z
    if gamma == 0:
        c = z.sum() / (1.0 / w).sum()
        return (u - c) / w
    knots = np.sort(np.concatenate([u - gamma, u + gamma]))
    sums = (soft_threshold(u[None, :] - knots[:, None], gamma) / w).sum(axis=1)
    hit = np.flatnonzero(sums <= 0)[0]
    if sums[hit] == 0 or hit == 0:
        c = knots[hit]
    else:
        lo, hi = knots[hit - 1], knots[hit]
        s_lo, s_hi = sums[hit - 1], sums[hit]
        c = lo + (hi - lo) * s_lo / (s_lo - s_hi)
    return soft_threshold(u - c, gamma) / w


def _kkt_rows(grad: np.ndarray, beta: np.ndarray, lam: float) -> np.ndarray:
    """Violation per row, minimized over the sum-to-zero multiplier."""
    active = beta != 0
    shifted = grad + lam * np.sign(beta)
    up = np.where(active, shifted, grad - lam).max(axis=1)
    down = np.where(active, -shifted, -grad - lam).max(axis=1)
    return np.maximum(0.0, 0.5 * (up + down))


class MultinomialSolver(Solver):

    def __init__(self, x: np.ndarray, y: np.ndarray):
        self.x = np.asfortranarray(x)
        self.x2 = self.x ** 2
        self.y = y
        self.n, self.p = x.shape
        self.k = y.shape[1]
        self.v = self.x2.sum(axis=0) / self.n
        self.usable = np.flatnonzero(self.v > 0)
        self.ones = np.ones(self.n)
        log_prop = np.log(y.mean(axis=0))
        self.b0 = log_prop - log_prop.mean()
        self.beta = np.zeros((self.p, self.k))
        self._set_eta(np.tile(self.b0, (self.n, 1)))

    def _set_eta(self, eta: np.ndarray, lse: Optional[np.ndarray] = None):
        if lse is None:
            lse = logsumexp(eta, axis=1)
        self.eta = eta
        self.prob = np.exp(eta - lse[:, None])
        self.resid = self.prob - self.y
        self.loss = float(np.mean(lse - (eta * self.y).sum(axis=1)))

    def candidates(self) -> np.ndarray:
        return self.usable

    def active(self) -> np.ndarray:
        return np.flatnonzero(np.any(self.beta != 0, axis=1))

    def _step(self, col: np.ndarray, col2: np.ndarray, v: float, current: np.ndarray,
              lam: float) -> np.ndarray:
        """New value of one block whose design column is `col`; the linear
        predictor is updated to match."""
        g = col @ self.resid / self.n
        # a zero row stays zero unless the gradient spread beats the penalty
        if lam > 0 and not current.any() and np.ptp(g) <= 2.0 * lam:
            return current
        w = np.maximum(col2 @ (self.prob * (1.0 - self.prob)) / self.n, CURVATURE_FLOOR * v)
        new = constrained_soft_threshold(current - g / w, lam, w)
        if np.array_equal(new, current):
            return current
        eta = self.eta + np.outer(col, new - current)
        lse = logsumexp(eta, axis=1)
        loss = float(np.mean(lse - (eta * self.y).sum(axis=1)))
        if loss + lam * np.abs(new).sum() <= self.loss + lam * np.abs(current).sum():
            self._set_eta(eta, lse)
            return new
        m = np.full(self.k, 0.5 * v)
        new = constrained_soft_threshold(current - g / m, lam, m)
        if not np.array_equal(new, current):
            self._set_eta(self.eta + np.outer(col, new - current))
        return new

    def sweep(self, coords: np.ndarray, lam: float) -> float:
        new = self._step(self.ones, self.ones, 1.0, self.b0, 0.0)
        change = float(np.abs(new - self.b0).max())
        self.b0 = new
        for j in coords:
            new = self._step(self.x[:, j], self.x2[:, j], self.v[j], self.beta[j], lam)
            delta = float(np.abs(new - self.beta[j]).max())
            if delta > 0:
                self.beta[j] = new
                change = max(change, delta)
        return change

    def gradient(self) -> Tuple[np.ndarray, np.ndarray]:
        # rebuilt from the coefficients so rounding in the running updates cannot drift
        self._set_eta(self.b0 + self.x @ self.beta)
        return self.resid.mean(axis=0), self.x.T @ self.resid / self.n

    def kkt(self, lam: float) -> float:
        g0, g = self.gradient()
        rows = _kkt_rows(g[self.usable], self.beta[self.usable], lam)
        return max(float(np.abs(g0).max()), float(rows.max(initial=0.0)))

    def objective(self, lam: float) -> float:
        return self.loss + lam * float(np.abs(self.beta).sum())


@dataclass
class MultinomialFit:
    intercepts: np.ndarray
    coefficients: np.ndarray
    lam: float
    class_labels: List[str]
    predictors: List[str]
    outcome: str
    deviance: float = float("nan")

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax_probs(self.intercepts, self.coefficients, x)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=-1)

    def class_nonzero(self) -> Dict[str, List[str]]:
        """Predictors with a nonzero coefficient, per class."""
        return {lb: [self.predictors[j] for j in np.flatnonzero(self.coefficients[:, c])]
                for c, lb in enumerate(self.class_labels)}

    def nonzero_rows(self) -> List[str]:
        return [self.predictors[j] for j in np.flatnonzero(np.any(self.coefficients != 0, axis=1))]

    def to_json(self) -> dict:
        rows, cols = np.nonzero(self.coefficients)
        return {strs.CLASS_LABELS: list(self.class_labels),
                strs.LAMBDA: float(self.lam),
                strs.INTERCEPTS: {lb: float(v) for lb, v in zip(self.class_labels, self.intercepts)},
                strs.COEFFICIENTS: [[self.predictors[r], self.class_labels[c],
                                     float(self.coefficients[r, c])] for r, c in zip(rows, cols)]}


@dataclass
class MultinomialPath(LassoPath):
    outcome: str = ''
    deviances: Optional[np.ndarray] = None

    def fit_at(self, lam: float) -> MultinomialFit:
        i = self.index_of(lam)
        return MultinomialFit(intercepts=self.intercepts[i].copy(),
                              coefficients=self.coefficients[i].copy(),
                              lam=float(self.lambdas[i]),
                              class_labels=list(self.responses),
                              predictors=list(self.predictors),
                              outcome=self.outcome,
                              deviance=float(self.deviances[i]) if self.deviances is not None else float("nan"))


def lambda_max_multinomial(xs: np.ndarray, y: np.ndarray) -> float:
    """max over predictors and classes of |gradient| at the intercept-only fit."""
    if xs.shape[1] == 0:
        return 0.0
    resid = y.mean(axis=0)[None, :] - y
    return float(np.abs(xs.T @ resid).max() / xs.shape[0])


def fit_multinomial_arrays(x: np.ndarray, codes: np.ndarray, k: int,
                           config: PathConfig = PathConfig(),
                           lambdas: Optional[np.ndarray] = None,
                           on_sweep: Optional[Callable[[float], None]] = None):
    """Returns (lambdas, intercepts (L, K), coefficients (L, p, K), constant mask,
    sweeps, training deviances (L,)).

    With `config.early_exit` the path ends once the deviance explained passes
    DEV_RATIO_MAX or stops growing. A computed grid is then truncated; an
    explicit `lambdas` keeps its length and repeats the last solution.
    """
    counts = np.bincount(codes, minlength=k)
    if np.any(counts == 0):
        raise ModelingError(f'Degenerate class proportions: class counts {counts.tolist()}')
    n, p = x.shape
    xs, mean, sd, constant = prepare_design(x, config.standardize)
    y = np.zeros((n, k))
    y[np.arange(n), codes] = 1.0
    extend = lambdas is not None
    null_start = lambdas is None and config.lambdas is None
    if lambdas is None:
        lambdas = lambda_grid(lambda_max_multinomial(xs, y), n, p, config)
    solver = MultinomialSolver(xs, y)
    null_dev = 2.0 * n * solver.loss
    tol, kkt_tol = config.tolerances(TOL, KKT_TOL)
    intercepts = np.empty((lambdas.size, k))
    coefs = np.zeros((lambdas.size, p, k))
    deviances = np.empty(lambdas.size)
    sweeps = []
    fitted = lambdas.size
    prev_ratio = 0.0
    for i, lam in enumerate(lambdas):
        if i == 0 and null_start:
            # the null model is the solution at lambda_max
            sweeps.append(0)
        else:
            sweeps.append(solve_at(solver, float(lam), tol, kkt_tol, config.max_sweeps, on_sweep))
        coefs[i] = solver.beta / sd[:, None]
        intercepts[i] = solver.b0 - mean @ coefs[i]
        deviances[i] = 2.0 * n * solver.loss
        ratio = 1.0 - deviances[i] / null_dev
        if config.early_exit and i + 1 >= MIN_LAMBDAS and i + 1 < lambdas.size \
                and (ratio > DEV_RATIO_MAX or ratio - prev_ratio < DEV_CHANGE_TOL * ratio):
            fitted = i + 1
            logger.debug(f'Multinomial path stops after {fitted} lambdas '
                         f'(deviance explained {ratio:.4f})')
            break
        prev_ratio = ratio
    if fitted < lambdas.size:
        if extend:
            coefs[fitted:] = coefs[fitted - 1]
            intercepts[fitted:] = intercepts[fitted - 1]
            deviances[fitted:] = deviances[fitted - 1]
        else:
            lambdas = lambdas[:fitted]
            intercepts, coefs, deviances = intercepts[:fitted], coefs[:fitted], deviances[:fitted]
    return lambdas, intercepts, coefs, constant, sweeps, deviances


def _multinomial_inputs(d: Dataset, outcome: str, predictors: Sequence[str]):
    predictors = list(predictors)
    d.require([outcome] + predictors)
    x = d.matrix(predictors)
    if np.isnan(x).any():
        raise DataError('Multinomial fits need complete data; call drop_incomplete first')
    cat = d.categorical(outcome)
    if cat.n_levels < 2:
        raise DataError(f'Outcome {outcome} needs at least 2 classes')
    counts = cat.counts()
    if np.any(counts < 2):
        short = [lb for lb, c in zip(cat.labels, counts) if c < 2]
        raise ModelingError(f'Degenerate class proportions: classes {short} observed fewer than 2 times')
    return x, cat


def fit_multinomial_path(d: Dataset, outcome: str, predictors: Sequence[str],
                         config: PathConfig = PathConfig(),
                         on_sweep: Optional[Callable[[float], None]] = None) -> MultinomialPath:
    config.validate()
    predictors = list(predictors)
    x, cat = _multinomial_inputs(d, outcome, predictors)
    lambdas, intercepts, coefs, constant, sweeps, deviances = fit_multinomial_arrays(
        x, cat.codes, cat.n_levels, config, on_sweep=on_sweep)
    logger.debug(f'Multinomial path: n={d.n_rows:,} p={len(predictors):,} K={cat.n_levels} '
                 f'L={lambdas.size} sweeps={sum(sweeps):,}')
    path = MultinomialPath(family=strs.MULTINOMIAL, lambdas=lambdas, intercepts=intercepts,
                           coefficients=coefs, predictors=predictors,
                           responses=list(cat.labels),
                           constant=[predictors[j] for j in np.flatnonzero(constant)],
                           sweeps=sweeps, outcome=outcome, deviances=deviances)
    return path


def multinomial_deviance(fit: MultinomialFit, d: Dataset) -> float:
    """-2 sum_i log p(g_i | x_i)."""
    cat = d.categorical(fit.outcome)
    unknown = [lb for lb in cat.labels if lb not in fit.class_labels]
    if unknown:
        raise DataError(f'Classes {unknown} are not known to the fit')
    index = {lb: i for i, lb in enumerate(fit.class_labels)}
    codes = np.array([index[cat.labels[c]] for c in cat.codes], dtype=int)
    x = d.matrix(fit.predictors)
    eta = fit.intercepts + x @ fit.coefficients
    log_p = eta[np.arange(codes.size), codes] - logsumexp(eta, axis=1)
    return float(-2.0 * log_p.sum())


def cv_multinomial(d: Dataset, outcome: str, predictors: Sequence[str], folds: FoldAssignment,
                   config: PathConfig = PathConfig()) -> CvResult:
    """k-fold CV of the multinomial path; held-out loss is deviance per held-out row."""
    check_fold_rows(folds, d.n_rows)
    path = fit_multinomial_path(d, outcome, predictors, config)
    x, cat = _multinomial_inputs(d, outcome, predictors)
    k = cat.n_levels

    def fold_loss(train, test):
        try:
            _, b0, b, _, _, _ = fit_multinomial_arrays(x[train], cat.codes[train], k, config,
                                                   lambdas=path.lambdas)
        except ModelingError as e:
            raise ModelingError(f'Cross-validation fold failed: {e}')
        codes = cat.codes[test]
        out = np.empty(path.lambdas.size)
        for i in range(path.lambdas.size):
            eta = b0[i] + x[test] @ b[i]
            out[i] = -2.0 * np.mean(eta[np.arange(codes.size), codes] - logsumexp(eta, axis=1))
        return out

    return cross_validate(path, folds, fold_loss, config.threads)


def gene_sets(sets: Iterable[Iterable[str]]) -> Tuple[Set[str], Set[str]]:
    """Union and intersection of predictor-name sets."""
    sets = [set(s) for s in sets]
    if not sets:
        raise DataError('gene_sets needs at least one input set')
    return set.union(*sets), set.intersection(*sets)


def kkt_violation(d: Dataset, fit: MultinomialFit, standardize: bool = True) -> float:
    x, cat = _multinomial_inputs(d, fit.outcome, fit.predictors)
    xs, mean, sd, constant = prepare_design(x, standardize)
    beta = fit.coefficients * sd[:, None]
    b0 = fit.intercepts + mean @ fit.coefficients
    index = {lb: i for i, lb in enumerate(fit.class_labels)}
    y = np.zeros((d.n_rows, len(fit.class_labels)))
    y[np.arange(d.n_rows), [index[cat.labels[c]] for c in cat.codes]] = 1.0
    resid = softmax(b0 + xs @ beta, axis=1) - y
    g = xs.T @ resid / d.n_rows
    rows = _kkt_rows(g[~constant], beta[~constant], fit.lam)
    return max(float(np.abs(resid.mean(axis=0)).max()), float(rows.max(initial=0.0)))
