"""Sure independence screening: single-pass marginal ranking of predictors."""
import math
from typing import Dict, List, Optional, Sequence, Tuple
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import pandas as pd
from loguru import logger
from scipy import stats

from sparsereg.dataset import Dataset, standardize_array
from sparsereg.errors import ConfigError, DataError, ScreeningError
import sparsereg.strs as strs


class ScreenMethod:
    CORRELATION = 'correlation'
    MARGINAL_MLE = 'marginal_mle'


@dataclass(frozen=True)
class ScreenResult:
    ranked: List[Tuple[str, float]]
    kept: List[str]
    d: int
    method: str

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({strs.RANK: np.arange(1, len(self.ranked) + 1),
                             strs.NAME: [r[0] for r in self.ranked],
                             strs.SCORE: [r[1] for r in self.ranked]})


def default_d_keep(n: int) -> int:
    """ceil(n / log n), the usual screening retention size."""
    if n < 2:
        return 1
    return int(math.ceil(n / math.log(n)))


def rank_scores(names: Sequence[str], scores: np.ndarray, d_keep: Optional[int],
                n: int, method: str) -> ScreenResult:
    names = list(names)
    if d_keep is None:
        d_keep = default_d_keep(n)
    if d_keep < 1:
        raise ConfigError(f'd_keep must be >= 1, got {d_keep}')
    if d_keep > len(names):
        logger.warning(f'd_keep={d_keep} exceeds the {len(names)} predictors; keeping all')
        d_keep = len(names)
    scores = np.nan_to_num(np.asarray(scores, dtype=float), nan=0.0)
    order = np.argsort(-np.abs(scores), kind='stable')
    ranked = [(names[j], float(scores[j])) for j in order]
    return ScreenResult(ranked=ranked, kept=[r[0] for r in ranked[:d_keep]], d=d_keep, method=method)


def _complete(d: Dataset, columns: Sequence[str]) -> np.ndarray:
    d.require(list(columns))
    m = d.matrix(columns)
    if np.isnan(m).any():
        raise DataError('Screening needs complete data; call drop_incomplete first')
    return m


def correlation_scores(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Marginal correlations of each column of `x` with each column of `y` (p x m).

    Constant columns on either side score 0.
    """
    xs = standardize_array(x)[0]
    ys = standardize_array(y)[0]
    return xs.T @ ys / x.shape[0]


def sis_screen(d: Dataset, outcome: str, predictors: Sequence[str],
               d_keep: Optional[int] = None) -> ScreenResult:
    """Rank predictors by absolute correlation with a continuous outcome."""
    predictors = list(predictors)
    x = _complete(d, predictors)
    y = _complete(d, [outcome])
    scores = np.abs(correlation_scores(x, y)[:, 0])
    return rank_scores(predictors, scores, d_keep, d.n_rows, ScreenMethod.CORRELATION)


def sis_screen_multi(d: Dataset, outcomes: Sequence[str], predictors: Sequence[str],
                     d_keep: Optional[int] = None) -> ScreenResult:
    """Rank predictors by the root mean square of their correlations with a response block."""
    predictors = list(predictors)
    x = _complete(d, predictors)
    y = _complete(d, list(outcomes))
    scores = np.sqrt(np.mean(correlation_scores(x, y) ** 2, axis=1))
    return rank_scores(predictors, scores, d_keep, d.n_rows, ScreenMethod.CORRELATION)


def binary_scores(x: np.ndarray, group: np.ndarray) -> np.ndarray:
    """Pooled two-sample t statistics (group 1 minus group 0) per column."""
    a, b = x[~group], x[group]
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise ScreeningError(f'Each group needs at least 2 observations (sizes {a.shape[0]}, {b.shape[0]})')
    with np.errstate(divide='ignore', invalid='ignore'):
        t = stats.ttest_ind(b, a, axis=0, equal_var=True).statistic
    return np.nan_to_num(np.asarray(t, dtype=float), nan=0.0, posinf=0.0, neginf=0.0)


def sis_screen_binary(d: Dataset, outcome: str, predictors: Sequence[str],
                      d_keep: Optional[int] = None) -> ScreenResult:
    """Rank predictors by the two-sample t statistic between the two outcome groups."""
    predictors = list(predictors)
    x = _complete(d, predictors)
    y = _complete(d, [outcome])[:, 0]
    levels = np.unique(y)
    if levels.size != 2:
        raise ScreeningError(f'Outcome {outcome} must have exactly 2 observed levels, found {levels.size}')
    scores = binary_scores(x, y == levels[1])
    return rank_scores(predictors, scores, d_keep, d.n_rows, ScreenMethod.MARGINAL_MLE)


def pairwise_screens(d: Dataset, outcome: str, predictors: Sequence[str],
                     d_keep: Optional[int] = None) -> Dict[Tuple[str, str], ScreenResult]:
    """One binary screen per unordered pair of outcome levels, on that pair's rows."""
    predictors = list(predictors)
    cat = d.categorical(outcome)
    if cat.n_levels < 2:
        raise ScreeningError(f'Outcome {outcome} needs at least 2 levels')
    x = _complete(d, predictors)
    screens = dict()
    for a, b in combinations(range(cat.n_levels), 2):
        pair = (cat.labels[a], cat.labels[b])
        rows = (cat.codes == a) | (cat.codes == b)
        if not rows.any():
            raise ScreeningError(f'No rows for level pair {pair}', pair=pair)
        try:
            scores = binary_scores(x[rows], cat.codes[rows] == b)
        except ScreeningError as e:
            raise ScreeningError(f'Level pair {pair}: {e}', pair=pair)
        screens[pair] = rank_scores(predictors, scores, d_keep, int(rows.sum()),
                                    ScreenMethod.MARGINAL_MLE)
    return screens
