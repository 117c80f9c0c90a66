from typing import Dict, List, Optional, Sequence, Tuple
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd
from loguru import logger
from sklearn.model_selection import KFold

from sparsereg.errors import ConfigError, DataError


class Role(Enum):
    Outcome = 'outcome'
    Predictor = 'predictor'
    Id = 'id'
    Stratum = 'stratum'


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-typed table with variable roles.

    Non-id columns hold float64 values with NaN marking missing cells;
    id columns keep their text. Instances are never mutated: every
    transformation returns a new Dataset.
    """
    frame: pd.DataFrame
    roles: Dict[str, Role]
    levels: Dict[str, List[str]] = field(default_factory=dict)

    @staticmethod
    def from_frame(frame: pd.DataFrame,
                   roles: Optional[Dict[str, Role]] = None,
                   levels: Optional[Dict[str, List[str]]] = None,
                   allow_empty: bool = False) -> 'Dataset':
        names = [str(c) for c in frame.columns]
        dups = sorted({c for c in names if names.count(c) > 1})
        if dups:
            raise DataError(f'Duplicate column names: {dups}')
        if frame.shape[0] < 1 and not allow_empty:
            raise DataError('Dataset must have at least one row')
        roles = dict(roles or {})
        unknown = [c for c in roles if c not in names]
        if unknown:
            raise DataError(f'Roles given for absent columns: {unknown}')
        full_roles = {c: roles.get(c, Role.Predictor) for c in names}
        frame = frame.copy()
        frame.columns = names
        for c in names:
            if full_roles[c] == Role.Id:
                frame[c] = frame[c].astype(str)
            else:
                frame[c] = pd.to_numeric(frame[c], errors='coerce').astype(float)
        frame = frame.reset_index(drop=True)
        return Dataset(frame=frame, roles=full_roles, levels=dict(levels or {}))

    @property
    def n_rows(self) -> int:
        return int(self.frame.shape[0])

    @property
    def columns(self) -> List[str]:
        return list(self.frame.columns)

    def by_role(self, role: Role) -> List[str]:
        return [c for c in self.columns if self.roles[c] == role]

    @property
    def outcomes(self) -> List[str]:
        return self.by_role(Role.Outcome)

    @property
    def predictors(self) -> List[str]:
        return self.by_role(Role.Predictor)

    @property
    def missing_mask(self) -> pd.DataFrame:
        mask = self.frame.isna()
        for c in self.by_role(Role.Id):
            mask[c] = False
        return mask

    def require(self, columns: Sequence[str], block: str = 'columns'):
        absent = [c for c in columns if c not in self.roles]
        if absent:
            raise DataError(f'Missing {block}: {absent}')
        ids = [c for c in columns if self.roles[c] == Role.Id]
        if ids:
            raise DataError(f'id columns cannot be used numerically: {ids}')

    def column(self, name: str) -> np.ndarray:
        self.require([name])
        return self.frame[name].to_numpy(dtype=float)

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        names = list(names)
        self.require(names)
        if not names:
            return np.zeros((self.n_rows, 0))
        return self.frame[names].to_numpy(dtype=float)

    def categorical(self, name: str) -> 'CategoricalOutcome':
        values = self.column(name)
        if np.isnan(values).any():
            raise DataError(f'Categorical column {name} has missing values')
        if name in self.levels:
            labels = list(self.levels[name])
            codes = values.astype(int)
        else:
            uniq = np.unique(values)
            labels = [fmt_level(v) for v in uniq]
            codes = np.searchsorted(uniq, values)
        if np.any(codes != np.round(values)) and name in self.levels:
            raise DataError(f'Categorical column {name} has non-integer codes')
        return CategoricalOutcome.build(labels, codes)

    def take(self, rows) -> 'Dataset':
        """Row subset (boolean mask or integer positions), order preserved."""
        rows = np.asarray(rows)
        sub = self.frame[rows] if rows.dtype == bool else self.frame.iloc[rows]
        return Dataset(frame=sub.reset_index(drop=True), roles=dict(self.roles),
                       levels=dict(self.levels))

    def with_columns(self, values: Dict[str, np.ndarray],
                     roles: Optional[Dict[str, Role]] = None) -> 'Dataset':
        frame = self.frame.copy()
        new_roles = dict(self.roles)
        for name, v in values.items():
            frame[name] = np.asarray(v, dtype=float)
            if name not in new_roles:
                new_roles[name] = Role.Predictor
        new_roles.update(roles or {})
        return Dataset(frame=frame, roles=new_roles, levels=dict(self.levels))

    def with_roles(self, roles: Dict[str, Role]) -> 'Dataset':
        self.require([c for c in roles if roles[c] != Role.Id])
        new_roles = dict(self.roles)
        new_roles.update(roles)
        return Dataset(frame=self.frame, roles=new_roles, levels=dict(self.levels))


def fmt_level(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


@dataclass(frozen=True, eq=False)
class CategoricalOutcome:
    labels: Tuple[str, ...]
    codes: np.ndarray

    @staticmethod
    def build(labels: Sequence[str], codes) -> 'CategoricalOutcome':
        codes = np.asarray(codes, dtype=int)
        labels = tuple(str(lb) for lb in labels)
        if len(set(labels)) != len(labels):
            raise DataError(f'Category labels must be unique: {list(labels)}')
        if codes.size and (codes.min() < 0 or codes.max() >= len(labels)):
            raise DataError(f'Category codes outside 0..{len(labels) - 1}')
        return CategoricalOutcome(labels=labels, codes=codes)

    @property
    def n_levels(self) -> int:
        return len(self.labels)

    def counts(self) -> np.ndarray:
        return np.bincount(self.codes, minlength=self.n_levels)

    def one_hot(self) -> np.ndarray:
        y = np.zeros((self.codes.size, self.n_levels))
        y[np.arange(self.codes.size), self.codes] = 1.0
        return y

    def reversed(self) -> 'CategoricalOutcome':
        j = self.n_levels
        return CategoricalOutcome(labels=self.labels[::-1], codes=j - 1 - self.codes)

    def take(self, rows) -> 'CategoricalOutcome':
        return CategoricalOutcome(labels=self.labels, codes=self.codes[rows])


@dataclass(frozen=True)
class ColumnScale:
    mean: float
    sd: float
    was_standardized: bool


@dataclass(frozen=True)
class StandardizationInfo:
    scales: Dict[str, ColumnScale]

    @property
    def constant(self) -> List[str]:
        return [c for c, s in self.scales.items() if not s.was_standardized]

    def invert(self, d: Dataset) -> Dataset:
        values = {}
        for c, s in self.scales.items():
            if s.was_standardized:
                values[c] = d.column(c) * s.sd + s.mean
        return d.with_columns(values)


def column_scales(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Means, population standard deviations and a constant-column mask."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] == 0:
        p = x.shape[1]
        return np.zeros(p), np.ones(p), np.ones(p, dtype=bool)
    mean = x.mean(axis=0)
    constant = np.ptp(x, axis=0) == 0
    sd = x.std(axis=0)
    sd = np.where(constant | (sd <= 0), 1.0, sd)
    return mean, sd, constant


def standardize_array(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Center and scale columns; constant columns come back as zeros and are flagged."""
    mean, sd, constant = column_scales(x)
    xs = (x - mean) / sd
    xs[:, constant] = 0.0
    return xs, mean, sd, constant


def prepare_design(x: np.ndarray, standardize: bool = True):
    """Centered design for penalized fits; scaled to unit population sd when `standardize`."""
    xs, mean, sd, constant = standardize_array(x)
    if not standardize:
        xs = x - mean
        xs[:, constant] = 0.0
        sd = np.ones_like(sd)
    return xs, mean, sd, constant


def standardize(d: Dataset, columns: Sequence[str]) -> Tuple[Dataset, StandardizationInfo]:
    columns = list(columns)
    d.require(columns)
    x = d.matrix(columns)
    if np.isnan(x).any():
        raise DataError('standardize requires complete columns; call drop_incomplete first')
    mean, sd, constant = column_scales(x)
    scales = dict()
    values = dict()
    for j, c in enumerate(columns):
        if constant[j]:
            logger.warning(f'Column {c} is constant; left unscaled')
            scales[c] = ColumnScale(float(mean[j]), 0.0, False)
        else:
            scales[c] = ColumnScale(float(mean[j]), float(sd[j]), True)
            values[c] = (x[:, j] - mean[j]) / sd[j]
    return d.with_columns(values), StandardizationInfo(scales)


def drop_incomplete(d: Dataset, required: Sequence[str]) -> Dataset:
    required = list(required)
    d.require(required)
    keep = ~d.frame[required].isna().any(axis=1).to_numpy()
    if keep.all():
        return d
    logger.debug(f'Dropping {int((~keep).sum()):,} incomplete rows of {d.n_rows:,}')
    return d.take(keep)


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    fold_id: np.ndarray
    k: int
    seed: int

    @property
    def n(self) -> int:
        return int(self.fold_id.size)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_id, minlength=self.k)

    def split(self, fold: int) -> Tuple[np.ndarray, np.ndarray]:
        """Boolean (train, test) masks for one fold."""
        test = self.fold_id == fold
        return ~test, test


def make_folds(n: int, k: int, seed: int) -> FoldAssignment:
    if k < 2 or k > n:
        raise ConfigError(f'Fold count must satisfy 2 <= k <= n (k={k}, n={n})')
    fold_id = np.empty(n, dtype=int)
    splitter = KFold(n_splits=k, shuffle=True, random_state=int(seed) % (2 ** 32))
    for f, (_, test) in enumerate(splitter.split(np.zeros((n, 1)))):
        fold_id[test] = f
    return FoldAssignment(fold_id=fold_id, k=k, seed=int(seed))
