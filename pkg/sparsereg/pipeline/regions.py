from typing import Dict, List, Optional, Sequence, Tuple, Union
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import logit

from sparsereg.errors import ConfigError, DataError
import sparsereg.strs as strs

EXPECTED_COUNTS = (23, 11, 23)


class Region(Enum):
    LeftHemisphere = 'LeftHemisphere'
    CorpusCallosum = 'CorpusCallosum'
    RightHemisphere = 'RightHemisphere'

    @property
    def short(self) -> str:
        return {Region.LeftHemisphere: 'LB',
                Region.CorpusCallosum: 'CC',
                Region.RightHemisphere: 'RB'}[self]


REGION_ORDER = (Region.LeftHemisphere, Region.CorpusCallosum, Region.RightHemisphere)


@dataclass(frozen=True, eq=False)
class RegionPartition:
    """Assignment of every FA response column to one brain region."""
    region_map: Dict[str, Region]

    @property
    def columns(self) -> List[str]:
        return list(self.region_map)

    @property
    def counts(self) -> Tuple[int, ...]:
        return tuple(len(self.members(r)) for r in REGION_ORDER)

    def members(self, region: Region) -> List[str]:
        return [c for c, r in self.region_map.items() if r == region]

    def validate(self, columns: Optional[Sequence[str]] = None,
                 expected: Optional[Tuple[int, ...]] = EXPECTED_COUNTS,
                 override: bool = False) -> 'RegionPartition':
        """Check the partition is total and disjoint over `columns` and has the
        expected per-region counts, unless `override` is set."""
        if columns is not None:
            columns = list(columns)
            absent = [c for c in self.region_map if c not in columns]
            unassigned = [c for c in columns if c not in self.region_map]
            if absent:
                raise DataError(f'Partition names response columns absent from the data: {absent}')
            if unassigned:
                raise DataError(f'Response columns without a region: {unassigned}')
        if not override and expected is not None and self.counts != tuple(expected):
            raise ConfigError(f'Region counts {self.counts} differ from the expected {tuple(expected)}; '
                              f'set partition_override for other layouts')
        return self

    @staticmethod
    def by_order(columns: Sequence[str],
                 counts: Tuple[int, ...] = EXPECTED_COUNTS) -> 'RegionPartition':
        """Consecutive blocks of `columns` in left, callosum, right order."""
        columns = list(columns)
        if sum(counts) != len(columns):
            raise DataError(f'{len(columns)} response columns cannot be split into {tuple(counts)}')
        region_map = dict()
        start = 0
        for region, count in zip(REGION_ORDER, counts):
            for c in columns[start:start + count]:
                region_map[c] = region
            start += count
        return RegionPartition(region_map)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({strs.RESPONSE_NAME: list(self.region_map),
                             strs.REGION: [r.value for r in self.region_map.values()]})


def load_partition(path: Union[str, Path]) -> RegionPartition:
    """Read a two-column CSV (response_name, region)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f'Partition file not found: {path}')
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DataError(f'Empty partition file: {path}')
    missing = [c for c in (strs.RESPONSE_NAME, strs.REGION) if c not in frame.columns]
    if missing:
        raise DataError(f'Partition file {path} lacks columns {missing}')
    valid = {r.value: r for r in Region}
    region_map = dict()
    for name, region in zip(frame[strs.RESPONSE_NAME].str.strip(), frame[strs.REGION].str.strip()):
        if region not in valid:
            raise DataError(f"Unknown region '{region}' for {name} (accepted {sorted(valid)})")
        if name in region_map:
            raise DataError(f'Response {name} is assigned to more than one region')
        region_map[name] = valid[region]
    return RegionPartition(region_map)


def logit_transform(v, epsilon: float = 1e-6):
    """log(v' / (1 - v')) with v' clamped to [epsilon, 1 - epsilon]."""
    if not 0 < epsilon < 0.5:
        raise ConfigError(f'epsilon must be in (0, 0.5), got {epsilon}')
    v = np.clip(np.asarray(v, dtype=float), epsilon, 1.0 - epsilon)
    return logit(v)
