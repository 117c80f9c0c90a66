from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from sparsereg.dataset import Dataset, Role
from sparsereg.errors import DataError
import sparsereg.strs as strs

SUMMARY_COLUMNS = ['variable', 'level', strs.STRATUM, 'n', 'mean', 'sd', 'percent']


def _row(variable, level, stratum, n, mean=np.nan, sd=np.nan, percent=np.nan) -> list:
    return [variable, level, stratum, int(n), mean, sd, percent]


def summarize_cohort(d: Dataset, stratum: str,
                     columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Per-stratum characteristics in long form.

    Numeric columns get count, mean and sample sd of their observed
    values; categorical columns (those with declared levels) get the count
    and the percent of observed rows in every level. Each stratum opens
    with an 'N' row holding its size.
    """
    if stratum not in d.roles:
        raise DataError(f'Stratum column {stratum} is absent')
    cat = d.categorical(stratum)
    if columns is None:
        columns = [c for c in d.columns if c != stratum and d.roles[c] != Role.Id]
    columns = list(columns)
    d.require(columns)

    rows: List[list] = []
    for s, label in enumerate(cat.labels):
        mask = cat.codes == s
        rows.append(_row(strs.N, '', label, mask.sum()))
        for c in columns:
            values = d.column(c)[mask]
            observed = values[~np.isnan(values)]
            if c in d.levels:
                labels = d.levels[c]
                counts = np.bincount(observed.astype(int), minlength=len(labels))
                total = counts.sum()
                for lv, k in zip(labels, counts):
                    pct = 100.0 * k / total if total > 0 else np.nan
                    rows.append(_row(c, lv, label, k, percent=pct))
            else:
                mean = float(observed.mean()) if observed.size else np.nan
                sd = float(observed.std(ddof=1)) if observed.size > 1 else np.nan
                rows.append(_row(c, '', label, observed.size, mean, sd))
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
