from collections import Counter
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from loguru import logger

from sparsereg.dataset import Dataset, Role
from sparsereg.errors import DataError
from sparsereg.schema import DatasetSchema, parse_dataset_schema
from sparsereg.utils import read_json

MISSING_TOKENS = ('', 'NA')


def load_schema(path: Path) -> DatasetSchema:
    return parse_dataset_schema(read_json(path))


def _parse_levels(raw: pd.Series, labels: list) -> np.ndarray:
    """Map level labels (or their integer codes) to codes; anything else is missing."""
    index = {lb: i for i, lb in enumerate(labels)}
    out = np.full(raw.size, np.nan)
    for i, cell in enumerate(raw):
        if cell in index:
            out[i] = index[cell]
        elif cell.lstrip('-').isdigit() and 0 <= int(cell) < len(labels):
            out[i] = int(cell)
    return out


def load_csv(path: Union[str, Path],
             schema: Optional[Union[DatasetSchema, dict]] = None) -> Dataset:
    """Read a UTF-8 CSV with a mandatory header row.

    Non-id cells are parsed as numbers; "NA", empty or unparseable cells
    become missing. Columns without a schema entry are predictors.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f'Input file not found: {path}')
    schema = parse_dataset_schema(schema) if schema is not None else DatasetSchema()

    try:
        header = pd.read_csv(path, header=None, nrows=1, dtype=str,
                             keep_default_na=False, encoding='utf-8')
    except pd.errors.EmptyDataError:
        raise DataError(f'Empty file: {path}')
    names = [h.strip() for h in header.iloc[0].tolist()]
    dups = sorted(n for n, c in Counter(names).items() if c > 1)
    if dups:
        raise DataError(f'Duplicate header names in {path}: {dups}')
    absent = [c for c in schema.columns if c not in names]
    if absent:
        raise DataError(f'Schema references columns absent from {path}: {absent}')

    raw = pd.read_csv(path, header=0, dtype=str, keep_default_na=False,
                      encoding='utf-8', skipinitialspace=True)
    raw.columns = names
    if raw.shape[0] == 0:
        raise DataError(f'No data rows in {path}')

    parsed = dict()
    unparsed = 0
    for c in names:
        cells = raw[c].str.strip()
        role = schema.roles.get(c, Role.Predictor)
        if role == Role.Id:
            parsed[c] = cells
            continue
        if c in schema.levels:
            values = _parse_levels(cells, schema.levels[c])
        else:
            values = pd.to_numeric(cells.where(~cells.isin(MISSING_TOKENS)),
                                   errors='coerce').to_numpy(dtype=float)
        unparsed += int((np.isnan(values) & ~cells.isin(MISSING_TOKENS).to_numpy()).sum())
        parsed[c] = values
    if unparsed:
        logger.warning(f'{unparsed:,} unparseable cells in {path.name} treated as missing')

    frame = pd.DataFrame(parsed, columns=names)
    logger.debug(f'Loaded {path.name}: {frame.shape[0]:,} rows x {frame.shape[1]:,} columns')
    return Dataset.from_frame(frame, roles=schema.roles, levels=schema.levels)
