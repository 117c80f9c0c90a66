import numpy as np
import pandas as pd
import pytest

from sparsereg.dataset import Dataset, Role
from sparsereg.errors import DataError
from sparsereg.preprocess.cohort import SUMMARY_COLUMNS, summarize_cohort


def _data():
    frame = pd.DataFrame({'RID': ['a', 'b', 'c', 'd', 'e'],
                          'DX': [0, 0, 1, 1, 1],
                          'AGE': [70.0, 74.0, 80.0, np.nan, 82.0],
                          'SEX': [0, 1, 1, 1, np.nan]})
    return Dataset.from_frame(frame, roles={'RID': Role.Id, 'DX': Role.Stratum},
                              levels={'DX': ['CN', 'AD'], 'SEX': ['Male', 'Female']})


def test_summary_rows():
    table = summarize_cohort(_data(), 'DX')
    assert list(table.columns) == SUMMARY_COLUMNS
    assert 'RID' not in set(table['variable'])

    sizes = table[table['variable'] == 'N'].set_index('stratum')['n']
    assert sizes.to_dict() == {'CN': 2, 'AD': 3}

    age = table[table['variable'] == 'AGE'].set_index('stratum')
    assert age.loc['CN', 'mean'] == pytest.approx(72.0)
    assert age.loc['CN', 'sd'] == pytest.approx(np.std([70.0, 74.0], ddof=1))
    assert age.loc['AD', 'n'] == 2

    sex = table[(table['variable'] == 'SEX') & (table['stratum'] == 'AD')].set_index('level')
    assert sex.loc['Female', 'n'] == 2
    assert sex.loc['Female', 'percent'] == pytest.approx(100.0)
    assert sex.loc['Male', 'percent'] == pytest.approx(0.0)


def test_selected_columns():
    table = summarize_cohort(_data(), 'DX', columns=['AGE'])
    assert set(table['variable']) == {'N', 'AGE'}
    with pytest.raises(DataError):
        summarize_cohort(_data(), 'DX', columns=['MMSE'])
    with pytest.raises(DataError):
        summarize_cohort(_data(), 'GROUP')


if __name__ == "__main__":
    test_summary_rows()
    test_selected_columns()
