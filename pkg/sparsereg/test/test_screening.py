import numpy as np
import pandas as pd
import pytest
from scipy import stats

from sparsereg.dataset import Dataset, Role
from sparsereg.errors import ConfigError, DataError, ScreeningError
from sparsereg.models.screening import (default_d_keep, pairwise_screens, sis_screen,
                                        sis_screen_binary, sis_screen_multi)


def _genes(n=200, p=30, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    names = [f'GENE{j + 1:05d}' for j in range(p)]
    return x, names, rng


def test_default_d_keep():
    assert default_d_keep(100) == 22
    assert default_d_keep(104) == 23
    assert default_d_keep(468) == 77
    assert default_d_keep(1) == 1


def test_sis_keeps_planted_genes():
    x, names, rng = _genes()
    y = 2.0 * x[:, 4] - 1.5 * x[:, 11] + 0.5 * rng.standard_normal(x.shape[0])
    frame = pd.DataFrame(x, columns=names)
    frame['MMSE'] = y
    d = Dataset.from_frame(frame, roles={'MMSE': Role.Outcome})

    result = sis_screen(d, 'MMSE', names, d_keep=2)
    assert set(result.kept) == {'GENE00005', 'GENE00012'}
    assert result.d == 2
    assert len(result.ranked) == len(names)
    scores = [s for _, s in result.ranked]
    assert scores == sorted(scores, reverse=True)

    default = sis_screen(d, 'MMSE', names)
    assert default.d == default_d_keep(200)
    table = default.to_frame()
    assert list(table.columns) == ['rank', 'name', 'score']
    assert table['rank'].tolist() == list(range(1, len(names) + 1))


def test_sure_screening_over_seeds():
    hits = 0
    for seed in range(20):
        x, names, rng = _genes(n=200, p=1000, seed=seed)
        y = x[:, :5].sum(axis=1) + 0.5 * rng.standard_normal(200)
        frame = pd.DataFrame(x, columns=names)
        frame['Y'] = y
        result = sis_screen(Dataset.from_frame(frame), 'Y', names)
        assert result.d == 38
        hits += set(names[:5]) <= set(result.kept)
    assert hits >= 19


def test_ties_keep_input_order_and_constants_rank_last():
    x, names, rng = _genes(p=4)
    x[:, 2] = x[:, 0]
    x[:, 3] = 5.0
    frame = pd.DataFrame(x, columns=names)
    frame['Y'] = x[:, 0] + 0.1 * rng.standard_normal(x.shape[0])
    d = Dataset.from_frame(frame)
    result = sis_screen(d, 'Y', names, d_keep=4)
    assert [r[0] for r in result.ranked][:2] == ['GENE00001', 'GENE00003']
    assert result.ranked[-1] == ('GENE00004', 0.0)


def test_d_keep_larger_than_p_keeps_all():
    x, names, rng = _genes(p=5)
    frame = pd.DataFrame(x, columns=names)
    frame['Y'] = rng.standard_normal(x.shape[0])
    d = Dataset.from_frame(frame)
    assert len(sis_screen(d, 'Y', names, d_keep=50).kept) == 5
    with pytest.raises(ConfigError):
        sis_screen(d, 'Y', names, d_keep=0)


def test_missing_values_are_rejected():
    x, names, _ = _genes(p=3)
    x[0, 1] = np.nan
    frame = pd.DataFrame(x, columns=names)
    frame['Y'] = 1.0 + x[:, 0]
    with pytest.raises(DataError):
        sis_screen(Dataset.from_frame(frame), 'Y', names)


def test_multi_response_scores_are_rms_correlations():
    x, names, rng = _genes(p=6)
    y1 = x[:, 1] + rng.standard_normal(x.shape[0])
    y2 = -x[:, 1] + x[:, 3] + rng.standard_normal(x.shape[0])
    frame = pd.DataFrame(x, columns=names)
    frame['FA_1'], frame['FA_2'] = y1, y2
    d = Dataset.from_frame(frame)
    result = sis_screen_multi(d, ['FA_1', 'FA_2'], names, d_keep=2)
    assert result.kept[0] == 'GENE00002'
    r1 = np.corrcoef(x[:, 1], y1)[0, 1]
    r2 = np.corrcoef(x[:, 1], y2)[0, 1]
    assert result.ranked[0][1] == pytest.approx(np.sqrt((r1 ** 2 + r2 ** 2) / 2))


def test_binary_and_pairwise_screens():
    x, names, rng = _genes(n=240, p=10)
    dx = np.repeat([0, 1, 2], 80)
    x[:, 7] += 1.0 * dx
    frame = pd.DataFrame(x, columns=names)
    frame['DX'] = dx
    d = Dataset.from_frame(frame, roles={'DX': Role.Outcome}, levels={'DX': ['CN', 'MCI', 'AD']})

    screens = pairwise_screens(d, 'DX', names, d_keep=1)
    assert list(screens) == [('CN', 'MCI'), ('CN', 'AD'), ('MCI', 'AD')]
    for screen in screens.values():
        assert screen.kept == ['GENE00008']
        assert screen.d == 1

    rows = dx < 2
    t = stats.ttest_ind(x[rows & (dx == 1), 7], x[rows & (dx == 0), 7]).statistic
    score = dict(screens[('CN', 'MCI')].ranked)['GENE00008']
    assert score == pytest.approx(t)

    two = d.take(rows)
    assert sis_screen_binary(two, 'DX', names, d_keep=1).kept == ['GENE00008']
    with pytest.raises(ScreeningError):
        sis_screen_binary(d, 'DX', names)


def test_pairwise_screen_needs_two_rows_per_level():
    x, names, _ = _genes(n=12, p=3)
    dx = np.array([0] * 6 + [1] * 5 + [2])
    frame = pd.DataFrame(x, columns=names)
    frame['DX'] = dx
    d = Dataset.from_frame(frame, levels={'DX': ['CN', 'MCI', 'AD']})
    with pytest.raises(ScreeningError) as e:
        pairwise_screens(d, 'DX', names)
    assert e.value.pair == ('CN', 'AD')


if __name__ == "__main__":
    test_default_d_keep()
    test_sis_keeps_planted_genes()
    test_sure_screening_over_seeds()
    test_ties_keep_input_order_and_constants_rank_last()
    test_d_keep_larger_than_p_keeps_all()
    test_missing_values_are_rejected()
    test_multi_response_scores_are_rms_correlations()
    test_binary_and_pairwise_screens()
    test_pairwise_screen_needs_two_rows_per_level()
