import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from sparsereg.dataset import Role
from sparsereg.errors import ConfigError
from sparsereg.load import load_csv, load_schema
from sparsereg.pipeline.regions import Region, load_partition
from sparsereg.preprocess.simulate import (DX_LEVELS, GeneratorSpec, load_generator_spec,
                                           simulate_cohort, write_cohort)
from sparsereg.utils import read_json, write_json


def small_spec(**kwargs) -> GeneratorSpec:
    values = dict(n=240, group_sizes=[60, 60, 60, 60], n_csf=200, n_genetic=200,
                  n_imaging=120, p_genes=60)
    values.update(kwargs)
    return GeneratorSpec(**values).validate()


def test_same_seed_same_cohort():
    a = simulate_cohort(small_spec(), seed=11)
    b = simulate_cohort(small_spec(), seed=11)
    pd.testing.assert_frame_equal(a.data.frame, b.data.frame)
    assert a.truth == b.truth
    c = simulate_cohort(small_spec(), seed=12)
    assert not np.array_equal(a.data.column('MMSE'), c.data.column('MMSE'))


def test_cohort_layout():
    spec = small_spec()
    cohort = simulate_cohort(spec, seed=0)
    d = cohort.data
    assert d.n_rows == 240
    assert d.levels['DX'] == DX_LEVELS
    assert d.roles['RID'] == Role.Id
    assert d.roles['MMSE'] == Role.Outcome
    assert d.roles['GENE00001'] == Role.Predictor
    assert cohort.truth['group_sizes'] == [60, 60, 60, 60]
    assert np.bincount(d.column('DX').astype(int)).tolist() == [60, 60, 60, 60]

    genes = d.matrix(spec.gene_names)
    assert not np.isnan(genes[:200]).any()
    assert np.isnan(genes[200:]).all()
    assert np.isnan(d.column('TAU')[200:]).all()
    assert not np.isnan(d.column('TAU')[:200]).any()

    fa = d.matrix(spec.fa_columns)
    assert fa.shape[1] == 57
    assert np.all((fa[:120] > 0) & (fa[:120] < 1))
    assert np.isnan(fa[120:]).all()
    assert cohort.partition.counts == (23, 11, 23)
    assert cohort.partition.members(Region.CorpusCallosum)[0] == 'FA_CC01'


def test_without_imaging():
    cohort = simulate_cohort(small_spec(include_fa=False), seed=0)
    assert cohort.partition is None
    assert not any(c.startswith('FA_') for c in cohort.data.columns)


def test_planted_gene_shifts_the_outcome():
    cohort = simulate_cohort(small_spec(n=1200, group_sizes=None, n_csf=1200, n_genetic=1200,
                                        n_imaging=0, include_fa=False), seed=3)
    d = cohort.data
    r = np.corrcoef(d.column('GENE00001'), d.column('MMSE'))[0, 1]
    assert r < -0.1
    assert set(cohort.truth['support']['MMSE']) == {'GENE00001', 'GENE00002', 'GENE00003'}


def test_invalid_specs():
    with pytest.raises(ConfigError):
        small_spec(n_imaging=201)
    with pytest.raises(ConfigError):
        small_spec(group_sizes=[60, 60, 60, 59])
    with pytest.raises(ConfigError):
        small_spec(ordinal_thresholds=[0.0, -1.0, 1.0])
    with pytest.raises(ConfigError):
        small_spec(effects={'MMSE': {'GENE09999': 1.0}})
    with pytest.raises(ConfigError, match='unknown key'):
        GeneratorSpec.from_json({'spec_version': 1, 'n': 10, 'n_gene': 5})
    with pytest.raises(ConfigError, match='spec_version'):
        GeneratorSpec.from_json({'n': 10})


def test_write_and_reload(tmp_path):
    spec = small_spec()
    spec_path = tmp_path / 'spec.json'
    write_json(spec_path, spec.to_json())
    assert load_generator_spec(spec_path) == spec

    cohort = simulate_cohort(spec, seed=5)
    paths = write_cohort(cohort, tmp_path / 'cohort')
    assert [p.name for p in paths] == ['cohort.csv', 'schema.json', 'partition.csv', 'ground_truth.json']
    assert read_json(tmp_path / 'cohort' / 'ground_truth.json')['seed'] == 5

    d = load_csv(tmp_path / 'cohort' / 'cohort.csv', load_schema(tmp_path / 'cohort' / 'schema.json'))
    assert d.columns == cohort.data.columns
    assert d.roles == cohort.data.roles
    assert np.array_equal(d.column('DX'), cohort.data.column('DX'))
    assert np.allclose(d.matrix(spec.fa_columns), cohort.data.matrix(spec.fa_columns),
                       rtol=1e-9, equal_nan=True)
    assert load_partition(tmp_path / 'cohort' / 'partition.csv').region_map == cohort.partition.region_map


if __name__ == "__main__":
    test_same_seed_same_cohort()
    test_cohort_layout()
    test_without_imaging()
    test_planted_gene_shifts_the_outcome()
    test_invalid_specs()
    test_write_and_reload(Path(tempfile.mkdtemp()))
