import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from sparsereg.__main__ import main, parse_references, resolve_columns, split_list
from sparsereg.errors import ConfigError, DataError
from sparsereg.load import load_csv
from sparsereg.preprocess.simulate import GeneratorSpec
from sparsereg.utils import read_json, write_json

SMALL = GeneratorSpec(n=240, group_sizes=[60, 60, 60, 60], n_csf=200, n_genetic=200,
                      n_imaging=120, p_genes=60)


def _simulated(tmp_path: Path) -> Path:
    spec = tmp_path / 'spec.json'
    write_json(spec, SMALL.to_json())
    out = tmp_path / 'cohort'
    assert main(['simulate', '--spec', str(spec), '--seed', '1', '--out', str(out)]) == 0
    return out


def test_argument_helpers(tmp_path):
    assert split_list(' a, b,,c ') == ['a', 'b', 'c']
    assert split_list(None) == []
    assert parse_references('DX=CN, SEX=Male') == {'DX': 'CN', 'SEX': 'Male'}
    with pytest.raises(ConfigError):
        parse_references('DX')

    out = _simulated(tmp_path)
    d = load_csv(out / 'cohort.csv')
    assert resolve_columns(d, 'GENE0000*', 'predictors') == [f'GENE0000{i}' for i in range(1, 10)]
    assert resolve_columns(d, 'AGE,GENE00001,AGE', 'predictors') == ['AGE', 'GENE00001']
    with pytest.raises(DataError):
        resolve_columns(d, 'SNP*', 'predictors')
    with pytest.raises(DataError):
        resolve_columns(d, 'AGE,HEIGHT', 'predictors')


def test_simulate_and_fit(tmp_path):
    out = _simulated(tmp_path)
    assert sorted(p.name for p in out.iterdir()) == ['cohort.csv', 'ground_truth.json',
                                                     'partition.csv', 'schema.json']
    # refuses to write into a non-empty directory
    assert main(['simulate', '--spec', str(tmp_path / 'spec.json'), '--out', str(out)]) == 2

    common = ['--input', str(out / 'cohort.csv'), '--schema', str(out / 'schema.json')]
    lasso = tmp_path / 'lasso'
    assert main(['fit', 'lasso', *common, '--outcome', 'MMSE', '--predictors', 'GENE*',
                 '--folds', '5', '--n-lambda', '15', '--out', str(lasso)]) == 0
    for name in ('cv.tsv', 'nonzero.tsv', 'path.json', 'selection.json', 'manifest.json'):
        assert (lasso / name).exists()
    assert read_json(lasso / 'selection.json')['folds'] == 5

    ols = tmp_path / 'ols'
    assert main(['fit', 'ols', *common, '--outcome', 'CDRSB', '--predictors', 'AGE,APOE4,DX',
                 '--references', 'DX=CN', '--out', str(ols)]) == 0
    table = pd.read_csv(ols / 'coefficients.tsv', sep='\t')
    assert 'DX[AD]' in set(table['term'])

    multitask = tmp_path / 'multitask'
    assert main(['fit', 'multitask', *common, '--outcome', 'FA_CC*', '--predictors', 'GENE0000*',
                 '--logit', '--n-lambda', '10', '--out', str(multitask)]) == 0
    assert read_json(multitask / 'fit.json')['responses'][0] == 'FA_CC01'
    assert read_json(multitask / 'selection.json')['folds'] == 4

    # the output directory already exists
    assert main(['fit', 'lasso', *common, '--outcome', 'MMSE', '--predictors', 'GENE*',
                 '--folds', '2', '--n-lambda', '5', '--out', str(lasso)]) == 2


def test_summarize_to_stdout(tmp_path, capsys):
    out = _simulated(tmp_path)
    assert main(['summarize', '--input', str(out / 'cohort.csv'), '--schema', str(out / 'schema.json'),
                 '--columns', 'AGE,SEX']) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split('\t') == ['variable', 'level', 'stratum', 'n', 'mean', 'sd', 'percent']
    assert len(lines) == 1 + 4 * (1 + 1 + 2)


def test_pipeline_command(tmp_path):
    out = _simulated(tmp_path)
    args = ['pipeline', '--input', str(out / 'cohort.csv'), '--schema', str(out / 'schema.json'),
            '--partition', str(out / 'partition.csv'), '--skip', 'disease,imaging',
            '--folds', '3', '--n-lambda', '10', '--out', str(tmp_path / 'report')]
    assert main(args) == 0
    manifest = read_json(tmp_path / 'report' / 'manifest.json')['manifest']
    assert 'cognitive/intersection.txt' in manifest
    assert 'low_dimensional/correlation_filter.tsv' in manifest
    assert not any(p.startswith(('disease/', 'imaging/')) for p in manifest)
    assert read_json(tmp_path / 'report' / 'run_metadata.json')['folds']['cognitive'] == 3

    assert main(args) == 2
    assert main(args + ['--overwrite']) == 0
    assert read_json(tmp_path / 'report' / 'manifest.json')['manifest'] == manifest


@pytest.mark.parametrize('command, expected', [
    ('simulate', ['1,631', '468', '104', '23/11/23']),
    ('fit', ['10', '4', '75', '50', '0.05', 'default']),
    ('pipeline', ['23/11/23', '10', '4', '75', '50', 'default']),
    ('summarize', ['CN/EMCI/LMCI/AD', 'default']),
])
def test_help_documents_defaults(capsys, command, expected):
    with pytest.raises(SystemExit) as e:
        main([command, '--help'])
    assert e.value.code == 0
    text = capsys.readouterr().out
    for token in expected:
        assert token in text


def test_exit_codes(tmp_path):
    assert main(['fit', 'lasso', '--input', str(tmp_path / 'absent.csv'), '--outcome', 'Y',
                 '--predictors', 'X']) == 2
    assert main(['fit', 'lasso', '--predictors', 'X', '--input', str(tmp_path / 'absent.csv')]) == 2

    config = tmp_path / 'config.json'
    write_json(config, {'spec_version': 1, 'fold': 3})
    assert main(['pipeline', '--input', str(tmp_path / 'absent.csv'), '--config', str(config)]) == 2

    x = np.concatenate([np.linspace(-3, -1, 20), np.linspace(1, 3, 20)])
    frame = pd.DataFrame({'Y': np.repeat([0, 1], 20), 'X': x})
    frame.to_csv(tmp_path / 'separated.csv', index=False)
    assert main(['fit', 'ordinal', '--input', str(tmp_path / 'separated.csv'), '--outcome', 'Y',
                 '--predictors', 'X', '--out', str(tmp_path / 'ordinal')]) == 1
    assert not (tmp_path / 'ordinal').exists()

    with pytest.raises(SystemExit) as e:
        main(['fit', 'ridge'])
    assert e.value.code == 2


if __name__ == "__main__":
    test_argument_helpers(Path(tempfile.mkdtemp()))
    test_simulate_and_fit(Path(tempfile.mkdtemp()))
    test_pipeline_command(Path(tempfile.mkdtemp()))
    test_exit_codes(Path(tempfile.mkdtemp()))
