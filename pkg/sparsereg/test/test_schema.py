import pytest

import sparsereg
from sparsereg.dataset import Role
from sparsereg.errors import ConfigError


def test_parse_schema():
    schema = sparsereg.schema.parse_dataset_schema(
        {'spec_version': 1,
         'columns': {'RID': 'id',
                     'SEX': {'role': 'stratum', 'levels': ['Male', 'Female']},
                     'MMSE': {'role': 'outcome'}}})
    assert schema.roles == {'RID': Role.Id, 'SEX': Role.Stratum, 'MMSE': Role.Outcome}
    assert schema.levels == {'SEX': ['Male', 'Female']}
    assert schema.columns == ['RID', 'SEX', 'MMSE']

    doc = schema.to_dict()
    assert doc['columns']['SEX'] == {'role': 'stratum', 'levels': ['Male', 'Female']}
    assert sparsereg.schema.parse_dataset_schema(doc).roles == schema.roles


def test_schema_errors_are_collected():
    with pytest.raises(ConfigError) as e:
        sparsereg.schema.parse_dataset_schema(
            {'spec_version': 1,
             'columns': {'A': 'label',
                         'B': {'role': 'outcome', 'levels': ['x', 'x']},
                         'C': {'role': 'outcome', 'weight': 2}}})
    message = str(e.value)
    assert "unknown role 'label'" in message
    assert 'duplicates' in message
    assert "unknown keys ['weight']" in message


def test_spec_version():
    with pytest.raises(ConfigError, match='missing required field'):
        sparsereg.schema.parse_dataset_schema({'columns': {}})
    with pytest.raises(ConfigError, match='unsupported version'):
        sparsereg.schema.parse_dataset_schema({'spec_version': 2, 'columns': {}})
    with pytest.raises(ConfigError, match='columns'):
        sparsereg.schema.parse_dataset_schema({'spec_version': 1})


if __name__ == "__main__":
    test_parse_schema()
    test_schema_errors_are_collected()
    test_spec_version()
