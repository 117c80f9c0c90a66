from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Union

from sparsereg.dataset import Role
from sparsereg.errors import ConfigError
import sparsereg.strs as strs

SPEC_VERSION = 1


@dataclass(frozen=True)
class DatasetSchema:
    roles: Dict[str, Role] = field(default_factory=dict)
    levels: Dict[str, List[str]] = field(default_factory=dict)

    @property
    def columns(self) -> List[str]:
        return list(self.roles)

    def to_dict(self) -> dict:
        cols = dict()
        for c, r in self.roles.items():
            entry = {strs.ROLE: r.value}
            if c in self.levels:
                entry[strs.LEVELS] = list(self.levels[c])
            cols[c] = entry
        return {strs.SPEC_VERSION: SPEC_VERSION, 'columns': cols}


def raise_collected(errors: Dict[str, List[str]], what: str):
    if errors:
        message = ";\n ".join(
            f"{key} - {', '.join(key_errors)}"
            for key, key_errors in errors.items()
        )
        raise ConfigError(f"{what} is invalid:\n " + message)


def check_spec_version(doc: dict, errors: Dict[str, List[str]]):
    if not isinstance(doc, dict):
        errors['<document>'].append('expected a JSON object')
        return
    if strs.SPEC_VERSION not in doc:
        errors[strs.SPEC_VERSION].append('missing required field')
    elif doc[strs.SPEC_VERSION] != SPEC_VERSION:
        errors[strs.SPEC_VERSION].append(f"unsupported version {doc[strs.SPEC_VERSION]!r} "
                                         f"(expected {SPEC_VERSION})")


def parse_dataset_schema(doc: Union[dict, DatasetSchema]) -> DatasetSchema:
    """Validate a dataset schema document.

    Column entries are either a bare role string or an object with a
    `role` and an optional ordered `levels` list.
    """
    if isinstance(doc, DatasetSchema):
        return doc
    errors = defaultdict(list)
    check_spec_version(doc, errors)
    columns = doc.get('columns') if isinstance(doc, dict) else None
    if not isinstance(columns, dict):
        errors['columns'].append('expected an object mapping column names to roles')
        raise_collected(errors, 'Dataset schema')

    valid_roles = {r.value: r for r in Role}
    roles, levels = dict(), dict()
    for name, entry in columns.items():
        if isinstance(entry, str):
            entry = {strs.ROLE: entry}
        if not isinstance(entry, dict):
            errors[name].append('expected a role string or an object')
            continue
        role = entry.get(strs.ROLE, Role.Predictor.value)
        if role not in valid_roles:
            errors[name].append(f"unknown role '{role}' (accepted {sorted(valid_roles)})")
            continue
        roles[name] = valid_roles[role]
        if strs.LEVELS in entry:
            lv = entry[strs.LEVELS]
            if not isinstance(lv, list) or len(lv) < 2:
                errors[name].append('levels must be a list of at least two labels')
            elif len(set(map(str, lv))) != len(lv):
                errors[name].append(f'levels contain duplicates: {lv}')
            else:
                levels[name] = [str(v) for v in lv]
        unknown = set(entry) - {strs.ROLE, strs.LEVELS}
        if unknown:
            errors[name].append(f'unknown keys {sorted(unknown)}')
    raise_collected(errors, 'Dataset schema')
    return DatasetSchema(roles=roles, levels=levels)
