import copy
import json
from collections import defaultdict
from typing import Dict, List, Optional, Union
from dataclasses import dataclass, field
from pathlib import Path

from sparsereg.errors import ConfigError
from sparsereg.models.path import LambdaRule, PathConfig
from sparsereg.schema import check_spec_version, raise_collected
from sparsereg.utils import read_json, sha256_text
import sparsereg.strs as strs

FILE_DIR = Path(__file__).parent
DEFAULT_CONFIG_PATH = Path(FILE_DIR, 'config.json')

STAGES = (strs.LOW_DIMENSIONAL, strs.COGNITIVE, strs.DISEASE, strs.IMAGING)


class Merge:
    UNION = strs.UNION
    INTERSECTION = strs.INTERSECTION
    ALL = (UNION, INTERSECTION)


@dataclass(frozen=True)
class LowDimensionalConfig:
    ols_outcomes: List[str] = field(default_factory=list)
    ols_predictors: List[str] = field(default_factory=list)
    references: Dict[str, str] = field(default_factory=dict)
    correlation_threshold: float = 0.9
    ordinal_outcome: str = 'DX'
    ordinal_predictors: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    stages: Dict[str, bool]
    folds: int
    imaging_folds: int
    top_k_cognitive: int
    top_k_imaging: int
    lambda_rule: str
    n_lambda: int
    epsilon: float
    significance: float
    threads: int
    d_keep: Optional[int]
    gene_prefix: str
    fa_prefix: str
    cognitive_outcomes: List[str]
    disease_outcome: str
    merge: str
    per_region_screening: bool
    sqrt_m_weight: bool
    standardize_responses: bool
    partition_override: bool
    low_dimensional: LowDimensionalConfig
    # canonical JSON the config was built from
    document: dict = field(default_factory=dict, compare=False, repr=False)

    def enabled(self, stage: str) -> bool:
        return bool(self.stages.get(stage, False))

    def path_config(self) -> PathConfig:
        return PathConfig(n_lambda=self.n_lambda, threads=self.threads,
                          sqrt_m_weight=self.sqrt_m_weight,
                          standardize_responses=self.standardize_responses).validate()

    @property
    def sha256(self) -> str:
        return sha256_text(canonical_json(self.document))

    def to_json(self) -> dict:
        return copy.deepcopy(self.document)


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(',', ':'))


def default_document() -> dict:
    return read_json(DEFAULT_CONFIG_PATH)


def merge_documents(base: dict, user: dict) -> dict:
    """Recursive key-by-key merge of `user` over `base`."""
    out = copy.deepcopy(base)
    for k, v in user.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != 'references':
            out[k] = merge_documents(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_keys(doc: dict, base: dict) -> Dict[str, List[str]]:
    errors = defaultdict(list)
    check_spec_version(doc, errors)
    if errors:
        return errors
    for k in doc:
        if k not in base:
            errors[k].append('unknown key')
    for k in (doc.get('stages') or {}):
        if k not in STAGES:
            errors['stages'].append(f"unknown stage '{k}' (accepted {list(STAGES)})")
    for k in (doc.get(strs.LOW_DIMENSIONAL) or {}):
        if k not in base[strs.LOW_DIMENSIONAL]:
            errors[strs.LOW_DIMENSIONAL].append(f"unknown key '{k}'")
    return errors


def _check_values(doc: dict) -> Dict[str, List[str]]:
    errors = defaultdict(list)
    if not _is_int(doc.get(strs.SEED)) or doc[strs.SEED] < 0:
        errors[strs.SEED].append('must be a nonnegative integer')
    for k in ('folds', 'imaging_folds'):
        if not _is_int(doc.get(k)) or doc[k] < 2:
            errors[k].append('must be an integer >= 2')
    for k in ('top_k_cognitive', 'top_k_imaging', 'n_lambda', 'threads'):
        if not _is_int(doc.get(k)) or doc[k] < 1:
            errors[k].append('must be an integer >= 1')
    if doc.get('d_keep') is not None and (not _is_int(doc['d_keep']) or doc['d_keep'] < 1):
        errors['d_keep'].append('must be null or an integer >= 1')
    if doc.get(strs.LAMBDA_RULE) not in LambdaRule.ALL:
        errors[strs.LAMBDA_RULE].append(f'must be one of {list(LambdaRule.ALL)}')
    if doc.get('merge') not in Merge.ALL:
        errors['merge'].append(f'must be one of {list(Merge.ALL)}')
    eps = doc.get('epsilon')
    if not isinstance(eps, (int, float)) or not 0 < eps < 0.5:
        errors['epsilon'].append('must be in (0, 0.5)')
    sig = doc.get('significance')
    if not isinstance(sig, (int, float)) or not 0 < sig < 1:
        errors['significance'].append('must be in (0, 1)')
    outcomes = doc.get('cognitive_outcomes')
    if not isinstance(outcomes, list) or not outcomes:
        errors['cognitive_outcomes'].append('must be a nonempty list of column names')
    low = doc.get(strs.LOW_DIMENSIONAL)
    if not isinstance(low, dict):
        errors[strs.LOW_DIMENSIONAL].append('expected an object')
        return errors
    thr = low.get('correlation_threshold')
    if not isinstance(thr, (int, float)) or not 0 < thr <= 1:
        errors[strs.LOW_DIMENSIONAL].append('correlation_threshold must be in (0, 1]')
    if not isinstance(low.get('references'), dict):
        errors[strs.LOW_DIMENSIONAL].append('references must map predictors to reference levels')
    return errors


def build_config(doc: Optional[dict] = None) -> PipelineConfig:
    """Validate `doc` merged over the shipped defaults."""
    base = default_document()
    user = doc if doc is not None else {strs.SPEC_VERSION: base[strs.SPEC_VERSION]}
    if not isinstance(user, dict):
        raise ConfigError('Pipeline config must be a JSON object')
    merged = merge_documents(base, user)
    errors = _check_keys(user, base)
    if not errors:
        errors = _check_values(merged)
    raise_collected(errors, 'Pipeline config')

    low = merged[strs.LOW_DIMENSIONAL]
    kwargs = {k: v for k, v in merged.items() if k not in (strs.SPEC_VERSION, strs.LOW_DIMENSIONAL)}
    kwargs['stages'] = {s: bool(merged['stages'].get(s, False)) for s in STAGES}
    return PipelineConfig(low_dimensional=LowDimensionalConfig(**low), document=merged, **kwargs)


def load_pipeline_config(path: Optional[Union[str, Path]] = None,
                         overrides: Optional[dict] = None) -> PipelineConfig:
    """Defaults, then the JSON file at `path`, then `overrides` (e.g. from flags)."""
    doc = read_json(Path(path)) if path is not None else None
    if overrides:
        if doc is None:
            doc = {strs.SPEC_VERSION: default_document()[strs.SPEC_VERSION]}
        doc = merge_documents(doc, overrides)
    return build_config(doc)
