"""Synthetic baseline cohort with planted sparse genetic effects.

Rows come out in random order; the genetic, CSF and imaging blocks are
observed for the first `n_genetic`, `n_csf` and `n_imaging` rows, so the
imaging subsample is nested in the genetic one.

    python -m sparsereg.preprocess.simulate --out cohort --seed 0
"""
from collections import defaultdict
from typing import Dict, List, Optional
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger
import typer
from scipy.special import expit

from sparsereg.dataset import Dataset, Role
from sparsereg.errors import ConfigError
from sparsereg.pipeline.regions import REGION_ORDER, Region, RegionPartition
from sparsereg.schema import DatasetSchema, SPEC_VERSION, check_spec_version, raise_collected
from sparsereg.utils import create_path, read_json, write_json, write_text
import sparsereg.strs as strs

DX_LEVELS = ['CN', 'EMCI', 'LMCI', 'AD']
SEX_LEVELS = ['Male', 'Female']
RACE_LEVELS = ['White', 'Black', 'Other']

# disease-state shifts of the cognitive scores, CN first
MMSE_SHIFT = (0.0, 1.0, 2.5, 6.0)
CDRSB_SHIFT = (0.0, 1.0, 1.6, 4.5)

LOGIT_CLIP = 12.0


def gene_name(i: int, prefix: str = 'GENE') -> str:
    """1-based gene column name."""
    return f'{prefix}{i:05d}'


def fa_name(region: Region, i: int) -> str:
    return f'FA_{region.short}{i:02d}'


@dataclass
class GeneratorSpec:
    n: int = 1631
    group_sizes: Optional[List[int]] = field(default_factory=lambda: [417, 310, 562, 342])
    # latent cut points used when group_sizes is None
    ordinal_thresholds: List[float] = field(default_factory=lambda: [-0.6, 0.2, 1.5])
    n_csf: int = 1113
    n_genetic: int = 468
    n_imaging: int = 104
    p_clinical: int = 0
    p_genes: int = 1000
    gene_prefix: str = 'GENE'
    effects: Dict[str, Dict[str, float]] = field(default_factory=lambda: {
        'MMSE': {'GENE00001': -0.8, 'GENE00002': -0.6, 'GENE00003': -0.5},
        'CDRSB': {'GENE00001': 0.5, 'GENE00002': 0.4, 'GENE00004': 0.4},
        'DX': {'GENE00005': 1.2, 'GENE00006': -0.7, 'GENE00001': 0.5}})
    fa_effects: Dict[str, Dict[str, float]] = field(default_factory=lambda: {
        'LeftHemisphere': {'GENE00007': 0.35, 'GENE00008': 0.35},
        'CorpusCallosum': {'GENE00007': 0.35, 'GENE00009': 0.35},
        'RightHemisphere': {'GENE00007': 0.35, 'GENE00008': 0.35}})
    dx_clinical_effects: Dict[str, float] = field(default_factory=lambda: {'AGE': 0.03, 'APOE4': 0.8})
    noise_sd: float = 1.0
    fa_noise_sd: float = 0.5
    include_fa: bool = True
    fa_counts: List[int] = field(default_factory=lambda: [23, 11, 23])

    @property
    def gene_names(self) -> List[str]:
        return [gene_name(i, self.gene_prefix) for i in range(1, self.p_genes + 1)]

    @property
    def fa_columns(self) -> List[str]:
        return [fa_name(r, i) for r, k in zip(REGION_ORDER, self.fa_counts) for i in range(1, k + 1)]

    def validate(self) -> 'GeneratorSpec':
        errors = defaultdict(list)
        for key in ('n', 'n_csf', 'n_genetic', 'n_imaging', 'p_clinical', 'p_genes'):
            value = getattr(self, key)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                errors[key].append(f'must be a nonnegative integer, got {value!r}')
        if errors:
            raise_collected(errors, 'Generator spec')
        if self.n < 1:
            errors['n'].append('must be at least 1')
        for key in ('n_csf', 'n_genetic'):
            if getattr(self, key) > self.n:
                errors[key].append(f'exceeds n={self.n}')
        if self.n_imaging > self.n_genetic:
            errors['n_imaging'].append(f'exceeds n_genetic={self.n_genetic}; the imaging rows nest in the genetic rows')
        if self.group_sizes is not None:
            if len(self.group_sizes) != len(DX_LEVELS) or any(g < 0 for g in self.group_sizes):
                errors['group_sizes'].append(f'expected {len(DX_LEVELS)} nonnegative sizes')
            elif sum(self.group_sizes) != self.n:
                errors['group_sizes'].append(f'sum {sum(self.group_sizes)} differs from n={self.n}')
        th = np.asarray(self.ordinal_thresholds, dtype=float)
        if th.size != len(DX_LEVELS) - 1:
            errors['ordinal_thresholds'].append(f'expected {len(DX_LEVELS) - 1} values')
        elif np.any(np.diff(th) <= 0):
            errors['ordinal_thresholds'].append('must be strictly increasing')
        if self.noise_sd < 0 or self.fa_noise_sd < 0:
            errors['noise_sd'].append('noise standard deviations must be nonnegative')
        if len(self.fa_counts) != 3 or any(c < 0 for c in self.fa_counts):
            errors['fa_counts'].append('expected 3 nonnegative region counts')
        genes = set(self.gene_names)
        for outcome, eff in self.effects.items():
            if outcome not in ('MMSE', 'CDRSB', 'DX'):
                errors['effects'].append(f"unknown outcome '{outcome}'")
            bad = [g for g in eff if g not in genes]
            if bad:
                errors['effects'].append(f'{outcome}: unknown genes {bad}')
        valid_regions = {r.value for r in Region}
        for region, eff in self.fa_effects.items():
            if region not in valid_regions:
                errors['fa_effects'].append(f"unknown region '{region}'")
            bad = [g for g in eff if g not in genes]
            if bad:
                errors['fa_effects'].append(f'{region}: unknown genes {bad}')
        bad = [c for c in self.dx_clinical_effects if c not in ('AGE', 'EDU', 'APOE4')]
        if bad:
            errors['dx_clinical_effects'].append(f'unknown covariates {bad}')
        raise_collected(errors, 'Generator spec')
        return self

    @staticmethod
    def from_json(doc: dict) -> 'GeneratorSpec':
        errors = defaultdict(list)
        check_spec_version(doc, errors)
        raise_collected(errors, 'Generator spec')
        known = set(GeneratorSpec.__dataclass_fields__)
        for key in sorted(set(doc) - known - {strs.SPEC_VERSION}):
            errors[key].append('unknown key')
        raise_collected(errors, 'Generator spec')
        kwargs = {k: v for k, v in doc.items() if k in known}
        try:
            spec = GeneratorSpec(**kwargs)
        except TypeError as e:
            raise ConfigError(f'Generator spec is invalid: {e}')
        return spec.validate()

    def to_json(self) -> dict:
        d = {strs.SPEC_VERSION: SPEC_VERSION}
        for k in self.__dataclass_fields__:
            d[k] = getattr(self, k)
        return d


@dataclass(frozen=True, eq=False)
class Cohort:
    data: Dataset
    truth: dict
    partition: Optional[RegionPartition]
    schema: DatasetSchema


def _effect_sum(genes: np.ndarray, names: List[str], effects: Dict[str, float]) -> np.ndarray:
    index = {g: j for j, g in enumerate(names)}
    out = np.zeros(genes.shape[0])
    for g, b in effects.items():
        out += b * genes[:, index[g]]
    return out


def _disease_codes(latent: np.ndarray, spec: GeneratorSpec) -> np.ndarray:
    if spec.group_sizes is None:
        return np.searchsorted(np.asarray(spec.ordinal_thresholds), latent)
    codes = np.empty(latent.size, dtype=int)
    order = np.argsort(latent, kind='stable')
    bounds = np.concatenate([[0], np.cumsum(spec.group_sizes)])
    for c in range(len(DX_LEVELS)):
        codes[order[bounds[c]:bounds[c + 1]]] = c
    return codes


def simulate_cohort(spec: GeneratorSpec, seed: int) -> Cohort:
    """Draw one cohort; the same (spec, seed) always yields identical values."""
    spec.validate()
    rng = np.random.default_rng(seed)
    n = spec.n
    genes_all = spec.gene_names

    rid = [f'S{i:05d}' for i in range(1, n + 1)]
    sex = rng.binomial(1, 0.45, n).astype(float)
    race = rng.choice(len(RACE_LEVELS), size=n, p=[0.92, 0.05, 0.03]).astype(float)
    age = np.clip(rng.normal(73.5, 7.0, n), 55.0, 95.0).round(1)
    edu = np.clip(np.round(rng.normal(16.0, 2.8, n)), 6, 20)
    apoe4 = rng.binomial(1, 0.45, n).astype(float)
    clinical = rng.standard_normal((n, spec.p_clinical))
    genes = rng.standard_normal((n, spec.p_genes))

    covariates = {'AGE': age - 73.5, 'EDU': edu - 16.0, 'APOE4': apoe4}
    latent = sum(b * covariates[c] for c, b in spec.dx_clinical_effects.items()) \
        + _effect_sum(genes, genes_all, spec.effects.get('DX', {})) \
        + rng.logistic(0.0, 1.0, n)
    dx = _disease_codes(latent, spec)

    noise = rng.standard_normal((n, 4))
    mmse = 29.0 - np.take(MMSE_SHIFT, dx) \
        + _effect_sum(genes, genes_all, spec.effects.get('MMSE', {})) + spec.noise_sd * noise[:, 0]
    cdrsb = np.take(CDRSB_SHIFT, dx) \
        + _effect_sum(genes, genes_all, spec.effects.get('CDRSB', {})) + spec.noise_sd * noise[:, 1]
    adas13 = 10.0 + 4.0 * dx + 3.0 * noise[:, 2]
    ravlt = 45.0 - 5.0 * dx + 8.0 * noise[:, 3]

    csf = rng.standard_normal((n, 3))
    tau = np.maximum(250.0 + 60.0 * dx + 90.0 * csf[:, 0], 80.0)
    ptau = 0.095 * tau + 2.2 * csf[:, 1]
    abeta = np.maximum(1100.0 - 150.0 * dx + 300.0 * csf[:, 2], 200.0)

    columns = {'RID': rid, 'SEX': sex, 'RACE': race, 'AGE': age, 'EDU': edu, 'APOE4': apoe4}
    for j in range(spec.p_clinical):
        columns[f'CLIN{j + 1:02d}'] = clinical[:, j]
    columns.update({'DX': dx.astype(float), 'MMSE': mmse, 'CDRSB': cdrsb,
                    'ADAS13': adas13, 'RAVLT': ravlt})
    for name, values in (('ABETA', abeta), ('TAU', tau), ('PTAU', ptau)):
        values = values.copy()
        values[spec.n_csf:] = np.nan
        columns[name] = values

    gene_block = genes.copy()
    gene_block[spec.n_genetic:] = np.nan
    frame = pd.DataFrame(columns)
    frame = pd.concat([frame, pd.DataFrame(gene_block, columns=genes_all)], axis=1)

    partition = None
    fa_truth = dict()
    if spec.include_fa:
        fa_cols = []
        region_map = dict()
        for region, count in zip(REGION_ORDER, spec.fa_counts):
            eff = spec.fa_effects.get(region.value, {})
            signal = _effect_sum(genes, genes_all, eff)
            fa_truth[region.value] = sorted(eff)
            base = rng.uniform(-0.8, 0.2, count)
            eps = rng.standard_normal((n, count))
            for i in range(count):
                z = base[i] + signal - 0.05 * dx + spec.fa_noise_sd * eps[:, i]
                values = expit(np.clip(z, -LOGIT_CLIP, LOGIT_CLIP))
                values[spec.n_imaging:] = np.nan
                name = fa_name(region, i + 1)
                fa_cols.append(pd.Series(values, name=name))
                region_map[name] = region
        frame = pd.concat([frame] + fa_cols, axis=1)
        partition = RegionPartition(region_map)

    roles = {'RID': Role.Id, 'SEX': Role.Stratum, 'RACE': Role.Stratum}
    for c in ('DX', 'MMSE', 'CDRSB', 'ADAS13', 'RAVLT'):
        roles[c] = Role.Outcome
    if partition is not None:
        for c in partition.columns:
            roles[c] = Role.Outcome
    for c in frame.columns:
        roles.setdefault(c, Role.Predictor)
    levels = {'DX': list(DX_LEVELS), 'SEX': list(SEX_LEVELS), 'RACE': list(RACE_LEVELS)}
    data = Dataset.from_frame(frame, roles=roles, levels=levels)

    truth = {strs.SEED: int(seed),
             'group_sizes': np.bincount(dx, minlength=len(DX_LEVELS)).tolist(),
             'effects': {k: dict(v) for k, v in spec.effects.items()},
             'support': {k: sorted(v) for k, v in spec.effects.items()},
             'fa_support': fa_truth,
             'n_genetic': spec.n_genetic,
             'n_imaging': spec.n_imaging}
    logger.debug(f'Simulated cohort: {n:,} rows x {frame.shape[1]:,} columns (seed {seed})')
    schema_roles = {c: r for c, r in roles.items() if r != Role.Predictor}
    return Cohort(data=data, truth=truth, partition=partition,
                  schema=DatasetSchema(roles=schema_roles, levels=levels))


def cohort_frame(data: Dataset) -> pd.DataFrame:
    """Frame for writing: level-coded columns back to their labels."""
    frame = data.frame.copy()
    for c, labels in data.levels.items():
        codes = frame[c]
        frame[c] = [labels[int(v)] if not np.isnan(v) else np.nan for v in codes]
    return frame


def write_cohort(cohort: Cohort, out: Path) -> List[Path]:
    """cohort.csv, schema.json, partition.csv (with an FA block) and ground_truth.json."""
    out = Path(out)
    create_path(out)
    csv_path = Path(out, 'cohort.csv')
    cohort_frame(cohort.data).to_csv(csv_path, index=False, na_rep='NA',
                                     float_format='%.10g', lineterminator='\n')
    paths = [csv_path]
    schema_path = Path(out, 'schema.json')
    write_json(schema_path, cohort.schema.to_dict())
    paths.append(schema_path)
    if cohort.partition is not None:
        part_path = Path(out, 'partition.csv')
        write_text(part_path, cohort.partition.to_frame().to_csv(index=False, lineterminator='\n'))
        paths.append(part_path)
    truth_path = Path(out, 'ground_truth.json')
    write_json(truth_path, cohort.truth)
    paths.append(truth_path)
    return paths


def load_generator_spec(path: Optional[Path]) -> GeneratorSpec:
    if path is None:
        return GeneratorSpec().validate()
    return GeneratorSpec.from_json(read_json(path))


def main(out: Path = typer.Option(Path('cohort'), help='Output directory'),
         spec: Optional[Path] = typer.Option(None, help='Generator spec JSON (spec_version 1)'),
         seed: int = typer.Option(0, help='Random seed')):
    generator = load_generator_spec(spec)
    logger.info(f'simulating {generator.n:,} rows with {generator.p_genes:,} genes ...')
    cohort = simulate_cohort(generator, seed)
    paths = write_cohort(cohort, out)
    logger.success(f'wrote {len(paths)} files to {out}')


if __name__ == "__main__":
    typer.run(main)
