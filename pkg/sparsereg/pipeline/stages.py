"""The analysis stages of the pipeline.

Each stage reads an immutable Dataset and returns a report object; nothing
is written to disk here. Stage randomness comes only from the stage seed,
so toggling or reconfiguring one stage never changes another's output.
"""
from typing import Dict, List, Optional, Tuple
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from loguru import logger
from tqdm import tqdm

from sparsereg.dataset import Dataset, drop_incomplete, make_folds
from sparsereg.errors import DataError, ModelingError, ScreeningError, StageError
from sparsereg.models.lasso_gaussian import cv_lasso, nonzero_report
from sparsereg.models.lasso_multicat import cv_multinomial, gene_sets
from sparsereg.models.linear_inference import (CorrelationFilterResult, OlsFit, coefficient_table,
                                               correlation_filter, fit_ols)
from sparsereg.models.multitask import cv_multitask, rank_rows
from sparsereg.models.ordinal import OrdinalFit, fit_ordinal, forest_data
from sparsereg.models.path import CvResult
from sparsereg.models.screening import ScreenResult, pairwise_screens, sis_screen, sis_screen_multi
from sparsereg.pipeline.config import Merge, PipelineConfig
from sparsereg.pipeline.regions import REGION_ORDER, Region, RegionPartition, logit_transform
from sparsereg.report.report_data import ReportTree
import sparsereg.strs as strs

# fixed positions keep each stage's seed independent of which stages run
STAGE_INDEX = {strs.LOW_DIMENSIONAL: 0, strs.COGNITIVE: 1, strs.DISEASE: 2, strs.IMAGING: 3}


def stage_seed(seed: int, stage: str) -> int:
    return int(np.random.SeedSequence([int(seed), STAGE_INDEX[stage]]).generate_state(1)[0])


def gene_columns(d: Dataset, prefix: str) -> List[str]:
    genes = [c for c in d.columns if c.startswith(prefix)]
    if not genes:
        raise DataError(f"Missing gene block: no columns start with '{prefix}'")
    return genes


def fa_columns(d: Dataset, prefix: str) -> List[str]:
    cols = [c for c in d.columns if c.startswith(prefix)]
    if not cols:
        raise DataError(f"Missing FA block: no columns start with '{prefix}'")
    return cols


def _lambda_record(cv: CvResult, rule: str) -> dict:
    return {strs.LAMBDA_MIN: cv.lambda_min,
            strs.LAMBDA_1SE: cv.lambda_1se,
            strs.LAMBDA_RULE: rule,
            'lambda_selected': cv.selected(rule)}


def _progress(items, desc: str, loading_bar: bool):
    if loading_bar:
        return tqdm(items, desc=desc, leave=False)
    return items


@dataclass
class LowDimensionalReport:
    seed: int
    correlation: CorrelationFilterResult
    ols: Dict[str, OlsFit]
    ordinal: Optional[OrdinalFit]
    significance: float

    def write(self, tree: ReportTree):
        base = strs.LOW_DIMENSIONAL
        tree.add_table(f'{base}/correlation_filter.tsv', self.correlation.to_frame())
        tree.add_lines(f'{base}/retained_predictors.txt', self.correlation.retained)
        for outcome, fit in self.ols.items():
            table = coefficient_table(fit)
            table['significant'] = fit.significant(self.significance)
            tree.add_table(f'{base}/ols_{outcome}.tsv', table)
            tree.add_json(f'{base}/ols_{outcome}.json', fit.summary(self.significance))
        if self.ordinal is not None:
            tree.add_table(f'{base}/ordinal_forest.tsv', forest_data(self.ordinal, odds_ratio=True))
            tree.add_json(f'{base}/ordinal_fit.json', self.ordinal.to_json())

    def metadata(self) -> dict:
        return {strs.SEED: self.seed,
                'ols_rows': {o: f.n for o, f in self.ols.items()}}


def run_low_dimensional_stage(d: Dataset, config: PipelineConfig) -> LowDimensionalReport:
    """Correlation pre-filter, OLS per outcome and the ordinal disease-state fit."""
    low = config.low_dimensional
    categorical = [p for p in low.ols_predictors if p in d.levels or p in low.references]
    numeric = [p for p in low.ols_predictors if p not in categorical]
    d.require(low.ols_outcomes + low.ols_predictors, block='low-dimensional columns')

    complete = drop_incomplete(d, numeric)
    filtered = correlation_filter(complete, numeric, low.correlation_threshold)
    predictors = [p for p in low.ols_predictors if p in categorical or p in filtered.retained]

    fits = dict()
    for outcome in low.ols_outcomes:
        rows = drop_incomplete(d, [outcome] + predictors)
        fits[outcome] = fit_ols(rows, outcome, predictors, low.references)
        logger.info(f'OLS {outcome}: n={fits[outcome].n:,}, adjusted R2 {fits[outcome].adjusted_r_squared:.3f}')

    ordinal = None
    if low.ordinal_outcome and low.ordinal_predictors:
        rows = drop_incomplete(d, [low.ordinal_outcome] + low.ordinal_predictors)
        ordinal = fit_ordinal(rows, low.ordinal_outcome, low.ordinal_predictors)
    return LowDimensionalReport(seed=stage_seed(config.seed, strs.LOW_DIMENSIONAL),
                                correlation=filtered, ols=fits, ordinal=ordinal,
                                significance=config.significance)


@dataclass
class OutcomeSelection:
    screen: ScreenResult
    cv: CvResult
    report: pd.DataFrame
    n_rows: int

    @property
    def selected(self) -> List[str]:
        return list(self.report[strs.NAME])


@dataclass
class CognitiveReport:
    seed: int
    rule: str
    outcomes: Dict[str, OutcomeSelection]
    intersection: List[str]

    def write(self, tree: ReportTree):
        base = strs.COGNITIVE
        for outcome, sel in self.outcomes.items():
            tree.add_table(f'{base}/{outcome}/screen.tsv', sel.screen.to_frame())
            tree.add_table(f'{base}/{outcome}/cv.tsv', sel.cv.to_frame())
            tree.add_table(f'{base}/{outcome}/nonzero.tsv', sel.report)
        tree.add_lines(f'{base}/intersection.txt', self.intersection)

    def metadata(self) -> dict:
        return {strs.SEED: self.seed,
                strs.LAMBDAS: {o: _lambda_record(s.cv, self.rule) for o, s in self.outcomes.items()},
                'rows': {o: s.n_rows for o, s in self.outcomes.items()},
                'd_keep': {o: s.screen.d for o, s in self.outcomes.items()}}


def run_cognitive_stage(d: Dataset, config: PipelineConfig, loading_bar: bool = False) -> CognitiveReport:
    """Per cognitive outcome: screen genes, cross-validate a lasso path and
    report the top nonzero genes; then intersect the outcome selections."""
    genes = gene_columns(d, config.gene_prefix)
    d.require(config.cognitive_outcomes, block='cognitive outcomes')
    seed = stage_seed(config.seed, strs.COGNITIVE)
    path_config = config.path_config()
    outcomes = dict()
    for outcome in _progress(config.cognitive_outcomes, 'cognitive outcomes', loading_bar):
        rows = drop_incomplete(d, [outcome] + genes)
        screen = sis_screen(rows, outcome, genes, config.d_keep)
        folds = make_folds(rows.n_rows, config.folds, seed)
        cv = cv_lasso(rows, outcome, screen.kept, folds, path_config)
        report = nonzero_report(cv.path, cv.selected(config.lambda_rule), config.top_k_cognitive)
        logger.info(f'{outcome}: {len(screen.kept)} screened genes, {report.shape[0]} selected '
                    f'(n={rows.n_rows:,})')
        outcomes[outcome] = OutcomeSelection(screen=screen, cv=cv, report=report, n_rows=rows.n_rows)
    selected = [set(s.selected) for s in outcomes.values()]
    common = set.intersection(*selected) if selected else set()
    intersection = [g for g in genes if g in common]
    return CognitiveReport(seed=seed, rule=config.lambda_rule, outcomes=outcomes,
                           intersection=intersection)


@dataclass
class DiseaseReport:
    seed: int
    rule: str
    screens: Dict[Tuple[str, str], ScreenResult]
    screened: List[str]
    cv: CvResult
    class_nonzero: Dict[str, List[str]]
    union: List[str]
    intersection: List[str]
    n_rows: int

    def write(self, tree: ReportTree):
        base = strs.DISEASE
        for (a, b), screen in self.screens.items():
            tree.add_table(f'{base}/screen_{a}_vs_{b}.tsv', screen.to_frame())
        tree.add_lines(f'{base}/screened.txt', self.screened)
        tree.add_table(f'{base}/cv.tsv', self.cv.to_frame())
        fit = self.cv.fit(self.rule)
        tree.add_json(f'{base}/fit.json', fit.to_json())
        rows = [[g, lb] for lb, genes in self.class_nonzero.items() for g in genes]
        tree.add_table(f'{base}/class_nonzero.tsv', pd.DataFrame(rows, columns=[strs.PREDICTOR, strs.CLASS]))
        tree.add_lines(f'{base}/union.txt', self.union)
        tree.add_lines(f'{base}/intersection.txt', self.intersection)

    def metadata(self) -> dict:
        return {strs.SEED: self.seed,
                strs.LAMBDAS: _lambda_record(self.cv, self.rule),
                'rows': self.n_rows,
                'pairwise_screens': len(self.screens),
                'screened': len(self.screened)}


def run_disease_stage(d: Dataset, config: PipelineConfig, loading_bar: bool = False) -> DiseaseReport:
    """Pairwise screens over every pair of disease states, a cross-validated
    multinomial lasso on the merged screened set, and the union and
    intersection of the per-class nonzero genes."""
    genes = gene_columns(d, config.gene_prefix)
    outcome = config.disease_outcome
    d.require([outcome], block='disease outcome')
    seed = stage_seed(config.seed, strs.DISEASE)
    rows = drop_incomplete(d, [outcome] + genes)
    screens = pairwise_screens(rows, outcome, genes, config.d_keep)
    kept = [set(s.kept) for s in screens.values()]
    merged = set.union(*kept) if config.merge == Merge.UNION else set.intersection(*kept)
    screened = [g for g in genes if g in merged]
    if not screened:
        raise ScreeningError(f'Screening left no genes to fit ({config.merge} of '
                             f'{len(screens)} pairwise screens is empty)')
    logger.info(f'{outcome}: {len(screens)} pairwise screens, {len(screened)} genes after {config.merge}')

    folds = make_folds(rows.n_rows, config.folds, seed)
    cv = cv_multinomial(rows, outcome, screened, folds, config.path_config())
    fit = cv.fit(config.lambda_rule)
    class_nonzero = fit.class_nonzero()
    union, intersection = gene_sets(class_nonzero.values())
    return DiseaseReport(seed=seed, rule=config.lambda_rule, screens=screens, screened=screened,
                         cv=cv, class_nonzero=class_nonzero,
                         union=[g for g in screened if g in union],
                         intersection=[g for g in screened if g in intersection],
                         n_rows=rows.n_rows)


@dataclass
class RegionSelection:
    region: Region
    screen: ScreenResult
    cv: CvResult
    ranking: pd.DataFrame

    @property
    def top(self) -> List[str]:
        return list(self.ranking[strs.PREDICTOR])


@dataclass
class ImagingReport:
    seed: int
    rule: str
    regions: Dict[Region, RegionSelection]
    intersections: Dict[Tuple[Region, ...], List[str]] = field(default_factory=dict)
    union: List[str] = field(default_factory=list)
    n_rows: int = 0

    def write(self, tree: ReportTree):
        base = strs.IMAGING
        for region, sel in self.regions.items():
            tree.add_table(f'{base}/{region.short}/screen.tsv', sel.screen.to_frame())
            tree.add_table(f'{base}/{region.short}/cv.tsv', sel.cv.to_frame())
            tree.add_table(f'{base}/{region.short}/top.tsv', sel.ranking)
        for key, genes in self.intersections.items():
            tree.add_lines(f'{base}/intersection_{"_".join(r.short for r in key)}.txt', genes)
        tree.add_lines(f'{base}/union.txt', self.union)

    def intersection(self, *regions: Region) -> List[str]:
        return self.intersections[tuple(r for r in REGION_ORDER if r in regions)]

    def metadata(self) -> dict:
        return {strs.SEED: self.seed,
                strs.LAMBDAS: {r.short: _lambda_record(s.cv, self.rule) for r, s in self.regions.items()},
                'rows': self.n_rows}


def _fit_region(rows: Dataset, region: Region, responses: List[str], screen: ScreenResult,
                seed: int, config: PipelineConfig) -> RegionSelection:
    try:
        folds = make_folds(rows.n_rows, config.imaging_folds, seed)
        cv = cv_multitask(rows, responses, screen.kept, folds, config.path_config())
        ranking = rank_rows(cv.fit(config.lambda_rule), config.top_k_imaging)
    except ModelingError as e:
        raise StageError(f'{strs.IMAGING}/{region.value}', e)
    logger.info(f'{region.value}: {len(responses)} responses, {ranking.shape[0]} ranked genes')
    return RegionSelection(region=region, screen=screen, cv=cv, ranking=ranking)


def run_imaging_stage(d: Dataset, partition: Optional[RegionPartition], config: PipelineConfig,
                      loading_bar: bool = False) -> ImagingReport:
    """Logit-transformed FA responses fitted region by region with a
    multi-response group lasso, then intersected across regions."""
    genes = gene_columns(d, config.gene_prefix)
    fa = fa_columns(d, config.fa_prefix)
    if partition is None:
        partition = RegionPartition.by_order(fa)
    partition.validate(fa, override=config.partition_override)
    seed = stage_seed(config.seed, strs.IMAGING)

    rows = drop_incomplete(d, fa + genes)
    values = rows.matrix(fa)
    if np.any((values < 0) | (values > 1)):
        raise DataError('FA responses must lie in [0, 1]')
    rows = rows.with_columns({c: logit_transform(values[:, j], config.epsilon) for j, c in enumerate(fa)})

    shared = None
    if not config.per_region_screening:
        shared = sis_screen_multi(rows, fa, genes, config.d_keep)
    active = [r for r in REGION_ORDER if partition.members(r)]
    screens = dict()
    for region in active:
        responses = partition.members(region)
        screens[region] = shared if shared is not None else sis_screen_multi(rows, responses, genes,
                                                                            config.d_keep)
    jobs = (delayed(_fit_region)(rows, r, partition.members(r), screens[r], seed, config)
            for r in _progress(active, 'regions', loading_bar))
    fitted = Parallel(n_jobs=config.threads, prefer='threads')(jobs)
    regions = {sel.region: sel for sel in fitted}

    intersections = dict()
    for k in (2, 3):
        for key in combinations(active, k):
            common = set.intersection(*[set(regions[r].top) for r in key])
            intersections[key] = [g for g in genes if g in common]
    everything = set.union(*[set(s.top) for s in regions.values()])
    return ImagingReport(seed=seed, rule=config.lambda_rule, regions=regions,
                         intersections=intersections,
                         union=[g for g in genes if g in everything],
                         n_rows=rows.n_rows)
