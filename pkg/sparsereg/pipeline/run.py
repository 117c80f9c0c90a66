from typing import Dict, Optional
from dataclasses import dataclass, field
from pathlib import Path

from loguru import logger

from sparsereg.dataset import Dataset
from sparsereg.errors import ConfigError, StageError
from sparsereg.pipeline.config import PipelineConfig
from sparsereg.pipeline.regions import RegionPartition
from sparsereg.pipeline.stages import (STAGE_INDEX, CognitiveReport, DiseaseReport, ImagingReport,
                                       LowDimensionalReport, fa_columns, gene_columns,
                                       run_cognitive_stage, run_disease_stage, run_imaging_stage,
                                       run_low_dimensional_stage, stage_seed)
from sparsereg.report.report_data import ReportTree
from sparsereg.utils import SimpleLogger
import sparsereg
import sparsereg.strs as strs


@dataclass
class PipelineReport:
    config: PipelineConfig
    low_dimensional: Optional[LowDimensionalReport] = None
    cognitive: Optional[CognitiveReport] = None
    disease: Optional[DiseaseReport] = None
    imaging: Optional[ImagingReport] = None
    manifest: Dict[str, str] = field(default_factory=dict)

    def stages(self) -> Dict[str, object]:
        reports = {strs.LOW_DIMENSIONAL: self.low_dimensional,
                   strs.COGNITIVE: self.cognitive,
                   strs.DISEASE: self.disease,
                   strs.IMAGING: self.imaging}
        return {k: v for k, v in reports.items() if v is not None}

    def metadata(self) -> dict:
        """Everything needed to rerun: seeds, config digest, folds and lambda choices."""
        c = self.config
        return {'version': sparsereg.__version__,
                strs.SEED: c.seed,
                strs.CONFIG_SHA256: c.sha256,
                'stage_seeds': {s: stage_seed(c.seed, s) for s in STAGE_INDEX if c.enabled(s)},
                strs.FOLDS: {strs.COGNITIVE: c.folds, strs.DISEASE: c.folds,
                             strs.IMAGING: c.imaging_folds},
                strs.LAMBDA_RULE: c.lambda_rule,
                'stages': {name: report.metadata() for name, report in self.stages().items()}}

    def to_tree(self) -> ReportTree:
        tree = ReportTree()
        for report in self.stages().values():
            report.write(tree)
        tree.add_json('config.json', self.config.to_json())
        tree.add_json('run_metadata.json', self.metadata())
        return tree


def check_blocks(d: Dataset, config: PipelineConfig, partition: Optional[RegionPartition]):
    """Fail before any fitting when an enabled stage lacks its columns."""
    if config.enabled(strs.LOW_DIMENSIONAL):
        low = config.low_dimensional
        d.require(low.ols_outcomes + low.ols_predictors, block='low-dimensional columns')
        if low.ordinal_predictors:
            d.require([low.ordinal_outcome] + low.ordinal_predictors, block='ordinal columns')
    if any(config.enabled(s) for s in (strs.COGNITIVE, strs.DISEASE, strs.IMAGING)):
        gene_columns(d, config.gene_prefix)
    if config.enabled(strs.COGNITIVE):
        d.require(config.cognitive_outcomes, block='cognitive outcomes')
    if config.enabled(strs.DISEASE):
        d.require([config.disease_outcome], block='disease outcome')
    if config.enabled(strs.IMAGING):
        fa = fa_columns(d, config.fa_prefix)
        if partition is not None:
            partition.validate(fa, override=config.partition_override)


def run_full_pipeline(d: Dataset, config: PipelineConfig,
                      partition: Optional[RegionPartition] = None,
                      output_directory: Optional[Path] = None,
                      overwrite: bool = False,
                      loading_bar: bool = False) -> PipelineReport:
    """Run the enabled stages in order and, given `output_directory`, save the
    report tree atomically; any stage failure leaves no directory behind."""
    if output_directory is not None and Path(output_directory).exists() and not overwrite:
        raise ConfigError(f'Output directory {output_directory} exists; pass overwrite to replace it')
    check_blocks(d, config, partition)
    log = SimpleLogger()
    log.msg(f'Running pipeline on {d.n_rows:,} rows (seed {config.seed})', level=1)
    report = PipelineReport(config=config)

    runners = {strs.LOW_DIMENSIONAL: lambda: run_low_dimensional_stage(d, config),
               strs.COGNITIVE: lambda: run_cognitive_stage(d, config, loading_bar),
               strs.DISEASE: lambda: run_disease_stage(d, config, loading_bar),
               strs.IMAGING: lambda: run_imaging_stage(d, partition, config, loading_bar)}
    for stage, runner in runners.items():
        if not config.enabled(stage):
            logger.debug(f'Stage {stage} disabled')
            continue
        log.msg(f'Stage {stage}', level=2)
        try:
            setattr(report, stage, runner())
        except StageError:
            raise
        except Exception as e:
            raise StageError(stage, e) from e
        log.end_msg()

    if output_directory is not None:
        log.msg('Saving report tree', level=2)
        report.manifest = report.to_tree().save(Path(output_directory), overwrite=overwrite)
        log.end_msg()
    log.end_msg()
    logger.success(f'Pipeline finished: {", ".join(report.stages())}')
    return report
