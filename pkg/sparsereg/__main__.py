import argparse
import fnmatch
import sys
from pathlib import Path
from typing import Dict, List, Optional

from loguru import logger

from sparsereg.dataset import Dataset, drop_incomplete, make_folds
from sparsereg.errors import ConfigError, DataError, ModelingError
from sparsereg.load import load_csv, load_schema
from sparsereg.models.lasso_gaussian import cv_lasso, nonzero_report
from sparsereg.models.lasso_multicat import cv_multinomial, gene_sets
from sparsereg.models.linear_inference import coefficient_table, fit_ols
from sparsereg.models.multitask import cv_multitask, rank_rows
from sparsereg.models.ordinal import fit_ordinal, forest_data
from sparsereg.models.path import LambdaRule, PathConfig
from sparsereg.pipeline.config import load_pipeline_config
from sparsereg.pipeline.regions import load_partition, logit_transform
from sparsereg.pipeline.run import run_full_pipeline
from sparsereg.preprocess.cohort import summarize_cohort
from sparsereg.preprocess.simulate import load_generator_spec, simulate_cohort, write_cohort
from sparsereg.report.report_data import ReportTree
from sparsereg.utils import configure_logging, to_tsv, write_tsv
import sparsereg.strs as strs

FIT_MODELS = ('ols', 'ordinal', 'lasso', 'multinomial', 'multitask')
GENETIC_FOLDS = 10
IMAGING_FOLDS = 4
TOP_K_COGNITIVE = 75
TOP_K_IMAGING = 50


def split_list(value: Optional[str]) -> List[str]:
    if not value:
        return []
    return [v.strip() for v in value.split(',') if v.strip()]


def resolve_columns(d: Dataset, value: Optional[str], what: str) -> List[str]:
    """Comma-separated names; tokens with glob characters expand in column order."""
    out = []
    for token in split_list(value):
        if any(ch in token for ch in '*?['):
            hits = [c for c in d.columns if fnmatch.fnmatchcase(c, token)]
            if not hits:
                raise DataError(f"No {what} match '{token}'")
            out.extend(h for h in hits if h not in out)
        elif token not in out:
            out.append(token)
    if not out:
        raise ConfigError(f'No {what} given')
    d.require(out, block=what)
    return out


def parse_references(value: Optional[str]) -> Dict[str, str]:
    refs = dict()
    for item in split_list(value):
        if '=' not in item:
            raise ConfigError(f"Reference '{item}' must look like COLUMN=LEVEL")
        k, v = item.split('=', 1)
        refs[k.strip()] = v.strip()
    return refs


def read_input(args) -> Dataset:
    if args.input is None:
        raise ConfigError('--input is required')
    schema = load_schema(args.schema) if args.schema is not None else None
    return load_csv(args.input, schema)


def cmd_simulate(args) -> int:
    spec = load_generator_spec(args.spec)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.overwrite:
        raise ConfigError(f'Output directory {out} is not empty; pass --overwrite to replace files')
    cohort = simulate_cohort(spec, args.seed)
    paths = write_cohort(cohort, out)
    logger.success(f'Wrote {", ".join(p.name for p in paths)} to {out}')
    return 0


def _fit_ols(d: Dataset, args, tree: ReportTree):
    outcome = args.outcome
    predictors = resolve_columns(d, args.predictors, 'predictors')
    rows = drop_incomplete(d, [outcome] + predictors)
    fit = fit_ols(rows, outcome, predictors, parse_references(args.references))
    table = coefficient_table(fit)
    table['significant'] = fit.significant(args.significance)
    tree.add_table('coefficients.tsv', table)
    tree.add_json('summary.json', fit.summary(args.significance))


def _fit_ordinal(d: Dataset, args, tree: ReportTree):
    predictors = resolve_columns(d, args.predictors, 'predictors')
    rows = drop_incomplete(d, [args.outcome] + predictors)
    fit = fit_ordinal(rows, args.outcome, predictors)
    tree.add_table('forest.tsv', forest_data(fit, odds_ratio=True))
    tree.add_json('fit.json', fit.to_json())


def _folds(args) -> int:
    if args.folds is not None:
        return args.folds
    return IMAGING_FOLDS if args.model == 'multitask' else GENETIC_FOLDS


def _path_config(args) -> PathConfig:
    return PathConfig(n_lambda=args.n_lambda, threads=args.threads).validate()


def _fit_lasso(d: Dataset, args, tree: ReportTree):
    predictors = resolve_columns(d, args.predictors, 'predictors')
    rows = drop_incomplete(d, [args.outcome] + predictors)
    folds = make_folds(rows.n_rows, _folds(args), args.seed)
    cv = cv_lasso(rows, args.outcome, predictors, folds, _path_config(args))
    lam = cv.selected(args.lambda_rule)
    tree.add_table('cv.tsv', cv.to_frame())
    tree.add_table('nonzero.tsv', nonzero_report(cv.path, lam, args.top_k or TOP_K_COGNITIVE))
    tree.add_json('path.json', cv.path.to_json())
    tree.add_json('selection.json', dict(cv.summary(), lambda_selected=lam))


def _fit_multinomial(d: Dataset, args, tree: ReportTree):
    predictors = resolve_columns(d, args.predictors, 'predictors')
    rows = drop_incomplete(d, [args.outcome] + predictors)
    folds = make_folds(rows.n_rows, _folds(args), args.seed)
    cv = cv_multinomial(rows, args.outcome, predictors, folds, _path_config(args))
    fit = cv.fit(args.lambda_rule)
    union, intersection = gene_sets(fit.class_nonzero().values())
    tree.add_table('cv.tsv', cv.to_frame())
    tree.add_json('fit.json', fit.to_json())
    tree.add_json('selection.json', dict(cv.summary(), lambda_selected=cv.selected(args.lambda_rule)))
    tree.add_lines('union.txt', [p for p in predictors if p in union])
    tree.add_lines('intersection.txt', [p for p in predictors if p in intersection])


def _fit_multitask(d: Dataset, args, tree: ReportTree):
    responses = resolve_columns(d, args.outcome, 'responses')
    predictors = resolve_columns(d, args.predictors, 'predictors')
    rows = drop_incomplete(d, responses + predictors)
    if args.logit:
        values = rows.matrix(responses)
        rows = rows.with_columns({c: logit_transform(values[:, j], args.epsilon)
                                  for j, c in enumerate(responses)})
    folds = make_folds(rows.n_rows, _folds(args), args.seed)
    cv = cv_multitask(rows, responses, predictors, folds, _path_config(args))
    fit = cv.fit(args.lambda_rule)
    tree.add_table('cv.tsv', cv.to_frame())
    tree.add_table('top.tsv', rank_rows(fit, args.top_k or TOP_K_IMAGING))
    tree.add_json('fit.json', fit.to_json())
    tree.add_json('selection.json', dict(cv.summary(), lambda_selected=cv.selected(args.lambda_rule)))


def cmd_fit(args) -> int:
    if args.outcome is None:
        raise ConfigError('--outcome is required')
    d = read_input(args)
    tree = ReportTree()
    {'ols': _fit_ols,
     'ordinal': _fit_ordinal,
     'lasso': _fit_lasso,
     'multinomial': _fit_multinomial,
     'multitask': _fit_multitask}[args.model](d, args, tree)
    tree.save(Path(args.out), overwrite=args.overwrite)
    logger.success(f'{args.model} results written to {args.out}')
    return 0


def pipeline_overrides(args) -> dict:
    overrides = dict()
    for flag, key in (('seed', strs.SEED), ('folds', 'folds'), ('imaging_folds', 'imaging_folds'),
                      ('top_k', 'top_k_cognitive'), ('imaging_top_k', 'top_k_imaging'),
                      ('lambda_rule', strs.LAMBDA_RULE), ('epsilon', 'epsilon'),
                      ('threads', 'threads'), ('n_lambda', 'n_lambda')):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    disabled = split_list(args.skip)
    if disabled:
        overrides['stages'] = {s: False for s in disabled}
    return overrides


def cmd_pipeline(args) -> int:
    config = load_pipeline_config(args.config, pipeline_overrides(args))
    d = read_input(args)
    partition = load_partition(args.partition) if args.partition is not None else None
    report = run_full_pipeline(d, config, partition, Path(args.out), overwrite=args.overwrite,
                               loading_bar=args.verbose)
    logger.info(f'{len(report.manifest)} files listed in {Path(args.out, "manifest.json")}')
    return 0


def cmd_summarize(args) -> int:
    d = read_input(args)
    columns = resolve_columns(d, args.columns, 'columns') if args.columns else None
    table = summarize_cohort(d, args.stratum, columns)
    if args.out is None:
        sys.stdout.write(to_tsv(table))
    else:
        write_tsv(Path(args.out), table)
    return 0


def _common(p: argparse.ArgumentParser):
    p.add_argument('--verbose', action='store_true', help='Debug logging and progress bars')
    p.add_argument('--no-color', action='store_true',
                   help='Plain log output (also set by a non-empty SPARSEREG_NO_COLOR)')


def _input(p: argparse.ArgumentParser):
    p.add_argument('--input', type=Path, help='Cohort CSV (UTF-8, header row, "NA" or empty = missing)')
    p.add_argument('--schema', type=Path, help='Dataset schema JSON (spec_version 1) with roles and levels')


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog='sparsereg',
                                     description='Sparse regression and screening toolkit for '
                                                 'imaging-genetics cohorts',
                                     formatter_class=fmt)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', help='Write a synthetic cohort with planted effects', formatter_class=fmt)
    p.add_argument('--spec', type=Path,
                   help='Generator spec JSON; defaults to the study layout of 1,631 baseline rows, '
                        '468 with gene expression and 104 of those with 57 FA columns (23/11/23)')
    p.add_argument('--seed', type=int, default=0, help='Random seed')
    p.add_argument('--out', type=Path, default=Path('cohort'), help='Output directory')
    p.add_argument('--overwrite', action='store_true', help='Replace existing files')
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('fit', help='Fit one model family', formatter_class=fmt)
    p.add_argument('model', choices=FIT_MODELS,
                   help="Model family; ordinal fits use logit P(Y <= j) = theta_j - x'b, "
                        'so positive slopes point toward later (worse) categories')
    _input(p)
    p.add_argument('--outcome', help='Outcome column (comma list or glob of responses for multitask)')
    p.add_argument('--predictors', help="Comma list of predictors; globs such as 'GENE*' expand")
    p.add_argument('--references', help='Reference levels of categorical predictors, e.g. DX=CN '
                                        '(cognitively normal, the baseline of the clinical regressions)')
    p.add_argument('--folds', type=int, default=None,
                   help=f'Cross-validation folds; {GENETIC_FOLDS} for lasso and multinomial fits as in the '
                        f'cognitive and disease-state gene analyses, {IMAGING_FOLDS} for multitask fits as '
                        f'in the 104-subject imaging analysis')
    p.add_argument('--top-k', type=int, default=None,
                   help=f'Rows in the ranked report; {TOP_K_COGNITIVE} genes for lasso as reported per '
                        f'cognitive score, {TOP_K_IMAGING} for multitask as reported per brain region')
    p.add_argument('--lambda-rule', choices=LambdaRule.ALL, default=LambdaRule.MIN,
                   help='lambda_min (the cross-validation minimum) or the one-standard-error lambda')
    p.add_argument('--n-lambda', type=int, default=100, help='Lambda grid size, the usual glmnet path length')
    p.add_argument('--significance', type=float, default=0.05,
                   help='Significance level of OLS flags, the p < 0.05 threshold of the clinical regressions')
    p.add_argument('--logit', action='store_true',
                   help='Logit-transform multitask responses first, as done for FA values in [0, 1]')
    p.add_argument('--epsilon', type=float, default=1e-6, help='Logit clamp for FA values at 0 or 1')
    p.add_argument('--seed', type=int, default=0, help='Fold assignment seed')
    p.add_argument('--threads', type=int, default=1, help='Concurrent folds; output does not depend on it')
    p.add_argument('--out', type=Path, default=Path('fit'), help='Output directory')
    p.add_argument('--overwrite', action='store_true', help='Replace an existing output directory')
    _common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser('pipeline', help='Run the staged analysis and write a report tree', formatter_class=fmt)
    _input(p)
    p.add_argument('--config', type=Path, help='Pipeline config JSON merged over the shipped defaults')
    p.add_argument('--partition', type=Path,
                   help='CSV (response_name, region) assigning the 57 FA columns to the left body, '
                        'corpus callosum and right body, 23/11/23 as in the imaging data; by column '
                        'order when unset')
    p.add_argument('--folds', type=int, default=None,
                   help=f'Cognitive and disease-state CV folds (config default {GENETIC_FOLDS}, as in '
                        f'the gene analyses)')
    p.add_argument('--imaging-folds', type=int, default=None,
                   help=f'Imaging CV folds (config default {IMAGING_FOLDS}, as in the 104-subject '
                        f'imaging analysis)')
    p.add_argument('--top-k', type=int, default=None,
                   help=f'Top genes per cognitive score (config default {TOP_K_COGNITIVE}, as reported '
                        f'for MMSE and CDRSB)')
    p.add_argument('--imaging-top-k', type=int, default=None,
                   help=f'Top genes per brain region (config default {TOP_K_IMAGING}, as reported per '
                        f'region)')
    p.add_argument('--lambda-rule', choices=LambdaRule.ALL, default=None,
                   help='Final-model lambda (config default min; the study does not name its rule, '
                        'so both are recorded)')
    p.add_argument('--epsilon', type=float, default=None, help='FA logit clamp (config default 1e-6)')
    p.add_argument('--n-lambda', type=int, default=None,
                   help='Lambda grid size (config default 100, the usual glmnet path length)')
    p.add_argument('--seed', type=int, default=None, help='Single source of randomness (config default 0)')
    p.add_argument('--threads', type=int, default=None, help='Concurrent folds and regions (config default 1)')
    p.add_argument('--skip', help='Comma list of stages to disable: low_dimensional, cognitive, disease, imaging')
    p.add_argument('--out', type=Path, default=Path('report'), help='Report directory')
    p.add_argument('--overwrite', action='store_true', help='Replace an existing report directory')
    _common(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser('summarize', help='Cohort characteristics by stratum as TSV', formatter_class=fmt)
    _input(p)
    p.add_argument('--stratum', default='DX',
                   help='Categorical stratum column; DX gives the CN/EMCI/LMCI/AD cohort table')
    p.add_argument('--columns', help='Comma list or globs of columns to summarize; all non-id columns when unset')
    p.add_argument('--out', type=Path, default=None, help='TSV file; standard output when unset')
    _common(p)
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.no_color)
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(str(e))
        return e.exit_code
    except ModelingError as e:
        logger.error(str(e))
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
