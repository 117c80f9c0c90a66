__version__ = '1.0.0'

import functools

import sparsereg.load
import sparsereg.schema
import sparsereg.utils
import sparsereg.strs as strs

from sparsereg.dataset import Dataset, Role, drop_incomplete, make_folds, standardize
from sparsereg.models.path import LambdaRule, PathConfig
from sparsereg.pipeline.config import load_pipeline_config
from sparsereg.pipeline.run import run_full_pipeline
from sparsereg.preprocess.simulate import GeneratorSpec, simulate_cohort

load_csv = sparsereg.load.load_csv
run = run_full_pipeline

# the cohort shape of the baseline study: 1,631 rows, 468 with genes, 104 with FA
study_cohort = functools.partial(simulate_cohort, GeneratorSpec())
