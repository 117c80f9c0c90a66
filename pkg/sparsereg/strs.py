ABS_WEIGHT = 'abs_weight'
CLASS = 'class'
CLASS_LABELS = 'class_labels'
COEFFICIENT = 'coefficient'
COEFFICIENTS = 'coefficients'
COGNITIVE = 'cognitive'
CONFIG_SHA256 = 'config_sha256'
CV_MEAN = 'cv_mean'
CV_SE = 'cv_se'
DISEASE = 'disease'
ESTIMATE = 'estimate'
FAMILY = 'family'
FOLDS = 'folds'
GAUSSIAN = 'gaussian'
ID = 'id'
IMAGING = 'imaging'
INTERCEPT = 'intercept'
INTERCEPTS = 'intercepts'
INTERSECTION = 'intersection'
LAMBDA = 'lambda'
LAMBDAS = 'lambdas'
LAMBDA_1SE = 'lambda_1se'
LAMBDA_MIN = 'lambda_min'
LAMBDA_RULE = 'lambda_rule'
LEVELS = 'levels'
LOW_DIMENSIONAL = 'low_dimensional'
MANIFEST = 'manifest'
MULTINOMIAL = 'multinomial'
MULTITASK = 'multitask'
N = 'N'
NAME = 'name'
NONZERO = 'nonzero'
OUTCOME = 'outcome'
P_VALUE = 'p_value'
PREDICTOR = 'predictor'
RANK = 'rank'
REGION = 'region'
RESPONSE_NAME = 'response_name'
RESPONSES = 'responses'
ROLE = 'role'
ROW_NORM = 'row_norm'
SCORE = 'score'
SEED = 'seed'
SPEC_VERSION = 'spec_version'
STD_ERROR = 'std_error'
STRATUM = 'stratum'
TERM = 'term'
T_VALUE = 't_value'
UNION = 'union'
