import os
from dotenv import load_dotenv

load_dotenv()

APP_NAME = "GeoCV"
APP_VERSION = "1.0.0"

# Environment variables
LOG_LEVEL = os.getenv("GEOCV_LOG_LEVEL", "INFO")
OUTPUT_DIR = os.getenv("GEOCV_OUTPUT_DIR", "runs")
DEFAULT_JOBS = int(os.getenv("GEOCV_JOBS", "1"))
N_CONFIGS = int(os.getenv("GEOCV_N_CONFIGS", "100"))
UPLOAD_DIR = os.getenv("GEOCV_UPLOAD_DIR", "uploads")
UPLOAD_MAX_BYTES = 50 * 1024 * 1024

# Geodesy
EARTH_RADIUS_KM = 6371.0
THIN_MIN_DIST_M = 500.0

# Variogram Configuration
VARIOGRAM_N_LAGS = 15
VARIOGRAM_MAX_PAIRS = 50_000
VARIOGRAM_MODEL = "exponential"
VARIOGRAM_N_STARTS = 16
# "cressie": pair count over squared semivariance; "pairs": pair count only
VARIOGRAM_WEIGHTS = "cressie"
VARIOGRAM_WEIGHTINGS = ["cressie", "pairs"]
# default max lag as a share of the bounding-box diagonal
VARIOGRAM_MAX_LAG_FRACTION = 1.0 / 3.0
SAC_AGGREGATION = "median"
SAC_AGGREGATIONS = ["median", "mean", "max"]

# Environmental blocking
KMEANS_TOLERANCE = 1e-6
KMEANS_MAX_ITER = 300

# SMOTE Configuration
SMOTE_TARGET_RATIO = 0.30
SMOTE_K_NEIGHBORS = 5

# Learners
MODEL_FORMAT_VERSION = 1
LEARNER_KINDS = ["rf", "gbm"]
RF_PARAMS = ["n_trees", "max_depth", "min_samples_leaf", "mtry_fraction", "bootstrap_fraction"]
GBM_PARAMS = [
    "n_trees", "learning_rate", "max_depth", "min_samples_leaf",
    "subsample_fraction", "colsample_fraction", "l2_leaf_penalty",
]
INTEGER_PARAMS = ["n_trees", "max_depth", "min_samples_leaf"]

# Search spaces: [low, high] per parameter, "log" marks log-uniform draws.
# Stand-ins for the unpublished ranges; experiment configs may override any entry.
HYPERPARAM_SPACES = {
    "rf": {
        "n_trees": {"low": 100, "high": 1000},
        "max_depth": {"low": 2, "high": 20},
        "min_samples_leaf": {"low": 1, "high": 20},
        "mtry_fraction": {"low": 0.2, "high": 1.0},
        "bootstrap_fraction": {"low": 0.5, "high": 1.0},
    },
    "gbm": {
        "n_trees": {"low": 50, "high": 1000},
        "learning_rate": {"low": 0.005, "high": 0.3, "log": True},
        "max_depth": {"low": 1, "high": 8},
        "min_samples_leaf": {"low": 1, "high": 20},
        "subsample_fraction": {"low": 1.0, "high": 1.0},
        "colsample_fraction": {"low": 1.0, "high": 1.0},
        "l2_leaf_penalty": {"low": 0.0, "high": 0.0},
    },
    "xgb": {
        "n_trees": {"low": 50, "high": 1000},
        "learning_rate": {"low": 0.005, "high": 0.3, "log": True},
        "max_depth": {"low": 1, "high": 8},
        "min_samples_leaf": {"low": 1, "high": 20},
        "subsample_fraction": {"low": 0.5, "high": 1.0},
        "colsample_fraction": {"low": 0.3, "high": 1.0},
        "l2_leaf_penalty": {"low": 0.0, "high": 10.0},
    },
    "lgbm": {
        "n_trees": {"low": 50, "high": 1000},
        "learning_rate": {"low": 0.005, "high": 0.3, "log": True},
        "max_depth": {"low": 2, "high": 8},
        "min_samples_leaf": {"low": 5, "high": 20},
        "subsample_fraction": {"low": 0.5, "high": 1.0},
        "colsample_fraction": {"low": 0.3, "high": 1.0},
        "l2_leaf_penalty": {"low": 0.0, "high": 10.0},
    },
}

# Learner presets map the four benchmarked learners onto the two implemented kinds
LEARNER_PRESETS = {
    "rf": "rf",
    "gbm": "gbm",
    "xgb": "gbm",
    "lgbm": "gbm",
}

# Experiment runner
SCHEME_KINDS = ["random", "spatial", "environmental", "spatio_temporal", "tss"]
STRATEGIES = ["retrain", "last_fold"]
SELECTION_BIAS_NOTE = (
    "Oracle AUC is the best out-of-time test AUC across all searched configurations. "
    "It is an upper-bound diagnostic: choosing the maximum over test scores introduces "
    "a form of selection bias and it must not be read as an achievable deployment score."
)
