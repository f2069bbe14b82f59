"""
Uncertainty Lab — Configuration
================================
Defaults for every experiment. All other scripts import from here; experiment
JSON configs only override what they name.
"""

import math

TOOL_NAME = "uncertainty-lab"
TOOL_VERSION = "0.3.0"

# ──────────────────────────────────────────────
#  Random streams
# ──────────────────────────────────────────────
DEFAULT_SEED = 20240101
MC_CHUNK_SIZE = 100_000         # rows per block when sampling large MC batches

# ──────────────────────────────────────────────
#  Numerical tolerances
# ──────────────────────────────────────────────
PROB_TOLERANCE = 1e-12          # probability rows must sum to 1 within this
T_QUANTILE_TOL = 1e-10          # |CDF(q) - prob| target for t_quantile
T_QUANTILE_MAX_ITER = 8         # Newton polish steps after scipy's inverse
CLASSIFY_TOLERANCE = 1e-12      # under/over/equal variance comparisons
IDENTITY_TOLERANCE = 1e-10      # factored-bias and decomposition self-checks
SHIFT_TOLERANCE = 1e-9          # transportability tolerance on TV distance

# ──────────────────────────────────────────────
#  Double descent (KL) simulation
# ──────────────────────────────────────────────
KL_N = 100                      # training sample size
KL_P_MAX = 200                  # covariates available
KL_SIGMA = 0.1                  # residual standard deviation
KL_ACTIVE = 150                 # first 150 covariates carry signal
KL_REPLICATIONS = 100
RIDGE_PRIOR_VAR = math.sqrt(10)  # σ_β² of the ridge prior β ~ N(0, σ_β² I)
KL_ORACLE_MIN_DRAWS = 10_000

# ──────────────────────────────────────────────
#  Regression / prediction interval
# ──────────────────────────────────────────────
INTERVAL_LEVEL = 0.90
INTERVAL_N = 20
INTERVAL_BETA = (1.0, 0.5)      # intercept, slope of the simple line example
INTERVAL_SIGMA = 1.0
INTERVAL_X_RANGE = (0.0, 10.0)
COVERAGE_REPLICATIONS = 10_000
BIAS_VARIANCE_MIN_REPS = 100

# ──────────────────────────────────────────────
#  Errors in X
# ──────────────────────────────────────────────
ERRORS_X_MIN_DRAWS = 100_000
ERRORS_X_MIN_WINDOW = 100       # draws that must land in the x-window

# ──────────────────────────────────────────────
#  Omitted variables (Simpson demo)
# ──────────────────────────────────────────────
FINITE_DIFF_STEP = 1e-5

# ──────────────────────────────────────────────
#  Output / plotting
# ──────────────────────────────────────────────
OUTPUT_DIR = "results"
SVG_FIGSIZE = (6.4, 4.0)        # inches per panel
SVG_HASH_SALT = "uncertainty-lab"
SERIES_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
BAND_ALPHA = 0.25

# ──────────────────────────────────────────────
#  Parallelism
# ──────────────────────────────────────────────
DEFAULT_THREADS = 1             # 0 = one worker per CPU
