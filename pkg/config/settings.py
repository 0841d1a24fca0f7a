# Experiment Configuration Settings

# Stream
CHUNK_SIZE = 500
DATA_SEED = 0
NOISE_SEED = 1
MODEL_SEED = 2
DATASET_FORMAT = "sparse-multilabel"

# Noise injection (per-label flip rates drawn uniform on [lo, hi])
NOISE_LO = 0.2
NOISE_HI = 0.4

# Drift synthesis
DRIFT_MODE = "none"          # none | growth | reduction
DRIFT_SPLIT = 0.5

# Hidden map
HIDDEN_UNITS = 20
WEIGHT_RANGE = (-1.0, 1.0)
BIAS_RANGE = (0.0, 1.0)

# Auxiliary probability model
PROB_RIDGE = 1.0
POSTERIOR_FLOOR = 0.05
POSTERIORS = "estimated"     # estimated | oracle

# Objective
ALPHA = 1.0
BETA = 0.55
GAMMA = 2.0 ** -6
OMEGA_CLAMP_MAX = 10.0
REWEIGHT_RANKING = True
PAPER_LITERAL_R = False

# Neighbour graph
NEIGHBORS = 10
QP_MAX_ITERS = 200
QP_TOL = 1e-8

# Drift monitor
DELTA = 0.1
STRATEGY = "none"            # none | retrain | adjust

# Grid search
BETA_GRID = [round(0.3 + 0.05 * i, 2) for i in range(11)]
GAMMA_GRID = [0.0] + [2.0 ** -p for p in range(8, 2, -1)]

# Reports
OUTPUT_DIR = "runs/latest"
REPEATS = 1
CSV_FLOAT_FORMAT = "%.17g"
CHECKPOINT_VERSION = 1

# Logging
LOG_LEVEL = "INFO"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Environment variable prefix for config overrides
ENV_PREFIX = "NCLD_"

# Exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_NUMERICAL_ERROR = 4
