"""Named constants for Replica Signature Detector. No magic numbers."""

# --- Application ---
APP_NAME = "Replica Signature Detector"
APP_VERSION = "0.1.0"

# --- Numerics ---
# Storage dtype for images and parameters.
STORAGE_DTYPE = "float32"
SIMPLEX_TOLERANCE = 1e-6

# --- Reference architecture (desk scale) ---
DEFAULT_CONV_CHANNELS = (8, 16)
DEFAULT_DENSE_UNITS = 64
DEFAULT_KERNEL_SIZE = 3
DEFAULT_POOL_SIZE = 2
SUBSTITUTE_WIDTH_MULTIPLIER = 2
PREDICT_CHUNK_SIZE = 256  # Images per forward pass when predicting a batch

# --- Training ---
DEFAULT_EPOCHS = 12
DEFAULT_BATCH_SIZE = 32
DEFAULT_LEARNING_RATE = 0.05
DEFAULT_ADV_EPOCHS = 2
DEFAULT_ADV_EPSILON = 0.08  # FGSM4 analogue on the synthetic benchmark
DEFAULT_ADV_LEARNING_RATE = 0.01

# --- Synthetic dataset ---
DEFAULT_N_CLASSES = 10
DEFAULT_TRAIN_PER_CLASS = 200
DEFAULT_TEST_PER_CLASS = 120  # Held-out calibration half stays above 500 samples
DEFAULT_IMAGE_SIZE = 16
MIN_IMAGE_SIZE = 8
GLYPH_SCALE_RANGE = (0.55, 0.8)  # Glyph extent as a fraction of the image side
GLYPH_JITTER_FRACTION = 0.12  # Max centre offset as a fraction of the image side
COLOR_JITTER = 0.08
BACKGROUND_RANGE = (0.15, 0.45)
BACKGROUND_NOISE_STD = 0.04

# --- Distortions ---
DEFAULT_MEDIAN_WINDOW = 3
DEFAULT_BIT_DEPTH = 5
MIN_BIT_DEPTH = 1
MAX_BIT_DEPTH = 7
# ITU-R BT.601 luma weights (R, G, B)
LUMA_WEIGHTS = (0.299, 0.587, 0.114)
DEFAULT_DISTORTIONS = ("median:3", "bitdepth:5", "grayscale")

# --- Attacks ---
DEFAULT_FGSM_EPSILON = 0.02
DEFAULT_DEEPFOOL_OVERSHOOT = 0.02
DEFAULT_DEEPFOOL_MAX_ITERATIONS = 50
DEFAULT_CW_MAX_ITERATIONS = 200
DEFAULT_CW_LEARNING_RATE = 1e-2
DEFAULT_CW_BINARY_SEARCH_STEPS = 5
DEFAULT_CW_INITIAL_CONST = 1e-2
DEFAULT_CW_LOGIT_SCALE = 10.0  # kappa' = kappa * scale
CW_CONST_UPPER_BOUND = 1e10
CW_TANH_SHRINK = 1.0 - 1e-6  # Keeps arctanh finite at 0 and 1
# Abort a c value when the loss stops falling between checks
CW_ABORT_EARLY_CHECKS = 10
CW_ABORT_EARLY_TOLERANCE = 0.9999
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
DEFAULT_MAX_ATTACK_SAMPLES = 100
DEFAULT_MAX_ATTACK_WORKERS = 4

# --- Detection / evaluation ---
DEFAULT_TARGET_FPR = 0.05
DEFAULT_HISTOGRAM_BINS = 20
FS_SCORE_MAX = 2.0  # L1 diameter of the probability simplex

# --- Seeds (explicit, never entropy-based) ---
DEFAULT_DATA_SEED = 1234
DEFAULT_VICTIM_SEED = 7
DEFAULT_SUBSTITUTE_SEED = 11
DEFAULT_TRAIN_SEED = 21
DEFAULT_ADV_TRAIN_SEED = 23
DEFAULT_ATTACK_SEED = 31
DEFAULT_PAIRING_SEED = 41
DEFAULT_REPEATS = 1

# --- Container format ---
CONTAINER_MAGIC = b"ADVT"
CONTAINER_VERSION = 1
CONTAINER_FLAG_LABELS = 0x1
CONTAINER_FLAG_METADATA = 0x2

# --- Paths ---
DEFAULT_CONFIG_FILENAME = "config.yaml"
DEFAULT_RUN_DIR = "runs/default"
DATA_DIRNAME = "data"
MODELS_DIRNAME = "models"
STATS_DIRNAME = "stats"
ATTACKS_DIRNAME = "attacks"
DETECTIONS_DIRNAME = "detections"
REPORTS_DIRNAME = "reports"
HISTOGRAMS_DIRNAME = "histograms"
ROC_DIRNAME = "roc"
DATASET_SUFFIX = ".advt"
CHECKPOINT_SUFFIX = ".ckpt"
STATS_SUFFIX = ".stats"
EVAL_REPORT_FILENAME = "eval.json"
FULL_REPORT_FILENAME = "report.json"

# --- Environment overrides ---
ENV_RUN_DIR = "RSD_RUN_DIR"
ENV_LOG_LEVEL = "RSD_LOG_LEVEL"

# --- Report Strings ---
REPORT_TITLE = "Replica Signature Detector -- Experiment Report"
