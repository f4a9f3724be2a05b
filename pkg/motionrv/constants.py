"""Constants and configuration mappings for motionrv"""

# Environment variable holding the default config file path
ENV_CONFIG_PATH = "MOTIONRV_CONFIG"

# Config file discovered in the working directory tree
CONFIG_FILENAME = ".motionrv-config.yaml"

# Acquisition conventions
DEFAULT_TR_S = 0.72
DEFAULT_PHYSIO_RATE_HZ = 400.0
DEFAULT_PHYSIO_COLUMN = 1
DEFAULT_RV_WINDOW_S = 6.0

# Network input conventions
DEFAULT_N_ROI = 90
N_MOTION_CHANNELS = 6
MOTION_CHANNEL_NAMES = (
    "rot_x",
    "rot_y",
    "rot_z",
    "trans_x",
    "trans_y",
    "trans_z",
)
DEFAULT_WINDOW_LEN = 65
DEFAULT_STRIDE = 1

# Respiratory band
DEFAULT_BAND_LOW_HZ = 0.2
DEFAULT_BAND_HIGH_HZ = 0.5
DEFAULT_BAND_ORDER = 4

# Channels below this std are treated as constant when normalizing
ZSCORE_STD_FLOOR = 1e-12

# File formats. Bump the version when a layout changes.
RV_FORMAT = "motionrv.rv/1"
SCORES_FORMAT = "motionrv.scores/1"
SUMMARY_FORMAT = "motionrv.summary/1"
PLOTDATA_FORMAT = "motionrv.plotdata/1"
SCAN_FORMAT = "motionrv.scan/1"
MANIFEST_FORMAT = "motionrv.manifest/1"
CHECKPOINT_MAGIC = "motionrv-checkpoint"
CHECKPOINT_VERSION = 1

# Scan bundle file suffixes
PHYSIO_SUFFIX = ".physio.txt"
MOTION_SUFFIX = ".par"
ROI_SUFFIX = ".roi.csv"
RV_SUFFIX = ".rv.csv"
SCAN_SIDECAR_SUFFIX = ".scan.json"

# Metric names in report column order
METRIC_NAMES = ("mae", "mse", "pearson_r", "dtw")
ERROR_METRICS = ("mae", "mse", "dtw")

# CLI exit codes
EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_USAGE_ERROR = 2

# Synthetic scenarios
SCENARIO_FORMAT = "motionrv.scenario/1"
EVENT_RAMP_S = 2.0
BOLD_SMOOTH_FRAMES = 9
BOLD_AR_COEFFICIENT = 0.3
