import math

from scipy import constants as _si

LOGDIR = "."
LOG_FILENAME = "emeflow.log"
OUTPUT_DIR_ENV = "EMEFLOW_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "runs"

# Physical constants (SI); field arithmetic itself runs in units with eps0 = mu0 = c = 1
SPEED_OF_LIGHT = _si.c

# Evaluation domain of the paraxial solution
MAX_SCREEN_DISTANCE = 2.0  # m
MAX_ABS_X = 25e-3  # m

# Default scenario constants
DEFAULT_WAVELENGTH = 532.5e-9  # m
DEFAULT_SLIT_SEPARATION = 0.25e-3  # m
DEFAULT_SLIT_WIDTH = 0.1e-3  # m
DEFAULT_SCREEN_DISTANCE = 558e-3  # m
DEFAULT_X_MIN = -4e-3  # m
DEFAULT_X_MAX = 4e-3  # m
DEFAULT_N_POINTS = 2001
DEFAULT_BEAM_WAIST = 1.4e-3  # m
DEFAULT_TRAJECTORIES_PER_SLIT = 15
DEFAULT_HISTOGRAM_TRAJECTORIES = 10_000

# Flow-line integration
STAGNATION_RATIO = 1e-12  # U / U0 below which a flow line is aborted
LAUNCH_OFFSET_WAVELENGTHS = 10.0
STEP_FRACTION = 0.05
MAX_STEP = 2e-3  # m
MIN_STEP_WAVELENGTHS = 0.1
MAX_TURN_ANGLE = math.radians(5.0)
MAX_HALVINGS = 12
FLOW_RTOL = 1e-11
FLOW_ATOL = 1e-12  # m
MAX_STEPS = 100_000
TRAJECTORY_CHUNK = 256

# Fringe analysis
MIN_POINTS_PER_FRINGE = 20
MIN_FRINGES_COVERED = 3.0
VISIBILITY_HALF_WINDOW = 1.5  # in fringe spacings
COINCIDENCE_RTOL = 1e-9

# CSV formatting
CSV_FLOAT_FORMAT = "%.15g"
