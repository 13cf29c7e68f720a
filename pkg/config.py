import os

# Regime detection
REGIME_TOL = 1e-12

# Integrator
RTOL = 1e-9
ATOL = 1e-12
MIN_RTOL = 1e-12
MAX_RTOL = 1e-3
METHOD = 'RK45'
MAX_ETA = 1e4
DIVERGE = 1e6
UNDERSHOOT = 1e-10

# Shooting
CAPTURE_RADIUS = 1e-4
SEED_EPS = 1e-6
XI_SEED = 1e-3
SIGMA_TOL = 1e-4
LAMBDA_RESOLUTION = 1e-6
SLOW_CAPTURE_FACTOR = 100.0
P0_SEED_X = 1e-3
Z_OVER_Y2_MAX = 1e3
WORKERS = os.cpu_count() or 1

# Certificates
CERTIFY_SAMPLES = 10_000
SURFACE_TOL = 1e-8
DEFAULT_SEED = 0

# Output
OUTPUT_DIR = os.environ.get('BLOWUP_OUTPUT_DIR', 'output')
EXPERIMENTS_FILE = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data', 'experiments.json')
LOG_FORMAT = '[%(levelname)s] %(name)s: %(message)s'
