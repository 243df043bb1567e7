import os
import sys
from dotenv import load_dotenv
from loguru import logger

# Load environment variables from a .env file
load_dotenv()

# Deployment environment, "dev" logs to stdout
ENV = os.getenv("env", "dev")
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

DATABASE_URL = os.getenv("DATABASE_URL", "sqlite:///./selfsim.db")
REDIS_URL = os.getenv("REDIS_URL", "redis://localhost:6379")

# Enumeration caps
ATOM_CAP = int(os.getenv("SELFSIM_ATOM_CAP", str(2 ** 24)))
NODE_CAP = int(os.getenv("SELFSIM_NODE_CAP", str(10 ** 7)))

# Sampling knobs
DIRECTIONS_PER_SHELL = int(os.getenv("SELFSIM_DIRECTIONS_PER_SHELL", "512"))
BURN_IN = int(os.getenv("SELFSIM_BURN_IN", "128"))
ETA_GRID_STEP = float(os.getenv("SELFSIM_ETA_GRID_STEP", str(1 / 64)))
SEED_THETA_STEP = float(os.getenv("SELFSIM_SEED_THETA_STEP", "1e-4"))
SOLVER_SAMPLES = int(os.getenv("SELFSIM_SOLVER_SAMPLES", "2000"))
IRREDUCIBILITY_DEGREE_CAP = int(
    os.getenv("SELFSIM_IRREDUCIBILITY_DEGREE_CAP", "24"))
WORKERS = int(os.getenv("SELFSIM_WORKERS", str(os.cpu_count() or 1)))

# Tolerances
PROB_TOL = 1e-12
ORTHO_TOL = 1e-10
EIGEN_TOL = 1e-9
RANK_TOL = 1e-9
ROOT_TOL = 1e-9

# Safety factor applied to empirically calibrated constants
CALIBRATION_SAFETY = 2.0


def configure_logging(sink=None, level: str = LOG_LEVEL) -> None:
    """
    Route loguru output to a single sink.

    The API process logs to stdout in dev and to app.log otherwise; the CLI
    passes sys.stderr so that its stdout stays reserved for results.
    """
    if sink is None:
        sink = sys.stdout if ENV == "dev" else "app.log"
    logger.remove()  # Remove the default logger
    logger.add(sink, colorize=sink is sys.stdout, level=level)
