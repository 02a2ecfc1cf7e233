import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

class Config:
    """Configuration class for the rough Bergomi VIX toolkit."""

    # Runtime Configuration
    OUTPUT_DIR = os.getenv("OUTPUT_DIR", "./output")
    THREADS = int(os.getenv("ROUGHVOL_THREADS", "1"))
    SEED = int(os.getenv("ROUGHVOL_SEED", "20170301"))
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    # VIX Configuration
    # 30-day window on an Act/365 day count
    VIX_WINDOW = 30.0 / 365.0
    DEFAULT_VIX_POINTS = 30
    CHOLESKY_BLOCK = 8
    BOUNDS_QUADRATURE_N = 256
    # sigma^2 is accurate to about 1e-6 relative at 64 nodes; raise for tighter moments
    MOMENTS_GL_NODES = int(os.getenv("ROUGHVOL_MOMENTS_NODES", "64"))

    # Simulation Configuration
    DEFAULT_KAPPA = 2
    STEPS_PER_YEAR = 365
    # divisible by 12 so monthly and quarterly maturities fall on the SPX grid
    SPX_STEPS_PER_YEAR = 360
    PATH_BLOCK = 1024

    # Calibration Configuration
    XI0_EPS = 1e-8
    H_BOUNDS = (0.01, 0.49)
    NU_MAX = 5.0
    RHO_EPS = 1e-4
    MAX_ITERATIONS = 500

    @classmethod
    def ensure_output_dir(cls, output_dir: str = None) -> str:
        """Create the output directory if needed and return it."""
        path = output_dir or cls.OUTPUT_DIR
        os.makedirs(path, exist_ok=True)
        return path

    @classmethod
    def validate_config(cls):
        """Validate that the environment-derived configuration is usable."""
        problems = []

        if cls.THREADS < 1:
            problems.append(f"ROUGHVOL_THREADS must be >= 1 (got {cls.THREADS})")
        if cls.SEED < 0:
            problems.append(f"ROUGHVOL_SEED must be non-negative (got {cls.SEED})")
        if cls.MOMENTS_GL_NODES < 2:
            problems.append(f"ROUGHVOL_MOMENTS_NODES must be >= 2 (got {cls.MOMENTS_GL_NODES})")
        if cls.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            problems.append(f"LOG_LEVEL is not a logging level: {cls.LOG_LEVEL}")

        if problems:
            raise ValueError(f"Invalid configuration: {'; '.join(problems)}")

        return True
