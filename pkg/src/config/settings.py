import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

CONFIG_DIR = Path(__file__).parent

# Quadrature over the t-grid
QUADRATURE_SETTINGS = {
    "t_resolution": float(os.getenv("RADON_T_RESOLUTION", str(1 / 64))),
    "relative_tolerance": 0.02,  # declared quadrature tolerance
    "max_chunk_points": 2_000_000  # voxel x t-node lookups per vectorized chunk
}

# Monte Carlo oracles
MONTE_CARLO_SETTINGS = {
    "confidence_sigma": 3.0,
    "block_size": 1 << 16,
    "oracle_samples": 10_000_000
}

# Voxel grids
GRID_SETTINGS = {
    "voxels_per_axis": {2: 64, 3: 24},
    "lorentz_k_min": -40
}

# Ball family
BALL_SETTINGS = {
    "duality_tolerance": 1e-12,  # relative
    "orthonormal_tolerance": 1e-12,
    "manifold_tolerance": 1e-12,  # scaled by the coordinate magnitude
    "membership_tolerance": 1e-9,
    "slice_nodes_per_axis": 32,
    "cover_slab_constant": 0.9,  # c' of the net, calibrated
    "cover_coverage_target": 0.999
}

# Symmetry group
SYMMETRY_SETTINGS = {
    "residual_tolerance": 1e-9,
    "conditioning_threshold": 1e12,
    "sample_box": 4.0,
    "jacobian_step": 1e-5
}

# Tower, convexification, extraction
COMBINATORICS_SETTINGS = {
    "tower_kappa": 0.5,
    "convexify_c0": 0.1,
    "convexify_directions": 8,
    "convexify_max_steps": 64,
    "mvee_tolerance": 1e-6,
    "mvee_max_iterations": 10_000,
    "capture_quantile": 0.9,
    "det_moment_constant": 0.01
}

# Worker pool and output
RUNTIME_SETTINGS = {
    "max_workers": int(os.getenv("RADON_MAX_WORKERS", "4")),
    "suite_timeout": float(os.getenv("RADON_SUITE_TIMEOUT", "600")),
    "output_dir": os.getenv("RADON_OUTPUT_DIR", "reports"),
    "log_level": os.getenv("RADON_LOG_LEVEL", "INFO")
}

FROZEN_CONSTANTS_PATH = Path(
    os.getenv("RADON_FROZEN_CONSTANTS", str(CONFIG_DIR / "frozen_constants.json"))
)
DEFAULT_EXPERIMENT_PATH = CONFIG_DIR / "experiment_default.json"


class Settings:
    T_RESOLUTION = QUADRATURE_SETTINGS["t_resolution"]
    MAX_WORKERS = RUNTIME_SETTINGS["max_workers"]
    SUITE_TIMEOUT = RUNTIME_SETTINGS["suite_timeout"]
    OUTPUT_DIR = RUNTIME_SETTINGS["output_dir"]
    LOG_LEVEL = RUNTIME_SETTINGS["log_level"]
    FROZEN_CONSTANTS = FROZEN_CONSTANTS_PATH

    @classmethod
    def validate(cls):
        """Validate environment-driven settings"""
        invalid = []
        if not cls.T_RESOLUTION > 0:
            invalid.append("RADON_T_RESOLUTION")
        if cls.MAX_WORKERS < 1:
            invalid.append("RADON_MAX_WORKERS")
        if not cls.SUITE_TIMEOUT > 0:
            invalid.append("RADON_SUITE_TIMEOUT")
        if cls.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            invalid.append("RADON_LOG_LEVEL")

        if invalid:
            raise ValueError(
                f"Invalid environment variables: {', '.join(invalid)}"
            )
