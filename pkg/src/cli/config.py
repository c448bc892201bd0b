"""Experiment configuration for suites, generators and calibration."""

import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from ..config.settings import DEFAULT_EXPERIMENT_PATH, FROZEN_CONSTANTS_PATH
from ..core.errors import ConfigInvalid, UnknownSuite
from ..core.transform import QuadratureSpec
from ..utils.logger import Logger

logger = Logger(__name__)

SUITE_NAMES = (
    "rwt", "prop15", "cover", "symmetry", "tower", "slicing",
    "convexify", "detmoment", "trilinear", "lorentz", "extract", "lambda0",
)

# Frozen constants each suite reads; "{d}" is replaced by the dimension
SUITE_CONSTANTS = {
    "rwt": ["K_{d}"],
    "prop15": ["c0_{d}"],
    "cover": ["cover_coverage"],
    "symmetry": [],
    "tower": ["kappa1", "kappa2", "kappa3_{d}"],
    "slicing": ["slicing_c_{d}"],
    "convexify": ["convexify_c0"],
    "detmoment": ["det_moment_c"],
    "trilinear": ["trilinear_c_{d}"],
    "lorentz": ["lorentz_c_{d}", "lorentz_gamma_{d}"],
    "extract": ["extract_retention", "extract_measure_factor"],
    "lambda0": ["lambda0_low_{d}", "lambda0_high_{d}", "lambda0_cluster_floor_{d}"],
}

DEFAULT_CORPUS_SIZES = {
    "rwt": 100,
    "prop15": 100,
    "symmetry": 10,
    "tower": 20,
    "slicing": 50,
    "detmoment": 20,
    "trilinear": 20,
    "lorentz": 4,
    "extract": 10,
    "lambda0": 8,
}

DEFAULT_TOLERANCES = {
    "epsilon_cv": 0.15,
    "symmetry_residual": 1e-9,
    "symmetry_epsilon": 0.02,
    "cover_exponent_gap": 0.5,
    "slicing_closed_form": 0.02,
    "slicing_transform": 0.05,
    "envelope_error": 8.0,  # times 1/voxels
    "slice_exact": 1e-9,
    "raster_convergence": 0.05,
    "phi_headroom": 0.9,
    "prop15_headroom": 0.9,
    "monotone_noise": 0.05,
    "equivariance": 0.10,
    "sweep_reproducibility": 0.5,
    "det_moment_sigma": 3.0,
}


class GeneratorSpec(BaseModel):
    family: Literal["voxel_union", "boxes", "ball_envelope", "transformed_envelope", "paraboloid_cluster"]
    count: int = Field(default=1, ge=1)
    params: Dict[str, float] = Field(default_factory=dict)


class ExperimentConfig(BaseModel):
    dimension: Literal[2, 3] = 2
    quadrature: QuadratureSpec = Field(default_factory=QuadratureSpec)
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    generators: List[GeneratorSpec] = Field(default_factory=list)
    tolerances: Dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    frozen_constants: Dict[str, float] = Field(default_factory=dict)
    corpus_sizes: Dict[str, int] = Field(default_factory=lambda: dict(DEFAULT_CORPUS_SIZES))
    voxels: Optional[int] = Field(default=None, ge=8)

    @field_validator("tolerances")
    @classmethod
    def _positive_tolerances(cls, value):
        bad = [k for k, v in value.items() if not v > 0]
        if bad:
            raise ValueError(f"tolerances must be positive: {', '.join(sorted(bad))}")
        return {**DEFAULT_TOLERANCES, **value}

    @field_validator("seeds")
    @classmethod
    def _nonnegative_seeds(cls, value):
        if any(seed < 0 for seed in value):
            raise ValueError("seeds must be nonnegative")
        return value

    @model_validator(mode="after")
    def _sizes(self):
        self.corpus_sizes = {**DEFAULT_CORPUS_SIZES, **self.corpus_sizes}
        if any(v < 1 for v in self.corpus_sizes.values()):
            raise ValueError("corpus sizes must be at least 1")
        return self

    @property
    def seed(self) -> int:
        return self.seeds[0]

    def item_seed(self, index: int, offset: int = 0) -> int:
        """Seed for corpus item `index`, cycling through the configured seeds"""
        base = self.seeds[index % len(self.seeds)]
        return base * 100_003 + index * 7_919 + offset

    def tolerance(self, name: str) -> float:
        return self.tolerances[name]

    def size(self, suite: str) -> int:
        return self.corpus_sizes.get(suite, 1)

    def constant_name(self, template: str) -> str:
        return template.format(d=self.dimension)

    def constant(self, template: str) -> float:
        name = self.constant_name(template)
        if name not in self.frozen_constants:
            raise ConfigInvalid(f"frozen constant {name!r} is missing")
        return self.frozen_constants[name]

    def require_constants(self, suite: str):
        if suite not in SUITE_CONSTANTS:
            raise UnknownSuite(f"unknown suite {suite!r}; choose from {', '.join(SUITE_NAMES)}")
        missing = [
            self.constant_name(t) for t in SUITE_CONSTANTS[suite]
            if self.constant_name(t) not in self.frozen_constants
        ]
        if missing:
            raise ConfigInvalid(f"suite {suite} needs frozen constants: {', '.join(missing)}")


def load_frozen_constants(path: Optional[Union[str, Path]] = None) -> Dict[str, float]:
    path = Path(path or FROZEN_CONSTANTS_PATH)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        logger.warning(f"No frozen constants at {path}")
        return {}
    except json.JSONDecodeError as e:
        logger.error(f"Frozen constants at {path} are not valid JSON: {e}")
        raise ConfigInvalid(f"{path}: {e}")
    return {k: float(v) for k, v in payload.get("constants", payload).items()}


def load_config(
    path: Optional[Union[str, Path]] = None,
    dimension: Optional[int] = None,
) -> ExperimentConfig:
    """Reads an ExperimentConfig JSON file; missing frozen constants come from the versioned file"""
    path = Path(path or DEFAULT_EXPERIMENT_PATH)
    try:
        payload = json.loads(path.read_text())
        if dimension is not None:
            payload["dimension"] = dimension
        config = ExperimentConfig.model_validate(payload)
    except FileNotFoundError:
        raise ConfigInvalid(f"config file {path} does not exist")
    except json.JSONDecodeError as e:
        raise ConfigInvalid(f"{path} is not valid JSON: {e}")
    except ValidationError as e:
        logger.error(f"Invalid experiment config {path}: {e}")
        raise ConfigInvalid(str(e))

    frozen = load_frozen_constants()
    config.frozen_constants = {**frozen, **config.frozen_constants}
    return config
