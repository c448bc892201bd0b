"""Calibration Module

Runs the measurement pass of the suites that carry empirical constants and
derives the frozen constants from what they observe. Derived values are
merged into the versioned constants file, so calibrating d=2 and d=3 in
turn fills both dimensions.
"""

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Optional, Union

import numpy as np
from scipy.stats import linregress

from .config import ExperimentConfig, load_frozen_constants
from .suites import SuiteResult, measure
from ..config.settings import FROZEN_CONSTANTS_PATH
from ..utils.logger import Logger

logger = Logger(__name__)

# Constants whose values are structural rather than measured
FIXED_CONSTANTS = {
    "kappa1": 0.5,
    "kappa2": 0.5,
    "cover_coverage": 0.999,
    "convexify_c0": 0.1,
    "extract_retention": 0.5,
    "extract_measure_factor": 8.0,
}

CALIBRATED_SUITES = ("rwt", "prop15", "tower", "slicing", "detmoment", "trilinear", "lorentz", "lambda0")


def _finite(values: Iterable) -> np.ndarray:
    array = np.array([v for v in values if v is not None], dtype=float)
    return array[np.isfinite(array)]


def _rwt(result: SuiteResult, d: int) -> Dict[str, float]:
    return {f"K_{d}": 1.1 * float(_finite(r["epsilon"] for r in result.rows).max())}


def _prop15(result: SuiteResult, d: int) -> Dict[str, float]:
    return {f"c0_{d}": float(_finite(r["epsilon"] for r in result.rows).min())}


def _tower(result: SuiteResult, d: int) -> Dict[str, float]:
    ratios = _finite(r["phi_ratio"] for r in result.rows if r["built"])
    if ratios.size == 0:
        logger.warning("No tower was built; kappa3 is left unchanged")
        return {}
    return {f"kappa3_{d}": float(ratios.min())}


def _slicing(result: SuiteResult, d: int) -> Dict[str, float]:
    return {f"slicing_c_{d}": 0.9 * float(_finite(r["ratio"] for r in result.rows).min())}


def _detmoment(result: SuiteResult, d: int) -> Dict[str, float]:
    normalized = _finite(r["normalized"] for r in result.rows if r["case"].startswith("random_"))
    if normalized.size == 0:
        return {}
    return {"det_moment_c": 0.9 * float(normalized.min())}


def _trilinear(result: SuiteResult, d: int) -> Dict[str, float]:
    return {f"trilinear_c_{d}": 1.1 * float(_finite(r["ratio"] for r in result.rows).max())}


def _lorentz(result: SuiteResult, d: int) -> Dict[str, float]:
    eta = np.array([r["flatness"] for r in result.rows])
    ratio = np.array([r["ratio"] for r in result.rows])
    gamma = float(linregress(np.log(eta), np.log(ratio)).slope)
    return {
        f"lorentz_gamma_{d}": gamma,
        f"lorentz_c_{d}": 1.1 * float(np.max(ratio / eta ** gamma)),
    }


def _lambda0(result: SuiteResult, d: int) -> Dict[str, float]:
    ratios = _finite(r["ratio"] for r in result.rows)
    floors = _finite(r.get("min_T") for r in result.rows if r.get("family") == "paraboloid_cluster")
    derived = {f"lambda0_low_{d}": 0.9 * float(ratios.min()), f"lambda0_high_{d}": 1.1 * float(ratios.max())}
    if floors.size:
        derived[f"lambda0_cluster_floor_{d}"] = 0.9 * float(floors.min())
    return derived


DERIVATIONS: Dict[str, Callable[[SuiteResult, int], Dict[str, float]]] = {
    "rwt": _rwt,
    "prop15": _prop15,
    "tower": _tower,
    "slicing": _slicing,
    "detmoment": _detmoment,
    "trilinear": _trilinear,
    "lorentz": _lorentz,
    "lambda0": _lambda0,
}


def derive_constants(config: ExperimentConfig, suites: Optional[Iterable[str]] = None) -> Dict[str, float]:
    derived = dict(FIXED_CONSTANTS)
    for name in suites or CALIBRATED_SUITES:
        if name not in DERIVATIONS:
            continue
        logger.info(f"Calibrating {name} in d={config.dimension}")
        derived.update(DERIVATIONS[name](measure(name, config), config.dimension))
    return derived


def _read_payload(path: Path) -> Dict[str, Any]:
    try:
        return json.loads(path.read_text())
    except (FileNotFoundError, json.JSONDecodeError):
        return {}


def write_constants(
    constants: Dict[str, float],
    path: Optional[Union[str, Path]] = None,
    provenance: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Merges constants into the frozen constants file and rewrites it sorted.
    Provenance entries are merged per key next to the constants.
    """
    path = Path(path or FROZEN_CONSTANTS_PATH)
    merged = {**load_frozen_constants(path), **constants}
    history = {**_read_payload(path).get("provenance", {}), **(provenance or {})}
    path.parent.mkdir(parents=True, exist_ok=True)
    payload: Dict[str, Any] = {"constants": {k: float(merged[k]) for k in sorted(merged)}}
    if history:
        payload["provenance"] = {k: history[k] for k in sorted(history)}
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote {len(merged)} frozen constants to {path}")
    return path


def run_provenance(config: ExperimentConfig, suites: Iterable[str], constants: Dict[str, float]) -> Dict[str, Any]:
    return {
        f"d{config.dimension}": {
            "method": "calibrate",
            "date": datetime.now(timezone.utc).date().isoformat(),
            "suites": list(suites),
            "seeds": list(config.seeds),
            "corpus_sizes": {name: config.size(name) for name in suites},
            "voxels": config.voxels,
            "constants": sorted(constants),
        }
    }


def calibrate(
    config: ExperimentConfig,
    suites: Optional[Iterable[str]] = None,
    path: Optional[Union[str, Path]] = None,
) -> Dict[str, float]:
    suites = list(suites or CALIBRATED_SUITES)
    constants = derive_constants(config, suites)
    write_constants(constants, path, run_provenance(config, suites, constants))
    return constants
