"""Report writers for suite runs and single commands.

Reports carry no timestamps or timings, so reruns of a deterministic suite
produce byte-identical files.
"""

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel

from ..config.report_formats import CSV_COLUMNS
from ..config.settings import RUNTIME_SETTINGS
from ..utils.logger import Logger
from ..utils.process_logger import SuiteLogger

logger = Logger(__name__)


def to_plain(value: Any) -> Any:
    """JSON-ready copy of value: numpy scalars and arrays become Python types"""
    if isinstance(value, BaseModel):
        return to_plain(value.model_dump())
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no infinities
        return value if math.isfinite(value) else None
    return value


def dumps(payload: Any) -> str:
    return json.dumps(to_plain(payload), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def rows_to_csv(rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None) -> str:
    if columns is None:
        columns = sorted({key for row in rows for key in row})
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(row.get(k)) for k in columns})
    return buffer.getvalue()


def _cell(value: Any) -> Any:
    value = to_plain(value)
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def suite_payload(result, steps: SuiteLogger) -> Dict[str, Any]:
    return {
        "suite": result.suite,
        "dimension": result.dimension,
        "passed": steps.passed,
        "assertions": steps.steps,
        "metrics": result.metrics,
        "rows": result.rows,
    }


def write_suite_reports(result, steps: SuiteLogger, out_dir: Optional[Union[str, Path]] = None) -> Dict[str, Path]:
    """<suite>_d<d>.json, .csv and .txt under out_dir"""
    out = Path(out_dir or RUNTIME_SETTINGS["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{result.suite}_d{result.dimension}"
    paths = {
        "json": out / f"{stem}.json",
        "csv": out / f"{stem}.csv",
        "narrative": out / f"{stem}.txt",
    }
    paths["json"].write_text(dumps(suite_payload(result, steps)), encoding="utf-8")
    paths["csv"].write_text(rows_to_csv(result.rows, CSV_COLUMNS.get(result.suite)), encoding="utf-8")
    paths["narrative"].write_text(steps.get_process_narrative() + "\n", encoding="utf-8")
    logger.info(f"Wrote {result.suite} reports to {out}")
    return paths


def emit(payload: Any, fmt: str = "json", out: Optional[Union[str, Path]] = None, name: str = "result") -> str:
    """
    Renders a command result as JSON, or as CSV when it is a list of rows
    (a single mapping becomes one row). Written to out/<name>.<fmt> when out
    is given; the rendered text is returned either way.
    """
    if fmt == "csv":
        plain = to_plain(payload)
        rows = plain if isinstance(plain, list) else [_flatten(plain)]
        text = rows_to_csv(rows)
    else:
        text = dumps(payload)
    if out is not None:
        directory = Path(out)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"{name}.{fmt}").write_text(text, encoding="utf-8")
    return text


def _flatten(mapping: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat = {}
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        elif isinstance(value, list):
            flat[name] = json.dumps(value)
        else:
            flat[name] = value
    return flat
