"""Process Logger Module

Records the assertion steps of a suite run and renders them as a plain-text
narrative that is written next to the JSON and CSV reports.
"""

from typing import Any, Dict, List, Optional

from ..config.report_formats import NARRATIVE_HEADER, NARRATIVE_STEP
from .logger import Logger

logger = Logger(__name__)


class SuiteLogger:
    def __init__(self, suite: str):
        self.suite = suite
        self.steps: List[Dict[str, Any]] = []

    def add_step(
        self,
        description: str,
        findings: Optional[Dict[str, Any]] = None,
        passed: Optional[bool] = None,
    ) -> None:
        """Add a step; steps with a pass flag count as assertions"""
        step = {
            "description": description,
            "findings": findings or {},
            "passed": passed,
        }
        self.steps.append(step)
        if passed is False:
            logger.warning(f"[{self.suite}] assertion failed: {description}")
        elif passed:
            logger.info(f"[{self.suite}] {description}: ok")

    @property
    def assertions(self) -> List[Dict[str, Any]]:
        return [step for step in self.steps if step["passed"] is not None]

    @property
    def passed(self) -> bool:
        return all(step["passed"] for step in self.assertions)

    def get_process_narrative(self) -> str:
        checks = self.assertions
        narrative = [NARRATIVE_HEADER.format(
            suite=self.suite,
            passed=sum(1 for step in checks if step["passed"]),
            total=len(checks),
        )]
        for i, step in enumerate(self.steps, 1):
            status = {True: "PASS", False: "FAIL", None: "INFO"}[step["passed"]]
            details = ", ".join(f"{k}={_short(v)}" for k, v in step["findings"].items())
            narrative.append(NARRATIVE_STEP.format(index=i, status=status, description=step["description"], details=details))
        return "\n".join(narrative)

    def clear(self) -> None:
        self.steps = []


def _short(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)
