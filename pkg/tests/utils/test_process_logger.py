import pytest

from src.utils.process_logger import SuiteLogger

@pytest.fixture
def steps():
    log = SuiteLogger("slicing")
    log.add_step("Built 10 domains", {"draws": 10})
    log.add_step("Every ratio clears the floor", {"min_ratio": 0.1234567}, passed=True)
    return log

class TestSuiteLogger:
    def test_info_steps_are_not_assertions(self, steps):
        assert len(steps.steps) == 2
        assert len(steps.assertions) == 1
        assert steps.passed

    def test_failure_flips_status(self, steps):
        steps.add_step("Raster overflow avoided", passed=False)
        assert not steps.passed

    def test_narrative(self, steps):
        narrative = steps.get_process_narrative()
        assert narrative.startswith("Suite slicing: 1/1 assertions passed")
        assert "[INFO] Built 10 domains draws=10" in narrative
        assert "[PASS] Every ratio clears the floor min_ratio=0.123457" in narrative

    def test_clear(self, steps):
        steps.clear()
        assert steps.steps == []
        assert steps.passed
