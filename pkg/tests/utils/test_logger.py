import logging
import sys

from src.utils.logger import Logger

class TestLogger:
    def test_handlers_are_not_duplicated(self):
        first = Logger("tests.logger.duplicates")
        second = Logger("tests.logger.duplicates")
        assert first.logger is second.logger
        assert len(second.logger.handlers) == 2

    def test_errors_go_to_file(self):
        log = Logger("tests.logger.file")
        files = [h for h in log.logger.handlers if isinstance(h, logging.FileHandler)]
        assert len(files) == 1
        assert files[0].level == logging.ERROR

    def test_console_only(self):
        log = Logger("tests.logger.console", log_file=None)
        assert len(log.logger.handlers) == 1
        assert not log.logger.propagate

    def test_messages_reach_console(self, capsys):
        log = Logger("tests.logger.capture", log_file=None)
        log.logger.handlers[0].setStream(sys.stdout)
        log.warning("incidence count dropped")
        assert "incidence count dropped" in capsys.readouterr().out
