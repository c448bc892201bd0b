import logging
import os
import sys
from typing import Optional
from pathlib import Path

class Logger:
    """
    Centralized logging for the toolkit.
    Console output follows RADON_LOG_LEVEL; errors also go to logs/.
    """

    def __init__(self, name: str, log_file: Optional[str] = "radon_toolkit.log"):
        self.logger = logging.getLogger(name)
        level = getattr(logging, os.getenv("RADON_LOG_LEVEL", "INFO").upper(), logging.INFO)
        self.logger.setLevel(level)

        # Prevent duplicate handlers
        if not self.logger.handlers:
            formatter = logging.Formatter(
                '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
            )
            console_handler = logging.StreamHandler(sys.stdout)
            console_handler.setLevel(level)
            console_handler.setFormatter(formatter)
            self.logger.addHandler(console_handler)

            if log_file:
                log_path = Path("logs")
                log_path.mkdir(exist_ok=True)
                file_handler = logging.FileHandler(log_path / log_file)
                file_handler.setLevel(logging.ERROR)
                file_handler.setFormatter(formatter)
                self.logger.addHandler(file_handler)
            # basicConfig in the entry point would otherwise print twice
            self.logger.propagate = False

    def info(self, msg: str):
        self.logger.info(msg)

    def error(self, msg: str):
        self.logger.error(msg)

    def warning(self, msg: str):
        self.logger.warning(msg)

    def debug(self, msg: str):
        self.logger.debug(msg)
