"""Logging utilities for training and evaluation runs.

This module provides an append-only run event log, written in JSON Lines
format next to the run's artifacts, and the application logging setup shared
by every command.
"""

import json
import logging
import threading
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

EVENTS_FILENAME = "events.jsonl"

FILE_FORMAT = "%(asctime)s %(levelname)-7s [%(threadName)s] %(name)s: %(message)s"
DATE_FORMAT = "%Y-%m-%dT%H:%M:%S"
CONSOLE_FORMAT = "%(levelname)s: %(message)s"


def utc_now() -> str:
    """Current UTC time as an ISO-8601 string with a Z suffix."""
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class RunLogger:
    """Append-only event logger for a run directory.

    Every record carries the run id, a timestamp and the event name, so the
    sequence of folds, stages and checkpoints of a run can be replayed.
    Folds may run concurrently and share one logger.
    """

    def __init__(self, run_dir: str, run_id: Optional[str] = None):
        """Initialize the run logger.

        Args:
            run_dir: Run output directory
            run_id: Optional run identifier (random by default)
        """
        self.log_path = Path(run_dir) / EVENTS_FILENAME
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        self.run_id = run_id or f"run-{uuid.uuid4()}"
        self._lock = threading.Lock()
        self._file = None

    def open(self):
        """Open the event log file for appending."""
        with self._lock:
            if self._file is None:
                # pylint: disable=consider-using-with
                self._file = open(self.log_path, "a", encoding="utf-8")

    def close(self):
        """Close the event log file."""
        with self._lock:
            if self._file is not None:
                self._file.close()
                self._file = None

    def log_event(self, event: str, **fields: Any) -> None:
        """Record one event.

        Args:
            event: Event name (e.g. ``fold_started``)
            **fields: JSON-serialisable event data
        """
        entry = {
            "run_id": self.run_id,
            "timestamp": utc_now(),
            "event": event,
        }
        entry.update(fields)
        self._write_entry(entry)

    def _write_entry(self, entry: Dict[str, Any]) -> None:
        line = json.dumps(entry, separators=(",", ":"), default=str)
        with self._lock:
            if self._file is None:
                # pylint: disable=consider-using-with
                self._file = open(self.log_path, "a", encoding="utf-8")
            self._file.write(line + "\n")
            self._file.flush()

    def __enter__(self):
        """Context manager entry."""
        self.open()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        """Context manager exit."""
        self.close()


def read_events(run_dir: str) -> list:
    """Read back all events of a run directory, oldest first."""
    path = Path(run_dir) / EVENTS_FILENAME
    if not path.exists():
        return []
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def setup_application_logging(
    log_path: Optional[str], log_level: str = "INFO", logger_name: Optional[str] = None
) -> logging.Logger:
    """Route log records to the console and, for run commands, to a log file.

    The file format carries the thread name so records of folds trained in
    parallel can be told apart. Calling again replaces the handlers.

    Args:
        log_path: Application log file, or None for console only
        log_level: Level name such as ``INFO`` or ``DEBUG``
        logger_name: Logger to configure (default: root logger)

    Returns:
        The configured logger
    """
    logger = logging.getLogger(logger_name)
    logger.setLevel(getattr(logging, log_level.upper()))
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        if isinstance(handler, logging.FileHandler):
            handler.close()

    if log_path:
        Path(log_path).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_path, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt=DATE_FORMAT))
        logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))
    logger.addHandler(console_handler)
    return logger
