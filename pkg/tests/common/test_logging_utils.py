"""Tests for the run event log and application logging setup."""

import logging

import pytest

from src.common.logging_utils import RunLogger, read_events, setup_application_logging


@pytest.mark.unit
class TestRunLogger:
    """Tests for RunLogger."""

    def test_events_in_order(self, tmp_path):
        """Test that events are read back in order with run id and timestamp."""
        with RunLogger(str(tmp_path), run_id="run-1") as run_logger:
            run_logger.log_event("fold_started", fold=0)
            run_logger.log_event("fold_finished", fold=0, model=tmp_path / "m.ksdd")
        events = read_events(str(tmp_path))
        assert [e["event"] for e in events] == ["fold_started", "fold_finished"]
        assert all(e["run_id"] == "run-1" for e in events)
        assert events[1]["model"].endswith("m.ksdd")
        assert events[0]["timestamp"].endswith("Z")

    def test_appends_across_loggers(self, tmp_path):
        """Test that a second logger appends to the same event log."""
        for _ in range(2):
            with RunLogger(str(tmp_path)) as run_logger:
                run_logger.log_event("run_started")
        assert len(read_events(str(tmp_path))) == 2

    def test_no_log_yet(self, tmp_path):
        """Test reading a run directory without an event log."""
        assert read_events(str(tmp_path)) == []


@pytest.mark.unit
class TestSetupApplicationLogging:
    """Tests for setup_application_logging."""

    def test_file_and_console(self, tmp_path):
        """Test logging to a file and the console."""
        log_path = tmp_path / "logs" / "app.log"
        logger = setup_application_logging(str(log_path), "DEBUG", logger_name="defectnet.test")
        logger.debug("hello %s", "file")
        for handler in logger.handlers:
            handler.flush()
        assert logger.level == logging.DEBUG
        assert len(logger.handlers) == 2
        assert "hello file" in log_path.read_text(encoding="utf-8")
        for handler in list(logger.handlers):
            handler.close()
            logger.removeHandler(handler)

    def test_repeat_setup_replaces_handlers(self, tmp_path):
        """Test that setting up again replaces the earlier handlers."""
        first = tmp_path / "first.log"
        second = tmp_path / "second.log"
        setup_application_logging(str(first), "INFO", logger_name="defectnet.repeat")
        logger = setup_application_logging(str(second), "INFO", logger_name="defectnet.repeat")
        logger.info("only in second")
        for handler in logger.handlers:
            handler.flush()
        assert len(logger.handlers) == 2
        text = second.read_text(encoding="utf-8")
        assert "[MainThread]" in text
        assert "only in second" not in first.read_text(encoding="utf-8")
        for handler in list(logger.handlers):
            handler.close()
            logger.removeHandler(handler)

    def test_console_only(self):
        """Test console-only logging."""
        logger = setup_application_logging(None, "WARNING", logger_name="defectnet.console")
        assert len(logger.handlers) == 1
        assert logger.level == logging.WARNING
        logger.handlers.clear()
