"""Unit tests for the logging module."""

import logging
import os
import threading
from unittest.mock import patch

import pytest

from fastr_readout import calibration, readout
from fastr_readout.logging import ROOT_NAME, FastrLogger

pytestmark = pytest.mark.unit


class TestFastrLogger:
    """Test the FastrLogger class."""

    def setup_method(self):
        """Reset logger state before each test."""
        FastrLogger._loggers.clear()
        FastrLogger._configured = False
        FastrLogger._default_level = logging.INFO
        if "FASTR_LOG_LEVEL" in os.environ:
            del os.environ["FASTR_LOG_LEVEL"]

    def test_get_logger_creates_new_logger(self):
        """Test that get_logger creates a namespaced logger."""
        logger = FastrLogger.get_logger("test.module")
        assert isinstance(logger, logging.Logger)
        assert logger.name == "fastr_readout.test.module"

    def test_get_logger_returns_same_instance(self):
        """Test that get_logger returns the same instance for the same name."""
        assert FastrLogger.get_logger("test.module") is FastrLogger.get_logger("test.module")

    def test_module_loggers_are_namespaced(self):
        """Test the package modules log under the package root."""
        assert calibration.logger.name == "fastr_readout.calibration"
        assert readout.logger.name == "fastr_readout.readout"

    def test_logger_hierarchy(self):
        """Test that child loggers hang below their parents."""
        parent_logger = FastrLogger.get_logger("parent")
        child_logger = FastrLogger.get_logger("parent.child")
        assert child_logger.parent.name == parent_logger.name

    @pytest.mark.parametrize(
        "level_str,expected",
        [
            ("DEBUG", logging.DEBUG),
            ("INFO", logging.INFO),
            ("WARNING", logging.WARNING),
            ("ERROR", logging.ERROR),
            ("CRITICAL", logging.CRITICAL),
            ("debug", logging.DEBUG),
            ("INVALID", logging.INFO),
        ],
    )
    def test_set_level_from_string(self, level_str, expected):
        """Test setting the level by name, case-insensitively, with INFO as fallback."""
        logger = FastrLogger.get_logger("test")
        FastrLogger.set_level_from_string(level_str)
        assert logger.level == expected
        assert logging.getLogger(ROOT_NAME).level == expected

    @pytest.mark.parametrize(
        "env_value,expected",
        [("ERROR", logging.ERROR), ("warning", logging.WARNING), ("INVALID_LEVEL", logging.INFO)],
    )
    def test_environment_variable_sets_level(self, env_value, expected):
        """Test that FASTR_LOG_LEVEL sets the initial level."""
        with patch.dict(os.environ, {"FASTR_LOG_LEVEL": env_value}):
            FastrLogger._configured = False
            logger = FastrLogger.get_logger("test.env")
            assert logger.level == expected

    def test_root_handler_does_not_propagate(self):
        """Test the package root owns one handler and stops propagation."""
        FastrLogger.get_logger("test.root")
        root = logging.getLogger(ROOT_NAME)
        assert root.handlers
        assert root.propagate is False

    def test_logger_propagation_enabled(self):
        """Test that module loggers propagate to the package root."""
        assert FastrLogger.get_logger("test.propagation").propagate is True

    def test_logger_thread_safety(self):
        """Test that concurrent get_logger calls share one instance."""
        results = []

        def create_logger():
            results.append(FastrLogger.get_logger("test.thread"))

        threads = [threading.Thread(target=create_logger) for _ in range(10)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()

        assert all(logger is results[0] for logger in results)

    def test_logger_cache(self):
        """Test that loggers are cached once per name."""
        loggers = [FastrLogger.get_logger("test.memory") for _ in range(100)]
        assert all(logger is loggers[0] for logger in loggers)
        assert len([name for name in FastrLogger._loggers if "test.memory" in name]) == 1
