"""
Logger Service for the FAVAR toolkit

A structured logging service used by every estimation stage and by the CLI.
Messages are tagged with a pipeline context and rendered through rich.
"""

import logging
import os
from typing import Optional, Dict, Any
from enum import Enum

from rich.console import Console
from rich.logging import RichHandler


class LogLevel(Enum):
    """Log levels for the FAVAR toolkit."""
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    SUCCESS = "SUCCESS"
    PROGRESS = "PROGRESS"

    @classmethod
    def parse(cls, value: str) -> "LogLevel":
        try:
            return cls(value.strip().upper())
        except ValueError:
            return cls.INFO


_STD_LEVELS = {
    LogLevel.DEBUG: logging.DEBUG,
    LogLevel.INFO: logging.INFO,
    LogLevel.SUCCESS: logging.INFO,
    LogLevel.PROGRESS: logging.INFO,
    LogLevel.WARNING: logging.WARNING,
    LogLevel.ERROR: logging.ERROR,
}


class FavarLogger:
    """
    Context-tagged logger for pipeline runs.
    """

    def __init__(self, name: str = "TaxFavar", level: LogLevel = LogLevel.INFO):
        """
        Initialize the logger.

        Args:
            name: Logger name
            level: Minimum log level to display
        """
        self.name = name
        self.level = level
        self.console = Console(stderr=True, highlight=False)
        self.logger: logging.Logger
        self._setup_logger()

        self.markers = {
            LogLevel.DEBUG: "·",
            LogLevel.INFO: "ℹ️",
            LogLevel.WARNING: "⚠️",
            LogLevel.ERROR: "❌",
            LogLevel.SUCCESS: "✅",
            LogLevel.PROGRESS: "🚀",
        }

        # Stage contexts override the level marker
        self.context_markers = {
            "test": "🧪",
            "config": "⚙️",
            "file": "📁",
            "panel": "🗂️",
            "factors": "🧮",
            "smoothing": "〰️",
            "narrative": "📜",
            "var": "🔁",
            "identify": "🎯",
            "analysis": "📊",
            "bootstrap": "🎲",
            "report": "📑",
        }

    def _setup_logger(self):
        """Set up the internal Python logger with a rich handler."""
        self.logger = logging.getLogger(self.name)
        self.logger.setLevel(logging.DEBUG)

        for handler in self.logger.handlers[:]:
            self.logger.removeHandler(handler)

        handler = RichHandler(
            console=self.console,
            show_path=False,
            markup=False,
            log_time_format="%H:%M:%S",
        )
        handler.setLevel(logging.DEBUG)
        self.logger.addHandler(handler)
        self.logger.propagate = False

    def _should_log(self, level: LogLevel) -> bool:
        """Check if message should be logged based on current log level."""
        return _STD_LEVELS[level] >= _STD_LEVELS[self.level]

    def _format_message(self, message: str, level: LogLevel, context: Optional[str] = None) -> str:
        marker = self.markers.get(level, "")
        if context:
            marker = self.context_markers.get(context.lower(), marker)
        return f"{marker} {message}" if marker else message

    def _emit(self, level: LogLevel, message: str, context: Optional[str]):
        if self._should_log(level):
            self.logger.log(_STD_LEVELS[level], self._format_message(message, level, context))

    def debug(self, message: str, context: Optional[str] = None):
        """Log debug message."""
        self._emit(LogLevel.DEBUG, message, context)

    def info(self, message: str, context: Optional[str] = None):
        """Log info message."""
        self._emit(LogLevel.INFO, message, context)

    def warning(self, message: str, context: Optional[str] = None):
        """Log warning message."""
        self._emit(LogLevel.WARNING, message, context)

    def error(self, message: str, context: Optional[str] = None, error: Optional[Exception] = None):
        """Log error message."""
        full_message = message
        if error:
            full_message += f": {error}"
        self._emit(LogLevel.ERROR, full_message, context)

    def success(self, message: str, context: Optional[str] = None):
        """Log success message."""
        self._emit(LogLevel.SUCCESS, message, context)

    def progress(self, message: str, context: Optional[str] = None):
        """Log progress message."""
        self._emit(LogLevel.PROGRESS, message, context)

    def section_header(self, title: str, char: str = "="):
        """Print a section header."""
        if self._should_log(LogLevel.INFO):
            self.console.rule(title, characters=char)

    def subsection_header(self, title: str, char: str = "-"):
        """Print a subsection header."""
        if self._should_log(LogLevel.INFO):
            self.console.rule(title, characters=char, align="left")

    def blank_line(self):
        if self._should_log(LogLevel.INFO):
            self.console.print("")

    def list_item(self, message: str, indent: int = 3):
        """Print a list item with indentation."""
        if self._should_log(LogLevel.INFO):
            self.console.print(" " * indent + message)

    def phase_start(self, phase_name: str, description: str = ""):
        """Log the start of a pipeline stage."""
        message = f"Stage: {phase_name}"
        if description:
            message += f" - {description}"
        self.progress(message)

    def phase_complete(self, phase_name: str, success: bool = True):
        """Log the completion of a pipeline stage."""
        if success:
            self.success(f"Stage {phase_name} completed")
        else:
            self.error(f"Stage {phase_name} failed")

    def stage_timing(self, stage: str, seconds: float):
        self.debug(f"{stage} took {seconds:.3f}s", stage)

    def metrics(self, metrics_dict: Dict[str, Any], context: str = "analysis"):
        """Log metrics and statistics."""
        if self._should_log(LogLevel.INFO):
            self.info("Metrics:", context)
            for key, value in metrics_dict.items():
                self.list_item(f"{key}: {value}")

    def set_level(self, level: LogLevel):
        """Change the logging level."""
        self.level = level
        self.debug(f"Log level set to {level.value}")


_loggers: Dict[str, FavarLogger] = {}
_global_level: Optional[LogLevel] = None


def _default_level() -> LogLevel:
    if _global_level is not None:
        return _global_level
    return LogLevel.parse(os.getenv("FAVAR_LOG_LEVEL", "INFO"))


def get_logger(name: str = "TaxFavar", level: Optional[LogLevel] = None) -> FavarLogger:
    """
    Get or create a named logger instance.

    Args:
        name: Logger name
        level: Log level; defaults to FAVAR_LOG_LEVEL or INFO

    Returns:
        FavarLogger instance
    """
    if name not in _loggers:
        _loggers[name] = FavarLogger(name, level or _default_level())
    elif level is not None:
        _loggers[name].level = level
    return _loggers[name]


def set_global_log_level(level: LogLevel):
    """Set the log level of every logger created so far and of later ones."""
    global _global_level
    _global_level = level
    for logger in _loggers.values():
        logger.set_level(level)


# Convenience functions
def debug(message: str, context: Optional[str] = None):
    get_logger().debug(message, context)


def info(message: str, context: Optional[str] = None):
    get_logger().info(message, context)


def warning(message: str, context: Optional[str] = None):
    get_logger().warning(message, context)


def error(message: str, context: Optional[str] = None, error: Optional[Exception] = None):
    get_logger().error(message, context, error)


def success(message: str, context: Optional[str] = None):
    get_logger().success(message, context)


def progress(message: str, context: Optional[str] = None):
    get_logger().progress(message, context)
