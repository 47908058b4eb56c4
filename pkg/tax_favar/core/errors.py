"""
Error hierarchy for the FAVAR toolkit.

Every stage raises its own subclass so the pipeline can report which stage
failed and the CLI can exit with a stage-specific code.
"""

from typing import Any


class FavarError(ValueError):
    """Base error; carries the pipeline stage and a process exit code."""

    stage = "pipeline"
    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.details = details
        for key, value in details.items():
            setattr(self, key, value)


class ConfigError(FavarError):
    stage = "config"
    exit_code = 2


class PanelError(FavarError):
    stage = "panel"
    exit_code = 10


class FactorError(FavarError):
    stage = "factors"
    exit_code = 11


class SmoothingError(FavarError):
    stage = "smoothing"
    exit_code = 12


class NarrativeError(FavarError):
    stage = "narrative"
    exit_code = 13


class VarError(FavarError):
    stage = "var"
    exit_code = 14


class IdentificationError(FavarError):
    stage = "identify"
    exit_code = 15


class AnalysisError(FavarError):
    stage = "analysis"
    exit_code = 16


class ReportError(FavarError):
    stage = "report"
    exit_code = 17
