"""
Tax FAVAR Package
Narrative tax-shock identification in a factor-augmented VAR.
"""

from .core.logger import get_logger

# Initialize package logger
logger = get_logger("TaxFavar")

__version__ = "0.1.0"

from .core.config import PipelineConfig, load_config
from .core.errors import FavarError
from .core.pipeline import FavarPipeline, run_pipeline
from .core.report import emit_report

__all__ = ["PipelineConfig", "load_config", "FavarError", "FavarPipeline", "run_pipeline", "emit_report"]
