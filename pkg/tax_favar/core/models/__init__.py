"""
Data models for the FAVAR toolkit.
"""

from .panel_models import SeriesMeta, TimeSeriesPanel, TRANSFORM_ORDER
from .factor_models import (
    FactorModel,
    ICResult,
    FactorTransition,
    TrendCycleDecomposition,
    LrTestResult,
    FactorSmoothing,
)
from .narrative_models import TaxType, NarrativeEvent, NarrativeTaxSeries, GrangerResult
from .var_models import (
    VarModel,
    Sign,
    SignRestrictionSpec,
    ImpulseVector,
    DrawSet,
    IdentificationMode,
)
from .analysis_models import IrfSet, FevdTable, MtResult, ReliabilityRow, ReliabilityReport, SystemFit

__all__ = [
    "SeriesMeta", "TimeSeriesPanel", "TRANSFORM_ORDER",
    "FactorModel", "ICResult", "FactorTransition", "TrendCycleDecomposition",
    "LrTestResult", "FactorSmoothing",
    "TaxType", "NarrativeEvent", "NarrativeTaxSeries", "GrangerResult",
    "VarModel", "Sign", "SignRestrictionSpec", "ImpulseVector", "DrawSet",
    "IdentificationMode",
    "IrfSet", "FevdTable", "MtResult", "ReliabilityRow", "ReliabilityReport", "SystemFit",
]
