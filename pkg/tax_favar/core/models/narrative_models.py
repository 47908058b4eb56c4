"""
Data models for narrative tax changes.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd


class TaxType(Enum):
    """Income tax categories of a legislated liability change."""
    PIT = "PIT"
    CIT = "CIT"


@dataclass(frozen=True)
class NarrativeEvent:
    """A legislated liability change dated to the quarter it takes effect."""
    quarter: pd.Period
    tax_type: TaxType
    liability_change: float
    base_prev: float
    act_label: str = ""
    exogenous: bool = True

    def __post_init__(self):
        if not np.isfinite(self.liability_change):
            raise ValueError(f"Liability change of '{self.act_label}' must be finite")
        if not self.base_prev > 0:
            raise ValueError(f"Tax base of '{self.act_label}' must be strictly positive")

    @property
    def rate(self) -> float:
        """Liability change as a percent of the previous-quarter base."""
        return 100.0 * self.liability_change / self.base_prev

    def to_dict(self) -> dict:
        return {
            "quarter": str(self.quarter),
            "tax_type": self.tax_type.value,
            "liability_change": self.liability_change,
            "base_prev": self.base_prev,
            "act_label": self.act_label,
            "exogenous": self.exogenous,
        }


@dataclass(frozen=True)
class NarrativeTaxSeries:
    """Narrative PIT and CIT rates in percent on a quarterly grid."""
    dates: pd.PeriodIndex
    pit_rate: np.ndarray
    cit_rate: np.ndarray

    def __post_init__(self):
        if not (len(self.dates) == len(self.pit_rate) == len(self.cit_rate)):
            raise ValueError("Rates must be aligned with the date grid")

    def rate(self, tax_type: TaxType) -> np.ndarray:
        return self.pit_rate if tax_type is TaxType.PIT else self.cit_rate

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"PIT": self.pit_rate, "CIT": self.cit_rate},
            index=pd.Index(self.dates.astype(str), name="date"),
        )


@dataclass(frozen=True)
class GrangerResult:
    """F test that lags of a predictor add no forecasting power for a tax series."""
    predictor_id: str
    lags: int
    f_stat: float
    p_value: float
    target_id: str = ""
    df_num: int = 0
    df_den: int = 0

    def __post_init__(self):
        if self.f_stat < 0:
            raise ValueError("F statistic must be nonnegative")
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError("p-value must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "target": self.target_id,
            "predictor": self.predictor_id,
            "lags": self.lags,
            "f_stat": self.f_stat,
            "p_value": self.p_value,
            "df_num": self.df_num,
            "df_den": self.df_den,
        }
