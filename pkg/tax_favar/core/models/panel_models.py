"""
Data models for the macroeconomic panel.
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
import pandas as pd

# Maximum differencing order lost by each transform code
TRANSFORM_ORDER = {1: 0, 2: 1, 3: 2, 4: 0, 5: 1, 6: 2, 7: 2}
LOG_CODES = frozenset({4, 5, 6})


@dataclass(frozen=True)
class SeriesMeta:
    """Identity and transformation code of one panel series."""
    id: str
    transform_code: int
    group: str = ""

    def __post_init__(self):
        if not self.id:
            raise ValueError("Series id cannot be empty")
        if self.transform_code not in TRANSFORM_ORDER:
            raise ValueError(f"Transform code {self.transform_code} of {self.id} is outside 1-7")

    def to_dict(self) -> dict:
        return {"id": self.id, "group": self.group, "transform_code": self.transform_code}


@dataclass(frozen=True)
class TimeSeriesPanel:
    """A T x N quarterly panel; missing cells are NaN until balancing."""
    dates: pd.PeriodIndex
    values: np.ndarray
    metas: List[SeriesMeta]
    standardized: bool = False
    drop_log: List[str] = field(default_factory=list)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("Panel values must be a T x N matrix")
        object.__setattr__(self, "values", values)
        if values.shape != (len(self.dates), len(self.metas)):
            raise ValueError(
                f"Panel shape {values.shape} does not match {len(self.dates)} dates "
                f"and {len(self.metas)} series"
            )
        ids = [m.id for m in self.metas]
        if len(set(ids)) != len(ids):
            raise ValueError("Series ids must be unique within a panel")
        if len(self.dates) > 1:
            steps = np.diff(self.dates.asi8)
            if getattr(self.dates, "freqstr", "").upper()[:1] != "Q" or np.any(steps != 1):
                raise ValueError("Panel dates must be consecutive quarters")
        if self.standardized and np.isnan(values).any():
            raise ValueError("A standardized panel cannot contain missing values")

    @property
    def ids(self) -> List[str]:
        return [m.id for m in self.metas]

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]

    @property
    def is_balanced(self) -> bool:
        return not np.isnan(self.values).any()

    def index_of(self, series_id: str) -> int:
        try:
            return self.ids.index(series_id)
        except ValueError:
            raise KeyError(f"Series {series_id} not in panel") from None

    def column(self, series_id: str) -> np.ndarray:
        return self.values[:, self.index_of(series_id)]

    def meta(self, series_id: str) -> SeriesMeta:
        return self.metas[self.index_of(series_id)]

    def select(self, ids: List[str]) -> "TimeSeriesPanel":
        cols = [self.index_of(i) for i in ids]
        return replace(self, values=self.values[:, cols], metas=[self.metas[c] for c in cols])

    def with_values(
        self,
        values: np.ndarray,
        dates: Optional[pd.PeriodIndex] = None,
        metas: Optional[List[SeriesMeta]] = None,
        standardized: Optional[bool] = None,
        drop_log: Optional[List[str]] = None,
    ) -> "TimeSeriesPanel":
        return TimeSeriesPanel(
            dates=self.dates if dates is None else dates,
            values=values,
            metas=self.metas if metas is None else metas,
            standardized=self.standardized if standardized is None else standardized,
            drop_log=list(self.drop_log) if drop_log is None else drop_log,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=self.dates, columns=self.ids)

    def to_dict(self) -> dict:
        return {
            "n_obs": self.n_obs,
            "n_series": self.n_series,
            "start": str(self.dates[0]) if len(self.dates) else None,
            "end": str(self.dates[-1]) if len(self.dates) else None,
            "standardized": self.standardized,
            "series": [m.to_dict() for m in self.metas],
            "drop_log": list(self.drop_log),
        }
