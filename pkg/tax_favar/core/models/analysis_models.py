"""
Data models for structural responses and diagnostics.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class IrfSet:
    """Per-draw responses (draws x (H+1) x n) with pointwise median and bands."""
    var_ids: List[str]
    draws: np.ndarray
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    point: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (0.0 < self.level < 1.0):
            raise ValueError("Band level must lie in (0, 1)")
        if self.median.shape != (self.horizon + 1, len(self.var_ids)):
            raise ValueError("Median must be (H+1) x n")
        tol = 1e-12
        if np.any(self.lower > self.median + tol) or np.any(self.median > self.upper + tol):
            raise ValueError("Bands must satisfy lower <= median <= upper")

    @property
    def horizon(self) -> int:
        return self.median.shape[0] - 1

    def to_frame(self) -> pd.DataFrame:
        rows = []
        point = self.median if self.point is None else self.point
        for j, var_id in enumerate(self.var_ids):
            for h in range(self.horizon + 1):
                rows.append({
                    "variable": var_id,
                    "horizon": h,
                    "median": self.median[h, j],
                    "lower": self.lower[h, j],
                    "upper": self.upper[h, j],
                    "point": point[h, j],
                })
        return pd.DataFrame(rows)


@dataclass(frozen=True)
class FevdTable:
    """Percent of forecast-error variance due to one shock, variable x horizon."""
    var_ids: List[str]
    horizons: List[int]
    shares: np.ndarray

    def __post_init__(self):
        if self.shares.shape != (len(self.var_ids), len(self.horizons)):
            raise ValueError("Shares must be variables x horizons")
        if np.any(self.shares < -1e-9) or np.any(self.shares > 100 + 1e-9):
            raise ValueError("FEVD shares must lie in [0, 100]")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            self.shares,
            index=pd.Index(self.var_ids, name="variable"),
            columns=[f"h{h}" for h in self.horizons],
        )


@dataclass(frozen=True)
class MtResult:
    """Median-Target selection over a set of accepted draws."""
    selected_draw: int
    gap: float
    gaps: np.ndarray

    def __post_init__(self):
        if self.gap < 0:
            raise ValueError("Median-Target gap must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "selected_draw": self.selected_draw,
            "gap": self.gap,
            "mean_gap": float(np.mean(self.gaps)),
            "n_draws": int(len(self.gaps)),
        }


@dataclass(frozen=True)
class SystemFit:
    """In-sample fit of a VAR system: residual RMSE and explained variation in percent."""
    rmse: float
    explained_percent: float

    def __post_init__(self):
        if self.rmse < 0:
            raise ValueError("RMSE cannot be negative")
        if not (-1e-9 <= self.explained_percent <= 100.0 + 1e-9):
            raise ValueError(f"Explained variation {self.explained_percent} outside [0, 100]")


@dataclass(frozen=True)
class ReliabilityRow:
    r: int
    fits: Dict[str, SystemFit] = field(default_factory=dict)
    panel_rmse: float = 0.0
    pc_share_percent: float = 0.0
    shock_correlations: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name, value in self.shock_correlations.items():
            if not (-1.0 <= value <= 1.0):
                raise ValueError(f"Correlation for {name} outside [-1, 1]")


@dataclass(frozen=True)
class ReliabilityReport:
    rows: List[ReliabilityRow]

    def to_frame(self) -> pd.DataFrame:
        """One row per factor count; RMSE_<shock> and Explained_<shock> per identified system."""
        records = []
        for row in self.rows:
            record: Dict[str, float] = {"r": row.r}
            for name, fit in row.fits.items():
                record[f"RMSE_{name}"] = fit.rmse
                record[f"Explained_{name}"] = fit.explained_percent
            for name, value in row.shock_correlations.items():
                record[f"corr_{name}"] = value
            record["panel_RMSE"] = row.panel_rmse
            record["PC_share"] = row.pc_share_percent
            records.append(record)
        return pd.DataFrame(records)
