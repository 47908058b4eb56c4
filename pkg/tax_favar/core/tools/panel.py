"""
Panel ingestion, stationarity transforms, balancing and standardization.

The CSV layout follows the FRED-QD convention: a header row of series ids,
a row of transformation codes, an optional row of group labels, then one
row per quarter.
"""

import io
import re
from enum import Enum
from pathlib import Path
from typing import IO, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..errors import PanelError
from ..logger import get_logger
from ..models.panel_models import LOG_CODES, TRANSFORM_ORDER, SeriesMeta, TimeSeriesPanel

logger = get_logger("Panel")

CsvSource = Union[str, Path, bytes, IO]

_QUARTER_RE = re.compile(r"^\s*(\d{4})\s*[-:]?\s*Q([1-4])\s*$", re.IGNORECASE)


class BalancePolicy(Enum):
    """How missing cells on the common range are removed."""
    DROP_SERIES = "drop_series"
    DROP_ROWS = "drop_rows"


def parse_quarter(text: str) -> pd.Period:
    """Parse '1959-Q1' (also '1959Q1', '1959:Q1') into a quarterly period."""
    match = _QUARTER_RE.match(str(text))
    if not match:
        raise PanelError(f"Date '{text}' is not an ISO quarter such as 1959-Q1")
    return pd.Period(year=int(match.group(1)), quarter=int(match.group(2)), freq="Q")


def format_quarter(period: pd.Period) -> str:
    return f"{period.year}-Q{period.quarter}"


def _read_raw(source: CsvSource) -> pd.DataFrame:
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    try:
        return pd.read_csv(
            source,
            header=None,
            dtype=str,
            keep_default_na=False,
            na_filter=False,
            skip_blank_lines=True,
        )
    except pd.errors.ParserError as exc:
        raise PanelError(f"Ragged row in panel file: {exc}") from exc
    except pd.errors.EmptyDataError as exc:
        raise PanelError("Panel file is empty") from exc


def load_panel(csv_source: CsvSource) -> TimeSeriesPanel:
    """
    Read a panel CSV into a raw, possibly unbalanced panel.

    Empty cells become NaN (absent), never zero.
    """
    raw = _read_raw(csv_source)
    if raw.isna().any().any():
        bad_row = int(np.where(raw.isna().any(axis=1))[0][0]) + 1
        raise PanelError(f"Ragged row {bad_row}: fewer fields than the header")
    if raw.shape[0] < 3 or raw.shape[1] < 2:
        raise PanelError("Panel file needs a header row, a tcode row and at least one data row")

    header = raw.iloc[0].str.strip()
    if header.iloc[0].lower() != "date":
        raise PanelError("First header cell must be 'date'")
    ids = header.iloc[1:].tolist()
    if any(not i for i in ids):
        raise PanelError("Series ids cannot be empty")
    duplicates = sorted({i for i in ids if ids.count(i) > 1})
    if duplicates:
        raise PanelError(f"Duplicate series ids: {duplicates}", duplicates=duplicates)

    tcode_row = raw.iloc[1].str.strip()
    if tcode_row.iloc[0].lower() != "tcode":
        raise PanelError("Second row must start with 'tcode'")
    codes: List[int] = []
    for series_id, cell in zip(ids, tcode_row.iloc[1:]):
        try:
            value = float(cell)
        except ValueError:
            raise PanelError(f"Transform code '{cell}' of {series_id} is not an integer") from None
        if value != int(value) or int(value) not in TRANSFORM_ORDER:
            raise PanelError(f"Transform code {cell} of {series_id} is outside 1-7")
        codes.append(int(value))

    first_data = 2
    groups = [""] * len(ids)
    if raw.iloc[2, 0].strip().lower() == "group":
        groups = raw.iloc[2, 1:].str.strip().tolist()
        first_data = 3

    body = raw.iloc[first_data:]
    if body.empty:
        raise PanelError("Panel file has no data rows")
    periods = [parse_quarter(cell) for cell in body.iloc[:, 0]]
    dates = pd.PeriodIndex(periods, freq="Q")
    steps = np.diff(dates.asi8)
    if np.any(steps != 1):
        bad = int(np.where(steps != 1)[0][0])
        raise PanelError(
            f"Dates must be consecutive increasing quarters: {dates[bad]} is followed by {dates[bad + 1]}"
        )

    cells = body.iloc[:, 1:].apply(lambda col: col.str.strip())
    numeric = cells.apply(pd.to_numeric, errors="coerce")
    non_numeric = (cells != "") & ~np.isfinite(numeric.to_numpy(dtype=float))
    if non_numeric.to_numpy().any():
        row, col = np.argwhere(non_numeric.to_numpy())[0]
        raise PanelError(
            f"Non-numeric cell '{cells.iat[row, col]}' for {ids[col]} at {dates[row]}"
        )

    metas = [SeriesMeta(id=i, transform_code=c, group=g) for i, c, g in zip(ids, codes, groups)]
    panel = TimeSeriesPanel(dates=dates, values=numeric.to_numpy(dtype=float), metas=metas)
    logger.info(
        f"Loaded panel with {panel.n_series} series over {panel.n_obs} quarters "
        f"({format_quarter(dates[0])} to {format_quarter(dates[-1])})",
        "panel",
    )
    return panel


def _transform_series(series: pd.Series, code: int, series_id: str) -> pd.Series:
    observed = series.dropna()
    if len(observed) <= TRANSFORM_ORDER[code]:
        raise PanelError(f"Series {series_id} is too short for transform code {code}")
    if code in LOG_CODES and (observed <= 0).any():
        raise PanelError(f"Series {series_id} has nonpositive values under log code {code}")

    if code == 1:
        return series
    if code == 2:
        return series.diff()
    if code == 3:
        return series.diff().diff()
    if code == 4:
        return np.log(series)
    if code == 5:
        return np.log(series).diff()
    if code == 6:
        return np.log(series).diff().diff()
    if (observed == 0).any():
        raise PanelError(f"Series {series_id} has zeros under growth-rate code 7")
    return (series / series.shift(1) - 1.0).diff()


def apply_transforms(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    """
    Transform every series to stationarity by its code and truncate all series
    to the common range left after the largest differencing order.
    """
    frame = panel.to_frame()
    transformed = pd.DataFrame(
        {m.id: _transform_series(frame[m.id], m.transform_code, m.id) for m in panel.metas},
        index=frame.index,
    )
    lost = max(TRANSFORM_ORDER[m.transform_code] for m in panel.metas)
    transformed = transformed.iloc[lost:]
    if transformed.empty:
        raise PanelError("No observations remain after transformation")
    values = transformed.to_numpy(dtype=float)
    if np.isinf(values).any():
        raise PanelError("Transformation produced non-finite values")
    logger.debug(f"Transforms dropped {lost} leading quarters", "panel")
    return panel.with_values(values, dates=panel.dates[lost:])


def _balance(panel: TimeSeriesPanel, policy: BalancePolicy) -> TimeSeriesPanel:
    values = panel.values
    missing = np.isnan(values)
    drop_log = list(panel.drop_log)
    if not missing.any():
        return panel

    if policy is BalancePolicy.DROP_SERIES:
        keep = ~missing.any(axis=0)
        for j in np.where(~keep)[0]:
            entry = f"dropped series {panel.metas[j].id}: {int(missing[:, j].sum())} missing quarters"
            drop_log.append(entry)
            logger.warning(entry, "panel")
        if not keep.any():
            raise PanelError("Panel is empty after balancing")
        return panel.with_values(
            values[:, keep], metas=[m for m, k in zip(panel.metas, keep) if k], drop_log=drop_log
        )

    complete = ~missing.any(axis=1)
    if not complete.any():
        raise PanelError("Panel is empty after balancing")
    first = int(np.argmax(complete))
    last = len(complete) - 1 - int(np.argmax(complete[::-1]))
    if not complete[first:last + 1].all():
        gap = panel.dates[first + int(np.argmin(complete[first:last + 1]))]
        raise PanelError(f"Interior missing quarter {gap} cannot be dropped without breaking quarterly spacing")
    for t in list(range(first)) + list(range(last + 1, len(complete))):
        drop_log.append(f"dropped row {format_quarter(panel.dates[t])}")
    logger.warning(f"Dropped {len(complete) - (last - first + 1)} incomplete quarters", "panel")
    return panel.with_values(values[first:last + 1], dates=panel.dates[first:last + 1], drop_log=drop_log)


def standardize_and_balance(
    panel: TimeSeriesPanel,
    policy: Union[BalancePolicy, str] = BalancePolicy.DROP_SERIES,
) -> TimeSeriesPanel:
    """
    Remove missing cells per the balancing policy and scale every column to
    zero mean and unit sample (T - 1) standard deviation.
    """
    balanced = _balance(panel, BalancePolicy(policy))
    values = balanced.values
    if values.shape[0] < 2 or values.shape[1] == 0:
        raise PanelError("Panel is empty after balancing")

    mean = values.mean(axis=0)
    sd = values.std(axis=0, ddof=1)
    flat = sd <= 1e-12 * np.maximum(1.0, np.abs(mean))
    if flat.any():
        names = [balanced.metas[j].id for j in np.where(flat)[0]]
        raise PanelError(f"Zero-variance series cannot be standardized: {names}", series=names)
    standardized = (values - mean) / sd
    return balanced.with_values(standardized, standardized=True)


def prepare_panel(
    panel: TimeSeriesPanel,
    policy: Union[BalancePolicy, str] = BalancePolicy.DROP_SERIES,
) -> TimeSeriesPanel:
    """Transform, balance and standardize a raw panel."""
    return standardize_and_balance(apply_transforms(panel), policy)


def summarize_panel(panel: TimeSeriesPanel, ids: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Mean, standard deviation, maximum and minimum of selected series."""
    chosen = list(ids) if ids is not None else panel.ids
    frame = panel.to_frame()[chosen]
    return pd.DataFrame({
        "Mean": frame.mean(),
        "Std. dev": frame.std(ddof=1),
        "Max": frame.max(),
        "Min": frame.min(),
    }).rename_axis("Variable")


def write_panel_csv(panel: TimeSeriesPanel, path: Union[str, Path]) -> Path:
    """Write a panel in the ingest format (header, tcode and group rows)."""
    path = Path(path)
    header = ["date"] + panel.ids
    rows = [
        header,
        ["tcode"] + [str(m.transform_code) for m in panel.metas],
        ["group"] + [m.group for m in panel.metas],
    ]
    for period, row in zip(panel.dates, panel.values):
        rows.append([format_quarter(period)] + ["" if np.isnan(v) else f"{v:.10g}" for v in row])
    pd.DataFrame(rows).to_csv(path, header=False, index=False)
    return path
