"""
Narrative tax-rate construction and Granger exogeneity tests.
"""

import io
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats
from statsmodels.regression.linear_model import OLS

from ..errors import NarrativeError
from ..logger import get_logger
from ..models.narrative_models import GrangerResult, NarrativeEvent, NarrativeTaxSeries, TaxType
from .panel import CsvSource, parse_quarter

logger = get_logger("Narrative")

EVENT_COLUMNS = ["quarter", "tax_type", "liability_change", "base_prev", "act_label", "exogenous"]
_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}
_EXACT_FIT = 1e-12


def _parse_flag(value: str, row: int) -> bool:
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise NarrativeError(f"Row {row}: exogenous flag '{value}' is not a boolean")


def load_narrative_events(csv_source: CsvSource) -> List[NarrativeEvent]:
    """Read the events CSV (quarter, tax_type, liability_change, base_prev, act_label, exogenous)."""
    if isinstance(csv_source, bytes):
        csv_source = io.BytesIO(csv_source)
    try:
        frame = pd.read_csv(csv_source, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise NarrativeError(f"Unreadable narrative events file: {exc}") from exc
    frame.columns = [c.strip().lower() for c in frame.columns]
    missing = [c for c in EVENT_COLUMNS if c not in frame.columns]
    if missing:
        raise NarrativeError(f"Narrative events file lacks columns {missing}")

    events = []
    for i, row in enumerate(frame.itertuples(index=False), start=2):
        try:
            tax_type = TaxType(row.tax_type.strip().upper())
        except ValueError:
            raise NarrativeError(f"Row {i}: tax type '{row.tax_type}' is neither PIT nor CIT") from None
        try:
            liability = float(row.liability_change)
            base = float(row.base_prev)
        except ValueError:
            raise NarrativeError(f"Row {i}: liability change and base must be numeric") from None
        try:
            events.append(NarrativeEvent(
                quarter=parse_quarter(row.quarter),
                tax_type=tax_type,
                liability_change=liability,
                base_prev=base,
                act_label=row.act_label.strip(),
                exogenous=_parse_flag(row.exogenous, i),
            ))
        except ValueError as exc:
            raise NarrativeError(f"Row {i}: {exc}") from exc
    logger.info(f"Loaded {len(events)} narrative tax events", "narrative")
    return events


def split_liability_by_revenue_share(total: float, pit_revenue: float, cit_revenue: float) -> Tuple[float, float]:
    """Allocate a combined liability change to PIT and CIT by revenue shares."""
    if pit_revenue < 0 or cit_revenue < 0 or pit_revenue + cit_revenue <= 0:
        raise NarrativeError("Revenue shares need nonnegative revenues with a positive total")
    pit_share = pit_revenue / (pit_revenue + cit_revenue)
    return total * pit_share, total * (1.0 - pit_share)


def compute_narrative_rates(
    events: Iterable[NarrativeEvent],
    grid: pd.PeriodIndex,
    exogenous_only: bool = True,
) -> NarrativeTaxSeries:
    """
    Percent rate 100 * liability / base at each event quarter, summed over
    same-type events in a quarter, zero elsewhere.
    """
    positions = {period: i for i, period in enumerate(grid)}
    rates = {TaxType.PIT: np.zeros(len(grid)), TaxType.CIT: np.zeros(len(grid))}
    for event in events:
        if not event.base_prev > 0:
            raise NarrativeError(f"Event '{event.act_label}' has a nonpositive base")
        if event.quarter not in positions:
            raise NarrativeError(f"Event '{event.act_label}' at {event.quarter} lies outside the date grid")
        if exogenous_only and not event.exogenous:
            continue
        rates[event.tax_type][positions[event.quarter]] += event.rate
    return NarrativeTaxSeries(dates=grid, pit_rate=rates[TaxType.PIT], cit_rate=rates[TaxType.CIT])


def events_within(events: Iterable[NarrativeEvent], grid: pd.PeriodIndex) -> List[NarrativeEvent]:
    """Keep events dated on the grid, logging the ones that fall outside."""
    inside = set(grid)
    kept = []
    for event in events:
        if event.quarter in inside:
            kept.append(event)
        else:
            logger.warning(f"Dropped event '{event.act_label}' at {event.quarter}: outside sample", "narrative")
    return kept


def _lag_matrix(x: np.ndarray, lags: int) -> np.ndarray:
    """Columns x_{t-1}..x_{t-lags} for t = lags..T-1."""
    return np.column_stack([x[lags - k:len(x) - k] for k in range(1, lags + 1)])


def _quarter_dummies(dates: pd.PeriodIndex) -> np.ndarray:
    quarters = np.asarray(dates.quarter)
    return np.column_stack([(quarters == q).astype(float) for q in (2, 3, 4)])


def granger_exogeneity_test(
    tax: np.ndarray,
    predictor: np.ndarray,
    lags: int,
    predictor_id: str = "x",
    target_id: str = "tax",
    dates: Optional[pd.PeriodIndex] = None,
    quarter_dummies: bool = False,
) -> GrangerResult:
    """
    F test of the predictor's lags in tax_t = c + sum psi_k x_{t-k} + sum phi_k tax_{t-k} + e_t.

    The time effect is an intercept (plus optional quarter dummies). Predictor
    lags already in the span of the restricted regressors add nothing and
    give F = 0.
    """
    y_full = np.asarray(tax, dtype=float)
    x_full = np.asarray(predictor, dtype=float)
    if lags < 1:
        raise NarrativeError("Granger test needs at least one lag")
    if len(y_full) != len(x_full):
        raise NarrativeError("Tax and predictor series must share a grid")
    T = len(y_full)
    if T <= 2 * lags + 2:
        raise NarrativeError(f"Granger test with {lags} lags needs more than {2 * lags + 2} observations")
    if not (np.all(np.isfinite(y_full)) and np.all(np.isfinite(x_full))):
        raise NarrativeError("Granger test needs finite series")

    y = y_full[lags:]
    restricted = np.column_stack([np.ones(T - lags), _lag_matrix(y_full, lags)])
    if quarter_dummies:
        if dates is None:
            raise NarrativeError("Quarter dummies need the date grid")
        restricted = np.column_stack([restricted, _quarter_dummies(dates[lags:])])
    unrestricted = np.column_stack([restricted, _lag_matrix(x_full, lags)])

    if np.linalg.matrix_rank(restricted) < restricted.shape[1]:
        raise NarrativeError(f"Restricted regressors for {target_id} are perfectly collinear")
    fit_r = OLS(y, restricted).fit()
    fit_u = OLS(y, unrestricted).fit()

    df_num = int(round(fit_r.df_resid - fit_u.df_resid))
    df_den = int(round(fit_u.df_resid))
    if df_den <= 0:
        raise NarrativeError("No residual degrees of freedom left in the unrestricted regression")
    # Exact unrestricted fit: infinite F unless the restricted fit is exact too.
    tol = _EXACT_FIT * max(float(np.sum((y - y.mean()) ** 2)), np.finfo(float).tiny)
    if df_num == 0 or fit_r.ssr - fit_u.ssr <= tol:
        f_stat, p_value = 0.0, 1.0
    elif fit_u.ssr <= tol:
        f_stat, p_value = np.inf, 0.0
    else:
        f_stat = max(((fit_r.ssr - fit_u.ssr) / df_num) / (fit_u.ssr / df_den), 0.0)
        p_value = float(stats.f.sf(f_stat, df_num, df_den))
    return GrangerResult(
        predictor_id=predictor_id,
        lags=lags,
        f_stat=float(f_stat),
        p_value=p_value,
        target_id=target_id,
        df_num=df_num,
        df_den=df_den,
    )


def granger_battery(
    targets: Dict[str, np.ndarray],
    predictors: Dict[str, np.ndarray],
    lags: Sequence[int] = (4, 8, 12),
    workers: int = 1,
    dates: Optional[pd.PeriodIndex] = None,
    quarter_dummies: bool = False,
) -> List[GrangerResult]:
    """Every (target, predictor, lag) test; targets with too few observations are skipped."""
    jobs = [(t, p, k) for t in targets for p in predictors for k in lags]

    def run(job):
        target_id, predictor_id, k = job
        try:
            return granger_exogeneity_test(
                targets[target_id], predictors[predictor_id], k,
                predictor_id=predictor_id, target_id=target_id,
                dates=dates, quarter_dummies=quarter_dummies,
            )
        except NarrativeError as exc:
            logger.warning(f"Granger {predictor_id} -> {target_id} ({k} lags) skipped: {exc}", "narrative")
            return None

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        results = list(pool.map(run, jobs))
    return [r for r in results if r is not None]


def granger_table(results: List[GrangerResult], lags: int, column_order: Sequence[str]) -> pd.DataFrame:
    """
    Predictor rows by target columns of 'F (p)' cells for one lag length,
    mirroring the exogeneity table layout.
    """
    chosen = [r for r in results if r.lags == lags]
    predictors = list(dict.fromkeys(r.predictor_id for r in chosen))
    table = pd.DataFrame(index=pd.Index(predictors, name="Predictor"), columns=list(column_order), dtype=object)
    for r in chosen:
        if r.target_id in table.columns:
            table.loc[r.predictor_id, r.target_id] = f"{r.f_stat:.2f} ({r.p_value:.2f})"
    return table.fillna("-")


def write_events_csv(events: List[NarrativeEvent], path: Union[str, Path]) -> Path:
    path = Path(path)
    frame = pd.DataFrame([e.to_dict() for e in events], columns=EVENT_COLUMNS)
    frame["quarter"] = [f"{e.quarter.year}-Q{e.quarter.quarter}" for e in events]
    frame["exogenous"] = frame["exogenous"].map({True: "true", False: "false"})
    frame.to_csv(path, index=False)
    return path
