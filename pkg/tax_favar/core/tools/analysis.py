"""
Structural responses, bootstrap bands, variance decompositions, loading-based
responses of panel series, Median-Target selection and reliability checks.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import linalg
from statsmodels.regression.linear_model import OLS

from ..errors import AnalysisError, FavarError
from ..logger import get_logger
from ..models.analysis_models import FevdTable, IrfSet, MtResult, ReliabilityReport, ReliabilityRow, SystemFit
from ..models.factor_models import FactorModel
from ..models.panel_models import TimeSeriesPanel
from ..models.var_models import DrawSet, IdentificationMode, ImpulseVector, SignRestrictionSpec, VarModel
from .factors import estimate_factors, reconstruction_rmse
from .identify import identify_tax_shock, orient
from .var_core import exogenous_irf, fit_var, reduced_form_irf, simulate_var

logger = get_logger("Analysis")

MIN_BOOTSTRAP = 100
_ZERO_SD = 1e-12

Impulse = Union[ImpulseVector, np.ndarray]


def _alpha(impulse: Impulse) -> np.ndarray:
    return impulse.alpha if isinstance(impulse, ImpulseVector) else np.asarray(impulse, dtype=float)


def structural_irf(model: VarModel, impulse: Impulse, H: int) -> np.ndarray:
    """(H+1) x n responses Psi_h alpha; the h = 0 row is alpha itself."""
    alpha = _alpha(impulse)
    if alpha.shape != (model.n,):
        raise AnalysisError(f"Impulse vector has shape {alpha.shape}, expected ({model.n},)")
    return reduced_form_irf(model, H) @ alpha


def summarize_draws(
    irfs: np.ndarray,
    var_ids: List[str],
    level: float = 0.90,
    point: Optional[np.ndarray] = None,
) -> IrfSet:
    """Pointwise median and (1-level)/2, 1-(1-level)/2 percentiles over draws."""
    irfs = np.asarray(irfs, dtype=float)
    if irfs.ndim != 3 or irfs.shape[0] < 1:
        raise AnalysisError("Draws must be a nonempty draws x (H+1) x n array")
    if not (0.0 < level < 1.0):
        raise AnalysisError("Band level must lie in (0, 1)")
    tail = (1.0 - level) / 2.0
    lower, median, upper = np.quantile(irfs, [tail, 0.5, 1.0 - tail], axis=0)
    return IrfSet(
        var_ids=list(var_ids),
        draws=irfs,
        median=median,
        lower=np.minimum(lower, median),
        upper=np.maximum(upper, median),
        level=level,
        point=point,
    )


def _pseudo_model(model: VarModel, rng: np.random.Generator) -> VarModel:
    """Refit on pseudo-data rebuilt recursively from resampled residuals."""
    resid = model.residuals
    draws = resid[rng.integers(0, resid.shape[0], size=resid.shape[0])]
    pseudo = simulate_var(model, draws, model.data[:model.p], exog=model.exog)
    return fit_var(pseudo, model.p, model.var_ids, exog=model.exog, exog_ids=model.exog_ids)


def bootstrap_replications(
    model: VarModel,
    respond: Callable[[VarModel, int], np.ndarray],
    B: int,
    seed: int,
    workers: int = 1,
    max_failure_rate: float = 0.1,
) -> np.ndarray:
    """
    Residual-bootstrap replications of a response function.

    Replication b draws from default_rng([seed, b]); failed replications
    (refit or identification errors) are dropped, and too many failures
    raise an AnalysisError.
    """
    if B < MIN_BOOTSTRAP:
        raise AnalysisError(f"Bootstrap needs at least {MIN_BOOTSTRAP} replications (got {B})")

    def replicate(b: int) -> Optional[np.ndarray]:
        rng = np.random.default_rng([seed, b])
        try:
            return respond(_pseudo_model(model, rng), b)
        except FavarError as exc:
            logger.debug(f"Bootstrap replication {b} failed: {exc}", "bootstrap")
            return None

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        results = list(pool.map(replicate, range(B)))
    kept = [r for r in results if r is not None]
    failure_rate = 1.0 - len(kept) / B
    if failure_rate > max_failure_rate or not kept:
        raise AnalysisError(
            f"Bootstrap failure rate {failure_rate:.3f} exceeds {max_failure_rate:.3f}",
            failure_rate=failure_rate,
        )
    if failure_rate > 0:
        logger.warning(f"{B - len(kept)} of {B} bootstrap replications failed", "bootstrap")
    return np.stack(kept)


def bootstrap_bands(
    model: VarModel,
    impulse: ImpulseVector,
    spec: SignRestrictionSpec,
    B: int = 500,
    level: float = 0.90,
    seed: int = 0,
    H: int = 20,
    workers: int = 1,
    reidentify: bool = False,
    reidentify_draws: int = 2000,
    max_failure_rate: float = 0.1,
) -> IrfSet:
    """
    Bands for the structural responses to the benchmark impulse.

    Each replication reuses the benchmark rotation q with its own Cholesky
    factor (oriented as a cut), or with reidentify=True searches the
    penalty minimizer afresh.
    """
    point = spec.shock_size * structural_irf(model, impulse, H)

    def respond(pseudo: VarModel, b: int) -> np.ndarray:
        if reidentify:
            draws = identify_tax_shock(
                pseudo, spec, max_attempts=reidentify_draws, seed=int(np.random.default_rng([seed, b, 1]).integers(2**31)),
                mode=IdentificationMode.PENALTY, H=H,
            )
            return draws.irfs[0]
        q = orient(impulse.q, pseudo.chol, spec.shock_index)
        return spec.shock_size * structural_irf(pseudo, pseudo.chol @ q, H)

    replications = bootstrap_replications(model, respond, B, seed, workers, max_failure_rate)
    logger.info(f"Bootstrap bands for {spec.shock_var} from {len(replications)} replications", "bootstrap")
    return summarize_draws(replications, model.var_ids, level, point=point)


def bootstrap_exogenous_bands(
    model: VarModel,
    exog_index: int,
    B: int = 500,
    level: float = 0.90,
    seed: int = 0,
    H: int = 20,
    size: float = 1.0,
    workers: int = 1,
    max_failure_rate: float = 0.1,
) -> IrfSet:
    """Bands for the dynamic multiplier of an exogenous tax rate."""
    point = exogenous_irf(model, exog_index, H, size)
    replications = bootstrap_replications(
        model, lambda pseudo, b: exogenous_irf(pseudo, exog_index, H, size), B, seed, workers, max_failure_rate
    )
    return summarize_draws(replications, model.var_ids, level, point=point)


def cumulative_irf(
    irf: np.ndarray,
    horizons: Sequence[int],
    include_impact: bool = False,
) -> np.ndarray:
    """
    Cumulative responses through each horizon: sums over h = 1..horizon,
    or h = 0..horizon with include_impact. Rows follow `horizons`.
    """
    irf = np.asarray(irf, dtype=float)
    H = irf.shape[0] - 1
    start = 0 if include_impact else 1
    rows = []
    for horizon in horizons:
        if not (0 <= horizon <= H):
            raise AnalysisError(f"Cumulative horizon {horizon} outside 0..{H}")
        rows.append(irf[start:horizon + 1].sum(axis=0))
    return np.array(rows)


def cumulative_frame(irf_set: IrfSet, horizons: Sequence[int], var_ids: Sequence[str], include_impact: bool = False) -> pd.DataFrame:
    """Variables x horizons table of cumulative point responses."""
    base = irf_set.median if irf_set.point is None else irf_set.point
    sums = cumulative_irf(base, horizons, include_impact)
    frame = pd.DataFrame(sums.T, index=pd.Index(irf_set.var_ids, name="variable"),
                         columns=[str(h) for h in horizons])
    return frame.loc[[v for v in var_ids if v in frame.index]]


def side_by_side(frames: Mapping[str, pd.DataFrame]) -> pd.DataFrame:
    """Join per-shock tables on their rows; columns become "<shock> <column>"."""
    if not frames:
        raise AnalysisError("No tables to combine")
    return pd.concat([f.add_prefix(f"{name} ") for name, f in frames.items()], axis=1)


def fevd(model: VarModel, impulse: Impulse, horizons: Sequence[int]) -> FevdTable:
    """
    Percent of the h-step forecast-error variance due to the unit shock
    alpha, accumulated over s < h.
    """
    alpha = _alpha(impulse)
    if alpha.shape != (model.n,):
        raise AnalysisError(f"Impulse vector has shape {alpha.shape}, expected ({model.n},)")
    if not horizons or min(horizons) < 1:
        raise AnalysisError("FEVD horizons must be at least 1")
    psi = reduced_form_irf(model, max(horizons) - 1)
    shock = np.cumsum((psi @ alpha) ** 2, axis=0)
    total = np.cumsum(np.einsum("hij,jk,hik->hi", psi, model.sigma_u, psi), axis=0)
    idx = np.asarray(horizons) - 1
    if np.any(total[idx] <= 0):
        raise AnalysisError("Forecast-error variance is zero; shares are undefined")
    shares = np.clip(100.0 * shock[idx] / total[idx], 0.0, 100.0)
    return FevdTable(var_ids=list(model.var_ids), horizons=list(horizons), shares=shares.T)


def estimate_observable_loadings(
    panel: TimeSeriesPanel,
    ids: Sequence[str],
    regressors: np.ndarray,
    regressor_ids: Sequence[str],
) -> pd.DataFrame:
    """
    OLS of each panel series on the VAR variables (with intercept); rows are
    series, columns the regressor ids. The intercept is dropped.
    """
    regressors = np.asarray(regressors, dtype=float)
    if regressors.shape[0] != panel.n_obs:
        raise AnalysisError("Regressors and panel must share the date grid")
    design = np.column_stack([np.ones(panel.n_obs), regressors])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise AnalysisError("Loading regressors are perfectly collinear")
    rows = {}
    for series_id in ids:
        try:
            y = panel.column(series_id)
        except KeyError as exc:
            raise AnalysisError(str(exc)) from exc
        rows[series_id] = OLS(y, design).fit().params[1:]
    return pd.DataFrame.from_dict(rows, orient="index", columns=list(regressor_ids))


def observable_irf(loadings_row: np.ndarray, irfs: np.ndarray) -> np.ndarray:
    """Loadings-weighted responses; irfs is (..., H+1, k) over the k regressors."""
    loadings_row = np.asarray(loadings_row, dtype=float)
    irfs = np.asarray(irfs, dtype=float)
    if irfs.shape[-1] != loadings_row.shape[0]:
        raise AnalysisError(
            f"{loadings_row.shape[0]} loadings do not match {irfs.shape[-1]} response columns"
        )
    return irfs @ loadings_row


def observable_irf_set(loadings: pd.DataFrame, irf_set: IrfSet) -> IrfSet:
    """Responses of panel series, with bands from applying loadings draw by draw."""
    columns = [irf_set.var_ids.index(c) for c in loadings.columns]
    L = loadings.to_numpy().T
    draws = irf_set.draws[..., columns] @ L
    point = None if irf_set.point is None else irf_set.point[:, columns] @ L
    return summarize_draws(draws, list(loadings.index), irf_set.level, point=point)


def median_target_select(draws: Union[DrawSet, np.ndarray]) -> MtResult:
    """
    Draw whose responses are closest to the pointwise median, measured by
    the sum of squared gaps standardized by the cross-draw standard
    deviation (population convention). Cells with no cross-draw variation
    are left out.
    """
    irfs = draws.irfs if isinstance(draws, DrawSet) else np.asarray(draws, dtype=float)
    if irfs.ndim != 3 or irfs.shape[0] < 2:
        raise AnalysisError("Median-Target selection needs at least 2 draws")
    median = np.median(irfs, axis=0)
    sd = np.std(irfs, axis=0)
    keep = sd > _ZERO_SD * np.maximum(1.0, np.abs(median))
    z = np.zeros_like(irfs)
    np.divide(irfs - median, sd, out=z, where=keep)
    gaps = np.sum(z * z, axis=(1, 2))
    selected = int(np.argmin(gaps))
    return MtResult(selected_draw=selected, gap=float(gaps[selected]), gaps=gaps)


def structural_shock_series(model: VarModel, impulse: Impulse) -> np.ndarray:
    """Shock path q' L^-1 u_t over the VAR's estimation sample."""
    q = impulse.q if isinstance(impulse, ImpulseVector) else np.asarray(impulse, dtype=float)
    orthogonal = linalg.solve_triangular(model.chol, model.residuals.T, lower=True)
    return q @ orthogonal


def shock_correlation(shock: np.ndarray, narrative: np.ndarray) -> float:
    """
    Correlation of a shock path with the tail of a narrative series of equal
    or greater length; zero when either has no variation.
    """
    shock = np.asarray(shock, dtype=float)
    narrative = np.asarray(narrative, dtype=float)[-len(shock):]
    if np.std(shock) == 0 or np.std(narrative) == 0:
        return 0.0
    return float(np.clip(np.corrcoef(shock, narrative)[0, 1], -1.0, 1.0))


def system_fit(model: VarModel, equations: Optional[Sequence[str]] = None) -> SystemFit:
    """
    In-sample fit of the named VAR equations (all by default): RMSE of the
    residuals and the pooled share of variation explained, in percent.
    """
    ids = list(model.var_ids) if equations is None else list(equations)
    if not ids:
        raise AnalysisError("No equations to evaluate")
    unknown = [v for v in ids if v not in model.var_ids]
    if unknown:
        raise AnalysisError(f"Equations {unknown} are not in the VAR")
    idx = [model.index_of(v) for v in ids]
    actual = model.data[model.p:, idx]
    residuals = model.residuals[:, idx]
    ssr = float(np.sum(residuals ** 2))
    sst = float(np.sum((actual - actual.mean(axis=0)) ** 2))
    if sst <= 0:
        raise AnalysisError(f"Equations {ids} have no variation to explain")
    explained = 100.0 * float(np.clip(1.0 - ssr / sst, 0.0, 1.0))
    return SystemFit(rmse=float(np.sqrt(ssr / residuals.size)), explained_percent=explained)


def reliability_report(
    panel: TimeSeriesPanel,
    r_values: Sequence[int],
    narrative: Mapping[str, np.ndarray],
    system_for: Optional[Callable[[FactorModel], VarModel]] = None,
    shock_series_for: Optional[Callable[[FactorModel, VarModel], Mapping[str, np.ndarray]]] = None,
    shocks: Sequence[str] = ("PIT", "CIT"),
) -> ReliabilityReport:
    """
    Per factor count r, refit the FAVAR with system_for and report, for each
    shock, the fit of its system: every VAR equation except the other
    shocks' tax rates. The panel reconstruction RMSE and the principal
    component share ride along for comparison.

    Shock series are oriented as cuts; correlations are taken against the
    negated series so a positive value means the shock tracks narrative
    tax increases.
    """
    if shock_series_for is not None and system_for is None:
        raise AnalysisError("Shock series need a fitted system per factor count")
    rows = []
    for r in r_values:
        model = estimate_factors(panel, r)
        fits: Dict[str, SystemFit] = {}
        correlations: Dict[str, float] = {}
        if system_for is not None:
            var_r = system_for(model)
            for shock in shocks:
                others = [s for s in shocks if s != shock]
                fits[shock] = system_fit(var_r, [v for v in var_r.var_ids if v not in others])
            if shock_series_for is not None:
                for name, series in shock_series_for(model, var_r).items():
                    if name not in narrative:
                        raise AnalysisError(f"No narrative series for shock {name}")
                    correlations[name] = shock_correlation(-np.asarray(series), narrative[name])
        rows.append(ReliabilityRow(
            r=r,
            fits=fits,
            panel_rmse=reconstruction_rmse(panel, model),
            pc_share_percent=100.0 * float(model.cumulative[-1]),
            shock_correlations=correlations,
        ))
        detail = ", ".join(f"{k} RMSE {v.rmse:.4f} / {v.explained_percent:.1f}%" for k, v in fits.items())
        logger.debug(f"Reliability r={r}: {detail or 'no system fitted'}", "analysis")
    return ReliabilityReport(rows)
