"""
Principal-component factor estimation, factor-count selection and the factor
VAR(1) transition.
"""

from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from ..errors import FactorError
from ..logger import get_logger
from ..models.factor_models import FactorModel, FactorTransition, ICResult
from ..models.panel_models import TimeSeriesPanel

logger = get_logger("Factors")

_SINGULAR_TOL = 1e-12


def _require_standardized(panel: TimeSeriesPanel) -> np.ndarray:
    if not panel.standardized:
        raise FactorError("Factor estimation requires a standardized panel")
    return panel.values


def _principal_directions(X: np.ndarray, r: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Top-r right singular vectors of X and the matching eigenvalues of X'X,
    decomposing whichever of X'X (N x N) and XX' (T x T) is smaller.
    """
    T, N = X.shape
    if N <= T:
        evals, evecs = linalg.eigh(X.T @ X, subset_by_index=[N - r, N - 1])
        order = np.argsort(evals)[::-1]
        evals, V = evals[order], evecs[:, order]
    else:
        evals, evecs = linalg.eigh(X @ X.T, subset_by_index=[T - r, T - 1])
        order = np.argsort(evals)[::-1]
        evals, U = evals[order], evecs[:, order]
        # zero-eigenvalue directions are left as zero columns; callers check singularity
        scale = np.sqrt(np.clip(evals, 0.0, None))
        V = np.divide(X.T @ U, scale, out=np.zeros((N, r)), where=scale > 0)
    return np.clip(evals, 0.0, None), V


def _sign_normalize(V: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive."""
    pivots = V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])]
    return V * np.where(pivots < 0, -1.0, 1.0)


def estimate_factors(panel: TimeSeriesPanel, r: int) -> FactorModel:
    """
    Principal-component factors minimizing the panel reconstruction error
    subject to loadings'loadings / N = I.
    """
    X = _require_standardized(panel)
    T, N = X.shape
    if not (1 <= r <= min(N, T)):
        raise FactorError(f"Number of factors r={r} must lie in 1..{min(N, T)}")

    evals, V = _principal_directions(X, r)
    if evals[-1] <= _SINGULAR_TOL * max(evals[0], 1.0):
        raise FactorError(
            f"Sample covariance is numerically singular at factor {r}: "
            f"eigenvalue {evals[-1]:.3e}",
            eigenvalues=evals,
        )
    V = _sign_normalize(V)
    loadings = np.sqrt(N) * V
    factors = X @ loadings / N

    total = float(np.sum(X * X))
    explained = evals / total
    residual = X - factors @ loadings.T
    model = FactorModel(
        loadings=loadings,
        factors=factors,
        eigenvalues=evals / (T - 1),
        explained=explained,
        cumulative=np.cumsum(explained),
        series_ids=panel.ids,
        ssr=float(np.sum(residual * residual)),
    )
    logger.info(
        f"Estimated {r} factors; cumulative share {model.cumulative[-1]:.3f}", "factors"
    )
    return model


def select_num_factors(panel: TimeSeriesPanel, r_max: int) -> ICResult:
    """
    Information criteria ICR1/ICR2 for r = 1..r_max.

    The fit term is ln(SSR(r) / NT); SSR(r) follows from the eigenvalues of
    X'X, so one decomposition serves every r. Ties resolve to the smaller r.
    """
    X = _require_standardized(panel)
    T, N = X.shape
    if not (1 <= r_max <= min(N, T)):
        raise FactorError(f"r_max={r_max} must lie in 1..{min(N, T)}")

    evals, _ = _principal_directions(X, r_max)
    total = float(np.sum(X * X))
    ssr = np.clip(total - np.cumsum(evals), 0.0, None)
    # roundoff residue of an exact fit counts as zero
    ssr[ssr <= 1e-12 * total] = 0.0
    ranks = np.arange(1, r_max + 1)
    NT, NT1 = N * T, N + T
    with np.errstate(divide="ignore"):
        fit = np.log(ssr / NT)
    icr1 = fit + ranks * (NT1 / NT) * np.log(NT / NT1)
    icr2 = fit + ranks * (NT1 / NT) * np.log(min(N, T))

    result = ICResult(
        r_max=r_max,
        icr1=icr1,
        icr2=icr2,
        r_hat_icr1=int(np.argmin(icr1)) + 1,
        r_hat_icr2=int(np.argmin(icr2)) + 1,
        ssr=ssr,
    )
    logger.info(
        f"Information criteria select r={result.r_hat_icr1} (ICR1) and r={result.r_hat_icr2} (ICR2)",
        "factors",
    )
    return result


def idiosyncratic_cov(panel: TimeSeriesPanel, model: FactorModel) -> np.ndarray:
    """Diagonal of the idiosyncratic residual covariance, 1/T denominator."""
    X = panel.values
    if model.r < 1:
        raise FactorError("At least one factor is required")
    if model.loadings.shape[0] != X.shape[1] or model.factors.shape[0] != X.shape[0]:
        raise FactorError(
            f"Model dimensions {model.factors.shape[0]}x{model.loadings.shape[0]} "
            f"do not match panel {X.shape[0]}x{X.shape[1]}"
        )
    resid = X - model.common_component()
    return np.mean(resid * resid, axis=0)


def reconstruction_rmse(panel: TimeSeriesPanel, model: FactorModel) -> float:
    """Root mean squared error of the factor reconstruction of the panel."""
    return float(np.sqrt(np.mean(idiosyncratic_cov(panel, model))))


def fit_factor_transition(model: FactorModel, diagonal: bool = False) -> FactorTransition:
    """
    OLS of F_t on F_{t-1} (no intercept; factors of a standardized panel have
    mean zero). With diagonal=True each factor follows its own AR(1).
    """
    F = model.factors
    T, r = F.shape
    if T < r + 2:
        raise FactorError(f"Factor VAR(1) needs T >= r + 2 (T={T}, r={r})")
    Y, Z = F[1:], F[:-1]
    if np.linalg.matrix_rank(Z) < r:
        raise FactorError("Lagged factor matrix is rank deficient")

    if diagonal:
        coef = np.sum(Z * Y, axis=0) / np.sum(Z * Z, axis=0)
        phi = np.diag(coef)
    else:
        phi = np.linalg.lstsq(Z, Y, rcond=None)[0].T
    resid = Y - Z @ phi.T
    dof = max(T - 1 - (1 if diagonal else r), 1)
    resid_cov = resid.T @ resid / (T - 1)

    ztz_inv = np.linalg.inv(Z.T @ Z)
    sigma2 = np.sum(resid * resid, axis=0) / dof
    if diagonal:
        se = np.diag(np.sqrt(sigma2 / np.diag(Z.T @ Z)))
    else:
        se = np.sqrt(np.outer(sigma2, np.diag(ztz_inv)))
    return FactorTransition(phi=phi, resid_cov=resid_cov, std_errors=se, diagonal=diagonal)


def variance_rule_factors(model_or_eigs, n_series: Optional[int] = None, threshold: float = 0.8) -> Dict[str, int]:
    """
    Kaiser count (correlation-matrix eigenvalues above one) and the smallest
    r whose cumulative explained share reaches the threshold.
    """
    if isinstance(model_or_eigs, FactorModel):
        eigenvalues, cumulative = model_or_eigs.eigenvalues, model_or_eigs.cumulative
    else:
        eigenvalues = np.asarray(model_or_eigs, dtype=float)
        if n_series is None:
            raise FactorError("n_series is required when passing bare eigenvalues")
        cumulative = np.cumsum(eigenvalues) / n_series
    reached = np.where(cumulative >= threshold)[0]
    return {
        "kaiser": int(np.sum(eigenvalues > 1.0)),
        "variance_threshold": int(reached[0]) + 1 if len(reached) else len(cumulative),
    }


def pc_importance_table(model: FactorModel) -> pd.DataFrame:
    """Standard deviation, eigenvalue and explained-variance rows per component."""
    columns = [f"PC{k + 1}" for k in range(model.r)]
    return pd.DataFrame(
        [
            np.sqrt(model.eigenvalues),
            model.eigenvalues,
            model.explained,
            model.cumulative,
        ],
        index=["Std dev", "Eigenvalue", "Proportion of variance", "Cumulative proportion"],
        columns=columns,
    )


def factor_frame(panel: TimeSeriesPanel, model: FactorModel) -> pd.DataFrame:
    return pd.DataFrame(
        model.factors,
        index=pd.Index([str(d) for d in panel.dates], name="date"),
        columns=model.factor_ids,
    )


def loadings_frame(model: FactorModel) -> pd.DataFrame:
    return pd.DataFrame(
        model.loadings,
        index=pd.Index(model.series_ids, name="series"),
        columns=model.factor_ids,
    )


def ic_frame(ic: ICResult) -> pd.DataFrame:
    return pd.DataFrame({"r": np.arange(1, ic.r_max + 1), "ICR1": ic.icr1, "ICR2": ic.icr2})
