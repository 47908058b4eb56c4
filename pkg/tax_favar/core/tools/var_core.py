"""
Reduced-form VAR estimation, Cholesky factorization and moving-average
(impulse-response) coefficients.
"""

import json
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from ..errors import VarError
from ..logger import get_logger
from ..models.var_models import VarModel

logger = get_logger("VAR")

PD_TOLERANCE = 1e-10


def lag_design(data: np.ndarray, p: int) -> np.ndarray:
    """Rows [1, y_{t-1}', ..., y_{t-p}'] for t = p..T-1."""
    T = data.shape[0]
    lags = [data[p - j:T - j] for j in range(1, p + 1)]
    return np.column_stack([np.ones(T - p)] + lags)


def cholesky_factor(sigma: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L' = sigma and a positive diagonal."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise VarError("Covariance must be a square matrix")
    if not np.allclose(sigma, sigma.T, atol=PD_TOLERANCE):
        raise VarError("Covariance must be symmetric")
    smallest = float(np.linalg.eigvalsh(sigma).min())
    if smallest <= PD_TOLERANCE:
        raise VarError(
            f"Covariance is not positive definite (smallest eigenvalue {smallest:.3e})",
            smallest_eigenvalue=smallest,
        )
    return np.linalg.cholesky(0.5 * (sigma + sigma.T))


def fit_var(
    data: np.ndarray,
    p: int,
    var_ids: Optional[Sequence[str]] = None,
    exog: Optional[np.ndarray] = None,
    exog_ids: Optional[Sequence[str]] = None,
) -> VarModel:
    """
    Equation-by-equation OLS of a VAR(p) with intercept.

    exog, if given, enters contemporaneously in every equation.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise VarError("VAR data must be a T x n matrix")
    T, n = data.shape
    if p < 1:
        raise VarError("Lag order must be at least 1")
    if T <= n * p + 1:
        raise VarError(f"VAR({p}) with {n} variables needs T > {n * p + 1} (T={T})")
    if not np.all(np.isfinite(data)):
        raise VarError("VAR data must be finite")

    Z = lag_design(data, p)
    m = 0
    if exog is not None:
        exog = np.asarray(exog, dtype=float).reshape(T, -1)
        m = exog.shape[1]
        Z = np.column_stack([Z, exog[p:]])
    if Z.shape[0] <= Z.shape[1]:
        raise VarError(f"VAR has {Z.shape[1]} regressors but only {Z.shape[0]} usable observations")
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise VarError("VAR regressor matrix is rank deficient")

    Y = data[p:]
    B = np.linalg.lstsq(Z, Y, rcond=None)[0]
    resid = Y - Z @ B
    sigma = resid.T @ resid / (T - p)
    sigma = 0.5 * (sigma + sigma.T)

    coeffs = np.stack([B[1 + j * n:1 + (j + 1) * n].T for j in range(p)])
    ids = list(var_ids) if var_ids is not None else [f"y{i + 1}" for i in range(n)]
    if len(ids) != n:
        raise VarError("One id is required per VAR variable")
    model = VarModel(
        var_ids=ids,
        p=p,
        intercept=B[0],
        coeffs=coeffs,
        residuals=resid,
        sigma_u=sigma,
        chol=cholesky_factor(sigma),
        data=data,
        exog=exog,
        exog_coeffs=B[1 + n * p:].T if m else None,
        exog_ids=list(exog_ids) if exog_ids is not None else [f"x{k + 1}" for k in range(m)],
    )
    radius = model.spectral_radius
    if radius >= 1.0:
        logger.warning(f"VAR companion spectral radius {radius:.4f} >= 1 (not stationary)", "var")
    else:
        logger.debug(f"VAR companion spectral radius {radius:.4f}", "var")
    return model


def reduced_form_irf(model: VarModel, H: int) -> np.ndarray:
    """Psi_0..Psi_H as an (H+1) x n x n array; Psi_h = sum_j A_j Psi_{h-j}."""
    if H < 0:
        raise VarError("Horizon must be nonnegative")
    n, p = model.n, model.p
    psi = np.zeros((H + 1, n, n))
    psi[0] = np.eye(n)
    for h in range(1, H + 1):
        for j in range(1, min(h, p) + 1):
            psi[h] += model.coeffs[j - 1] @ psi[h - j]
    return psi


def exogenous_irf(model: VarModel, exog_index: int, H: int, size: float = 1.0) -> np.ndarray:
    """Dynamic multiplier (H+1) x n of a one-time change of `size` in an exogenous regressor."""
    if model.exog_coeffs is None:
        raise VarError("Model has no exogenous regressors")
    if not (0 <= exog_index < model.exog_coeffs.shape[1]):
        raise VarError(f"Exogenous regressor index {exog_index} out of range")
    impact = model.exog_coeffs[:, exog_index] * size
    return reduced_form_irf(model, H) @ impact


def simulate_var(
    model: VarModel,
    innovations: np.ndarray,
    initial: np.ndarray,
    include_intercept: bool = True,
    exog: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Recursively build y_t = c + sum_j A_j y_{t-j} (+ Gamma x_t) + u_t.

    initial holds the first p rows; the result stacks initial and the
    len(innovations) simulated rows.
    """
    n, p = model.n, model.p
    initial = np.asarray(initial, dtype=float).reshape(p, n)
    steps = innovations.shape[0]
    path = np.zeros((p + steps, n))
    path[:p] = initial
    c = model.intercept if include_intercept else np.zeros(n)
    for t in range(p, p + steps):
        value = c + innovations[t - p]
        for j in range(1, p + 1):
            value = value + model.coeffs[j - 1] @ path[t - j]
        if exog is not None and model.exog_coeffs is not None:
            value = value + model.exog_coeffs @ exog[t]
        path[t] = value
    return path


def save_var_manifest(model: VarModel, path: Union[str, Path]) -> Path:
    """JSON dump of the variable order, lag order, coefficients, sigma and Cholesky factor."""
    path = Path(path)
    path.write_text(json.dumps(model.to_dict(), indent=2, sort_keys=True))
    return path


def var_data_ids(observables: List[str], factor_ids: List[str], tax_ids: List[str], exogenous_taxes: bool) -> List[str]:
    """VAR ordering: observables, then factors, then tax rates when endogenous."""
    return list(observables) + list(factor_ids) + ([] if exogenous_taxes else list(tax_ids))
