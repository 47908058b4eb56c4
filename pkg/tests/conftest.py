"""
Shared fixtures: synthetic panels, known-DGP VARs and the pipeline fixture.
"""

from pathlib import Path
from typing import Callable, List, Optional

import numpy as np
import pandas as pd
import pytest

from tax_favar.core.models.panel_models import SeriesMeta, TimeSeriesPanel
from tax_favar.core.models.var_models import VarModel
from tax_favar.core.tools.panel import standardize_and_balance
from tax_favar.core.tools.synthetic import write_fixture
from tax_favar.core.tools.var_core import cholesky_factor, fit_var


def build_panel(values, ids: Optional[List[str]] = None, codes: Optional[List[int]] = None,
                start: str = "2000Q1") -> TimeSeriesPanel:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    n = values.shape[1]
    ids = ids or [f"S{j + 1}" for j in range(n)]
    codes = codes or [1] * n
    return TimeSeriesPanel(
        dates=pd.period_range(start, periods=values.shape[0], freq="Q"),
        values=values,
        metas=[SeriesMeta(id=i, transform_code=c) for i, c in zip(ids, codes)],
    )


def make_var_model(coeffs: np.ndarray, sigma: Optional[np.ndarray] = None,
                   var_ids: Optional[List[str]] = None) -> VarModel:
    """A VarModel with exactly the given coefficients (no estimation)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim == 2:
        coeffs = coeffs[None]
    p, n, _ = coeffs.shape
    sigma = np.eye(n) if sigma is None else np.asarray(sigma, dtype=float)
    return VarModel(
        var_ids=var_ids or [f"y{i + 1}" for i in range(n)],
        p=p,
        intercept=np.zeros(n),
        coeffs=coeffs,
        residuals=np.zeros((10, n)),
        sigma_u=sigma,
        chol=cholesky_factor(sigma),
        data=np.zeros((10 + p, n)),
    )


def simulate_var1(A: np.ndarray, T: int, rng: np.random.Generator, chol: Optional[np.ndarray] = None,
                  burn: int = 200) -> np.ndarray:
    n = A.shape[0]
    chol = np.eye(n) if chol is None else chol
    y = np.zeros((T + burn, n))
    for t in range(1, T + burn):
        y[t] = A @ y[t - 1] + chol @ rng.standard_normal(n)
    return y[burn:]


def factor_panel(rng: np.random.Generator, T: int, N: int, r: int, noise: float = 0.5):
    """Standardized panel from r independent AR(1) factors; returns (panel, true factors)."""
    F = np.zeros((T, r))
    for t in range(1, T):
        F[t] = 0.5 * F[t - 1] + rng.standard_normal(r)
    loadings = rng.standard_normal((N, r))
    X = F @ loadings.T + noise * rng.standard_normal((T, N))
    return standardize_and_balance(build_panel(X)), F


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def panel_factory() -> Callable[..., TimeSeriesPanel]:
    return build_panel


@pytest.fixture
def known_var1(rng) -> VarModel:
    A = np.array([[0.5, 0.1], [0.0, 0.3]])
    data = simulate_var1(A, 5000, rng)
    return fit_var(data, 1, ["y1", "y2"])


@pytest.fixture
def fixture_files(tmp_path: Path) -> dict:
    return write_fixture(tmp_path / "fixture")
