"""
Data models for principal-component factors and their smoothing.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np


@dataclass(frozen=True)
class FactorModel:
    """
    Loadings and factor paths normalized so that loadings'loadings / N = I.

    Factor scores are X @ loadings / N, so their sample second moment equals
    eigenvalue_k / N for factor k rather than the identity.
    """
    loadings: np.ndarray
    factors: np.ndarray
    eigenvalues: np.ndarray
    explained: np.ndarray
    cumulative: np.ndarray
    series_ids: List[str]
    ssr: float = 0.0

    def __post_init__(self):
        if self.loadings.ndim != 2 or self.factors.ndim != 2:
            raise ValueError("Loadings and factors must be matrices")
        if self.loadings.shape[1] < 1:
            raise ValueError("A factor model needs at least one factor")
        if self.loadings.shape[1] != self.factors.shape[1]:
            raise ValueError("Loadings and factors disagree on the number of factors")
        if len(self.series_ids) != self.loadings.shape[0]:
            raise ValueError("One series id is required per loadings row")
        if np.any(np.diff(self.eigenvalues) > 1e-12 * max(1.0, float(self.eigenvalues[0]))):
            raise ValueError("Eigenvalues must be sorted in descending order")
        if np.any(np.diff(self.cumulative) < -1e-12) or self.cumulative[-1] > 1 + 1e-10:
            raise ValueError("Cumulative shares must be nondecreasing and at most one")

    @property
    def r(self) -> int:
        return self.loadings.shape[1]

    @property
    def factor_ids(self) -> List[str]:
        return [f"F{k + 1}" for k in range(self.r)]

    def common_component(self) -> np.ndarray:
        return self.factors @ self.loadings.T

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "eigenvalues": self.eigenvalues.tolist(),
            "explained": self.explained.tolist(),
            "cumulative": self.cumulative.tolist(),
            "ssr": self.ssr,
        }


@dataclass(frozen=True)
class ICResult:
    """Information criteria for r = 1..r_max."""
    r_max: int
    icr1: np.ndarray
    icr2: np.ndarray
    r_hat_icr1: int
    r_hat_icr2: int
    ssr: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.icr1) != self.r_max or len(self.icr2) != self.r_max:
            raise ValueError("One criterion value is required per candidate r")
        if not (1 <= self.r_hat_icr1 <= self.r_max and 1 <= self.r_hat_icr2 <= self.r_max):
            raise ValueError("Selected factor counts must lie in 1..r_max")

    def to_dict(self) -> dict:
        return {
            "r_max": self.r_max,
            "icr1": self.icr1.tolist(),
            "icr2": self.icr2.tolist(),
            "r_hat_icr1": self.r_hat_icr1,
            "r_hat_icr2": self.r_hat_icr2,
        }


@dataclass(frozen=True)
class FactorTransition:
    """VAR(1) transition of the factors."""
    phi: np.ndarray
    resid_cov: np.ndarray
    std_errors: np.ndarray
    diagonal: bool = False

    def to_dict(self) -> dict:
        return {
            "phi": self.phi.tolist(),
            "resid_cov": self.resid_cov.tolist(),
            "std_errors": self.std_errors.tolist(),
            "diagonal": self.diagonal,
        }


@dataclass(frozen=True)
class TrendCycleDecomposition:
    """Smoothed trend, slope and cycle of one factor."""
    trend: np.ndarray
    cycle: np.ndarray
    slope: np.ndarray
    sigma2_cycle: float
    sigma2_omega: float
    loglik: float
    n_loglik: int
    constrained: bool
    iterations: int = 0

    def __post_init__(self):
        if self.sigma2_cycle < 0 or self.sigma2_omega < 0:
            raise ValueError("Variances must be nonnegative")
        if not (len(self.trend) == len(self.cycle) == len(self.slope)):
            raise ValueError("Trend, cycle and slope must have equal length")

    @property
    def q(self) -> float:
        """Signal-to-noise ratio sigma2_cycle / sigma2_omega."""
        return self.sigma2_cycle / self.sigma2_omega

    def to_dict(self) -> dict:
        return {
            "sigma2_cycle": self.sigma2_cycle,
            "sigma2_omega": self.sigma2_omega,
            "q": self.q,
            "loglik": self.loglik,
            "n_loglik": self.n_loglik,
            "constrained": self.constrained,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class LrTestResult:
    stat: float
    dof: int
    p_value: float

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError("p-value must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {"stat": self.stat, "dof": self.dof, "p_value": self.p_value}


@dataclass(frozen=True)
class FactorSmoothing:
    """Unconstrained and HP-constrained fits of one factor with their LR test."""
    factor_id: str
    unconstrained: TrendCycleDecomposition
    constrained: TrendCycleDecomposition
    lr: LrTestResult

    def to_dict(self) -> dict:
        return {
            "factor_id": self.factor_id,
            "unconstrained": self.unconstrained.to_dict(),
            "constrained": self.constrained.to_dict(),
            "lr": self.lr.to_dict(),
        }
