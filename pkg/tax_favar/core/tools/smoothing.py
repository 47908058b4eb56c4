"""
Trend-cycle decomposition of factors with a local-linear-trend state-space
model, estimated by maximum likelihood, and the HP-filter restriction test.

Measurement:  f_t = trend_t + cycle_t,           cycle_t ~ N(0, sigma2_cycle)
Transition:   trend_t = trend_{t-1} + slope_t
              slope_t = slope_{t-1} + omega_t,   omega_t ~ N(0, sigma2_omega)

With sigma2_cycle / sigma2_omega = lambda the smoothed trend is the HP trend.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
from scipy import optimize, sparse, stats
from scipy.sparse.linalg import spsolve

from ..errors import SmoothingError
from ..logger import get_logger
from ..models.factor_models import (
    FactorModel,
    FactorSmoothing,
    LrTestResult,
    TrendCycleDecomposition,
)

logger = get_logger("Smoothing")

DIFFUSE_VARIANCE = 1e7
DIFFUSE_SKIP = 2
HP_LAMBDA_QUARTERLY = 1600.0
LOG_OMEGA_BOUNDS = (-25.0, 10.0)
_LOG_2PI = math.log(2.0 * math.pi)


def _loglik(y: np.ndarray, sigma2_cycle: float, sigma2_omega: float) -> float:
    """
    Prediction-error-decomposition log likelihood summed over t >= DIFFUSE_SKIP.

    Scalar recursion over the 2-state system; the optimizer calls this many
    times so it avoids small-matrix numpy overhead.
    """
    h, s = sigma2_cycle, sigma2_omega
    a1 = a2 = 0.0
    p11, p12, p22 = DIFFUSE_VARIANCE, 0.0, DIFFUSE_VARIANCE
    total = 0.0
    for t, obs in enumerate(y):
        v = obs - a1
        f = p11 + h
        if t >= DIFFUSE_SKIP:
            total -= 0.5 * (_LOG_2PI + math.log(f) + v * v / f)
        k1, k2 = p11 / f, p12 / f
        a1 += k1 * v
        a2 += k2 * v
        f11 = p11 * h / f
        f12 = p12 * h / f
        f22 = p22 - p12 * p12 / f
        a1 += a2
        p11 = f11 + 2.0 * f12 + f22 + s
        p12 = f12 + f22 + s
        p22 = f22 + s
    return total


def _filter_and_smooth(y: np.ndarray, sigma2_cycle: float, sigma2_omega: float) -> np.ndarray:
    """Kalman filter followed by the fixed-interval (RTS) smoother; returns T x 2 states."""
    n = len(y)
    transition = np.array([[1.0, 1.0], [0.0, 1.0]])
    q = sigma2_omega * np.ones((2, 2))
    a_pred = np.zeros((n, 2))
    p_pred = np.zeros((n, 2, 2))
    a_filt = np.zeros((n, 2))
    p_filt = np.zeros((n, 2, 2))

    a = np.zeros(2)
    p = DIFFUSE_VARIANCE * np.eye(2)
    for t in range(n):
        a_pred[t], p_pred[t] = a, p
        v = y[t] - a[0]
        f = p[0, 0] + sigma2_cycle
        gain = p[:, 0] / f
        a_filt[t] = a + gain * v
        pf = p - np.outer(p[:, 0], p[0, :]) / f
        p_filt[t] = 0.5 * (pf + pf.T)
        a = transition @ a_filt[t]
        p = transition @ p_filt[t] @ transition.T + q

    smoothed = np.zeros((n, 2))
    smoothed[-1] = a_filt[-1]
    for t in range(n - 2, -1, -1):
        gain_t = np.linalg.solve(p_pred[t + 1], transition @ p_filt[t]).T
        smoothed[t] = a_filt[t] + gain_t @ (smoothed[t + 1] - a_pred[t + 1])
    return smoothed


def _decomposition(
    y: np.ndarray,
    sigma2_cycle: float,
    sigma2_omega: float,
    loglik_sum: float,
    constrained: bool,
    iterations: int = 0,
) -> TrendCycleDecomposition:
    states = _filter_and_smooth(y, sigma2_cycle, sigma2_omega)
    trend = states[:, 0]
    n_loglik = len(y) - DIFFUSE_SKIP
    return TrendCycleDecomposition(
        trend=trend,
        cycle=y - trend,
        slope=states[:, 1],
        sigma2_cycle=sigma2_cycle,
        sigma2_omega=sigma2_omega,
        loglik=loglik_sum / n_loglik,
        n_loglik=n_loglik,
        constrained=constrained,
        iterations=iterations,
    )


def fit_local_linear_trend(
    factor: np.ndarray,
    constrained: bool,
    hp_lambda: float = HP_LAMBDA_QUARTERLY,
) -> TrendCycleDecomposition:
    """
    Fit the local-linear-trend model with sigma2_cycle fixed at 1.

    Constrained: sigma2_omega = 1 / hp_lambda (the HP restriction).
    Unconstrained: sigma2_omega maximizes the likelihood over log sigma2_omega
    by a grid scan followed by a bounded Brent search.
    """
    y = np.asarray(factor, dtype=float)
    if y.ndim != 1 or len(y) < 10:
        raise SmoothingError("Trend-cycle fit needs a series of length >= 10")
    if not np.all(np.isfinite(y)):
        raise SmoothingError("Trend-cycle fit needs finite input")

    hp_omega = 1.0 / hp_lambda
    if constrained:
        return _decomposition(y, 1.0, hp_omega, _loglik(y, 1.0, hp_omega), constrained=True)

    def negative(theta: float) -> float:
        value = _loglik(y, 1.0, math.exp(theta))
        return -value if np.isfinite(value) else np.inf

    grid = np.arange(LOG_OMEGA_BOUNDS[0], LOG_OMEGA_BOUNDS[1] + 0.5, 1.0)
    values = np.array([negative(theta) for theta in grid])
    if not np.isfinite(values).any():
        raise SmoothingError("Likelihood is not finite anywhere on the search grid")
    best = int(np.argmin(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    result = optimize.minimize_scalar(negative, bounds=(lo, hi), method="bounded",
                                      options={"xatol": 1e-8, "maxiter": 500})
    if not result.success:
        step = 1e-5
        gradient = (negative(result.x + step) - negative(result.x - step)) / (2 * step)
        raise SmoothingError(
            f"Likelihood maximization did not converge after {result.nfev} evaluations "
            f"(last gradient norm {abs(gradient):.3e})",
            iterations=int(result.nfev),
            gradient_norm=float(abs(gradient)),
        )

    candidates = [(result.fun, result.x), (values[best], grid[best]), (negative(math.log(hp_omega)), math.log(hp_omega))]
    fun, theta = min(candidates, key=lambda item: item[0])
    logger.debug(f"MLE log sigma2_omega={theta:.4f} after {result.nfev} evaluations", "smoothing")
    return _decomposition(y, 1.0, math.exp(theta), -fun, constrained=False,
                          iterations=int(result.nfev) + len(grid))


def lr_test(loglik_unconstrained: float, loglik_constrained: float, T: int, dof: int = 2) -> LrTestResult:
    """
    Likelihood-ratio test of the HP restriction with per-observation average
    log likelihoods scaled back by T.
    """
    if T < 1:
        raise SmoothingError("LR test needs T >= 1")
    if loglik_unconstrained < loglik_constrained - 1e-8:
        raise SmoothingError(
            "Unconstrained log likelihood is below the constrained one; arguments look swapped"
        )
    stat = max(-2.0 * T * (loglik_constrained - loglik_unconstrained), 0.0)
    return LrTestResult(stat=stat, dof=dof, p_value=float(stats.chi2.sf(stat, dof)))


def hp_filter_oracle(series: np.ndarray, lamb: float) -> np.ndarray:
    """HP trend from the direct sparse solve of (I + lambda K'K) trend = series."""
    x = np.asarray(series, dtype=float)
    if lamb <= 0:
        raise SmoothingError("HP smoothing parameter must be positive")
    nobs = len(x)
    if nobs < 4:
        raise SmoothingError("HP filter needs at least 4 observations")
    eye = sparse.eye(nobs, nobs, format="csc")
    offsets = np.array([0, 1, 2])
    data = np.repeat([[1.0], [-2.0], [1.0]], nobs, axis=1)
    K = sparse.dia_matrix((data, offsets), shape=(nobs - 2, nobs))
    return spsolve((eye + lamb * K.T.dot(K)).tocsc(), x)


def smooth_factor(factor_id: str, series: np.ndarray, hp_lambda: float = HP_LAMBDA_QUARTERLY) -> FactorSmoothing:
    unconstrained = fit_local_linear_trend(series, constrained=False, hp_lambda=hp_lambda)
    constrained = fit_local_linear_trend(series, constrained=True, hp_lambda=hp_lambda)
    lr = lr_test(unconstrained.loglik, constrained.loglik, unconstrained.n_loglik)
    logger.info(
        f"{factor_id}: q={unconstrained.q:.4g}, lnL {unconstrained.loglik:.3f} vs "
        f"{constrained.loglik:.3f} (HP), LR={lr.stat:.2f}",
        "smoothing",
    )
    return FactorSmoothing(factor_id, unconstrained, constrained, lr)


def smooth_factors(
    model: FactorModel,
    hp_lambda: float = HP_LAMBDA_QUARTERLY,
    workers: int = 1,
) -> Tuple[List[FactorSmoothing], LrTestResult]:
    """
    Fit every factor independently; returns the per-factor fits and the LR
    test pooled over factors.
    """
    jobs = list(zip(model.factor_ids, model.factors.T))
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        fits = list(pool.map(lambda job: smooth_factor(job[0], job[1], hp_lambda), jobs))
    pooled_stat = sum(f.lr.stat for f in fits)
    pooled_dof = sum(f.lr.dof for f in fits)
    pooled = LrTestResult(stat=pooled_stat, dof=pooled_dof,
                          p_value=float(stats.chi2.sf(pooled_stat, pooled_dof)))
    return fits, pooled


def smoothed_trends(fits: List[FactorSmoothing], constrained: bool = False) -> np.ndarray:
    """T x r matrix of smoothed trends (the factors that feed the VAR)."""
    return np.column_stack([(f.constrained if constrained else f.unconstrained).trend for f in fits])
