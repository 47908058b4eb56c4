"""
Sign-restricted identification of a single tax-cut shock.

Candidate rotations q are drawn uniformly on the unit sphere and mapped to
impact vectors alpha = L q. Rejection mode keeps every candidate whose
responses satisfy the sign pattern; penalty mode keeps the candidate with
the smallest penalty and polishes it on the sphere.

Draws are generated in fixed blocks, each seeded from (seed, block index),
so the accepted set does not depend on how many workers evaluate blocks.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np
from scipy import linalg

from ..errors import IdentificationError
from ..logger import get_logger
from ..models.var_models import (
    DrawSet,
    IdentificationMode,
    ImpulseVector,
    Sign,
    SignRestrictionSpec,
    VarModel,
)
from .var_core import reduced_form_irf

logger = get_logger("Identify")

BLOCK_SIZE = 256
POLISH_TOL = 1e-8

DEFAULT_SIGN_TABLE: Dict[str, str] = {
    "GDP": "+",
    "PCE": "+",
    "INV": "+",
    "UNEMP": "-",
    "DPI": "+",
    "CPI": "+",
}


def impulse_from_rotation(L: np.ndarray, q: np.ndarray) -> ImpulseVector:
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q)
    return ImpulseVector(q=q, alpha=L @ q)


def draw_candidate(L: np.ndarray, rng: np.random.Generator) -> ImpulseVector:
    """Normalized standard-normal rotation and its impact vector."""
    z = rng.standard_normal(L.shape[0])
    while not np.any(z):
        z = rng.standard_normal(L.shape[0])
    return impulse_from_rotation(L, z)


def orient(q: np.ndarray, L: np.ndarray, shock_index: int) -> np.ndarray:
    """Flip q so the shock variable's impact response is a cut."""
    return -q if (L @ q)[shock_index] > 0 else q


def restriction_scales(model: VarModel) -> np.ndarray:
    """Per-variable penalty normalizers: residual standard deviations."""
    return model.residual_sd


def _check_scales(scales: np.ndarray, spec: SignRestrictionSpec) -> np.ndarray:
    scales = np.asarray(scales, dtype=float)
    if scales.shape != (len(spec.var_ids),):
        raise IdentificationError("One scale is required per VAR variable")
    if np.any(scales[spec.restricted] <= 0):
        raise IdentificationError("Penalty scales of restricted variables must be positive")
    return scales


def _penalty_cells(responses: np.ndarray, spec: SignRestrictionSpec, scales: np.ndarray) -> np.ndarray:
    """Cell values f(-s_j r_jh / scale_j) over (..., h, restricted j)."""
    s = spec.directions
    mask = spec.restricted
    x = -s[mask] * responses[..., mask] / scales[mask]
    return np.where(x <= 0, x, spec.penalty_slope * x)


def evaluate_restrictions(
    irf: np.ndarray,
    spec: SignRestrictionSpec,
    scales: np.ndarray,
) -> Tuple[bool, float]:
    """
    Check the sign pattern on responses h = 0..K and score the penalty.

    A restricted cell meets its sign only strictly; the penalty rewards
    conforming cells linearly and charges violations at penalty_slope.
    """
    scales = _check_scales(scales, spec)
    irf = np.asarray(irf, dtype=float)
    if irf.ndim != 2 or irf.shape[1] != len(spec.var_ids):
        raise IdentificationError("Responses must be (horizons x variables)")
    if irf.shape[0] < spec.horizon + 1:
        raise IdentificationError(f"Responses must cover horizons 0..{spec.horizon}")
    window = irf[:spec.horizon + 1]
    mask = spec.restricted
    meets = bool(np.all(spec.directions[mask] * window[:, mask] > 0))
    penalty = float(np.sum(_penalty_cells(window, spec, scales)))
    return meets, penalty


def build_spec(
    var_ids: List[str],
    shock_var: str,
    sign_table: Optional[Mapping[str, str]] = None,
    horizon: int = 4,
    shock_size: float = 1.0,
    penalty_slope: float = 100.0,
) -> SignRestrictionSpec:
    """Restriction spec from a variable -> sign table; entries for absent variables are dropped."""
    table = DEFAULT_SIGN_TABLE if sign_table is None else sign_table
    signs = {}
    for var_id, value in table.items():
        if var_id not in var_ids:
            logger.warning(f"Sign restriction on {var_id} ignored: not in the VAR", "identify")
            continue
        try:
            signs[var_id] = Sign.parse(value)
        except ValueError as exc:
            raise IdentificationError(str(exc)) from exc
    try:
        return SignRestrictionSpec(
            var_ids=list(var_ids),
            signs=signs,
            shock_var=shock_var,
            horizon=horizon,
            shock_size=shock_size,
            penalty_slope=penalty_slope,
        )
    except ValueError as exc:
        raise IdentificationError(str(exc)) from exc


class _BlockEvaluator:
    """Vectorized draw and evaluation of one seeded block of candidates."""

    def __init__(self, model: VarModel, spec: SignRestrictionSpec, scales: np.ndarray, seed: int):
        self.L = model.chol
        self.spec = spec
        self.scales = scales
        self.seed = seed
        self.psi_k = reduced_form_irf(model, spec.horizon)

    def rotations(self, block: int, size: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, block])
        Z = rng.standard_normal((size, self.L.shape[0]))
        Q = Z / np.linalg.norm(Z, axis=1, keepdims=True)
        alpha = Q @ self.L.T
        flip = np.where(alpha[:, self.spec.shock_index] > 0, -1.0, 1.0)
        return Q * flip[:, None]

    def __call__(self, job: Tuple[int, int]) -> Tuple[int, np.ndarray, np.ndarray, np.ndarray]:
        block, size = job
        Q = self.rotations(block, size)
        responses = np.einsum("hij,dj->dhi", self.psi_k, Q @ self.L.T)
        mask = self.spec.restricted
        meets = np.all(self.spec.directions[mask] * responses[..., mask] > 0, axis=(1, 2))
        penalties = _penalty_cells(responses, self.spec, self.scales).sum(axis=(1, 2))
        return block, Q, meets, penalties


def _blocks(max_attempts: int) -> List[Tuple[int, int]]:
    n_blocks = -(-max_attempts // BLOCK_SIZE)
    return [(b, min(BLOCK_SIZE, max_attempts - b * BLOCK_SIZE)) for b in range(n_blocks)]


def _evaluated_blocks(evaluator: _BlockEvaluator, max_attempts: int, workers: int) -> Iterator:
    """Evaluated blocks in block order; workers evaluate one wave of blocks at a time."""
    jobs = _blocks(max_attempts)
    wave = max(workers, 1)
    with ThreadPoolExecutor(max_workers=wave) as pool:
        for start in range(0, len(jobs), wave):
            yield from pool.map(evaluator, jobs[start:start + wave])


def _penalty_of(q: np.ndarray, L: np.ndarray, psi_k: np.ndarray, spec: SignRestrictionSpec, scales: np.ndarray) -> float:
    q = orient(q, L, spec.shock_index)
    return float(np.sum(_penalty_cells(psi_k @ (L @ q), spec, scales)))


def polish_rotation(
    q: np.ndarray,
    model: VarModel,
    spec: SignRestrictionSpec,
    scales: np.ndarray,
    step: float = 0.1,
    tol: float = POLISH_TOL,
    max_evaluations: int = 50_000,
) -> Tuple[np.ndarray, float]:
    """
    Coordinate search over the tangent space of the sphere at q with a
    shrinking step. Returns the oriented rotation and its penalty; the
    penalty never increases.
    """
    L = model.chol
    psi_k = reduced_form_irf(model, spec.horizon)
    q = orient(np.asarray(q, dtype=float) / np.linalg.norm(q), L, spec.shock_index)
    best = _penalty_of(q, L, psi_k, spec, scales)
    evaluations = 0
    while step > tol and evaluations < max_evaluations:
        basis = linalg.null_space(q[None, :])
        improved = False
        for k in range(basis.shape[1]):
            for direction in (1.0, -1.0):
                candidate = q + direction * step * basis[:, k]
                candidate = orient(candidate / np.linalg.norm(candidate), L, spec.shock_index)
                value = _penalty_of(candidate, L, psi_k, spec, scales)
                evaluations += 1
                if value < best - tol:
                    q, best, improved = candidate, value, True
                    break
            if improved:
                break
        if not improved:
            step *= 0.5
    logger.debug(f"Polish finished at penalty {best:.6g} after {evaluations} evaluations", "identify")
    return q, best


def _responses(model: VarModel, alphas: np.ndarray, H: int, shock_size: float) -> np.ndarray:
    psi = reduced_form_irf(model, H)
    return shock_size * np.einsum("hij,dj->dhi", psi, alphas)


def identify_tax_shock(
    model: VarModel,
    spec: SignRestrictionSpec,
    n_target: int = 1000,
    max_attempts: int = 1_000_000,
    seed: int = 0,
    mode: IdentificationMode = IdentificationMode.REJECTION,
    workers: int = 1,
    H: int = 20,
    scales: Optional[np.ndarray] = None,
) -> DrawSet:
    """
    Rejection mode stops once n_target draws are accepted or max_attempts
    draws are spent. Penalty mode scores all max_attempts draws and returns
    the polished minimizer. Responses are stored for h = 0..H, scaled by
    the restriction shock size.
    """
    if spec.var_ids != model.var_ids:
        raise IdentificationError("Restriction spec and VAR disagree on the variable order")
    if max_attempts < 1:
        raise IdentificationError("max_attempts must be at least 1")
    if mode is IdentificationMode.REJECTION and n_target < 1:
        raise IdentificationError("n_target must be at least 1")
    scales = _check_scales(restriction_scales(model) if scales is None else scales, spec)
    evaluator = _BlockEvaluator(model, spec, scales, seed)
    L = model.chol

    if mode is IdentificationMode.REJECTION:
        accepted: List[ImpulseVector] = []
        attempted = 0
        for block, Q, meets, penalties in _evaluated_blocks(evaluator, max_attempts, workers):
            for i in range(len(Q)):
                attempted += 1
                if meets[i]:
                    accepted.append(ImpulseVector(
                        q=Q[i], alpha=L @ Q[i], meets_signs=True,
                        penalty=float(penalties[i]), draw_index=block * BLOCK_SIZE + i,
                    ))
                    if len(accepted) == n_target:
                        break
            if len(accepted) == n_target:
                break
        rate = len(accepted) / attempted
        if not accepted:
            raise IdentificationError(
                f"No draw satisfied the sign restrictions for {spec.shock_var} "
                f"after {attempted} attempts (acceptance rate 0.0)",
                acceptance_rate=0.0,
                n_attempted=attempted,
            )
        if len(accepted) < n_target:
            logger.warning(
                f"Only {len(accepted)}/{n_target} draws accepted for {spec.shock_var} "
                f"(acceptance rate {rate:.4f})",
                "identify",
            )
        logger.info(
            f"{spec.shock_var}: accepted {len(accepted)} of {attempted} draws (rate {rate:.4f})", "identify"
        )
        alphas = np.array([v.alpha for v in accepted])
        return DrawSet(
            accepted=accepted,
            irfs=_responses(model, alphas, H, spec.shock_size),
            n_attempted=attempted,
            seed=seed,
            mode=mode,
        )

    best_penalty, best_q, best_index = np.inf, None, -1
    for block, Q, _, penalties in _evaluated_blocks(evaluator, max_attempts, workers):
        i = int(np.argmin(penalties))
        if penalties[i] < best_penalty:
            best_penalty, best_q, best_index = float(penalties[i]), Q[i], block * BLOCK_SIZE + i
    q, penalty = polish_rotation(best_q, model, spec, scales)
    alpha = L @ q
    meets, _ = evaluate_restrictions(reduced_form_irf(model, spec.horizon) @ alpha, spec, scales)
    minimizer = ImpulseVector(q=q, alpha=alpha, meets_signs=meets, penalty=penalty, draw_index=best_index)
    logger.info(
        f"{spec.shock_var}: penalty minimum {penalty:.4f} (draw {best_index}, before polish "
        f"{best_penalty:.4f}); signs met: {meets}",
        "identify",
    )
    return DrawSet(
        accepted=[minimizer],
        irfs=_responses(model, alpha[None, :], H, spec.shock_size),
        n_attempted=max_attempts,
        seed=seed,
        mode=mode,
        minimizer=0,
    )
