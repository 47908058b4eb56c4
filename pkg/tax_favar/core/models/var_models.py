"""
Data models for the reduced-form VAR and sign-restricted identification.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np


@dataclass(frozen=True)
class VarModel:
    """
    Reduced-form VAR(p) with intercept, fitted by equation-by-equation OLS.

    coeffs[j] is A_{j+1}; residual covariance uses the T - p denominator.
    """
    var_ids: List[str]
    p: int
    intercept: np.ndarray
    coeffs: np.ndarray
    residuals: np.ndarray
    sigma_u: np.ndarray
    chol: np.ndarray
    data: np.ndarray
    exog: Optional[np.ndarray] = None
    exog_coeffs: Optional[np.ndarray] = None
    exog_ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.var_ids)
        if self.coeffs.shape != (self.p, n, n):
            raise ValueError(f"Expected {self.p} coefficient matrices of size {n}x{n}")
        if not np.allclose(self.sigma_u, self.sigma_u.T, atol=1e-12):
            raise ValueError("Residual covariance must be symmetric")
        if np.linalg.eigvalsh(self.sigma_u).min() < -1e-10:
            raise ValueError("Residual covariance must be positive semidefinite")
        if np.max(np.abs(self.chol @ self.chol.T - self.sigma_u)) > 1e-8:
            raise ValueError("Cholesky factor does not reproduce the residual covariance")

    @property
    def n(self) -> int:
        return len(self.var_ids)

    @property
    def n_obs(self) -> int:
        return self.residuals.shape[0]

    @property
    def residual_sd(self) -> np.ndarray:
        return np.sqrt(np.diag(self.sigma_u))

    def index_of(self, var_id: str) -> int:
        try:
            return self.var_ids.index(var_id)
        except ValueError:
            raise KeyError(f"Variable {var_id} not in VAR") from None

    def companion(self) -> np.ndarray:
        n, p = self.n, self.p
        comp = np.zeros((n * p, n * p))
        comp[:n, :] = np.hstack(list(self.coeffs))
        if p > 1:
            comp[n:, :-n] = np.eye(n * (p - 1))
        return comp

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.companion()))))

    @property
    def is_stable(self) -> bool:
        return self.spectral_radius < 1.0

    def to_dict(self) -> dict:
        return {
            "var_ids": list(self.var_ids),
            "p": self.p,
            "n_obs": self.n_obs,
            "intercept": self.intercept.tolist(),
            "coeffs": self.coeffs.tolist(),
            "sigma_u": self.sigma_u.tolist(),
            "chol": self.chol.tolist(),
            "spectral_radius": self.spectral_radius,
            "sigma_u_denominator": "T - p",
            "exog_ids": list(self.exog_ids),
            "exog_coeffs": None if self.exog_coeffs is None else self.exog_coeffs.tolist(),
        }


class Sign(Enum):
    POSITIVE = "+"
    NEGATIVE = "-"
    UNRESTRICTED = "0"

    @classmethod
    def parse(cls, value) -> "Sign":
        text = str(value).strip()
        aliases = {"+": cls.POSITIVE, "pos": cls.POSITIVE, "positive": cls.POSITIVE,
                   "-": cls.NEGATIVE, "neg": cls.NEGATIVE, "negative": cls.NEGATIVE,
                   "0": cls.UNRESTRICTED, "": cls.UNRESTRICTED, "~": cls.UNRESTRICTED,
                   "free": cls.UNRESTRICTED, "unrestricted": cls.UNRESTRICTED}
        try:
            return aliases[text.lower()]
        except KeyError:
            raise ValueError(f"Unknown sign restriction '{value}'") from None

    @property
    def direction(self) -> int:
        return {"+": 1, "-": -1, "0": 0}[self.value]


class IdentificationMode(Enum):
    REJECTION = "rejection"
    PENALTY = "penalty"


@dataclass(frozen=True)
class SignRestrictionSpec:
    """
    Sign pattern for a single tax-cut shock.

    The shock variable's own impact response is always normalized to be
    negative (a cut); that normalization counts as the shock's pinning
    restriction, so every other variable may be left unrestricted.
    """
    var_ids: List[str]
    signs: Dict[str, Sign]
    shock_var: str
    horizon: int = 4
    shock_size: float = 1.0
    penalty_slope: float = 100.0

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("Restricted horizon must be nonnegative")
        if self.shock_var not in self.var_ids:
            raise ValueError(f"Shock variable {self.shock_var} is not a VAR variable")
        unknown = set(self.signs) - set(self.var_ids)
        if unknown:
            raise ValueError(f"Sign restrictions name unknown variables: {sorted(unknown)}")
        if self.penalty_slope <= 0:
            raise ValueError("Penalty slope must be positive")
        if self.shock_size <= 0:
            raise ValueError("Shock size must be positive")

    @property
    def directions(self) -> np.ndarray:
        return np.array([self.signs.get(v, Sign.UNRESTRICTED).direction for v in self.var_ids])

    @property
    def restricted(self) -> np.ndarray:
        return self.directions != 0

    @property
    def shock_index(self) -> int:
        return self.var_ids.index(self.shock_var)

    def to_dict(self) -> dict:
        return {
            "shock_var": self.shock_var,
            "horizon": self.horizon,
            "shock_size": self.shock_size,
            "penalty_slope": self.penalty_slope,
            "signs": {v: self.signs.get(v, Sign.UNRESTRICTED).value for v in self.var_ids},
        }


@dataclass(frozen=True)
class ImpulseVector:
    """Rotation q on the unit sphere and its impact vector alpha = L q."""
    q: np.ndarray
    alpha: np.ndarray
    meets_signs: bool = False
    penalty: float = float("nan")
    draw_index: int = -1

    def __post_init__(self):
        if abs(np.linalg.norm(self.q) - 1.0) > 1e-12:
            raise ValueError("Impulse rotation must have unit length")

    def to_dict(self) -> dict:
        return {
            "q": self.q.tolist(),
            "alpha": self.alpha.tolist(),
            "meets_signs": self.meets_signs,
            "penalty": self.penalty,
            "draw_index": self.draw_index,
        }


@dataclass(frozen=True)
class DrawSet:
    """Accepted impulse vectors with their structural responses (draws x (H+1) x n)."""
    accepted: List[ImpulseVector]
    irfs: np.ndarray
    n_attempted: int
    seed: int
    mode: IdentificationMode
    minimizer: Optional[int] = None

    def __post_init__(self):
        if len(self.accepted) != self.irfs.shape[0]:
            raise ValueError("One response path is required per accepted draw")
        if self.mode is IdentificationMode.REJECTION:
            if not all(v.meets_signs for v in self.accepted):
                raise ValueError("Rejection-mode draws must all satisfy the restrictions")
        elif self.minimizer is None or not (0 <= self.minimizer < len(self.accepted)):
            raise ValueError("Penalty mode flags exactly one minimizer")

    @property
    def n_accepted(self) -> int:
        return len(self.accepted)

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_attempted if self.n_attempted else 0.0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "seed": self.seed,
            "n_attempted": self.n_attempted,
            "n_accepted": self.n_accepted,
            "acceptance_rate": self.acceptance_rate,
            "minimizer": self.minimizer,
        }
