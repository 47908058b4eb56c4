"""
Pipeline configuration: a pydantic model loaded from TOML, with environment
defaults from .env and command-line overrides.
"""

import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .models.var_models import Sign
from .tools.identify import DEFAULT_SIGN_TABLE

load_dotenv()

DEFAULT_OBSERVABLES = ["GDP", "PCE", "INV", "UNEMP", "DPI", "CPI"]


def _env_workers() -> int:
    try:
        return max(int(os.getenv("FAVAR_WORKERS", "1")), 1)
    except ValueError:
        return 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsSection(_Section):
    panel: Path
    events: Path
    output_dir: Path = Path("output")


class PanelSection(_Section):
    balance: Literal["drop_series", "drop_rows"] = "drop_series"
    summary_ids: Optional[List[str]] = None


class FactorsSection(_Section):
    r: Optional[int] = Field(default=None, ge=1)
    r_max: int = Field(default=8, ge=1)
    criterion: Literal["icr1", "icr2"] = "icr2"
    diagonal_transition: bool = False
    variance_threshold: float = Field(default=0.8, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _r_within_max(self):
        if self.r is not None and self.r > self.r_max:
            raise ValueError(f"r={self.r} exceeds r_max={self.r_max}")
        return self


class SmoothingSection(_Section):
    enabled: bool = True
    hp_lambda: float = Field(default=1600.0, gt=0.0)
    use_constrained: bool = False


class NarrativeSection(_Section):
    exogenous_only: bool = True
    granger_lags: List[int] = Field(default_factory=lambda: [4, 8, 12])
    quarter_dummies: bool = False
    federal_series: Dict[str, str] = Field(default_factory=dict)

    @field_validator("granger_lags")
    @classmethod
    def _positive_lags(cls, lags: List[int]) -> List[int]:
        if not lags or min(lags) < 1:
            raise ValueError("Granger lags must be positive integers")
        return lags

    @field_validator("federal_series")
    @classmethod
    def _known_taxes(cls, mapping: Dict[str, str]) -> Dict[str, str]:
        unknown = set(mapping) - {"PIT", "CIT"}
        if unknown:
            raise ValueError(f"Federal series keys must be PIT or CIT, got {sorted(unknown)}")
        return mapping


class VarSection(_Section):
    p: int = Field(default=4, ge=1, le=24)
    observables: List[str] = Field(default_factory=lambda: list(DEFAULT_OBSERVABLES))
    tax_entry: Literal["endogenous", "exogenous"] = "endogenous"


class IdentifySection(_Section):
    horizon: int = Field(default=4, ge=0)
    draws: int = Field(default=1000, ge=1)
    max_attempts: int = Field(default=1_000_000, ge=1)
    penalty_draws: int = Field(default=20_000, ge=1)
    mode: Literal["rejection", "penalty", "both"] = "both"
    penalty_slope: float = Field(default=100.0, gt=0.0)
    shock_size: float = Field(default=1.0, gt=0.0)
    shocks: List[Literal["PIT", "CIT"]] = Field(default_factory=lambda: ["PIT", "CIT"])
    signs: Dict[str, str] = Field(default_factory=lambda: dict(DEFAULT_SIGN_TABLE))

    @field_validator("signs")
    @classmethod
    def _valid_signs(cls, signs: Dict[str, str]) -> Dict[str, str]:
        for var_id, value in signs.items():
            Sign.parse(value)
        return signs


class AnalysisSection(_Section):
    horizon: int = Field(default=20, ge=1)
    bootstrap: int = Field(default=500, ge=100)
    level: float = Field(default=0.90, gt=0.0, lt=1.0)
    cumulative_horizons: List[int] = Field(default_factory=lambda: [4, 12])
    include_impact: bool = False
    fevd_horizons: List[int] = Field(default_factory=lambda: [1, 4, 8, 12, 20])
    reidentify: bool = False
    max_failure_rate: float = Field(default=0.1, ge=0.0, le=1.0)
    reliability_r: Optional[List[int]] = None
    observable_ids: Optional[List[str]] = None

    @model_validator(mode="after")
    def _horizons_within(self):
        # defaults follow a shortened horizon; explicit lists must fit it
        if "cumulative_horizons" not in self.model_fields_set:
            self.cumulative_horizons = [h for h in self.cumulative_horizons if h <= self.horizon]
        if "fevd_horizons" not in self.model_fields_set:
            self.fevd_horizons = [h for h in self.fevd_horizons if h <= self.horizon] or [self.horizon]
        if any(h < 0 or h > self.horizon for h in self.cumulative_horizons):
            raise ValueError(f"Cumulative horizons must lie in 0..{self.horizon}")
        if any(h < 1 or h > self.horizon for h in self.fevd_horizons):
            raise ValueError(f"FEVD horizons must lie in 1..{self.horizon}")
        if self.reliability_r is not None and min(self.reliability_r, default=1) < 1:
            raise ValueError("Reliability factor counts must be positive")
        return self


class RunSection(_Section):
    seed: int = Field(ge=0)
    workers: int = Field(default_factory=_env_workers, ge=1)
    log_level: Optional[str] = None


class PipelineConfig(_Section):
    """Every knob of a pipeline run; `run.seed` has no default."""

    paths: PathsSection
    panel: PanelSection = Field(default_factory=PanelSection)
    factors: FactorsSection = Field(default_factory=FactorsSection)
    smoothing: SmoothingSection = Field(default_factory=SmoothingSection)
    narrative: NarrativeSection = Field(default_factory=NarrativeSection)
    var: VarSection = Field(default_factory=VarSection)
    identify: IdentifySection = Field(default_factory=IdentifySection)
    analysis: AnalysisSection = Field(default_factory=AnalysisSection)
    run: RunSection

    @property
    def seed(self) -> int:
        return self.run.seed

    def require_inputs(self) -> None:
        """Fail before any computation when an input file is missing."""
        for name in ("panel", "events"):
            path = getattr(self.paths, name)
            if not path.is_file():
                raise ConfigError(f"{name} file not found: {path}", path=str(path))

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


# flag name -> (section, key)
OVERRIDE_KEYS: Dict[str, tuple] = {
    "seed": ("run", "seed"),
    "workers": ("run", "workers"),
    "log_level": ("run", "log_level"),
    "r": ("factors", "r"),
    "r_max": ("factors", "r_max"),
    "p": ("var", "p"),
    "horizon": ("analysis", "horizon"),
    "bootstrap": ("analysis", "bootstrap"),
    "level": ("analysis", "level"),
    "draws": ("identify", "draws"),
    "mode": ("identify", "mode"),
    "panel": ("paths", "panel"),
    "events": ("paths", "events"),
    "output_dir": ("paths", "output_dir"),
}


def _resolve_paths(raw: Dict[str, Any], base: Path) -> None:
    paths = raw.get("paths")
    if not isinstance(paths, dict):
        return
    for key, value in paths.items():
        if isinstance(value, str) and not Path(value).is_absolute():
            paths[key] = str(base / value)


def build_config(raw: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> PipelineConfig:
    """Validate a raw mapping after applying non-None overrides."""
    data: Dict[str, Any] = {k: dict(v) if isinstance(v, Mapping) else v for k, v in raw.items()}
    for flag, value in (overrides or {}).items():
        if value is None:
            continue
        if flag not in OVERRIDE_KEYS:
            raise ConfigError(f"Unknown override '{flag}'")
        section, key = OVERRIDE_KEYS[flag]
        data.setdefault(section, {})[key] = str(value) if isinstance(value, Path) else value
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"Invalid configuration: {problems}") from exc


def load_config(path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> PipelineConfig:
    """
    Read a TOML config (relative paths resolve against its directory) and
    apply command-line overrides.
    """
    raw: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        try:
            raw = tomllib.loads(path.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"Config file {path} is not valid TOML: {exc}") from exc
        _resolve_paths(raw, path.parent)
    return build_config(raw, overrides)
