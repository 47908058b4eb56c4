"""
Deterministic synthetic fixture: a 12-series quarterly panel driven by two
latent factors and narrative tax-rate shocks, the matching events file and
a pipeline config.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import pandas as pd

from ..logger import get_logger
from ..models.narrative_models import NarrativeEvent, TaxType
from ..models.panel_models import SeriesMeta, TimeSeriesPanel
from .narrative import write_events_csv
from .panel import write_panel_csv

logger = get_logger("Fixture")

FIXTURE_SEED = 20_240_101
FIXTURE_START = "1980Q1"
FIXTURE_QUARTERS = 161

# id, tcode, group, mean growth, loading on F1, loading on F2, noise sd
_SERIES: List[Tuple[str, int, str, float, float, float, float]] = [
    ("GDP", 5, "output", 0.75, 0.60, 0.20, 0.30),
    ("PCE", 5, "output", 0.80, 0.50, 0.10, 0.30),
    ("INV", 5, "output", 0.90, 1.40, 0.50, 1.00),
    ("UNEMP", 2, "labor", 0.00, -0.25, -0.05, 0.10),
    ("DPI", 5, "income", 0.70, 0.45, 0.15, 0.35),
    ("CPI", 5, "prices", 0.90, 0.10, 0.45, 0.20),
    ("IP", 5, "output", 0.60, 0.80, 0.10, 0.50),
    ("PAYEMS", 5, "labor", 0.40, 0.35, 0.05, 0.15),
    ("HOUST", 1, "housing", 1.50, 0.30, -0.20, 0.15),
    ("TB3MS", 2, "rates", 0.00, 0.15, 0.30, 0.20),
    ("SPREAD", 1, "rates", 1.20, -0.20, 0.25, 0.20),
    ("M2", 5, "money", 1.40, 0.05, 0.40, 0.30),
]

OBSERVABLES = ["GDP", "PCE", "INV", "UNEMP", "DPI", "CPI"]


@dataclass(frozen=True)
class Fixture:
    panel: TimeSeriesPanel
    events: List[NarrativeEvent]


def _tax_events(dates: pd.PeriodIndex, rng: np.random.Generator) -> List[NarrativeEvent]:
    events = []
    for t in range(8, len(dates) - 4, 5):
        tax_type = TaxType.PIT if (t // 5) % 2 == 0 else TaxType.CIT
        base = 800.0 if tax_type is TaxType.PIT else 300.0
        events.append(NarrativeEvent(
            quarter=dates[t],
            tax_type=tax_type,
            liability_change=round(float(rng.normal(0.0, 0.02 * base)), 3),
            base_prev=base,
            act_label=f"Synthetic Act {len(events) + 1}",
            exogenous=(t // 5) % 7 != 3,
        ))
    return events


def generate_fixture(seed: int = FIXTURE_SEED) -> Fixture:
    """Raw-level panel (codes 1, 2, 5) and narrative events; deterministic in seed."""
    rng = np.random.default_rng(seed)
    dates = pd.period_range(FIXTURE_START, periods=FIXTURE_QUARTERS, freq="Q")
    events = _tax_events(dates, rng)

    tax = np.zeros((len(dates), 2))
    for event in events:
        if event.exogenous:
            tax[dates.get_loc(event.quarter), 0 if event.tax_type is TaxType.PIT else 1] += event.rate

    phi = np.array([[0.6, 0.1], [0.0, 0.5]])
    tax_impact = np.array([[-1.2, -0.8], [-0.4, -0.6]])
    factors = np.zeros((len(dates), 2))
    for t in range(1, len(dates)):
        factors[t] = phi @ factors[t - 1] + tax_impact @ tax[t] + rng.normal(0.0, 0.5, size=2)

    values = np.zeros((len(dates), len(_SERIES)))
    metas = []
    for j, (series_id, code, group, mean, l1, l2, sd) in enumerate(_SERIES):
        change = mean + l1 * factors[:, 0] + l2 * factors[:, 1] + rng.normal(0.0, sd, size=len(dates))
        if code == 5:
            values[:, j] = 100.0 * np.exp(np.cumsum(change) / 100.0)
        elif code == 2:
            values[:, j] = 5.0 + np.cumsum(change)
        else:
            values[:, j] = change
        metas.append(SeriesMeta(id=series_id, transform_code=code, group=group))

    return Fixture(panel=TimeSeriesPanel(dates=dates, values=values, metas=metas), events=events)


def fixture_config(panel_name: str = "panel.csv", events_name: str = "events.csv", seed: int = 7) -> str:
    """Pipeline config sized for a quick end-to-end run on the fixture."""
    return f"""# Synthetic fixture run
[paths]
panel = "{panel_name}"
events = "{events_name}"
output_dir = "output"

[factors]
r = 2
r_max = 6

[var]
p = 2
observables = {OBSERVABLES!r}

[identify]
horizon = 1
draws = 200
max_attempts = 200000
penalty_draws = 4096

[analysis]
horizon = 20
bootstrap = 100
level = 0.90
reliability_r = [1, 2, 3, 4]

[run]
seed = {seed}
""".replace("'", '"')


def write_fixture(directory: Union[str, Path], seed: int = FIXTURE_SEED) -> Dict[str, Path]:
    """Write panel.csv, events.csv and fixture.toml into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    fixture = generate_fixture(seed)
    paths = {
        "panel": write_panel_csv(fixture.panel, directory / "panel.csv"),
        "events": write_events_csv(fixture.events, directory / "events.csv"),
        "config": directory / "fixture.toml",
    }
    paths["config"].write_text(fixture_config())
    logger.success(f"Fixture written to {directory}", "file")
    return paths
