"""
Markdown summary of a pipeline run, built from its manifest alone.
"""

from typing import Any, Dict, List

import pandas as pd

from .errors import ReportError
from .logger import get_logger

logger = get_logger("Report")

REQUIRED_SECTIONS = ("status", "seed", "config_hash", "stages", "tables")

# Worked LR arithmetic at the benchmark log likelihoods, under both readings
# of the HP value.
_LR_NOTE = (
    "Note: per-observation log likelihoods of -0.687 (free) and -1.351 (HP) with T = 240 "
    "give LR = 318.72; reading the HP value as -1.315 gives LR = 301.44. Both reject the "
    "HP restriction at any conventional level."
)


def _fmt(value: Any, digits: int) -> str:
    if isinstance(value, float):
        if value != value:
            return "-"
        return f"{value:.{digits}f}"
    return str(value)


def markdown_table(frame: pd.DataFrame, digits: int = 3, index_label: str = "") -> str:
    header = [index_label or (frame.index.name or "")] + [str(c) for c in frame.columns]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(["---"] * len(header)) + "|",
    ]
    for label, row in frame.iterrows():
        cells = [str(label)] + [_fmt(v, digits) for v in row.tolist()]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines)


def _frame(manifest: Dict[str, Any], key: str) -> pd.DataFrame:
    return pd.DataFrame(**manifest["tables"][key]["frame"])


def _section(parts: List[str], manifest: Dict[str, Any], key: str, digits: int = 3, label: str = "") -> bool:
    if key not in manifest["tables"]:
        return False
    parts.append(f"### {manifest['tables'][key]['title']}")
    parts.append("")
    parts.append(markdown_table(_frame(manifest, key), digits, label))
    parts.append("")
    return True


def emit_report(manifest: Dict[str, Any]) -> str:
    """Render the run manifest as markdown; a failed run names its failed stage."""
    missing = [s for s in REQUIRED_SECTIONS if s not in manifest]
    if missing:
        raise ReportError(f"Run manifest lacks sections: {missing}")

    tables = manifest["tables"]
    parts = [
        "# Narrative tax shock FAVAR report",
        "",
        f"- Status: **{manifest['status']}**",
        f"- Seed: {manifest['seed']}",
        f"- Config hash: `{manifest['config_hash']}`",
    ]
    if manifest["status"] != "ok":
        parts.append(f"- Failed stage: **{manifest.get('failed_stage')}** ({manifest.get('failure')})")
    parts.append("")

    parts += ["## Exogeneity of the narrative rates", ""]
    granger = sorted((k for k in tables if k.startswith("granger_")), key=lambda k: int(k.split("_")[1]))
    for key in granger:
        _section(parts, manifest, key, label="Predictor")
    if not granger:
        parts += ["_No Granger tests were run._", ""]

    parts += ["## Panel and factors", ""]
    _section(parts, manifest, "summary", digits=3, label="Variable")
    _section(parts, manifest, "pc_importance", digits=4)
    if _section(parts, manifest, "ic", digits=4, label="r"):
        factors = manifest.get("results", {}).get("factors", {})
        if factors:
            parts.append(
                f"Selected r = {factors.get('r')} (ICR1: {factors.get('r_hat_icr1')}, "
                f"ICR2: {factors.get('r_hat_icr2')})."
            )
            parts.append("")

    if _section(parts, manifest, "smoothing", digits=4):
        pooled = manifest.get("results", {}).get("smoothing", {}).get("pooled_lr")
        if pooled:
            parts.append(
                f"Pooled LR test of the HP restriction: LR = {pooled['stat']:.2f} "
                f"on {pooled['dof']} degrees of freedom (p = {pooled['p_value']:.4g})."
            )
        parts += ["", _LR_NOTE, ""]

    parts += ["## Responses to tax cuts", ""]
    _section(parts, manifest, "cumulative", label="Variable")
    for key in sorted(k for k in tables if k.startswith("fevd_")):
        _section(parts, manifest, key, digits=2, label="Variable")
    _section(parts, manifest, "median_target", digits=3, label="Shock")

    parts += ["## Reliability", ""]
    if not _section(parts, manifest, "reliability", digits=3, label="r"):
        parts += ["_Reliability checks were not run._", ""]

    parts += ["## Figure data", ""]
    figures = manifest.get("figures", [])
    parts += [f"- `{name}`" for name in figures] or ["_None_"]
    parts.append("")

    parts += ["## Stages", ""]
    # Timings live in the manifest only.
    stages = pd.DataFrame(manifest["stages"]).set_index("name")[["status"]]
    parts.append(markdown_table(stages, digits=2, index_label="Stage"))
    parts.append("")
    logger.debug(f"Report rendered with {len(tables)} tables", "report")
    return "\n".join(parts)
