"""
Stage-sequential pipeline runner: panel, factors, smoothing, narrative,
VAR, identification and analysis. Every stage writes its artifacts to the
output directory and a run manifest records what happened.
"""

import json
import platform
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .config import PipelineConfig
from .errors import (
    AnalysisError,
    FactorError,
    FavarError,
    IdentificationError,
    NarrativeError,
    PanelError,
    ReportError,
    SmoothingError,
    VarError,
)
from .logger import get_logger
from .models.analysis_models import IrfSet, MtResult
from .models.factor_models import FactorModel
from .models.narrative_models import NarrativeTaxSeries
from .models.panel_models import TimeSeriesPanel
from .models.var_models import DrawSet, IdentificationMode, ImpulseVector, SignRestrictionSpec, VarModel
from .tools import analysis, factors, identify, narrative, panel, smoothing, var_core

logger = get_logger("Pipeline")

STAGES = ("panel", "factors", "smoothing", "narrative", "var", "identify", "analysis")

STAGE_ERRORS = {
    "panel": PanelError,
    "factors": FactorError,
    "smoothing": SmoothingError,
    "narrative": NarrativeError,
    "var": VarError,
    "identify": IdentificationError,
    "analysis": AnalysisError,
}

# CLI subcommand -> last stage it runs
COMMAND_STAGES = {
    "ingest": "panel",
    "factors": "factors",
    "smooth": "smoothing",
    "granger": "narrative",
    "estimate": "var",
    "identify": "identify",
    "irf": "analysis",
    "fevd": "analysis",
    "diagnose": "analysis",
    "run-all": "analysis",
}

MANIFEST_NAME = "manifest.json"
FLOAT_FORMAT = "%.10g"
TAX_IDS = ["PIT", "CIT"]
_PACKAGES = ["numpy", "scipy", "pandas", "statsmodels", "pydantic", "rich"]


@dataclass
class StageRecord:
    """Outcome of one pipeline stage."""
    name: str
    status: str = "pending"
    seconds: float = 0.0
    outputs: List[str] = field(default_factory=list)
    error: Optional[str] = None
    partial_outputs: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "seconds": round(self.seconds, 4),
            "outputs": list(self.outputs),
            "error": self.error,
            "partial_outputs": self.partial_outputs,
        }


@dataclass
class ShockResult:
    """Identification and analysis products of one tax shock."""
    name: str
    spec: SignRestrictionSpec
    seed: int
    rejection: Optional[DrawSet] = None
    penalty: Optional[DrawSet] = None
    mt: Optional[MtResult] = None
    benchmark: Optional[ImpulseVector] = None
    bands: Optional[IrfSet] = None


def _versions() -> Dict[str, str]:
    from .. import __version__

    versions = {"tax_favar": __version__, "python": platform.python_version()}
    for name in _PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def stage_seed(seed: int, *keys: int) -> int:
    """Independent integer seed for a sub-stream of the master seed."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


class FavarPipeline:
    """
    Runs the stages in order up to a chosen stage. A stage error stops the
    run; the failed stage and its cause are recorded in the manifest.
    """

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.output_dir = Path(config.paths.output_dir)
        self.records: List[StageRecord] = []
        self.tables: Dict[str, dict] = {}
        self.results: Dict[str, Any] = {}
        self.figures: List[str] = []
        self.cumulative: Dict[str, pd.DataFrame] = {}
        self._current: Optional[StageRecord] = None
        self.failure: Optional[FavarError] = None

        self.raw_panel: Optional[TimeSeriesPanel] = None
        self.panel: Optional[TimeSeriesPanel] = None
        self.levels: Optional[pd.DataFrame] = None
        self.factor_model: Optional[FactorModel] = None
        self.trends: Optional[np.ndarray] = None
        self.rates: Optional[NarrativeTaxSeries] = None
        self.var_model: Optional[VarModel] = None
        self.shocks: List[ShockResult] = []

    # ------------------------------------------------------------------ output

    def _path(self, name: str) -> Path:
        path = self.output_dir / name
        if self._current is not None:
            self._current.outputs.append(name)
        return path

    def _write_frame(self, frame: pd.DataFrame, name: str, index: bool = True) -> Path:
        path = self._path(name)
        frame.to_csv(path, index=index, float_format=FLOAT_FORMAT)
        return path

    def _write_json(self, payload: Any, name: str) -> Path:
        path = self._path(name)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default))
        return path

    def _table(self, key: str, title: str, frame: pd.DataFrame) -> None:
        self.tables[key] = {"title": title, "frame": frame.to_dict(orient="split")}

    # ------------------------------------------------------------------ stages

    def _stage_panel(self) -> None:
        cfg = self.config
        self.raw_panel = panel.load_panel(cfg.paths.panel)
        transformed = panel.apply_transforms(self.raw_panel)
        self.panel = panel.standardize_and_balance(transformed, cfg.panel.balance)
        self.levels = transformed.to_frame().loc[self.panel.dates, self.panel.ids]
        panel.write_panel_csv(self.panel, self._path("panel_standardized.csv"))

        ids = cfg.panel.summary_ids or [v for v in cfg.var.observables if v in self.raw_panel.ids]
        summary = panel.summarize_panel(self.raw_panel, ids)
        self._write_frame(summary, "summary_stats.csv")
        self._table("summary", "Summary statistics", summary)
        self.results["panel"] = self.panel.to_dict()
        logger.metrics({"Series": self.panel.n_series, "Quarters": self.panel.n_obs,
                        "Dropped": len(self.panel.drop_log)}, "panel")

    def _stage_factors(self) -> None:
        cfg = self.config.factors
        limit = min(self.panel.n_series, self.panel.n_obs)
        r_max = min(cfg.r_max, limit)
        if r_max < cfg.r_max:
            logger.warning(f"r_max lowered from {cfg.r_max} to {r_max} by the panel size", "factors")
        ic = factors.select_num_factors(self.panel, r_max)
        r = cfg.r if cfg.r is not None else (ic.r_hat_icr2 if cfg.criterion == "icr2" else ic.r_hat_icr1)
        self.factor_model = factors.estimate_factors(self.panel, r)
        transition = factors.fit_factor_transition(self.factor_model, cfg.diagonal_transition)

        full = factors.estimate_factors(self.panel, r_max) if r_max > r else self.factor_model
        importance = factors.pc_importance_table(full)
        rules = factors.variance_rule_factors(full, threshold=cfg.variance_threshold)
        ic_table = factors.ic_frame(ic).set_index("r")

        self._write_frame(factors.factor_frame(self.panel, self.factor_model), "factors.csv")
        self._write_frame(factors.loadings_frame(self.factor_model), "loadings.csv")
        self._write_frame(ic_table, "ic.csv")
        self._write_frame(importance, "pc_importance.csv")
        self._write_json(transition.to_dict(), "factor_transition.json")
        self._table("ic", "Information criteria", ic_table)
        self._table("pc_importance", "Principal component importance", importance)
        self.results["factors"] = {
            **self.factor_model.to_dict(),
            **ic.to_dict(),
            "variance_rules": rules,
            "rmse": factors.reconstruction_rmse(self.panel, self.factor_model),
        }

    def _trends_for(self, model: FactorModel) -> np.ndarray:
        cfg = self.config.smoothing
        if not cfg.enabled:
            return model.factors
        fits, _ = smoothing.smooth_factors(model, cfg.hp_lambda, self.config.run.workers)
        return smoothing.smoothed_trends(fits, cfg.use_constrained)

    def _stage_smoothing(self) -> None:
        cfg = self.config.smoothing
        model = self.factor_model
        if not cfg.enabled:
            self.trends = model.factors
            self.results["smoothing"] = {"enabled": False}
            return
        fits, pooled = smoothing.smooth_factors(model, cfg.hp_lambda, self.config.run.workers)
        self.trends = smoothing.smoothed_trends(fits, cfg.use_constrained)

        rows = []
        paths = {}
        for fit in fits:
            rows.append({
                "factor": fit.factor_id,
                "sigma2_cycle": fit.unconstrained.sigma2_cycle,
                "sigma2_omega": fit.unconstrained.sigma2_omega,
                "q": fit.unconstrained.q,
                "lnL_unconstrained": fit.unconstrained.loglik,
                "lnL_constrained": fit.constrained.loglik,
                "T": fit.unconstrained.n_loglik,
                "LR": fit.lr.stat,
                "p_value": fit.lr.p_value,
            })
            paths[f"{fit.factor_id}_trend"] = fit.unconstrained.trend
            paths[f"{fit.factor_id}_cycle"] = fit.unconstrained.cycle
            paths[f"{fit.factor_id}_hp_trend"] = fit.constrained.trend
        table = pd.DataFrame(rows).set_index("factor")
        self._write_frame(table, "smoothing.csv")
        self._write_frame(pd.DataFrame(paths, index=pd.Index(self.panel.dates.astype(str), name="date")),
                          "smoothed_factors.csv")
        self.figures.append("smoothed_factors.csv")
        self._table("smoothing", "Trend-cycle smoothing (per-observation log likelihoods)", table)
        self.results["smoothing"] = {
            "enabled": True,
            "factors": [f.to_dict() for f in fits],
            "pooled_lr": pooled.to_dict(),
        }

    def _stage_narrative(self) -> None:
        cfg = self.config.narrative
        events = narrative.load_narrative_events(self.config.paths.events)
        kept = narrative.events_within(events, self.panel.dates)
        self.rates = narrative.compute_narrative_rates(kept, self.panel.dates, cfg.exogenous_only)
        self._write_frame(self.rates.to_frame(), "narrative_rates.csv")
        narrative.write_events_csv(kept, self._path("events_used.csv"))

        targets: Dict[str, np.ndarray] = {}
        for tax, series_id in cfg.federal_series.items():
            if series_id in self.levels.columns:
                targets[f"Federal {tax}"] = self.levels[series_id].to_numpy()
            else:
                logger.warning(f"Federal {tax} series {series_id} not in the panel", "narrative")
        targets["Narrative PIT"] = self.rates.pit_rate
        targets["Narrative CIT"] = self.rates.cit_rate

        predictors = {v: self.levels[v].to_numpy() for v in self.config.var.observables if v in self.levels.columns}
        for k, factor_id in enumerate(self.factor_model.factor_ids):
            predictors[factor_id] = self.trends[:, k]

        results = narrative.granger_battery(
            targets, predictors, cfg.granger_lags, self.config.run.workers,
            dates=self.panel.dates, quarter_dummies=cfg.quarter_dummies,
        )
        self._write_frame(pd.DataFrame([r.to_dict() for r in results]), "granger.csv", index=False)
        for lags in cfg.granger_lags:
            table = narrative.granger_table(results, lags, list(targets))
            self._table(f"granger_{lags}", f"Exogeneity tests, {lags} lags: F (p)", table)

        rate_summary = self.rates.to_frame().agg(["mean", "std", "max", "min"]).T
        rate_summary.columns = ["Mean", "Std. dev", "Max", "Min"]
        if "summary" in self.tables:
            base = pd.DataFrame(**self.tables["summary"]["frame"])
            combined = pd.concat([base, rate_summary])
            combined.index.name = "Variable"
            self._table("summary", "Summary statistics", combined)
            self._write_frame(combined, "summary_stats.csv")
        self.results["narrative"] = {
            "events_loaded": len(events),
            "events_used": len(kept),
            "granger_tests": len(results),
        }

    def _var_ids(self, model: FactorModel) -> List[str]:
        exogenous = self.config.var.tax_entry == "exogenous"
        return var_core.var_data_ids(self.config.var.observables, model.factor_ids, TAX_IDS, exogenous)

    def _var_data(self, trends: np.ndarray) -> np.ndarray:
        missing = [v for v in self.config.var.observables if v not in self.levels.columns]
        if missing:
            raise VarError(f"VAR observables missing from the balanced panel: {missing}")
        columns = [self.levels[v].to_numpy() for v in self.config.var.observables]
        columns += list(trends.T)
        if self.config.var.tax_entry == "endogenous":
            columns += [self.rates.pit_rate, self.rates.cit_rate]
        return np.column_stack(columns)

    def _fit_var(self, model: FactorModel, trends: np.ndarray) -> VarModel:
        exog = None
        if self.config.var.tax_entry == "exogenous":
            exog = np.column_stack([self.rates.pit_rate, self.rates.cit_rate])
        return var_core.fit_var(
            self._var_data(trends), self.config.var.p, self._var_ids(model),
            exog=exog, exog_ids=TAX_IDS if exog is not None else None,
        )

    def _stage_var(self) -> None:
        self.var_model = self._fit_var(self.factor_model, self.trends)
        var_core.save_var_manifest(self.var_model, self._path("var_model.json"))
        self.results["var"] = {
            "var_ids": self.var_model.var_ids,
            "p": self.var_model.p,
            "n_obs": self.var_model.n_obs,
            "spectral_radius": self.var_model.spectral_radius,
            "stable": self.var_model.is_stable,
            "tax_entry": self.config.var.tax_entry,
        }

    def _spec(self, var_ids: List[str], shock: str) -> SignRestrictionSpec:
        cfg = self.config.identify
        return identify.build_spec(var_ids, shock, cfg.signs, cfg.horizon, cfg.shock_size, cfg.penalty_slope)

    def _stage_identify(self) -> None:
        cfg = self.config.identify
        if self.config.var.tax_entry == "exogenous":
            self._current.status = "skipped"
            self.results["identify"] = {"skipped": "tax rates enter as exogenous regressors"}
            return
        H = self.config.analysis.horizon
        model = self.var_model
        summary = {}
        for k, shock in enumerate(cfg.shocks):
            result = ShockResult(shock, self._spec(model.var_ids, shock), stage_seed(self.config.seed, 1, k))
            if cfg.mode in ("rejection", "both"):
                result.rejection = identify.identify_tax_shock(
                    model, result.spec, cfg.draws, cfg.max_attempts, result.seed,
                    IdentificationMode.REJECTION, self.config.run.workers, H,
                )
            if cfg.mode in ("penalty", "both"):
                result.penalty = identify.identify_tax_shock(
                    model, result.spec, 1, cfg.penalty_draws, result.seed,
                    IdentificationMode.PENALTY, self.config.run.workers, H,
                )
            if result.rejection is not None and result.rejection.n_accepted >= 2:
                result.mt = analysis.median_target_select(result.rejection)
                result.benchmark = result.rejection.accepted[result.mt.selected_draw]
            elif result.rejection is not None:
                result.benchmark = result.rejection.accepted[0]
            else:
                result.benchmark = result.penalty.accepted[0]
            self.shocks.append(result)
            self._write_identification(result)
            summary[shock] = {
                "spec": result.spec.to_dict(),
                "rejection": None if result.rejection is None else result.rejection.to_dict(),
                "penalty": None if result.penalty is None else {
                    **result.penalty.to_dict(), "impulse": result.penalty.accepted[0].to_dict()},
                "median_target": None if result.mt is None else result.mt.to_dict(),
                "benchmark": result.benchmark.to_dict(),
            }
        self.results["identify"] = summary
        self._write_json(summary, "identification.json")

    def _write_identification(self, result: ShockResult) -> None:
        ids = self.var_model.var_ids
        if result.rejection is not None:
            rows = []
            for v in result.rejection.accepted:
                row = {"draw_index": v.draw_index, "penalty": v.penalty}
                row.update({f"q_{i}": x for i, x in zip(ids, v.q)})
                row.update({f"alpha_{i}": x for i, x in zip(ids, v.alpha)})
                rows.append(row)
            self._write_frame(pd.DataFrame(rows), f"draws_{result.name}.csv", index=False)
            cloud = analysis.summarize_draws(result.rejection.irfs, ids, self.config.analysis.level)
            self._write_frame(cloud.to_frame(), f"irf_draws_{result.name}.csv", index=False)
            self.figures.append(f"irf_draws_{result.name}.csv")
        if result.penalty is not None:
            point = result.penalty.irfs[0]
            frame = pd.DataFrame(point, columns=ids).rename_axis("horizon")
            self._write_frame(frame, f"irf_penalty_{result.name}.csv")
            self.figures.append(f"irf_penalty_{result.name}.csv")

    def _observable_loadings(self) -> pd.DataFrame:
        ids = self.config.analysis.observable_ids
        if ids is None:
            ids = [i for i in self.panel.ids if i not in self.var_model.var_ids]
        return analysis.estimate_observable_loadings(self.panel, ids, self.var_model.data, self.var_model.var_ids)

    def _stage_analysis(self) -> None:
        cfg = self.config.analysis
        model = self.var_model
        H = cfg.horizon
        observables = self.config.var.observables
        summary: Dict[str, Any] = {}

        loadings = self._observable_loadings()
        self._write_frame(loadings, "observable_loadings.csv")

        if self.config.var.tax_entry == "exogenous":
            for j, tax in enumerate(TAX_IDS):
                size = -self.config.identify.shock_size * float(np.std(model.exog[:, j], ddof=1))
                bands = analysis.bootstrap_exogenous_bands(
                    model, j, cfg.bootstrap, cfg.level, stage_seed(self.config.seed, 2, j), H, size,
                    self.config.run.workers, cfg.max_failure_rate,
                )
                self._analysis_outputs(tax, bands, loadings)
            self._cumulative_table()
            self.results["analysis"] = {"mode": "exogenous"}
            return

        for k, result in enumerate(self.shocks):
            result.bands = analysis.bootstrap_bands(
                model, result.benchmark, result.spec, cfg.bootstrap, cfg.level,
                stage_seed(self.config.seed, 2, k), H, self.config.run.workers,
                cfg.reidentify, self.config.identify.penalty_draws, cfg.max_failure_rate,
            )
            self._analysis_outputs(result.name, result.bands, loadings)
            table = analysis.fevd(model, result.benchmark, cfg.fevd_horizons)
            fevd_frame = table.to_frame().loc[[v for v in observables if v in model.var_ids] + TAX_IDS]
            self._write_frame(table.to_frame(), f"fevd_{result.name}.csv")
            self._table(f"fevd_{result.name}", f"Forecast error variance decomposition, {result.name} shock (%)",
                        fevd_frame)
            summary[result.name] = {"replications": int(result.bands.draws.shape[0])}
        self._cumulative_table()

        mt_rows = [
            {"shock": r.name, "selected_draw": r.mt.selected_draw, "gap": r.mt.gap,
             "mean_gap": float(np.mean(r.mt.gaps)), "draws": len(r.mt.gaps)}
            for r in self.shocks if r.mt is not None
        ]
        if mt_rows:
            mt_frame = pd.DataFrame(mt_rows).set_index("shock")
            self._write_frame(mt_frame, "median_target.csv")
            self._table("median_target", "Median-Target selection", mt_frame)

        report = analysis.reliability_report(
            self.panel,
            cfg.reliability_r or list(range(1, self.factor_model.r + 1)),
            {"PIT": self.rates.pit_rate, "CIT": self.rates.cit_rate},
            self._system_for,
            self._shock_series_for,
            TAX_IDS,
        )
        reliability = report.to_frame().set_index("r")
        self._write_frame(reliability, "reliability.csv")
        self._table("reliability", "Reliability across factor counts", reliability)
        self.results["analysis"] = summary

    def _cumulative_table(self) -> None:
        self._table("cumulative", "Cumulative responses to tax cuts",
                    analysis.side_by_side(self.cumulative))

    def _analysis_outputs(self, name: str, bands: IrfSet, loadings: pd.DataFrame) -> None:
        cfg = self.config.analysis
        self._write_frame(bands.to_frame(), f"irf_{name}.csv", index=False)
        self.figures.append(f"irf_{name}.csv")
        cumulative = analysis.cumulative_frame(bands, cfg.cumulative_horizons, self.config.var.observables,
                                               cfg.include_impact)
        self._write_frame(cumulative, f"cumulative_{name}.csv")
        self.cumulative[name] = cumulative
        if not loadings.empty:
            panel_irf = analysis.observable_irf_set(loadings, bands)
            self._write_frame(panel_irf.to_frame(), f"irf_panel_{name}.csv", index=False)
            self.figures.append(f"irf_panel_{name}.csv")

    def _system_for(self, model: FactorModel) -> VarModel:
        """The FAVAR rebuilt around `model`'s factors."""
        return self._fit_var(model, self._trends_for(model))

    def _shock_series_for(self, model: FactorModel, var_r: VarModel) -> Dict[str, np.ndarray]:
        """Penalty-identified shock paths of the FAVAR rebuilt around `model`'s factors."""
        if self.config.var.tax_entry == "exogenous":
            return {}
        series = {}
        for k, shock in enumerate(self.config.identify.shocks):
            draws = identify.identify_tax_shock(
                var_r, self._spec(var_r.var_ids, shock), 1, self.config.identify.penalty_draws,
                stage_seed(self.config.seed, 3, model.r, k), IdentificationMode.PENALTY,
                self.config.run.workers, self.config.identify.horizon,
            )
            series[shock] = analysis.structural_shock_series(var_r, draws.accepted[0])
        return series

    # ------------------------------------------------------------------ runner

    def run(self, until: str = "analysis") -> Dict[str, Any]:
        """Run stages up to and including `until`; returns the manifest."""
        if until not in STAGES:
            raise ValueError(f"Unknown stage '{until}'")
        self.config.require_inputs()
        self.output_dir.mkdir(parents=True, exist_ok=True)
        logger.section_header("TAX FAVAR PIPELINE")
        logger.info(f"Seed {self.config.seed}, config {self.config.config_hash()[:12]}", "config")

        failed: Optional[StageRecord] = None
        wrote_any = False
        for stage in STAGES[:STAGES.index(until) + 1]:
            record = StageRecord(stage)
            self.records.append(record)
            if failed is not None:
                record.status = "skipped"
                continue
            self._current = record
            logger.phase_start(stage)
            started = time.perf_counter()
            try:
                getattr(self, f"_stage_{stage}")()
                if record.status == "pending":
                    record.status = "ok"
            except (FavarError, np.linalg.LinAlgError) as exc:
                error = exc
                if not isinstance(exc, STAGE_ERRORS[stage]):
                    error = STAGE_ERRORS[stage](f"{type(exc).__name__}: {exc}")
                record.status = "failed"
                record.error = f"{type(error).__name__}: {error}"
                record.partial_outputs = wrote_any or bool(record.outputs)
                failed = record
                self.failure = error
                logger.error(f"Stage {stage} failed", stage, error)
            record.seconds = time.perf_counter() - started
            wrote_any = wrote_any or bool(record.outputs)
            logger.stage_timing(stage, record.seconds)
            logger.phase_complete(stage, record.status != "failed")
            self._current = None

        manifest = self.manifest(until, failed)
        (self.output_dir / MANIFEST_NAME).write_text(
            json.dumps(manifest, indent=2, sort_keys=True, default=_json_default)
        )
        return manifest

    def manifest(self, until: str, failed: Optional[StageRecord]) -> Dict[str, Any]:
        exit_code = 0
        if failed is not None:
            exit_code = STAGE_ERRORS[failed.name].exit_code
        return {
            "status": "failed" if failed else "ok",
            "failed_stage": failed.name if failed else None,
            "failure": failed.error if failed else None,
            "exit_code": exit_code,
            "until": until,
            "seed": self.config.seed,
            "config_hash": self.config.config_hash(),
            "config": self.config.model_dump(mode="json"),
            "versions": _versions(),
            "stages": [r.to_dict() for r in self.records],
            "tables": self.tables,
            "results": self.results,
            "figures": list(self.figures),
        }


def run_pipeline(config: PipelineConfig, until: str = "analysis") -> Dict[str, Any]:
    """Convenience wrapper: run the pipeline and return its manifest."""
    return FavarPipeline(config).run(until)


def load_manifest(output_dir: Path) -> Dict[str, Any]:
    path = Path(output_dir) / MANIFEST_NAME
    if not path.is_file():
        raise ReportError(f"No run manifest at {path}; run the pipeline first")
    return json.loads(path.read_text())
