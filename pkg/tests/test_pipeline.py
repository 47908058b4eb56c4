"""
End-to-end runs of the pipeline and command line on the synthetic fixture.
"""

import json

import numpy as np
import pandas as pd
import pytest

from main import main
from tax_favar.core.config import load_config
from tax_favar.core.errors import ReportError
from tax_favar.core.pipeline import MANIFEST_NAME, FavarPipeline, load_manifest, stage_seed
from tax_favar.core.report import emit_report, markdown_table
from tax_favar.core.tools.synthetic import generate_fixture


def _failing_identification(config):
    identify = config.identify.model_copy(
        update={"signs": {"PIT": "+"}, "shocks": ["PIT"], "mode": "rejection", "max_attempts": 512}
    )
    return config.model_copy(update={"identify": identify})


class TestFixture:
    def test_generation_is_deterministic(self):
        a, b = generate_fixture(3), generate_fixture(3)
        pd.testing.assert_frame_equal(a.panel.to_frame(), b.panel.to_frame())
        assert a.events == b.events
        assert a.panel.n_series == 12
        assert any(not e.exogenous for e in a.events)

    def test_stage_seeds_are_distinct(self):
        seeds = {stage_seed(7, 1, 0), stage_seed(7, 1, 1), stage_seed(7, 2, 0), stage_seed(7, 3, 2, 0)}
        assert len(seeds) == 4
        assert stage_seed(7, 1, 0) == stage_seed(7, 1, 0)


class TestFailedRun:
    def test_identification_failure_names_stage(self, fixture_files):
        config = _failing_identification(load_config(fixture_files["config"]))
        manifest = FavarPipeline(config).run("analysis")
        assert manifest["status"] == "failed"
        assert manifest["failed_stage"] == "identify"
        assert manifest["exit_code"] == 15
        statuses = {s["name"]: s["status"] for s in manifest["stages"]}
        assert statuses["var"] == "ok"
        assert statuses["analysis"] == "skipped"
        assert "IdentificationError" in manifest["failure"]
        assert json.loads((config.paths.output_dir / MANIFEST_NAME).read_text())["failed_stage"] == "identify"

        report = emit_report(load_manifest(config.paths.output_dir))
        assert "Failed stage: **identify**" in report
        assert "## Stages" in report

    def test_partial_run_stops_at_stage(self, fixture_files):
        config = load_config(fixture_files["config"])
        manifest = FavarPipeline(config).run("factors")
        assert manifest["status"] == "ok"
        assert [s["name"] for s in manifest["stages"]] == ["panel", "factors"]
        out = config.paths.output_dir
        for name in ("panel_standardized.csv", "summary_stats.csv", "factors.csv", "loadings.csv", "ic.csv"):
            assert (out / name).is_file()
        factors = pd.read_csv(out / "factors.csv")
        assert list(factors.columns) == ["date", "F1", "F2"]

    def test_missing_input_fails_before_any_stage(self, fixture_files):
        fixture_files["panel"].unlink()
        assert main(["ingest", "--config", str(fixture_files["config"])]) == 2


class TestReport:
    def test_manifest_sections_required(self):
        with pytest.raises(ReportError, match="lacks sections"):
            emit_report({"status": "ok"})

    def test_report_without_manifest(self, tmp_path):
        assert main(["report", "--output-dir", str(tmp_path)]) == 17

    def test_markdown_table(self):
        frame = pd.DataFrame({"4": [2.814, 1.0]}, index=pd.Index(["GDP", "CPI"], name="variable"))
        text = markdown_table(frame, digits=2, index_label="Variable")
        assert text.splitlines()[0] == "| Variable | 4 |"
        assert "| GDP | 2.81 |" in text

    def test_stage_timings_do_not_reach_the_report(self):
        def manifest(seconds):
            return {"status": "ok", "seed": 7, "config_hash": "abc", "tables": {},
                    "stages": [{"name": "panel", "status": "ok", "seconds": seconds}]}

        fast, slow = emit_report(manifest(0.01)), emit_report(manifest(12.5))
        assert fast == slow
        assert "| panel | ok |" in fast


@pytest.mark.slow
class TestFullRun:
    def test_run_all_writes_artifacts_and_report(self, fixture_files):
        config_path = str(fixture_files["config"])
        assert main(["run-all", "--config", config_path]) == 0
        out = load_config(fixture_files["config"]).paths.output_dir
        for name in (
            "narrative_rates.csv", "granger.csv", "smoothing.csv", "var_model.json",
            "identification.json", "draws_PIT.csv", "irf_PIT.csv", "irf_CIT.csv",
            "cumulative_PIT.csv", "fevd_PIT.csv", "median_target.csv", "reliability.csv",
            "irf_panel_PIT.csv", "report.md",
        ):
            assert (out / name).is_file(), name

        manifest = load_manifest(out)
        assert manifest["status"] == "ok"
        assert manifest["seed"] == 7
        assert {s["status"] for s in manifest["stages"]} == {"ok"}

        irf = pd.read_csv(out / "irf_PIT.csv")
        assert (irf["lower"] <= irf["median"] + 1e-12).all()
        assert (irf["median"] <= irf["upper"] + 1e-12).all()
        fevd = pd.read_csv(out / "fevd_PIT.csv", index_col=0)
        assert ((fevd >= 0) & (fevd <= 100)).all().all()
        reliability = pd.read_csv(out / "reliability.csv")
        assert reliability["r"].tolist() == [1, 2, 3, 4]
        assert reliability["corr_PIT"].between(-1, 1).all()
        for column in ("RMSE_PIT", "Explained_PIT", "RMSE_CIT", "Explained_CIT"):
            assert column in reliability.columns, column
        assert reliability["Explained_PIT"].between(0, 100).all()
        assert not np.allclose(reliability["Explained_PIT"], reliability["PC_share"])

        report = (out / "report.md").read_text()
        for heading in ("## Exogeneity of the narrative rates", "## Panel and factors",
                        "## Responses to tax cuts", "## Reliability", "LR = 318.72",
                        "### Cumulative responses to tax cuts"):
            assert heading in report
        assert main(["report", "--config", config_path]) == 0

    def test_numeric_outputs_are_reproducible(self, fixture_files, tmp_path):
        config = load_config(fixture_files["config"])
        first = FavarPipeline(config.model_copy(
            update={"paths": config.paths.model_copy(update={"output_dir": tmp_path / "a"})})).run()
        second = FavarPipeline(config.model_copy(
            update={"paths": config.paths.model_copy(update={"output_dir": tmp_path / "b"})})).run()
        assert first["status"] == second["status"] == "ok"
        csvs = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
        assert csvs
        for name in csvs:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

        def report_lines(directory):
            text = emit_report(load_manifest(directory))
            # The config hash covers output_dir.
            return [line for line in text.splitlines() if not line.startswith("- Config hash")]

        assert report_lines(tmp_path / "a") == report_lines(tmp_path / "b")
        assert "seconds" not in emit_report(load_manifest(tmp_path / "a"))

    def test_exogenous_tax_entry(self, fixture_files):
        config = load_config(fixture_files["config"], {"r": 2})
        config = config.model_copy(update={"var": config.var.model_copy(update={"tax_entry": "exogenous"})})
        manifest = FavarPipeline(config).run()
        assert manifest["status"] == "ok"
        statuses = {s["name"]: s["status"] for s in manifest["stages"]}
        assert statuses["identify"] == "skipped"
        assert (config.paths.output_dir / "irf_PIT.csv").is_file()
