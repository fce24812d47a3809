"""Experiment config validation, staged pipeline, cost accounting, CLI."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from usct.config import ExperimentConfig
from usct.container import read_tensors
from usct.errors import ConfigurationError, UsctError
from usct.pipeline import (cost_table_from_spec, emit_cost_table,
                           load_fwi, load_upscaler, run_pipeline, run_stage)

TINY = dict(
    seed=42,
    phantom_count=6,
    grid_n=32,
    points_per_wavelength=8.0,
    time_steps=96,
    sponge_width=10,
    body_radius_fraction=0.5,
    ring_radius_fraction=0.38,
    dense_sources=2,
    dense_receivers=8,
    sparse_sources=2,
    sparse_receivers=4,
    upscaler_epochs=2,
    upscaler_batch_cubes=2,
    upscaler_base_channels=4,
    fwi_epochs=2,
    fwi_batch=2,
    fwi_encoded_channels=2,
    fwi_base_channels=4,
    fwi_channel_cap=8,
    holdout_fraction=0.34,
)


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = ExperimentConfig(**TINY)
    report = run_pipeline(cfg, out)
    return cfg, out, report


class TestConfig:
    def test_defaults_resolve(self):
        cfg = ExperimentConfig(**TINY)
        assert cfg.dx > 0 and cfg.dt > 0 and cfg.ring_radius > 0

    def test_round_trip_json(self, tmp_path):
        cfg = ExperimentConfig(**TINY)
        p = tmp_path / "c.json"
        p.write_text(cfg.to_json())
        again = ExperimentConfig.load(p)
        assert again.to_json() == cfg.to_json()

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigurationError, match="unknown"):
            ExperimentConfig.from_dict({"not_a_field": 1})

    def test_non_dividing_densities_rejected(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(**TINY | {"sparse_receivers": 3})

    def test_body_must_fit_inside_ring(self):
        with pytest.raises(ConfigurationError, match="annulus"):
            ExperimentConfig(**TINY | {"body_radius_fraction": 0.95})


class TestPipeline:
    def test_report_written_and_sane(self, tiny_run):
        cfg, out, report = tiny_run
        assert (out / "report.json").exists()
        assert (out / "report.csv").exists()
        doc = json.loads((out / "report.json").read_text())
        assert len(doc["ssim"]) == cfg.n_test()
        assert doc["n_train"] + doc["n_test"] == cfg.phantom_count
        assert all(-1.0 <= s <= 1.0 for s in doc["ssim"])
        ordering = doc["fractions_above"]
        assert ordering[0] >= ordering[1] >= ordering[2]

    def test_artifacts_reloadable_without_rerun(self, tiny_run):
        cfg, out, _ = tiny_run
        model = load_upscaler(cfg, out)
        assert model.in_density == (2, 4)
        fwi = load_fwi(cfg, out)
        assert fwi.in_density == (2, 8)
        cubes = read_tensors(out / "cubes_dense.apst")
        assert len(cubes) == cfg.phantom_count

    def test_evaluate_stage_rerun_is_stable(self, tiny_run):
        cfg, out, _ = tiny_run
        before = (out / "report.json").read_bytes()
        run_stage("evaluate", cfg, out)
        assert (out / "report.json").read_bytes() == before

    def test_status_reports_completion(self, tiny_run):
        _, out, _ = tiny_run
        status = json.loads((out / "status.json").read_text())
        assert status["completed_stages"][-1] == "evaluate"

    def test_degenerate_equal_densities_skips_upscaler(self, tmp_path):
        cfg = ExperimentConfig(**TINY | {"sparse_receivers": 8,
                                         "fwi_epochs": 1,
                                         "upscaler_epochs": 1})
        report = run_pipeline(cfg, tmp_path)
        meta = json.loads((tmp_path / "upscaler.json").read_text())
        assert meta["skipped"] is True
        assert not (tmp_path / "upscaled.apst").exists()
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["degenerate_dense_input"] is True

    def test_stage_failure_names_stage(self, tmp_path):
        cfg = ExperimentConfig(**TINY)
        with pytest.raises(UsctError, match="simulate"):
            # simulate before phantoms exist
            run_stage("simulate", cfg, tmp_path)
        status = json.loads((tmp_path / "status.json").read_text())
        assert status["failed_stage"] == "simulate"


class TestCostTable:
    ROWS = [
        {"baseline": {"n_sources": 32, "n_receivers": 64, "ssim": 0.7468},
         "aps": {"in_sources": 32, "in_receivers": 32,
                 "out_sources": 32, "out_receivers": 64, "ssim": 0.7455}},
        {"baseline": {"n_sources": 32, "n_receivers": 128, "ssim": 0.7602},
         "aps": {"in_sources": 32, "in_receivers": 32,
                 "out_sources": 32, "out_receivers": 128, "ssim": 0.7595}},
        {"baseline": {"n_sources": 32, "n_receivers": 256, "ssim": 0.8369},
         "aps": {"in_sources": 32, "in_receivers": 32,
                 "out_sources": 32, "out_receivers": 256, "ssim": 0.8068}},
        {"baseline": {"n_sources": 32, "n_receivers": 512, "ssim": 0.8734},
         "aps": {"in_sources": 32, "in_receivers": 32,
                 "out_sources": 32, "out_receivers": 512, "ssim": 0.8431}},
    ]

    @staticmethod
    def _parse(csv_text):
        import csv as _csv
        import io as _io
        return list(_csv.reader(_io.StringIO(csv_text)))

    def test_element_counts_and_reductions_exact(self):
        rows = self._parse(emit_cost_table(self.ROWS))[1:]
        assert [int(r[2]) for r in rows] == [96, 160, 288, 544]
        assert [float(r[7]) for r in rows] == [1.5, 2.5, 4.5, 8.5]

    def test_zero_degradation_for_identical_reports(self):
        rows = [{"baseline": {"n_sources": 8, "n_receivers": 32, "ssim": 0.5},
                 "aps": {"in_sources": 8, "in_receivers": 8,
                         "out_sources": 8, "out_receivers": 32, "ssim": 0.5}}]
        parsed = self._parse(emit_cost_table(rows))[1]
        assert float(parsed[6]) == 0.0

    def test_spec_file_with_report_reference(self, tmp_path):
        report = {"ssim_mean": 0.625}
        (tmp_path / "rep.json").write_text(json.dumps(report))
        spec = {"rows": [{
            "baseline": {"n_sources": 8, "n_receivers": 32,
                         "ssim": {"report": "rep.json"}},
            "aps": {"in_sources": 8, "in_receivers": 8,
                    "out_sources": 8, "out_receivers": 32, "ssim": 0.6}}]}
        (tmp_path / "rows.json").write_text(json.dumps(spec))
        csv_text = cost_table_from_spec(tmp_path / "rows.json", tmp_path)
        assert (tmp_path / "cost_table.csv").read_text() == csv_text
        assert "0.625" in csv_text


class TestCli:
    def test_tables_subcommand(self, tmp_path):
        spec = {"rows": [{
            "baseline": {"n_sources": 32, "n_receivers": 128, "ssim": 0.7602},
            "aps": {"in_sources": 32, "in_receivers": 32,
                    "out_sources": 32, "out_receivers": 128, "ssim": 0.7595}}]}
        (tmp_path / "rows.json").write_text(json.dumps(spec))
        proc = subprocess.run(
            [sys.executable, "-m", "usct", "tables",
             "--config", str(tmp_path / "rows.json"),
             "--out", str(tmp_path)],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "2.5" in proc.stdout
        assert (tmp_path / "cost_table.csv").exists()

    def test_bad_config_exits_nonzero_with_diagnostic(self, tmp_path):
        (tmp_path / "bad.json").write_text("{not json")
        proc = subprocess.run(
            [sys.executable, "-m", "usct", "phantoms",
             "--config", str(tmp_path / "bad.json")],
            capture_output=True, text=True)
        assert proc.returncode != 0
        assert "error" in proc.stderr

    def test_stage_subcommand_runs(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(TINY))
        proc = subprocess.run(
            [sys.executable, "-m", "usct", "phantoms",
             "--config", str(cfg_path), "--out", str(tmp_path / "o")],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "o" / "phantoms.apst").exists()

    def test_failed_stage_diagnostic_names_stage(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(TINY))
        proc = subprocess.run(
            [sys.executable, "-m", "usct", "evaluate",
             "--config", str(cfg_path), "--out", str(tmp_path / "o2")],
            capture_output=True, text=True)
        assert proc.returncode == 1
        assert "evaluate" in proc.stderr
