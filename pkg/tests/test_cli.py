"""Command-line surface: happy paths, artifact layout, and the exit-code map."""

from __future__ import annotations

import csv
import filecmp
import json
from pathlib import Path

import pytest

from nodepower.cli import main
from nodepower.data import desk_dir, desk_exclusions, desk_manifest
from nodepower.model import load_model, preset, save_model

MANIFEST = str(desk_manifest())
EXCLUSIONS = str(desk_exclusions())

SCENARIO_INI = """\
[scenario]
nodes = 2500
gpus_per_node = 8
duration_days = 90
per_node_power_kw = 7.3
pue = 1.1
conversion_loss_fraction = 0.10
per_node_swing_kw = 2.4

[carbon_intensity_kg_per_mwh]
grid_average = 428
nonbaseload = 806
"""


@pytest.fixture()
def scenario_file(tmp_path):
    path = tmp_path / "fleet.ini"
    path.write_text(SCENARIO_INI)
    return str(path)


class TestFlops:
    def test_prints_totals_and_writes_csv(self, tmp_path, capsys):
        config = desk_dir() / "smc-gpt3-175b-64.ini"
        rc = main(["flops", str(config), "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "smc-gpt3-175b-64" in out
        table = tmp_path / "flops.csv"
        rows = list(csv.DictReader(table.open()))
        assert len(rows) == 1
        assert float(rows[0]["flops_per_iteration"]) == pytest.approx(
            6.01e18, rel=0.01
        )

    def test_missing_config_is_input_error(self, capsys):
        rc = main(["flops", "/nonexistent/w.ini"])
        assert rc == 3
        err = capsys.readouterr().err
        assert err.startswith("nodepower: error: input:")
        assert "\n" not in err.rstrip("\n")


class TestFit:
    def test_writes_model_and_reports(self, tmp_path, capsys):
        out = tmp_path / "run"
        rc = main([
            "fit", "--manifest", MANIFEST, "--exclusions", EXCLUSIONS,
            "--form", "asymptotic", "--out", str(out),
            "--pin-timestamp", "2026-01-01T00:00:00Z",
        ])
        assert rc == 0
        model_path = out / "model-asymptotic.json"
        fitted = load_model(model_path)
        assert fitted.params.alpha == pytest.approx(5.44, abs=0.05)
        assert (out / "fit-report.txt").exists()
        report = capsys.readouterr().out
        assert "alpha" in report and "robust" in report.lower()
        with (out / "fit-report.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert {r["parameter"] for r in rows} >= {"alpha", "beta_comp_kw"}

    def test_two_runs_are_byte_identical(self, tmp_path):
        args = [
            "fit", "--manifest", MANIFEST, "--exclusions", EXCLUSIONS,
            "--form", "arch-fe",
            "--pin-timestamp", "2026-01-01T00:00:00Z",
        ]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main([*args, "--out", str(a)]) == 0
        assert main([*args, "--out", str(b)]) == 0
        names = sorted(p.name for p in a.iterdir())
        match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
        assert sorted(match) == names and not mismatch and not errors

    def test_single_workload_manifest_is_degenerate(self, tmp_path, capsys):
        manifest = tmp_path / "manifest.csv"
        src = desk_dir()
        manifest.write_text(
            "config,trace\n"
            f"{src}/smc-gpt3-175b-64.ini,"
            f"{src}/traces/smc-gpt3-175b-64.csv\n"
        )
        rc = main(["fit", "--manifest", str(manifest)])
        assert rc == 4
        assert capsys.readouterr().err.startswith(
            "nodepower: error: degenerate-data:"
        )

    def test_unknown_exclusion_id(self, tmp_path, capsys):
        bad = tmp_path / "exclusions.csv"
        bad.write_text("workload_id,reason\nno-such-run,outlier\n")
        rc = main([
            "fit", "--manifest", MANIFEST, "--exclusions", str(bad),
        ])
        assert rc == 7
        assert capsys.readouterr().err.startswith(
            "nodepower: error: unknown-workload:"
        )


class TestPredict:
    def test_preset_prediction(self, capsys):
        config = desk_dir() / "smc-gpt3-175b-64.ini"
        rc = main(["predict", "--preset", "arch-fe", "--config", str(config)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "kW" in out and "kWh" in out

    def test_model_and_preset_are_exclusive(self, tmp_path, capsys):
        config = desk_dir() / "smc-gpt3-175b-64.ini"
        with pytest.raises(SystemExit) as exc:
            main([
                "predict", "--preset", "arch-fe", "--model", "m.json",
                "--config", str(config),
            ])
        assert exc.value.code == 2


class TestEvaluate:
    def test_published_scope_tables(self, tmp_path, capsys):
        rc = main([
            "evaluate", "--preset", "arch-fe", "--scope", "both",
            "--out", str(tmp_path),
        ])
        assert rc == 0
        blob = json.loads((tmp_path / "mape.json").read_text())
        assert blob["in_sample_mape"]["model"] == pytest.approx(
            10.77, abs=0.05
        )
        assert blob["out_of_sample_mape"]["model"] == pytest.approx(
            5.26, abs=0.05
        )
        in_rows = list(
            csv.DictReader((tmp_path / "in-sample-comparisons.csv").open())
        )
        assert len(in_rows) == 8
        val_rows = list(
            csv.DictReader((tmp_path / "validation-comparisons.csv").open())
        )
        assert len(val_rows) == 4

    def test_leakage_detected_from_model_file(self, tmp_path, capsys):
        # a model whose training record claims a validation workload
        clean = tmp_path / "clean.json"
        save_model(preset("asymptotic"), clean)
        doc = json.loads(clean.read_text())
        doc["provenance"] = {
            "kind": "fit",
            "training_workload_ids": ["dell-llama-70b-8"],
        }
        path = tmp_path / "tainted.json"
        path.write_text(json.dumps(doc))
        rc = main(["evaluate", "--model", str(path), "--scope", "validation"])
        assert rc == 6
        assert capsys.readouterr().err.startswith(
            "nodepower: error: leakage:"
        )


class TestLoocv:
    def test_summary_artifacts(self, tmp_path, capsys):
        # no exclusions: the stability scan covers every workload, which is
        # how the outlier shows up as the most divergent holdout
        rc = main([
            "loocv", "--manifest", MANIFEST, "--out", str(tmp_path),
        ])
        assert rc == 0
        summary = list(
            csv.DictReader((tmp_path / "loocv-summary.csv").open())
        )
        alpha = next(r for r in summary if r["parameter"] == "alpha")
        assert 3.0 <= float(alpha["cov_percent"]) <= 20.0
        assert alpha["most_divergent"] == "bnl-resnet-1-1"
        holdouts = list(
            csv.DictReader((tmp_path / "loocv-holdouts.csv").open())
        )
        assert len({r["holdout_workload_id"] for r in holdouts}) == 9


class TestScenario:
    def test_report_and_json(self, tmp_path, capsys, scenario_file):
        rc = main([
            "scenario", "--spec", scenario_file, "--out", str(tmp_path),
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "48.18" in out  # facility GWh for this spec
        blob = json.loads((tmp_path / "scenario.json").read_text())
        assert blob["result"]["it_energy_gwh"] == pytest.approx(
            39.42, abs=0.01
        )
        assert blob["result"]["aggregate_swing_mw"] == pytest.approx(6.0)

    def test_loss_convention_override(self, capsys, scenario_file):
        rc = main([
            "scenario", "--spec", scenario_file,
            "--loss-convention", "multiply",
        ])
        assert rc == 0
        assert "47.70" in capsys.readouterr().out  # 39.42 * 1.1 * 1.1

    def test_missing_spec_file(self, capsys):
        rc = main(["scenario", "--spec", "/nonexistent/fleet.ini"])
        assert rc == 3
        assert capsys.readouterr().err.startswith("nodepower: error: input:")


class TestUsage:
    def test_no_arguments_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_command(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["transmogrify"])
        assert exc.value.code == 2
