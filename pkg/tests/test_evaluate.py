"""Energy comparison and MAPE: arithmetic oracles and the leakage guard."""

from __future__ import annotations

import io
import math

import pytest

from nodepower import evaluate, reference
from nodepower.evaluate import (
    EvalWorkload,
    LeakageError,
    compare_energy,
    in_sample_report,
    in_sample_workloads,
    mape,
    validation_report,
    validation_workloads,
    write_comparison_table,
)
from nodepower.model import (
    FittedModel,
    ModelForm,
    PowerParams,
    TdpConfig,
    preset,
)
from nodepower.reference import Architecture_LLM

TDP = TdpConfig(chip_tdp_kw=0.7)


def _workload(measured_kwh=100.0, nodes=4, duration_h=2.0, x=15.0):
    return EvalWorkload(
        workload_id="w",
        architecture=Architecture_LLM,
        nodes=nodes,
        duration_h=duration_h,
        measured_energy_kwh=measured_kwh,
        measured_p_avg_kw=measured_kwh / (nodes * duration_h),
        x=x,
    )


def _exact_model(power_kw):
    # with alpha=5 the saturation term at x=15 is exactly 0.75, so
    # p_idle + 7.5 hits the requested power with no rounding
    return FittedModel(
        form=ModelForm.LOG_ASYMPTOTIC,
        params=PowerParams(
            p_idle_kw=power_kw - 7.5, beta_comp_kw=10.0, alpha=5.0
        ),
        provenance={"kind": "test"},
    )


class TestWorkloadSets:
    def test_in_sample_drops_leakage_keeps_outlier(self):
        rows = in_sample_workloads()
        ids = [w.workload_id for w in rows]
        assert len(rows) == 8
        assert "smc-llama-70b-8" not in ids
        assert "bnl-resnet-1-1" in ids

    def test_validation_set_is_disjoint_from_training(self):
        training = {w.workload_id for w in in_sample_workloads()}
        validation = {w.workload_id for w in validation_workloads()}
        # one physical run appears in both tables under the same id; it is
        # excluded from training for exactly that reason
        assert not (training & validation)

    def test_x_is_log10_of_published_per_node_flops(self):
        row = next(
            w for w in in_sample_workloads()
            if w.workload_id == "smc-gpt3-175b-64"
        )
        assert row.x == pytest.approx(math.log10(9.40e16), rel=1e-12)


class TestCompareEnergy:
    def test_all_four_figures_and_ratios(self):
        w = _workload()
        m = preset("asymptotic")
        c = compare_energy(w, m, TDP)
        model_kwh = m.power_kw(15.0) * 4 * 2.0
        assert c.model_kwh == pytest.approx(model_kwh, rel=1e-12)
        assert c.chip_tdp_kwh == pytest.approx(0.7 * 8 * 4 * 2.0, rel=1e-12)
        assert c.node_tdp_kwh == pytest.approx(10.2 * 4 * 2.0, rel=1e-12)
        assert c.normalized["measured"] == 1.0
        assert c.normalized["model"] == pytest.approx(
            model_kwh / 100.0, rel=1e-12
        )

    def test_gpt3_node_rating_example(self):
        w = next(
            r for r in in_sample_workloads()
            if r.workload_id == "smc-gpt3-175b-64"
        )
        c = compare_energy(w, preset("arch-fe"), TDP)
        assert c.node_tdp_kwh == pytest.approx(620.16, abs=1e-9)
        assert c.normalized["node_tdp"] == pytest.approx(
            620.16 / 464.94, rel=1e-9
        )

    def test_perfect_model_normalizes_to_one(self):
        w = _workload(measured_kwh=100.0, nodes=4, duration_h=2.0)
        m = _exact_model(12.5)  # 12.5 kW * 8 node-hours = 100 kWh
        c = compare_energy(w, m, TDP)
        assert c.normalized["model"] == pytest.approx(1.0, rel=1e-12)

    def test_chip_never_exceeds_node_across_reference_rows(self):
        m = preset("arch-fe")
        for w in (*in_sample_workloads(), *validation_workloads()):
            c = compare_energy(w, m, TDP)
            assert c.chip_tdp_kwh <= c.node_tdp_kwh

    def test_missing_measured_energy_rejected(self):
        with pytest.raises(ValueError):
            _workload(measured_kwh=0.0)


class TestMape:
    def test_zero_error_fixed_point(self):
        w = _workload()
        m = _exact_model(12.5)
        rep = mape([compare_energy(w, m, TDP)], "in_sample")
        assert rep.mape["model"] == pytest.approx(0.0, abs=1e-10)

    def test_absolute_errors_do_not_cancel(self):
        w_over = _workload(measured_kwh=100.0)
        w_under = _workload(measured_kwh=100.0)
        m_over = _exact_model(13.75)  # 110 kWh -> +10%
        m_under = _exact_model(11.25)  # 90 kWh  -> -10%
        c1 = compare_energy(w_over, m_over, TDP)
        c2 = compare_energy(w_under, m_under, TDP)
        rep = mape([c1, c2], "in_sample")
        assert rep.mape["model"] == pytest.approx(10.0, rel=1e-12)

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            mape([], "in_sample")

    def test_unknown_scope_rejected(self):
        w = _workload()
        c = compare_energy(w, preset("asymptotic"), TDP)
        with pytest.raises(ValueError):
            mape([c], "sideways")

    def test_invariant_under_uniform_energy_rescaling(self):
        m = preset("arch-fe")
        base = [compare_energy(w, m, TDP) for w in in_sample_workloads()]
        rep1 = mape(base, "in_sample")
        scaled = [
            evaluate.EnergyComparison(
                workload_id=c.workload_id,
                measured_kwh=c.measured_kwh * 1000.0,
                model_kwh=c.model_kwh * 1000.0,
                chip_tdp_kwh=c.chip_tdp_kwh * 1000.0,
                node_tdp_kwh=c.node_tdp_kwh * 1000.0,
                normalized=dict(c.normalized),
                source=c.source,
            )
            for c in base
        ]
        rep2 = mape(scaled, "in_sample")
        assert rep2.mape == rep1.mape


class TestReports:
    def test_in_sample_preset_bands(self):
        rep = in_sample_report(preset("arch-fe"), TDP)
        m = rep.mape_report.mape
        assert m["model"] <= 15.0
        assert m["model"] < m["chip_tdp"] < m["node_tdp"]

    def test_validation_preset_bands(self):
        rep = validation_report(preset("arch-fe"), TDP)
        m = rep.mape_report.mape
        assert m["model"] <= 10.0
        assert rep.mape_report.scope == "out_of_sample"

    def test_leakage_raises(self):
        m = FittedModel(
            form=ModelForm.LOG_ASYMPTOTIC,
            params=PowerParams(
                p_idle_kw=1.86, beta_comp_kw=6.65, alpha=5.11
            ),
            provenance={
                "kind": "fit",
                "training_workload_ids": [
                    "smc-gpt3-175b-64", "dell-llama-70b-8",
                ],
            },
        )
        with pytest.raises(LeakageError, match="dell-llama-70b-8"):
            validation_report(m, TDP)

    def test_model_without_training_record_is_scored(self):
        m = FittedModel(
            form=ModelForm.LOG_ASYMPTOTIC,
            params=PowerParams(
                p_idle_kw=1.86, beta_comp_kw=6.65, alpha=5.11
            ),
            provenance={"kind": "hand-built"},
        )
        rep = validation_report(m, TDP)
        assert rep.mape_report.n_workloads == 4


class TestTableEmission:
    def test_csv_shape_and_percentages(self):
        rep = in_sample_report(preset("arch-fe"), TDP)
        buf = io.StringIO()
        write_comparison_table(rep.comparisons, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0].startswith("workload_id,measured_kwh")
        assert len(lines) == 1 + len(rep.comparisons)
        first = lines[1].split(",")
        # normalized percent column round-trips to the stored ratio
        assert float(first[5]) == pytest.approx(
            rep.comparisons[0].normalized["model"] * 100.0, abs=0.005
        )
        assert first[-1] == "published-summary"

    def test_path_destination(self, tmp_path):
        rep = validation_report(preset("arch-fe"), TDP)
        path = tmp_path / "t.csv"
        write_comparison_table(rep.comparisons, path)
        assert path.read_text().count("\n") == 5
