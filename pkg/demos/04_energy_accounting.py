"""Score the shipped model against measured energies and TDP baselines.

Compares three estimators on the published training-run summaries: the
calibrated per-architecture model, a flat 0.7 kW-per-GPU chip rating,
and a flat 10.2 kW node rating. The rating-based estimates overshoot
every run; the point of the model is the gap between those columns.
"""

from nodepower import TdpConfig, preset
from nodepower.evaluate import in_sample_report, validation_report


def show(report, title):
    print(title)
    print(f"{'workload':24s} {'measured':>10s} {'model':>8s} "
          f"{'chip':>8s} {'node':>8s}")
    for c in report.comparisons:
        print(f"{c.workload_id:24s} {c.measured_kwh:10.1f} "
              f"{c.normalized['model'] * 100:7.1f}% "
              f"{c.normalized['chip_tdp'] * 100:7.1f}% "
              f"{c.normalized['node_tdp'] * 100:7.1f}%")
    m = report.mape_report.mape
    print(f"{'MAPE':24s} {'':10s} {m['model']:7.1f}% "
          f"{m['chip_tdp']:7.1f}% {m['node_tdp']:7.1f}%")
    print()


def main():
    fitted = preset("arch-fe")
    tdp = TdpConfig(chip_tdp_kw=0.7, node_tdp_kw=10.2)
    show(in_sample_report(fitted, tdp),
         "calibration rows (energies in kWh, estimates as % of measured)")
    show(validation_report(fitted, tdp),
         "held-out validation rows")


if __name__ == "__main__":
    main()
