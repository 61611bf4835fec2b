"""Extrapolate one node's power draw to a fleet: energy, carbon, swing.

Loads the scenario spec next to this script. Change the INI and rerun;
nothing here is hard-coded. The same computation is exposed as
``nodepower scenario --spec demos/fleet.ini`` on the command line.
"""

from pathlib import Path

from nodepower.scenario import (
    format_scenario_report,
    load_scenario_spec,
    run_scenario,
)


def main():
    spec = load_scenario_spec(Path(__file__).with_name("fleet.ini"))
    result = run_scenario(spec)
    print(format_scenario_report(spec, result))


if __name__ == "__main__":
    main()
