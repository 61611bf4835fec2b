"""Count training operations for every bundled workload config.

The per-iteration count comes from the architecture section of each
config; dividing by the node count gives the intensity measure the
power models run on. One bundled row (the 13B run) carries a recorded
total that disagrees with its own architecture arithmetic, and the
loader says so out loud.
"""

import warnings

from nodepower.data import desk_dir
from nodepower.ingest import load_workload_config, with_compute


def main():
    print(f"{'workload':24s} {'flops/iter':>12s} {'flops/node':>12s} {'x':>8s}")
    for path in sorted(desk_dir().glob("*.ini")):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            record = with_compute(load_workload_config(path))
        c = record.compute
        flag = " (!)" if caught else ""
        print(
            f"{record.workload_id:24s} {c.flops_per_iteration:12.3e} "
            f"{c.flops_per_node:12.3e} {c.log_intensity:8.4f}{flag}"
        )
        for w in caught:
            print(f"    note: {w.message}")


if __name__ == "__main__":
    main()
