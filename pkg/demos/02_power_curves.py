"""Tabulate every preset power curve over the measured intensity span.

Prints plot-ready columns (x, then one column per preset). Pipe to a
file and feed your plotting tool of choice; the package itself stays
plot-free on purpose.
"""

import numpy as np

from nodepower import predict_power, preset, preset_names


def main():
    xs = np.linspace(10.0, 19.0, 19)
    models = {name: preset(name) for name in preset_names()}
    header = ["x"]
    for name, m in models.items():
        if m.form.value == "arch-fe":
            header += [f"{name}:llm", f"{name}:cnn"]
        else:
            header.append(name)
    print(",".join(header))
    for x in xs:
        row = [f"{x:.2f}"]
        for m in models.values():
            if m.form.value == "arch-fe":
                row.append(f"{predict_power(m.form, m.params, x, 'llm'):.3f}")
                row.append(f"{predict_power(m.form, m.params, x, 'cnn'):.3f}")
            else:
                row.append(f"{predict_power(m.form, m.params, x):.3f}")
        print(",".join(row))


if __name__ == "__main__":
    main()
