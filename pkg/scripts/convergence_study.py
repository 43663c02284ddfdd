"""Step-halving study of the chart map against closed-form offset charts.

For the unit circle in the plane and the unit sphere in R^3 the chart is
known exactly: normal rays are straight lines over the intrinsic exponential.
Prints the error table and the fitted order for each case.
"""

import argparse
import math

import numpy as np

from fermijet.catalog import circle_in_plane, sphere2_in_r3
from fermijet.coords import FermiChart, fermi_map
from fermijet.geometry import adapted_frame


def chart_for(case):
    g, sub = case.build()
    return FermiChart(g, sub, adapted_frame(g, sub, case.h))


def sphere_exact(chart, x, u):
    p, E, nu = chart.frame.point, chart.frame.e_tan, chart.frame.e_nor[:, 0]
    r = float(np.linalg.norm(x))
    q = math.cos(r) * p + math.sin(r) / r * (E @ x)
    return (1.0 + u * float(nu @ p)) * q


def study(chart, exact, points, steps):
    errs = []
    for n in steps:
        errs.append(max(float(np.max(np.abs(fermi_map(chart, x, [u], nsteps=n) - exact(x, u))))
                        for x, u in points))
    order = -np.polyfit(np.arange(len(steps)), np.log2(errs), 1)[0]
    return errs, float(order)


def main(argv=None):
    p = argparse.ArgumentParser(description="fitted RK4 order of the chart map")
    p.add_argument("--steps", type=int, nargs="+", default=[8, 16, 32, 64, 128])
    args = p.parse_args(argv)

    circ = chart_for(circle_in_plane())
    sph = chart_for(sphere2_in_r3())
    cases = {
        "circle-in-plane": (circ, lambda x, u: (1 + u) * np.array([math.cos(x[0]), math.sin(x[0])]),
                            [(np.array([0.45]), 0.1), (np.array([-0.3]), 0.3)]),
        "sphere2-in-r3": (sph, lambda x, u: sphere_exact(sph, x, u),
                          [(np.array([0.3, -0.25]), 0.2), (np.array([-0.1, 0.35]), -0.15)]),
    }
    for name, (chart, exact, pts) in cases.items():
        errs, order = study(chart, exact, pts, args.steps)
        print(name)
        for n, e in zip(args.steps, errs):
            print(f"  steps {n:5d}  max error {e:.3e}")
        print(f"  fitted order {order:.2f}")


if __name__ == "__main__":
    main()
