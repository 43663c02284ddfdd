"""Deviation of measured from linear-order predicted derivatives along epsilon families.

The deviation is quadratic in the curvature, so it should fall by about 4x
each time epsilon halves.
"""

import argparse

from fermijet import verify as V
from fermijet.catalog import eps_perturbed_flat, graph_family


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--eps", type=float, nargs="+", default=[2e-2, 1e-2, 5e-3, 2.5e-3, 1.25e-3])
    p.add_argument("--order", type=int, default=3)
    args = p.parse_args(argv)

    cases = [eps_perturbed_flat(s) for s in args.seeds] + [graph_family()]
    print(f"{'family':28s} " + " ".join(f"{e:>10.2e}" for e in args.eps) + "   exponent")
    for case in cases:
        fam = V.FamilyCase(lambda e, c=case: c.build(eps=e), case.h)
        devs, expo = V.eps_scaling(fam, args.order, args.eps)
        print(f"{case.name:28s} " + " ".join(f"{d:10.2e}" for d in devs) + f"   {expo:8.3f}")
        rep = V.linearized_compare(fam, args.order, eps=args.eps[-1])
        print(f"{'':28s} slope check at eps={args.eps[-1]:g}: "
              f"{'pass' if rep.passed else 'FAIL'} ({len(rep.rows)} rows, max abs {rep.max_abs:.1e})")


if __name__ == "__main__":
    main()
