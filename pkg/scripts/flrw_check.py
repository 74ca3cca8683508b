"""Homogeneous FLRW: grid evolution against the Friedmann background.

Evolves the flrw scenario and, at each recorded time, prints the errors of
the frame scale 1/a, the expansion H and the energy density against the
background integrated by scipy at tight tolerance.  With a fixed dt the error
is RK4 truncation, so halving dt should cut it by about 16.

    python scripts/flrw_check.py --dt 1e-2 5e-3 2.5e-3 --t-final 0.5
"""

import argparse

import numpy as np

from fluidframe.evolution import evolve
from fluidframe.initial_data import build_reduced_initial_data
from fluidframe.reduced_rhs import ReducedSystem
from fluidframe.scenarios import make_scenario
from fluidframe.state_grid import RHO


def errors(dt, t_final, n, gamma):
    sc = make_scenario("flrw", n, gamma=gamma)
    fs = build_reduced_initial_data(sc.data, sc.grid)
    system = ReducedSystem(sc.data.eos, sc.data.kappa_const)
    bg = sc.background

    def monitor(cur):
        ref = bg.state(cur.t)
        z = cur.z[:, 0, 0, 0]
        return {
            "t": cur.t,
            "inv_a": abs(z[3] - 1.0 / bg.a(cur.t)),
            "H": abs(z[24] - float(ref["H"])),
            "rho": abs(z[RHO] - float(ref["rho"])),
        }

    return evolve(fs, system, t_final, dt=dt, cadence=max(1, int(round(0.1 / dt))), monitor=monitor).rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dt", type=float, nargs="+", default=[1e-2, 5e-3, 2.5e-3])
    ap.add_argument("--t-final", type=float, default=0.5)
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--gamma", type=float, default=2.0)
    args = ap.parse_args()

    finals = []
    for dt in args.dt:
        rows = errors(dt, args.t_final, args.n, args.gamma)
        print(f"dt={dt:g}")
        for r in rows:
            print(f"  t={r['t']:.4f}  1/a {r['inv_a']:.3e}  H {r['H']:.3e}  rho {r['rho']:.3e}")
        finals.append(max(rows[-1]["inv_a"], rows[-1]["H"], rows[-1]["rho"]))
    if len(finals) > 1:
        ratios = np.log(np.array(finals[:-1]) / np.array(finals[1:])) / np.log(
            np.array(args.dt[:-1]) / np.array(args.dt[1:])
        )
        print("observed orders in dt: " + " ".join(f"{o:.2f}" for o in ratios))


if __name__ == "__main__":
    main()
