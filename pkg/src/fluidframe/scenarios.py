"""Closed-form Cauchy data sets on the periodic unit cube.

Every scenario returns a :class:`Scenario` holding the Cauchy data, the grid
and, where one exists, an exact solution in fluid gauge for comparisons.

* ``minkowski``: flat slice, fluid at rest.  Exact only for kappa_const = 0.
* ``flrw``: homogeneous expanding slice, H from the Hamiltonian constraint.
* ``perturbed_flrw``: the same spacetime seen from the tilted slice
  t_F = eps sin(2 pi k.x).  The data are exact; the development is FLRW with
  every fluid element at cosmic time T(x) + t.
* ``boosted_uniform``: flat slice, uniform fluid with 3-velocity beta along
  axis 1.  Constraints hold only for kappa_const = 0.
* ``gravitational_wave``: linearized plane wave in vacuum (kappa_const = 0),
  test fluid at rest; constraints hold to second order in the amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .eos import EquationOfState, make_eos
from .initial_data import CauchyData, three_velocity_to_v
from .state_grid import Grid

SCENARIOS = ("minkowski", "flrw", "perturbed_flrw", "boosted_uniform", "gravitational_wave")


@dataclass
class Scenario:
    name: str
    data: CauchyData
    grid: Grid
    params: dict
    constraint_status: str
    exact: Callable | None = None  # t -> dict of fluid-frame fields
    background: object | None = None
    extras: dict = field(default_factory=dict)


class FLRWBackground:
    """Spatially flat FLRW with a(0) = 1, integrated to high accuracy.

    Uses r = r0 / a^3, rho = P(r, s0) and H = sqrt(K rho / 3).
    """

    def __init__(self, eos: EquationOfState, r0: float, s0: float, kappa_const: float, t_span=(-0.5, 2.0)):
        self.eos, self.r0, self.s0, self.kappa_const = eos, float(r0), float(s0), float(kappa_const)

        def rhs(t, y):
            a = y[0]
            return [a * self.hubble_of_a(a)]

        kw = dict(method="DOP853", rtol=1e-13, atol=1e-15, dense_output=True)
        self._fwd = solve_ivp(rhs, (0.0, t_span[1]), [1.0], **kw)
        self._bwd = solve_ivp(rhs, (0.0, t_span[0]), [1.0], **kw)

    def hubble_of_a(self, a):
        rho = self.eos.rho(self.r0 / a**3, self.s0)
        return np.sqrt(self.kappa_const * rho / 3.0)

    def a(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t >= 0, self._fwd.sol(np.maximum(t, 0.0).ravel()).reshape(t.shape), 0.0)
        neg = t < 0
        if np.any(neg):
            out = np.where(neg, self._bwd.sol(np.minimum(t, 0.0).ravel()).reshape(t.shape), out)
        return out

    def state(self, t) -> dict:
        a = self.a(t)
        r = self.r0 / a**3
        rho = self.eos.rho(r, np.full_like(r, self.s0))
        p = self.eos.pressure(r, np.full_like(r, self.s0))
        H = np.sqrt(self.kappa_const * rho / 3.0)
        return {"a": a, "r": r, "rho": rho, "p": p, "H": H}


def _eos_from(params: dict) -> EquationOfState:
    kind = params.get("eos", "entropic_polytrope")
    if kind == "entropic_polytrope":
        return make_eos(kind, gamma=float(params.get("gamma", 2.0)))
    if kind == "linear":
        return make_eos(kind, c=float(params.get("c", 1.0 / 3.0)))
    return make_eos(kind)


def _flat(grid: Grid):
    shp = grid.shape
    g0 = -np.broadcast_to(np.eye(3).reshape(3, 3, 1, 1, 1), (3, 3) + shp).copy()
    return g0, np.zeros((3, 3) + shp), np.zeros((3,) + shp)


def make_scenario(name: str, n: int, kappa_const: float = 1.0, fd_order: int = 4, **params) -> Scenario:
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
    grid = Grid(n, 1.0 / n, fd_order)
    eos = _eos_from(params)
    r0 = float(params.get("r0", 1.0))
    s0 = float(params.get("s0", 0.0))
    shp = grid.shape
    rr = np.full(shp, r0)
    ss = np.full(shp, s0)
    used = {"r0": r0, "s0": s0, "eos": eos.name, **eos.params()}

    if name == "minkowski":
        g0, k, v = _flat(grid)
        cd = CauchyData(g0, k, rr, ss, v, eos, kappa_const)
        status = "exact" if kappa_const == 0 else "residual-reported (matter in flat space)"
        return Scenario(name, cd, grid, used, status)

    if name == "flrw":
        g0, _, v = _flat(grid)
        rho = float(eos.rho(r0, s0))
        H = np.sqrt(max(kappa_const * rho / 3.0, 0.0))
        k = H * g0
        cd = CauchyData(g0, k, rr, ss, v, eos, kappa_const)
        used["H"] = H
        bg = FLRWBackground(eos, r0, s0, kappa_const)

        def exact(t):
            st = bg.state(np.asarray(t))
            return {"rho": st["rho"], "r": st["r"], "H": st["H"], "a": st["a"]}

        return Scenario(name, cd, grid, used, "exact", exact, bg)

    if name == "perturbed_flrw":
        eps = float(params.get("amplitude", 1e-4))
        kvec = np.array(params.get("wavevector", (1, 0, 0)), dtype=float)
        bg = FLRWBackground(eos, r0, s0, kappa_const)
        x = grid.coords()
        phase = 2 * np.pi * np.einsum("i,i...->...", kvec, x)
        T = eps * np.sin(phase)
        Ti = eps * 2 * np.pi * kvec.reshape(3, 1, 1, 1) * np.cos(phase)
        Tij = -eps * (2 * np.pi) ** 2 * np.einsum("i,j->ij", kvec, kvec).reshape(3, 3, 1, 1, 1) * np.sin(phase)
        st = bg.state(T)
        a, H = st["a"], st["H"]
        a2 = a**2
        eye = np.eye(3).reshape(3, 3, 1, 1, 1)
        TT = Ti[:, None] * Ti[None, :]
        g0 = TT - a2 * eye
        N = 1.0 / np.sqrt(1.0 - np.sum(Ti**2, axis=0) / a2)
        kap = -N * (Tij + a2 * H * eye - 2.0 * H * TT)
        v = -(N**2) * Ti / a2
        cd = CauchyData(g0, kap, st["r"], ss, v, eos, kappa_const)
        used.update(amplitude=eps, wavevector=tuple(kvec.tolist()))

        def exact(t):
            s = bg.state(T + t)
            return {"rho": s["rho"], "r": s["r"], "H": s["H"], "a": s["a"]}

        return Scenario(name, cd, grid, used, "exact", exact, bg, {"T": T})

    if name == "boosted_uniform":
        beta = float(params.get("beta", 0.3))
        g0, k, _ = _flat(grid)
        bvec = np.zeros((3,) + shp)
        bvec[0] = beta
        v = three_velocity_to_v(bvec)  # flat triad: frame and coordinate components agree
        cd = CauchyData(g0, k, rr, ss, v, eos, kappa_const)
        used["beta"] = beta
        status = "exact" if kappa_const == 0 else "residual-reported (matter in flat space)"
        return Scenario(name, cd, grid, used, status)

    # gravitational_wave
    eps = float(params.get("amplitude", 1e-6))
    x = grid.coords()
    ph = 2 * np.pi * x[0]
    hp = eps * np.sin(ph)
    hx = 0.5 * eps * np.cos(ph)
    dhp = -2 * np.pi * eps * np.cos(ph)  # d/dt of eps sin(2 pi (x - t)) at t = 0
    dhx = np.pi * eps * np.sin(ph)
    h = np.zeros((3, 3) + shp)
    dh = np.zeros((3, 3) + shp)
    h[1, 1], h[2, 2], h[1, 2], h[2, 1] = hp, -hp, hx, hx
    dh[1, 1], dh[2, 2], dh[1, 2], dh[2, 1] = dhp, -dhp, dhx, dhx
    g0 = -(np.eye(3).reshape(3, 3, 1, 1, 1) + h)
    kap = -0.5 * dh  # kappa_ij = 1/2 d_t g_ij
    cd = CauchyData(g0, kap, rr, ss, np.zeros((3,) + shp), eos, kappa_const)
    used["amplitude"] = eps
    status = "second order in amplitude" if kappa_const == 0 else "residual-reported (matter coupling)"
    return Scenario(name, cd, grid, used, status)
