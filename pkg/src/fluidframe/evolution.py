"""Method-of-lines integration: classical RK4, optional Kreiss-Oliger dissipation."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .eos import InadmissibleState
from .reduced_rhs import ReducedSystem
from .state_grid import ENTROPY, REST_MASS, FieldSet

log = logging.getLogger(__name__)


class NumericalBreakdown(RuntimeError):
    """Non-finite values appeared during a step."""


@dataclass
class RunConfig:
    scenario: str = "minkowski"
    n: int = 16
    t_final: float = 1.0
    cfl: float = 0.25
    dt: float | None = None  # overrides the CFL step when set
    fd_order: int = 4
    ko: float = 0.0
    kappa: float = 1.0
    cadence: int = 10
    params: dict = field(default_factory=dict)
    out: str | None = None
    snapshots: bool = False

    def validate(self) -> "RunConfig":
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not (0.0 <= self.ko <= 0.5):
            raise ValueError(f"ko must lie in [0, 0.5], got {self.ko}")
        if self.fd_order not in (2, 4):
            raise ValueError(f"fd_order must be 2 or 4, got {self.fd_order}")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n < 2 * self.fd_order:
            raise ValueError(f"n must be at least {2 * self.fd_order}")
        if self.cadence < 1:
            raise ValueError("cadence must be a positive integer")
        return self

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    final: FieldSet | None = None
    first_inadmissible: float | None = None
    steps: int = 0
    status: str = "ok"


class Integrator:
    """RK4 over :meth:`ReducedSystem.rhs` on a fixed grid."""

    def __init__(self, system: ReducedSystem, ko: float = 0.0):
        self.system = system
        self.ko = float(ko)

    def derivative(self, z: np.ndarray, grid) -> np.ndarray:
        dz = self.system.rhs(z, grid)
        if self.ko > 0:
            dz += self.ko * grid.dissipation(z)
        return dz

    def step(self, fs: FieldSet, dt: float) -> FieldSet:
        g = fs.grid
        z = fs.z
        # finiteness is checked explicitly below, so float warnings are noise
        with np.errstate(invalid="ignore", over="ignore"):
            try:
                k1 = self.derivative(z, g)
                k2 = self.derivative(z + 0.5 * dt * k1, g)
                k3 = self.derivative(z + 0.5 * dt * k2, g)
                k4 = self.derivative(z + dt * k3, g)
            except InadmissibleState as exc:
                raise NumericalBreakdown(f"inadmissible stage state in the step from t={fs.t}: {exc}") from exc
            znew = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(znew)):
            bad = np.argwhere(~np.isfinite(znew))[0]
            raise NumericalBreakdown(f"non-finite value in component {bad[0]} at point {tuple(bad[1:])}, t={fs.t + dt}")
        return FieldSet(g, znew, fs.t + dt, fs.meta)


def max_speed(fs: FieldSet, system: ReducedSystem) -> float:
    """Bound on characteristic speeds: the light cone, once M0 is checked definite."""
    system.check_hyperbolic(fs.z)
    return 1.0


def cfl_step(fs: FieldSet, system: ReducedSystem, cfl: float) -> float:
    return cfl * fs.grid.h / max_speed(fs, system)


def evolve(
    fs: FieldSet,
    system: ReducedSystem,
    t_final: float,
    cfl: float = 0.25,
    dt: float | None = None,
    ko: float = 0.0,
    cadence: int = 10,
    monitor: Callable[[FieldSet], dict] | None = None,
    keep_snapshots: bool = False,
) -> Trajectory:
    """Integrate from fs.t to t_final; the last step is shortened to land exactly."""
    eos = system.eos
    if not np.all(eos.admissible(fs.z[REST_MASS], fs.z[ENTROPY], entropy_evolution=False)):
        raise ValueError("initial data are thermodynamically inadmissible")
    bound = cfl_step(fs, system, cfl)
    if dt is None:
        dt = bound
    elif dt > bound * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds the CFL bound {bound}")
    integ = Integrator(system, ko)
    traj = Trajectory()
    t0 = fs.t
    nsteps = max(1, math.ceil((t_final - t0) / dt - 1e-9))

    def record(cur):
        traj.times.append(cur.t)
        if monitor is not None:
            traj.rows.append(monitor(cur))
        if keep_snapshots:
            traj.snapshots.append(cur.copy())

    record(fs)
    cur = fs
    for i in range(nsteps):
        h = min(dt, t_final - cur.t) if i == nsteps - 1 else dt
        if h <= 0:
            break
        cur = integ.step(cur, h)
        traj.steps += 1
        if traj.first_inadmissible is None:
            ok = eos.admissible(cur.z[REST_MASS], cur.z[ENTROPY], entropy_evolution=False)
            if not np.all(ok):
                traj.first_inadmissible = cur.t
                log.warning("state left the admissible region at t=%g", cur.t)
        if (i + 1) % cadence == 0 or i == nsteps - 1:
            record(cur)
    traj.final = cur
    return traj
