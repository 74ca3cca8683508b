import numpy as np
import pytest

from conftest import setup_scenario
from fluidframe.evolution import Integrator, NumericalBreakdown, RunConfig, cfl_step, evolve
from fluidframe.state_grid import FieldSet


@pytest.mark.parametrize(
    "kw",
    [{"cfl": 0.0}, {"cfl": 1.5}, {"ko": -0.1}, {"fd_order": 6}, {"t_final": 0.0}, {"dt": -1.0}, {"n": 6}, {"cadence": 0}],
)
def test_run_config_rejects(kw):
    with pytest.raises(ValueError):
        RunConfig(**kw).validate()


def test_run_config_defaults():
    cfg = RunConfig().validate()
    assert (cfg.fd_order, cfg.cfl, cfg.ko, cfg.kappa) == (4, 0.25, 0.0, 1.0)


def test_dt_above_cfl_bound_rejected():
    sc, fs, system = setup_scenario("flrw", 8)
    bound = cfl_step(fs, system, 0.25)
    assert bound == pytest.approx(0.25 / 8)
    with pytest.raises(ValueError, match="CFL"):
        evolve(fs, system, 0.1, dt=2 * bound)


def test_last_step_lands_on_t_final_and_cadence():
    sc, fs, system = setup_scenario("flrw", 8)
    seen = []
    traj = evolve(fs, system, 0.1, dt=0.03, cadence=2, monitor=lambda cur: seen.append(cur.t) or {"t": cur.t})
    assert traj.final.t == pytest.approx(0.1, abs=1e-15)
    assert traj.steps == 4
    # initial state, every second step, and always the last one
    assert traj.times == pytest.approx([0.0, 0.06, 0.1])
    assert seen == traj.times and len(traj.rows) == 3


def test_minkowski_vacuum_stays_bitwise_constant():
    sc, fs, system = setup_scenario("minkowski", 8, kappa=0.0)
    traj = evolve(fs, system, 0.2)
    np.testing.assert_array_equal(traj.final.z, fs.z)


def test_rk4_is_fourth_order_on_flrw():
    sc, fs, system = setup_scenario("flrw", 8)
    t_final = 0.5
    errs = []
    for dt in (0.025, 0.0125):
        traj = evolve(fs, system, t_final, dt=dt)
        a = sc.background.a(t_final)
        errs.append(abs(traj.final.z[3, 0, 0, 0] - 1.0 / a))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.2)


def test_dissipation_damps_grid_noise():
    sc, fs, system = setup_scenario("minkowski", 16, kappa=0.0)
    idx = np.indices(fs.grid.shape).sum(axis=0)
    noisy = fs.copy()
    noisy.z[33] += 1e-6 * (-1.0) ** idx
    noisy.z[37] -= 1e-6 * (-1.0) ** idx
    amp = {}
    for ko in (0.0, 0.2):
        traj = evolve(noisy, system, 0.1, ko=ko)
        amp[ko] = np.max(np.abs(traj.final.z[33:45]))
    assert amp[0.2] < 0.5 * amp[0.0]


def test_nonfinite_values_raise():
    sc, fs, system = setup_scenario("minkowski", 8, kappa=0.0)
    bad = fs.copy()
    bad.z[40, 1, 1, 1] = np.inf
    with pytest.raises(NumericalBreakdown):
        Integrator(system).step(bad, 0.01)


def test_inadmissible_initial_state_rejected():
    sc, fs, system = setup_scenario("minkowski", 8, kappa=0.0)
    bad = FieldSet(fs.grid, fs.z.copy())
    bad.z[46, 0, 0, 0] = -1.0
    with pytest.raises(ValueError):
        evolve(bad, system, 0.1)


def test_evolution_is_deterministic():
    sc, fs, system = setup_scenario("perturbed_flrw", 8, amplitude=1e-3)
    a = evolve(fs, system, 0.05).final.z
    b = evolve(fs, system, 0.05).final.z
    assert a.tobytes() == b.tobytes()
