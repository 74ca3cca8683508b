import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fluidframe.eos import EntropicPolytrope
from fluidframe.initial_data import build_reduced_initial_data
from fluidframe.reduced_rhs import ReducedSystem
from fluidframe.scenarios import make_scenario
from fluidframe.state_grid import ENTROPY, NVAR, REST_MASS, RHO

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_point_state(rng, eos=None, e0_max=0.9, scale=1.0):
    """Random admissible single-point state with |e^0| < e0_max.

    The spatial frame block is a perturbed identity so it stays invertible.
    """
    eos = eos or EntropicPolytrope(2.0)
    z = scale * rng.normal(size=NVAR)
    e0 = rng.normal(size=3)
    e0 *= e0_max * rng.uniform() / np.linalg.norm(e0)
    z[0:3] = e0
    z[3:12] = (np.eye(3) + 0.3 * rng.normal(size=(3, 3))).ravel()
    z[REST_MASS] = rng.uniform(0.3, 3.0)
    z[ENTROPY] = rng.uniform(-1.0, 1.0)
    z[RHO] = eos.rho(z[REST_MASS], z[ENTROPY])
    return z


def setup_scenario(name, n, kappa=1.0, **params):
    sc = make_scenario(name, n, kappa_const=kappa, **params)
    fs = build_reduced_initial_data(sc.data, sc.grid)
    return sc, fs, ReducedSystem(sc.data.eos, kappa)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def pflrw16():
    return setup_scenario("perturbed_flrw", 16, amplitude=1e-4)


# acceptance verdicts, printed once at the end of the session
ACCEPTANCE = {}


def record_verdict(cid, title, ok, detail=""):
    ACCEPTANCE[cid] = (title, bool(ok), detail)
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: (int(c[1:].split("-")[0]), c)):
        title, ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{cid:6s} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
