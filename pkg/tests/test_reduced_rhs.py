import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import fluidframe.reduced_rhs as rr
from conftest import random_point_state, setup_scenario
from fluidframe.eos import EntropicPolytrope
from fluidframe.reduced_rhs import (
    HyperbolicityLost,
    ReducedSystem,
    assemble_principal,
    block_sizes,
    curl_matrix,
    curl_sym,
    curl_sym_eps,
    solve_weyl_block,
)
from fluidframe.state_grid import NVAR, RHO, SYM_WEIGHTS, Grid, sym_from_stored, sym_to_stored

seeds = st.integers(0, 2**32 - 1)
EOS = EntropicPolytrope(2.0)


def smooth_random_state(n, seed, amp=0.05):
    """Admissible grid state: a random point state plus a few smooth Fourier modes."""
    rng = np.random.default_rng(seed)
    base = random_point_state(rng, e0_max=0.5, scale=0.3)
    g = Grid(n, 1.0 / n)
    x = g.coords()
    z = np.broadcast_to(base.reshape((NVAR, 1, 1, 1)), (NVAR,) + g.shape).copy()
    for _ in range(3):
        k = rng.integers(-2, 3, size=3)
        ph = 2 * np.pi * np.einsum("i,i...->...", k, x) + rng.uniform(0, 2 * np.pi)
        z += amp * rng.normal(size=(NVAR, 1, 1, 1)) * np.sin(ph)
    return z, g


@given(seeds)
def test_principal_matrices_symmetric(seed):
    z = random_point_state(np.random.default_rng(seed))
    pm = assemble_principal(z, EOS)
    assert pm.asymmetry() == 0.0


@given(seeds)
def test_m0_positive_inside_light_cone(seed):
    z = random_point_state(np.random.default_rng(seed), e0_max=0.99)
    assert assemble_principal(z, EOS).min_eig_M0() > 0


def test_m0_loses_definiteness_outside_light_cone():
    z = random_point_state(np.random.default_rng(0))
    z[0:3] = [1.05, 0.0, 0.0]
    assert assemble_principal(z, EOS).min_eig_M0() < 0
    with pytest.raises(HyperbolicityLost):
        ReducedSystem(EOS).time_derivative(z, np.zeros((3, NVAR)))


@given(seeds)
def test_curl_routes_agree(seed):
    rng = np.random.default_rng(seed)
    xi = rng.normal(size=3)
    X = rng.normal(size=(3, 3))
    X = X + X.T
    np.testing.assert_allclose(curl_sym(xi, X), curl_sym_eps(xi, X), atol=1e-13)
    np.testing.assert_allclose(curl_matrix(xi) @ sym_to_stored(X), sym_to_stored(curl_sym(xi, X)), atol=1e-13)


@given(seeds)
def test_curl_is_tracefree_and_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    xi = rng.normal(size=3)
    X, Y = rng.normal(size=(2, 3, 3))
    X, Y = X + X.T, Y + Y.T
    assert abs(np.trace(curl_sym(xi, X))) < 1e-12
    # antisymmetric under the Frobenius product, so the blocks [[0, C], [-C, 0]] are symmetric
    assert np.sum(curl_sym(xi, X) * Y) == pytest.approx(-np.sum(X * curl_sym(xi, Y)), abs=1e-12)


@given(seeds)
def test_weyl_block_inverse_against_dense_solve(seed):
    rng = np.random.default_rng(seed)
    e0 = rng.normal(size=3)
    e0 *= 0.95 * rng.uniform() / np.linalg.norm(e0)
    rE, rB = rng.normal(size=(2, 3, 3))
    rE, rB = rE + rE.T, rB + rB.T
    C = curl_matrix(e0)
    A = np.block([[np.eye(6), C], [-C, np.eye(6)]])
    sol = np.linalg.solve(A, np.concatenate([sym_to_stored(rE), sym_to_stored(rB)]))
    Ed, Bd = solve_weyl_block(e0, rE, rB)
    np.testing.assert_allclose(sym_to_stored(Ed), sol[:6], atol=1e-11)
    np.testing.assert_allclose(sym_to_stored(Bd), sol[6:], atol=1e-11)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_block_route_matches_dense_route(seed):
    z, g = smooth_random_state(8, seed)
    system = ReducedSystem(EOS, kappa=1.0)
    zdot = system.rhs(z, g)

    class _FS:
        grid = g

        def __init__(self, z):
            self.z = z

        def point(self, i, j, k):
            return self.z[:, i, j, k].copy()

    for pt in [(0, 0, 0), (3, 5, 1), (7, 2, 6)]:
        dense = system.time_derivative_at(_FS(z), pt)
        np.testing.assert_allclose(zdot[(slice(None),) + pt], dense, rtol=1e-11, atol=1e-11)


def test_block_route_matches_dense_route_on_scenario(pflrw16):
    sc, fs, system = pflrw16
    zdot = system.rhs(fs.z, fs.grid)
    for pt in [(0, 0, 0), (5, 9, 2)]:
        np.testing.assert_allclose(zdot[(slice(None),) + pt], system.time_derivative_at(fs, pt), atol=1e-12)


def test_chunked_lower_terms_match(monkeypatch):
    z, _ = smooth_random_state(8, 5)
    system = ReducedSystem(EOS)
    whole = system._lower_parts(z)
    monkeypatch.setattr(rr, "LOWER_CHUNK_POINTS", 20)
    parts = system._lower_parts_chunked(z)
    for k, v in whole.items():
        np.testing.assert_array_equal(parts[k], v)


def test_lower_order_rows_carry_weyl_weights():
    z = random_point_state(np.random.default_rng(4))
    system = ReducedSystem(EOS)
    L = system.lower_order(z)
    parts = system._lower_parts(z)
    np.testing.assert_allclose(L[33:39], SYM_WEIGHTS * sym_to_stored(parts["E"]))
    assert sum(block_sizes().values()) == NVAR


def test_minkowski_vacuum_is_stationary():
    sc, fs, system = setup_scenario("minkowski", 8, kappa=0.0)
    np.testing.assert_array_equal(system.rhs(fs.z, fs.grid), 0.0)


def test_minkowski_with_matter_starts_collapsing():
    # with the coupling on, Raychaudhuri gives d_t K_aa = -(rho + 3p)/6 with rho = 2, p = 1
    sc, fs, system = setup_scenario("minkowski", 8, kappa=1.0)
    zdot = system.rhs(fs.z, fs.grid)[:, 0, 0, 0]
    np.testing.assert_allclose(zdot[[24, 28, 32]], -5.0 / 6.0, rtol=1e-14)


def test_flrw_rhs_is_friedmann():
    sc, fs, system = setup_scenario("flrw", 8)
    zdot = system.rhs(fs.z, fs.grid)
    H = np.sqrt(2.0 / 3.0)
    rho, p = 2.0, 1.0
    expected = np.zeros(NVAR)
    expected[[3, 7, 11]] = -H  # e^A_a = delta/a decays at rate H
    expected[[24, 28, 32]] = -(H**2) - (rho + 3 * p) / 6.0
    expected[RHO] = -3 * H * (p + rho)
    expected[46] = -3 * H
    for pt in [(0, 0, 0), (4, 2, 7)]:
        np.testing.assert_allclose(zdot[(slice(None),) + pt], expected, atol=1e-14)


def test_perturbed_flrw_energy_rate_matches_exact_solution():
    # each fluid element follows FLRW at cosmic time T(x) + t, so d_t rho = rho'(T(x))
    errs = []
    for n in (16, 32):
        sc, fs, system = setup_scenario("perturbed_flrw", n, amplitude=1e-3)
        zdot = system.rhs(fs.z, fs.grid)
        st_ = sc.background.state(sc.extras["T"])
        exact = -3.0 * st_["H"] * (st_["p"] + st_["rho"])  # continuity along the FLRW worldline
        errs.append(np.max(np.abs(zdot[RHO] - exact)))
    assert errs[1] < 1e-5  # 5.9e-6 measured at n = 32
    assert np.log2(errs[0] / errs[1]) > 3.5


def test_hyperbolicity_check_reports_location():
    z, g = smooth_random_state(8, 3)
    z[0, 2, 3, 4] = 1.2
    with pytest.raises(HyperbolicityLost) as info:
        ReducedSystem(EOS).rhs(z, g)
    assert info.value.location == (2, 3, 4)
    assert info.value.min_eig < 0


def test_weyl_trace_rate_vanishes_on_solution_data(pflrw16):
    # the trace of E and B is a propagated constraint, not an algebraic identity
    sc, fs, system = pflrw16
    zdot = system.rhs(fs.z, fs.grid)
    for block in (slice(33, 39), slice(39, 45)):
        tr = np.einsum("aa...->...", sym_from_stored(zdot[block]))
        assert np.max(np.abs(tr)) < 1e-14
    z, g = smooth_random_state(8, 7)
    trE = np.einsum("aa...->...", sym_from_stored(ReducedSystem(EOS).rhs(z, g)[33:39]))
    assert np.max(np.abs(trE)) > 1e-3
