"""Reduced initial data from a Cauchy data set (g0, kappa, r0, varsigma0, v).

Pipeline on the t = 0 slice:

1. Gram-Schmidt triad of -g0 (axis order 1, 2, 3) plus the unit normal give an
   adapted orthonormal frame ("tilde frame").
2. The fluid velocity u = u0 n + v is reached by a pure Lorentz boost.  Here v
   is the tangential projection of u, so any finite v gives a timelike u.
3. Connection coefficients of the boosted frame follow from the transformation
   rule.  The unknown normal derivative of the boost is an so(1,3) element; its
   rotation part is fixed by Fermi transport of the triad, its boost part by
   the Euler equation (the momentum equation of the fluid at t = 0).
4. Spacetime curvature on the slice: spatial-pair components come from the
   frame Riemann formula applied to the tilde connection (this is the content
   of the Gauss and Codazzi equations); the remaining components follow from
   the Einstein equations.  Subtracting the Schouten part leaves the Weyl
   tensor, which is boosted and split into E and B.

Convention: kappa(X, Y) = g(Y, nabla_X n), so an expanding FLRW slice has
kappa = H g0 and the tilde connection carries Gamma_a^0_b = -kappa_ab.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eos import EquationOfState, InadmissibleState
from .frame_algebra import EPS3, ETA
from .state_grid import (
    ACC,
    ENTROPY,
    EXTR,
    FRAME,
    NVAR,
    REST_MASS,
    RHO,
    SGRAD,
    SPATIAL,
    WEYL_B,
    WEYL_E,
    FieldSet,
    Grid,
    anti_to_stored,
    sym_to_stored,
)


@dataclass
class CauchyData:
    """Coordinate components on the slice; trailing axes are the grid."""

    g0: np.ndarray  # (3, 3, ...) negative definite
    kappa: np.ndarray  # (3, 3, ...)
    r0: np.ndarray
    varsigma0: np.ndarray
    v: np.ndarray  # (3, ...) tangential projection of u
    eos: EquationOfState
    kappa_const: float = 1.0


@dataclass
class LorentzBoost:
    L: np.ndarray  # Lambda^mu_nu, (4, 4, ...): e_nu = Lambda^mu_nu tilde_e_mu
    u0: np.ndarray  # Lambda^0_0
    vt: np.ndarray  # tilde-frame components of v

    def inverse(self) -> np.ndarray:
        return np.einsum("ab,cb...,cd->ad...", ETA, self.L, ETA)

    def orthogonality_residual(self) -> np.ndarray:
        """max |Lambda^T eta Lambda - eta| per point."""
        M = np.einsum("ma...,mn,nb...->ab...", self.L, ETA, self.L)
        eta = ETA.reshape((4, 4) + (1,) * (M.ndim - 2))
        return np.max(np.abs(M - eta), axis=(0, 1))


def _mat_last(a):
    return np.moveaxis(a, (0, 1), (-2, -1))


def _mat_first(a):
    return np.moveaxis(a, (-2, -1), (0, 1))


def orthonormal_triad(g0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Triad e[A, b] = tilde e^A_b and coframe f[b, A], orthonormal under -g0.

    Gram-Schmidt on the coordinate basis in axis order, done through the
    Cholesky factor: -g0 = R^T R with R upper triangular, e = R^{-1}.
    """
    m = -_mat_last(np.asarray(g0, dtype=float))
    try:
        low = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise ValueError("g0 is not negative definite") from None
    R = np.swapaxes(low, -1, -2)
    e = np.linalg.inv(R)
    return _mat_first(e), _mat_first(R)


def three_velocity_to_v(beta: np.ndarray) -> np.ndarray:
    """Tilde-frame v = gamma beta for a 3-velocity beta; |beta| must be < 1."""
    beta = np.asarray(beta, dtype=float)
    b2 = np.sum(beta**2, axis=0)
    if np.any(~(b2 < 1.0)):
        raise ValueError("3-velocity must be subluminal (|beta| < 1)")
    return beta / np.sqrt(1.0 - b2)


def boost_from_velocity(v: np.ndarray, coframe: np.ndarray) -> LorentzBoost:
    """Pure boost taking the normal n to u, with v = pi_g(u) in coordinates."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("velocity field is not finite")
    vt = np.einsum("bA...,A...->b...", coframe, v)
    u0 = np.sqrt(1.0 + np.sum(vt**2, axis=0))
    L = np.empty((4, 4) + u0.shape)
    L[0, 0] = u0
    L[1:, 0] = vt
    L[0, 1:] = vt
    L[1:, 1:] = np.eye(3).reshape((3, 3) + (1,) * u0.ndim) + vt[:, None] * vt[None, :] / (u0 + 1.0)
    return LorentzBoost(L, u0, vt)


def frame_coefficients(boost: LorentzBoost, triad: np.ndarray) -> np.ndarray:
    """Fluid-frame coefficients e^A_a as (4, 3, ...) with d_t = u.

    e_a = e^0_a u + e^A_a d_A: the u component is Lambda^0_a / Lambda^0_0 and
    the rest is tangent to the slice.
    """
    L = boost.L
    e0 = L[0, 1:] / L[0, 0]
    spatial = L[1:, 1:] - L[1:, 0][:, None] * e0[None, :]  # [b, a]
    out = np.empty((4, 3) + e0.shape[1:])
    out[0] = e0
    out[1:] = np.einsum("Ab...,ba...->Aa...", triad, spatial)
    return out


def christoffel(g: np.ndarray, grid: Grid) -> np.ndarray:
    """Gamma^C_AB of a 3-metric by centered differences, shape (3, 3, 3, ...)."""
    dg = grid.grad(g)  # [D, A, B]
    ginv = _mat_first(np.linalg.inv(_mat_last(g)))
    low = 0.5 * (np.einsum("adb...->dab...", dg) + np.einsum("bda...->dab...", dg) - dg)
    # low[D, A, B] = 1/2 (d_A g_DB + d_B g_DA - d_D g_AB)
    return np.einsum("CD...,DAB...->CAB...", ginv, low)


def tilde_connection(cd: CauchyData, grid: Grid, triad, coframe, chris=None) -> np.ndarray:
    """G[mu, nu, sigma] = Gamma~_mu^nu_sigma of the adapted frame.

    The normal row mu = 0 is set to zero: it enters the boosted connection only
    together with the normal derivative of the boost, which is gauge-fixed as a
    whole.
    """
    if chris is None:
        chris = christoffel(cd.g0, grid)
    de = grid.grad(triad)  # [A, C, b]
    batch = triad.shape[2:]
    inner = np.einsum("Aa...,ACb...->aCb...", triad, de)
    inner += np.einsum("Aa...,CAB...,Bb...->aCb...", triad, chris, triad)
    G = np.zeros((4, 4, 4) + batch)
    G[1:, 1:, 1:] = np.einsum("cC...,aCb...->acb...", coframe, inner)
    kt = np.einsum("Aa...,Bb...,AB...->ab...", triad, triad, cd.kappa)
    G[1:, 0, 1:] = -kt
    G[1:, 1:, 0] = -kt
    return G


def transform_connection(
    boost: LorentzBoost,
    dL: np.ndarray,
    Gt: np.ndarray,
    triad: np.ndarray,
    grad_p: np.ndarray,
    enthalpy_density: np.ndarray,
    nu2: np.ndarray,
) -> np.ndarray:
    """Connection of the boosted frame in fluid gauge, (4, 4, 4, ...).

    ``dL`` holds coordinate derivatives of Lambda, shape (3, 4, 4, ...);
    ``grad_p`` the coordinate gradient of the pressure; ``enthalpy_density``
    is p + rho.
    """
    L = boost.L
    Linv = boost.inverse()
    # tilde_e_m(Lambda) for spatial m
    eL = np.einsum("Am...,Anb...->mnb...", triad, dL)
    known = np.einsum("ma...,mnb...->anb...", L[1:], eL)
    known += np.einsum("ma...,sb...,mns...->anb...", L, L, Gt)
    G = np.einsum("gn...,anb...->agb...", Linv, known)

    # rotation part of the normal derivative: Gamma_0^c_b = 0
    X = np.zeros_like(G[0])
    X[1:, 1:] = -G[0, 1:, 1:] / L[0, 0]
    G += L[0][:, None, None] * X[None]

    # boost part from the Euler equation
    e0 = L[0, 1:] / L[0, 0]
    theta = np.einsum("mm...->...", G[1:, 0, 1:])
    spatial = L[1:, 1:] - L[1:, 0][:, None] * e0[None, :]
    ea = np.einsum("Ab...,ba...->Aa...", triad, spatial)
    Dp = np.einsum("Aa...,A...->a...", ea, grad_p)
    rhs = -G[0, 0, 1:] + nu2 * e0 * theta - Dp / enthalpy_density
    batch = e0.shape[1:]
    M = L[0, 0] * np.eye(3).reshape((3, 3) + (1,) * len(batch)) - nu2 * e0[:, None] * L[0, 1:][None, :]
    omega = _mat_first(np.linalg.solve(_mat_last(M), np.moveaxis(rhs, 0, -1)[..., None]))[:, 0]
    Xb = np.zeros_like(X)
    Xb[0, 1:] = omega
    Xb[1:, 0] = omega
    G += L[0][:, None, None] * Xb[None]
    return G


def stress_tensor(u_low: np.ndarray, rho, p) -> np.ndarray:
    """T_ab = (p + rho) u_a u_b - p eta_ab."""
    eta = ETA.reshape((4, 4) + (1,) * (u_low.ndim - 1))
    return (p + rho) * u_low[:, None] * u_low[None, :] - p * eta


def schouten_part(S: np.ndarray) -> np.ndarray:
    """P_abcd = 1/2 (g_ac S_db - g_ad S_cb) - 1/2 (g_bc S_da - g_bd S_ca), all indices down.

    R = W + P is the decomposition whose residual defines the d-tensor.
    """
    eta = ETA
    P = 0.5 * (np.einsum("ac,db...->abcd...", eta, S) - np.einsum("ad,cb...->abcd...", eta, S))
    P -= 0.5 * (np.einsum("bc,da...->abcd...", eta, S) - np.einsum("bd,ca...->abcd...", eta, S))
    return P


def slice_riemann(Gt: np.ndarray, dGt: np.ndarray, ricci: np.ndarray) -> np.ndarray:
    """Spacetime Riemann tensor R_abcd (all down) on the slice in the tilde frame.

    ``dGt[c, d, a, b]`` = tilde_e_c(Gamma~_d^a_b) for spatial c, d (indices 1..3
    stored at 0..2 along the first two axes).  ``ricci`` supplies the 0b0d
    components through R_bd = R^0_b0d + R^a_bad.
    """
    batch = Gt.shape[3:]
    Rup = np.zeros((4, 4, 4, 4) + batch)  # R^a_bcd
    Gs = Gt[1:]  # Gamma~_c for spatial c
    # derivative terms: e_c(Gamma_d^a_b) - e_d(Gamma_c^a_b)
    der = np.einsum("cdab...->abcd...", dGt) - np.einsum("dcab...->abcd...", dGt)
    Gss = Gt[1:, :, 1:]
    comm = Gss - np.swapaxes(Gss, 0, 2)  # [c, mu, d] = Gamma_c^mu_d - Gamma_d^mu_c
    quad = -np.einsum("mab...,cmd...->abcd...", Gt, comm)
    quad += np.einsum("cam...,dmb...->abcd...", Gs, Gs)
    quad -= np.einsum("dam...,cmb...->abcd...", Gs, Gs)
    Rup[:, :, 1:, 1:] = der + quad
    R = np.einsum("am,mbcd...->abcd...", ETA, Rup)
    # pair symmetry for spatial first pair: R_ab0d = R_0dab
    R[1:, 1:, 0, 1:] = np.einsum("dab...->abd...", R[0, 1:, 1:, 1:])
    R[1:, 1:, 1:, 0] = -R[1:, 1:, 0, 1:]
    # Einstein equations for R_0b0d
    R0b0d = ricci[1:, 1:] - np.einsum("abad...->bd...", Rup[1:, 1:, 1:, 1:])
    R[0, 1:, 0, 1:] = R0b0d
    R[1:, 0, 1:, 0] = R0b0d
    R[0, 1:, 1:, 0] = -R0b0d
    R[1:, 0, 0, 1:] = -R0b0d
    return R


def electric_magnetic(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """E_ab = W_0a0b, B_ab = 1/2 W_0amn eps_bmn (fluid frame, all indices down)."""
    E = W[0, 1:, 0, 1:]
    B = 0.5 * np.einsum("amn...,bmn->ab...", W[0, 1:, 1:, 1:], EPS3)
    return E, B


def weyl_from_constraints(Gt, dGt, boost: LorentzBoost, rho, p, kappa_const) -> dict:
    """E and B of the fluid frame from the slice geometry and matter."""
    u_low = np.concatenate([boost.u0[None], -boost.vt])
    T = stress_tensor(u_low, rho, p)
    trT = rho - 3.0 * p
    eta = ETA.reshape((4, 4) + (1,) * np.ndim(rho))
    S = kappa_const * (T - trT / 3.0 * eta)
    ric = kappa_const * (T - 0.5 * trT * eta)
    R = slice_riemann(Gt, dGt, ric)
    Wt = R - schouten_part(S)
    L = boost.L
    W = np.einsum("pa...,qb...,rc...,sd...,pqrs...->abcd...", L, L, L, L, Wt, optimize=True)
    E, B = electric_magnetic(W)
    return {
        "E": E,
        "B": B,
        "trace_E": np.einsum("aa...->...", E),
        "trace_B": np.einsum("aa...->...", B),
        "asym_E": np.max(np.abs(E - np.swapaxes(E, 0, 1)), axis=(0, 1)),
        "asym_B": np.max(np.abs(B - np.swapaxes(B, 0, 1)), axis=(0, 1)),
    }


def constraint_sources(cd: CauchyData, coframe) -> tuple[np.ndarray, np.ndarray]:
    """mu and J (coordinate vector components)."""
    rho = cd.eos.rho(cd.r0, cd.varsigma0)
    p = cd.eos.pressure(cd.r0, cd.varsigma0)
    vt = np.einsum("bA...,A...->b...", coframe, cd.v)
    u0sq = 1.0 + np.sum(vt**2, axis=0)
    mu = cd.kappa_const * (p + rho) * u0sq - cd.kappa_const * p
    J = cd.kappa_const * (p + rho) * np.sqrt(u0sq) * cd.v
    return mu, J


def constraint_residuals(cd: CauchyData, grid: Grid) -> dict:
    """Hamiltonian and momentum constraint residuals.

    Hamiltonian: R_g0 + |kappa|^2 - (tr kappa)^2 + 2 mu, which vanishes for the
    Friedmann relation 3 H^2 = K rho.  Momentum:
    div(kappa - (tr kappa) g0)_B - g0_BC J^C, with J lowered by g0.
    """
    g = cd.g0
    _, coframe = orthonormal_triad(g)
    chris = christoffel(g, grid)
    ginv = _mat_first(np.linalg.inv(_mat_last(g)))
    dchris = grid.grad(chris)  # [D, C, A, B]
    # R^C_ADB = d_D Gam^C_AB - d_B Gam^C_AD + Gam^C_DE Gam^E_AB - Gam^C_BE Gam^E_AD
    ric = (
        np.einsum("CCAB...->AB...", dchris)
        - np.einsum("BCAC...->AB...", dchris)
        + np.einsum("CCE...,EAB...->AB...", chris, chris)
        - np.einsum("CBE...,EAC...->AB...", chris, chris)
    )
    scal = np.einsum("AB...,AB...->...", ginv, ric)
    k = cd.kappa
    kup = np.einsum("AC...,BD...,CD...->AB...", ginv, ginv, k)
    knorm = np.einsum("AB...,AB...->...", kup, k)
    tr = np.einsum("AB...,AB...->...", ginv, k)
    mu, J = constraint_sources(cd, coframe)
    ham = scal + knorm - tr**2 + 2.0 * mu
    dk = grid.grad(k)  # [A, C, B]
    cov = dk - np.einsum("DAC...,DB...->ACB...", chris, k) - np.einsum("DAB...,CD...->ACB...", chris, k)
    div = np.einsum("AC...,ACB...->B...", ginv, cov)
    dtr = grid.grad(tr)
    J_low = np.einsum("BC...,C...->B...", g, J)
    mom = div - dtr - J_low
    return {"hamiltonian": ham, "momentum": mom, "mu": mu, "J": J}


def _slabs(n):
    for i in range(n):
        yield (Ellipsis, slice(i, i + 1), slice(None), slice(None))


def build_reduced_initial_data(cd: CauchyData, grid: Grid, min_rest_mass: float = 0.0) -> FieldSet:
    """Assemble the 52 unknowns at t = 0 on the grid."""
    eos = cd.eos
    r0 = np.asarray(cd.r0, dtype=float)
    s0 = np.asarray(cd.varsigma0, dtype=float)
    if np.any(~(r0 > min_rest_mass)):
        raise InadmissibleState("rest-mass density below threshold")
    th = eos.thermo(r0, s0)
    if np.any(~(th.nu2 > 0)) or np.any(~(th.enthalpy > 0)):
        raise InadmissibleState("sound speed or enthalpy not positive")
    rho, p, nu2 = th.rho, th.p, th.nu2

    triad, coframe = orthonormal_triad(cd.g0)
    boost = boost_from_velocity(cd.v, coframe)
    Gt = tilde_connection(cd, grid, triad, coframe)
    dL = grid.grad(boost.L)
    G = transform_connection(boost, dL, Gt, triad, grid.grad(p), p + rho, nu2)
    frame = frame_coefficients(boost, triad)

    # tilde_e_c of the spatial rows of the tilde connection
    dGc = grid.grad(Gt[1:])  # [A, d, a, b]
    E = np.empty((3, 3) + grid.shape)
    B = np.empty((3, 3) + grid.shape)
    for sl in _slabs(grid.n):
        dGt = np.einsum("Ac...,Adab...->cdab...", triad[sl], dGc[sl])
        sub = LorentzBoost(boost.L[sl], boost.u0[sl], boost.vt[sl])
        w = weyl_from_constraints(Gt[sl], dGt, sub, rho[sl], p[sl], cd.kappa_const)
        E[sl] = w["E"]
        B[sl] = w["B"]

    z = np.empty((NVAR,) + grid.shape)
    z[FRAME] = frame.reshape((12,) + grid.shape)
    z[SPATIAL] = anti_to_stored(G[1:, 1:, 1:])
    z[ACC] = G[0, 0, 1:]
    z[EXTR] = G[1:, 0, 1:].reshape((9,) + grid.shape)
    # E and B are symmetric and trace-free by definition; the discarded parts
    # are discretization error and are kept in meta for the record
    eye = np.eye(3).reshape(3, 3, 1, 1, 1)
    trE = np.einsum("aa...->...", E)
    trB = np.einsum("aa...->...", B)
    z[WEYL_E] = sym_to_stored(0.5 * (E + np.swapaxes(E, 0, 1)) - trE / 3.0 * eye)
    z[WEYL_B] = sym_to_stored(0.5 * (B + np.swapaxes(B, 0, 1)) - trB / 3.0 * eye)
    z[RHO] = rho
    z[REST_MASS] = r0
    z[ENTROPY] = s0
    z[SGRAD][0] = 0.0
    z[SGRAD][1:] = np.einsum("Aa...,A...->a...", frame[1:], grid.grad(s0))
    fs = FieldSet(grid, z, 0.0)
    fs.meta["boost"] = boost
    fs.meta["connection"] = G
    fs.meta["weyl_trace"] = (float(np.max(np.abs(trE))), float(np.max(np.abs(trB))))
    fs.meta["weyl_asym"] = (
        float(np.max(np.abs(E - np.swapaxes(E, 0, 1)))),
        float(np.max(np.abs(B - np.swapaxes(B, 0, 1)))),
    )
    return fs
