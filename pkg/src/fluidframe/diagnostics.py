"""Runtime residuals of the full Einstein-Euler-entropy system, characteristic
speeds and uniformly local Sobolev norms.

The reduced system evolves E, B and the connection directly, so the geometric
statements it was derived from (no torsion, Riemann = Weyl + Schouten part,
the Bianchi equation, the Euler equation) are not enforced.  This module
evaluates them on a snapshot.  Frame derivatives split as

    e_mu(f) = e^0_mu d_t f + e^A_mu d_A f,

with d_t f taken from the reduced right-hand side and d_A f from the same
centered stencil that drives the evolution.

Antisymmetric index pairs are stored compressed over ``PAIRS4``:
torsion as T[pair(alpha, beta), mu], the d-tensor as d[pair, pair] with all
indices down, the Bianchi residual as F[alpha, pair(beta, gamma)].
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import eigh

from .eos import EquationOfState
from .frame_algebra import EPS4, ETA
from .initial_data import schouten_part, stress_tensor
from .reduced_rhs import HyperbolicityLost, ReducedSystem, assemble_principal, curl_matrix
from .state_grid import (
    ENTROPY,
    FRAME,
    NVAR,
    REST_MASS,
    RHO,
    SGRAD,
    SYM_WEIGHTS,
    WEYL_B,
    WEYL_E,
    FieldSet,
    Grid,
    expand_connection,
    full_frame,
    induced_metric,
    sym_from_stored,
)

PAIRS4 = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
_PI, _PJ = (np.array(ix) for ix in zip(*PAIRS4))
U_FRAME = np.array([1.0, 0.0, 0.0, 0.0])
SCHEMA_VERSION = 1
CHUNK = 8192


def _bcast(m: np.ndarray, nbatch: int) -> np.ndarray:
    return m.reshape(m.shape + (1,) * nbatch)


# ----------------------------------------------------------------------
# Weyl tensor from its electric and magnetic parts
def spatial_eps_low(u: np.ndarray = U_FRAME) -> np.ndarray:
    """eps_abc = eps_mnst u^m pi_a^n pi_b^s pi_c^t, all indices down."""
    pim = np.eye(4) - np.outer(u, ETA @ u)  # pi^n_a stored [n, a]
    return np.einsum("mnst,m,na,sb,tc->abc", EPS4, u, pim, pim, pim)


def _embed(X3: np.ndarray) -> np.ndarray:
    """Spatial (3, 3, ...) tensor as a (4, 4, ...) tensor with vanishing 0-slots."""
    out = np.zeros((4, 4) + X3.shape[2:])
    out[1:, 1:] = X3
    return out


def weyl_from_EB(E: np.ndarray, B: np.ndarray, u: np.ndarray = U_FRAME) -> np.ndarray:
    """W_abcd (all down) rebuilt from the u-electric and u-magnetic parts.

    E and B are (4, 4, ...) with lower indices, orthogonal to u.
    """
    nb = E.ndim - 2
    ul = ETA @ u
    pi = _bcast(ETA - np.outer(ul, ul), nb)
    uu = _bcast(np.outer(ul, ul), nb)
    eps_up1 = _bcast(np.einsum("mn,nab->mab", ETA, spatial_eps_low(u)), nb)  # eps^m_ab
    ulb = _bcast(ul, nb)

    # 2 X_[cd] written out as X_cd - X_dc
    t1 = np.einsum("bc...,da...->abcd...", pi, E) - np.einsum("bd...,ca...->abcd...", pi, E)
    t2 = np.einsum("bc...,da...->abcd...", uu, E) - np.einsum("bd...,ca...->abcd...", uu, E)
    t3 = np.einsum("ac...,db...->abcd...", pi, E) - np.einsum("ad...,cb...->abcd...", pi, E)
    t4 = np.einsum("ac...,db...->abcd...", uu, E) - np.einsum("ad...,cb...->abcd...", uu, E)
    W = t1 - t2 - t3 + t4
    UB = np.einsum("c...,dm...->cdm...", ulb, B)
    UB = UB - np.swapaxes(UB, 0, 1)  # 2 u_[c B_d]m
    W -= np.einsum("cdm...,mab...->abcd...", UB, eps_up1)
    W -= np.einsum("abm...,mcd...->abcd...", UB, eps_up1)
    return W


def weyl_dual_from_EB(E: np.ndarray, B: np.ndarray, u: np.ndarray = U_FRAME) -> np.ndarray:
    """W*_abcd rebuilt from E and B by the dual decomposition."""
    nb = E.ndim - 2
    ul = _bcast(ETA @ u, nb)
    eps = spatial_eps_low(u)
    eps_up1 = _bcast(np.einsum("mn,nab->mab", ETA, eps), nb)  # eps^m_ab
    eps_mid = _bcast(np.einsum("anb,nm->amb", eps, ETA), nb)  # eps_a^m_b

    UE = np.einsum("a...,bm...->abm...", ul, E)
    Ws = np.einsum("abm...,mcd...->abcd...", UE - np.swapaxes(UE, 0, 1), eps_up1)
    # -4 E_m[a eps_b]^m_[c u_d]
    X = np.einsum("ma...,bmc...,d...->abcd...", E, eps_mid, ul)
    X = X - np.swapaxes(X, 0, 1)
    X = X - np.swapaxes(X, 2, 3)
    Ws -= X
    Y = np.einsum("a...,bc...,d...->abcd...", ul, B, ul)
    Y = Y - np.swapaxes(Y, 0, 1)
    Y = Y - np.swapaxes(Y, 2, 3)
    Ws -= Y
    Ws -= np.einsum("mn...,mab...,ncd...->abcd...", B, eps_up1, eps_up1)
    return Ws


def dual_second_pair(W: np.ndarray) -> np.ndarray:
    """W*_abcd = 1/2 eps_cd^mn W_abmn."""
    eps_cd_up = np.einsum("cdrs,rm,sn->cdmn", EPS4, ETA, ETA)
    return 0.5 * np.einsum("cdmn,abmn...->abcd...", eps_cd_up, W)


def electric_magnetic_parts(W: np.ndarray, u: np.ndarray = U_FRAME) -> tuple[np.ndarray, np.ndarray]:
    """E_ab = W_mnst u^m u^s pi_a^n pi_b^t and B from the dual, as (4, 4, ...) arrays."""
    pim = np.eye(4) - np.outer(u, ETA @ u)
    Ws = dual_second_pair(W)
    E = np.einsum("mnst...,m,s,na,tb->ab...", W, u, u, pim, pim)
    B = np.einsum("mnst...,m,s,na,tb->ab...", Ws, u, u, pim, pim)
    return E, B


# ----------------------------------------------------------------------
# pointwise geometry
def riemann_from_connection(G: np.ndarray, eG: np.ndarray) -> np.ndarray:
    """R^a_bcd from G[a, c, b] = Gamma_a^c_b and eG[c, d, a, b] = e_c(Gamma_d^a_b)."""
    R = np.einsum("cdab...->abcd...", eG) - np.einsum("dcab...->abcd...", eG)
    tors = G - np.swapaxes(G, 0, 2)  # [c, m, d] = Gamma_c^m_d - Gamma_d^m_c
    R -= np.einsum("mab...,cmd...->abcd...", G, tors)
    quad = np.einsum("cam...,dmb...->abcd...", G, G)
    R += quad - np.swapaxes(quad, 2, 3)
    return R


def schouten_from_matter(rho, p, kappa: float) -> np.ndarray:
    """S_ab = K (T_ab - T/3 eta_ab) for a perfect fluid at rest in the frame."""
    nb = np.ndim(rho)
    T = stress_tensor(_bcast(U_FRAME, nb), rho, p)
    return kappa * (T - (rho - 3.0 * p) / 3.0 * _bcast(ETA, nb))


def friedrich_tensor(E4: np.ndarray, B4: np.ndarray, S: np.ndarray) -> np.ndarray:
    """F_mabc = W_mabc - eta_m[b S_c]a, all indices down."""
    eta = _bcast(ETA, S.ndim - 2)
    F = weyl_from_EB(E4, B4)
    F -= 0.5 * (np.einsum("mb...,ca...->mabc...", eta, S) - np.einsum("mc...,ba...->mabc...", eta, S))
    return F


def _compress_pairs(T: np.ndarray, axis: int) -> np.ndarray:
    """Take the independent (i < j) entries of an antisymmetric pair at axes (axis, axis+1)."""
    T = np.moveaxis(T, (axis, axis + 1), (0, 1))
    return np.moveaxis(T[_PI, _PJ], 0, axis)


# ----------------------------------------------------------------------
@dataclass
class FrameDerivatives:
    """Everything a residual needs: state, d_t of the state, coordinate derivatives."""

    grid: Grid
    z: np.ndarray  # (52, n, n, n)
    dz: np.ndarray  # (4, 52, n, n, n); dz[0] = d_t z from the reduced system
    p: np.ndarray
    dp: np.ndarray  # (4, n, n, n)
    nu2: np.ndarray
    rho_eos: np.ndarray

    @classmethod
    def compute(cls, fs: FieldSet, system: ReducedSystem) -> "FrameDerivatives":
        g, z = fs.grid, fs.z
        th = system.eos.thermo(z[REST_MASS], z[ENTROPY])
        zdot = system.rhs(z, g)
        dz = np.empty((4,) + z.shape)
        dz[0] = zdot
        for A in range(3):
            dz[A + 1] = g.d(z, A)
        dp = np.empty((4,) + z.shape[1:])
        dp[0] = th.p_r * zdot[REST_MASS] + th.p_s * zdot[ENTROPY]
        for A in range(3):
            dp[A + 1] = g.d(th.p, A)
        return cls(g, z, dz, th.p, dp, th.nu2, th.rho)


@dataclass
class ConstraintResiduals:
    """Residual fields on the grid; see the module docstring for compressed layouts."""

    torsion: np.ndarray  # (6, 4, ...)
    d_tensor: np.ndarray  # (6, 6, ...)
    friedrich_div: np.ndarray  # (4, 6, ...)
    q: np.ndarray  # (4, ...)
    eb_trace: np.ndarray  # (2, ...): tr E, tr B
    eb_symmetry: np.ndarray  # (...,) zero by storage, kept for the record
    entropy_grad_residual: np.ndarray  # (4, ...)
    rho_drift: np.ndarray  # rho - P(r, s)

    FIELDS = ("torsion", "d_tensor", "friedrich_div", "q", "eb_trace", "eb_symmetry",
              "entropy_grad_residual", "rho_drift")

    def linf(self) -> dict:
        return {name: float(np.max(np.abs(getattr(self, name)))) for name in self.FIELDS}


def _chunk_residuals(zc, dzc, pc, dpc, nu2c, kappa):
    """All tensor residuals at a batch of points (flattened trailing axis)."""
    e = full_frame(zc)  # e[A, mu]
    ez = np.einsum("Am...,Ak...->mk...", e, dzc)  # e_mu of every stored field
    ep = np.einsum("Am...,A...->m...", e, dpc)
    G = expand_connection(zc)
    eG = np.stack([expand_connection(ez[m]) for m in range(4)])

    # torsion T_a^m_b = -f^m_A (e_a(e^A_b) - e_b(e^A_a)) + Gamma_a^m_b - Gamma_b^m_a
    de = np.zeros((4, 4, 4) + zc.shape[1:])  # de[a, A, b] = e_a(e^A_b); e^A_0 constant
    de[:, :, 1:] = ez[:, FRAME].reshape((4, 4, 3) + zc.shape[1:])
    comm = de - np.swapaxes(de, 0, 2)
    f = np.moveaxis(np.linalg.inv(np.moveaxis(e, (0, 1), (-2, -1))), (-2, -1), (0, 1))  # f[m, A]
    tors = -np.einsum("mA...,aAb...->amb...", f, comm) + G - np.swapaxes(G, 0, 2)
    tors_c = _compress_pairs(np.moveaxis(tors, 1, 2), 0)  # (6, 4, ...)

    # decomposition residual d_abcd = R_abcd - W_abcd - P_abcd
    rho, p = zc[RHO], pc
    E4 = _embed(sym_from_stored(zc[WEYL_E]))
    B4 = _embed(sym_from_stored(zc[WEYL_B]))
    S = schouten_from_matter(rho, p, kappa)
    R = np.einsum("am,mbcd...->abcd...", ETA, riemann_from_connection(G, eG))
    d = R - weyl_from_EB(E4, B4) - schouten_part(S)
    d_c = _compress_pairs(_compress_pairs(d, 0), 1)

    # Bianchi residual F_abc = eta^mn nabla_m F_nabc
    F = friedrich_tensor(E4, B4, S)
    eE = np.stack([_embed(sym_from_stored(ez[m, WEYL_E])) for m in range(4)])
    eB = np.stack([_embed(sym_from_stored(ez[m, WEYL_B])) for m in range(4)])
    eF_diag = np.zeros((4, 4, 4) + zc.shape[1:])
    for m in range(4):
        eS = schouten_from_matter(ez[m, RHO], ep[m], kappa)
        eF_diag += ETA[m, m] * friedrich_tensor(eE[m], eB[m], eS)[m]
    Fu = np.einsum("mn,nabc...->mabc...", ETA, F)  # F^m_abc
    gtr = np.einsum("mn,mln...->l...", ETA, G)  # eta^mn Gamma_m^l_n
    div = eF_diag - np.einsum("l...,labc...->abc...", gtr, F)
    div -= np.einsum("mla...,mlbc...->abc...", G, Fu)
    div -= np.einsum("mlb...,malc...->abc...", G, Fu)
    div -= np.einsum("mlc...,mabl...->abc...", G, Fu)
    div_c = _compress_pairs(div, 1)

    # Euler residual q_a in gauge u = e_0
    h = p + rho
    acc = zc[21:24]
    theta = zc[24] + zc[28] + zc[32]
    q = np.empty((4,) + zc.shape[1:])
    q[0] = -nu2c * h * theta - ep[0]
    q[1:] = -h * acc - ep[1:]

    sres = zc[SGRAD] - ez[:, ENTROPY]
    return tors_c, d_c, div_c, q, sres


def constraint_residuals(fs: FieldSet, system: ReducedSystem, fd: FrameDerivatives | None = None) -> ConstraintResiduals:
    """Evaluate every residual on the grid, processing points in fixed-size chunks."""
    if fd is None:
        fd = FrameDerivatives.compute(fs, system)
    shp = fs.grid.shape
    npts = int(np.prod(shp))
    z = fd.z.reshape(NVAR, npts)
    dz = fd.dz.reshape(4, NVAR, npts)
    p = fd.p.reshape(npts)
    dp = fd.dp.reshape(4, npts)
    nu2 = fd.nu2.reshape(npts)
    out = {
        "torsion": np.empty((6, 4, npts)),
        "d_tensor": np.empty((6, 6, npts)),
        "friedrich_div": np.empty((4, 6, npts)),
        "q": np.empty((4, npts)),
        "entropy_grad_residual": np.empty((4, npts)),
    }
    for lo in range(0, npts, CHUNK):
        sl = slice(lo, min(lo + CHUNK, npts))
        parts = _chunk_residuals(z[:, sl], dz[:, :, sl], p[sl], dp[:, sl], nu2[sl], system.kappa)
        for key, val in zip(("torsion", "d_tensor", "friedrich_div", "q", "entropy_grad_residual"), parts):
            out[key][..., sl] = val
    out = {k: v.reshape(v.shape[:-1] + shp) for k, v in out.items()}
    E = sym_from_stored(fd.z[WEYL_E])
    B = sym_from_stored(fd.z[WEYL_B])
    trace = np.stack([np.einsum("aa...->...", E), np.einsum("aa...->...", B)])
    asym = np.maximum(
        np.max(np.abs(E - np.swapaxes(E, 0, 1)), axis=(0, 1)),
        np.max(np.abs(B - np.swapaxes(B, 0, 1)), axis=(0, 1)),
    )
    return ConstraintResiduals(
        eb_trace=trace,
        eb_symmetry=asym,
        rho_drift=fd.z[RHO] - fd.rho_eos,
        **out,
    )


def q_zero_identity(fs: FieldSet, system: ReducedSystem) -> np.ndarray:
    """q_0 alone, without spatial derivatives: -nu^2 (p + rho) theta - d_t p."""
    z = fs.z
    th = system.eos.thermo(z[REST_MASS], z[ENTROPY])
    theta = z[24] + z[28] + z[32]
    rdot = -z[REST_MASS] * theta
    pdot = th.p_r * rdot  # d_t s = 0 in the reduced system
    return -th.nu2 * (th.p + z[RHO]) * theta - pdot


# ----------------------------------------------------------------------
@dataclass
class CharacteristicSpectrum:
    direction: np.ndarray
    speeds: np.ndarray  # sorted ascending

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.speeds)))


def characteristic_speeds(z_point: np.ndarray, eos: EquationOfState, xi: np.ndarray) -> CharacteristicSpectrum:
    """Generalized eigenvalues of (sum_A xi_A M^A, M0) for a unit spatial covector xi."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (3,) or abs(np.linalg.norm(xi) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit 3-vector")
    pm = assemble_principal(np.asarray(z_point, dtype=float), eos)
    lam0 = pm.min_eig_M0()
    if not lam0 > 0:
        raise HyperbolicityLost(f"M0 not positive definite (min eigenvalue {lam0:.3e})", min_eig=lam0)
    A = np.einsum("A,Aij->ij", xi, pm.M)
    return CharacteristicSpectrum(xi, np.sort(eigh(A, pm.M0, eigvals_only=True)))


def m0_min_eigenvalue(z: np.ndarray, nu2: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of M0 at every point.

    The acceleration/extrinsic block reduces to a 2x2 problem along e^0; the
    12x12 E/B block is handled by a batched symmetric eigensolver.
    """
    e0 = z[0:3]
    q = np.sum(e0**2, axis=0)
    lam_acc = 0.5 * ((1.0 + nu2) - np.sqrt((1.0 - nu2) ** 2 + 4.0 * nu2**2 * q))
    lo = np.minimum(np.minimum(1.0, nu2), lam_acc)
    flat = e0.reshape(3, -1)
    lam_eb = np.empty(flat.shape[1])
    W = np.diag(SYM_WEIGHTS)
    for a in range(0, flat.shape[1], CHUNK):
        sl = slice(a, min(a + CHUNK, flat.shape[1]))
        C = np.moveaxis(SYM_WEIGHTS[:, None, None] * curl_matrix(flat[:, sl]), -1, 0)
        M = np.zeros((C.shape[0], 12, 12))
        M[:, :6, :6] = W
        M[:, 6:, 6:] = W
        M[:, :6, 6:] = C
        M[:, 6:, :6] = -C
        lam_eb[sl] = np.linalg.eigvalsh(M)[:, 0]
    return np.minimum(lo, lam_eb.reshape(q.shape))


# ----------------------------------------------------------------------
@dataclass
class UlSobolevNorm:
    order: int
    patch: int
    value: float
    argmax: tuple  # lower corner of the maximizing patch
    patch_values: np.ndarray


def _multi_indices(order: int):
    for k in range(order + 1):
        yield from itertools.combinations_with_replacement(range(3), k)


def ul_sobolev_norm(f: np.ndarray, grid: Grid, order: int, patch: int) -> UlSobolevNorm:
    """sup over an overlapping periodic patch cover of the discrete H^order norm.

    Patches are cubes of ``patch`` points with corners every ``patch // 2``
    points.  A patch at least as large as the grid gives the single patch
    covering everything, whose value is the global discrete norm.
    """
    if order < 0:
        raise ValueError("order must be non-negative")
    width = grid.fd_order + 1
    if patch < width:
        raise ValueError(f"patch of {patch} points is smaller than the stencil width {width}")
    f = np.asarray(f, dtype=float)
    dens = np.zeros(grid.shape)
    for alpha in _multi_indices(order):
        g = f
        for ax in alpha:
            g = grid.d(g, ax)
        dens += np.sum(g.reshape((-1,) + grid.shape) ** 2, axis=0)
    n = grid.n
    if patch >= n:
        vals = np.array([[[np.sum(dens)]]])
        stride = n
    else:
        box = dens
        for ax in range(3):
            pad = np.concatenate([box, np.take(box, range(patch - 1), axis=ax)], axis=ax)
            c = np.cumsum(pad, axis=ax)
            c = np.concatenate([np.zeros_like(np.take(c, [0], axis=ax)), c], axis=ax)
            box = np.take(c, range(patch, patch + n), axis=ax) - np.take(c, range(n), axis=ax)
        stride = max(patch // 2, 1)
        vals = box[::stride, ::stride, ::stride]
    vals = np.sqrt(grid.h**3 * vals)
    idx = np.unravel_index(int(np.argmax(vals)), vals.shape)
    return UlSobolevNorm(order, min(patch, n), float(vals[idx]), tuple(int(i) * stride for i in idx), vals)


# ----------------------------------------------------------------------
def diagnostic_row(
    fs: FieldSet,
    system: ReducedSystem,
    ul_order: int = 1,
    ul_patch: int | None = None,
    speed_points: int = 2,
) -> dict:
    """One CSV row: scalars, L-infinity and H^s_ul residual norms, spectrum extrema."""
    grid, z = fs.grid, fs.z
    fd = FrameDerivatives.compute(fs, system)
    res = constraint_residuals(fs, system, fd)
    theta = z[24] + z[28] + z[32]
    row = {
        "t": fs.t,
        "rho": float(np.mean(z[RHO])),
        "rest_mass": float(np.mean(z[REST_MASS])),
        "hubble_trace": float(np.mean(theta) / 3.0),
    }
    patch = ul_patch if ul_patch is not None else max(grid.n // 2, grid.fd_order + 1)
    for name, val in res.linf().items():
        row[f"{name}_linf"] = val
    for name in ("torsion", "d_tensor", "friedrich_div", "q"):
        row[f"{name}_hul"] = ul_sobolev_norm(getattr(res, name), grid, ul_order, patch).value
    row["m0_min_eig"] = float(np.min(m0_min_eigenvalue(z, fd.nu2)))
    ev = induced_metric(z).g_t_eigenvalues()
    row["gt_min_eig"] = float(np.min(ev))
    row["gt_max_eig"] = float(np.max(ev))
    # dense spectrum at the origin and at the point of largest |e^0|
    e0sq = np.sum(z[0:3] ** 2, axis=0)
    pts = [(0, 0, 0), tuple(int(i) for i in np.unravel_index(int(np.argmax(e0sq)), e0sq.shape))][:speed_points]
    smax, smin = -np.inf, np.inf
    for pt in pts:
        for ax in range(3):
            sp = characteristic_speeds(fs.point(*pt), system.eos, np.eye(3)[ax]).speeds
            smax, smin = max(smax, sp[-1]), min(smin, sp[0])
    row["speed_max"] = float(smax)
    row["speed_min"] = float(smin)
    return row


def write_rows(rows: list[dict], path: str | Path) -> None:
    """CSV with a fixed column order and round-trip float formatting."""
    if not rows:
        raise ValueError("no diagnostic rows to write")
    cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(float(r[c])) for c in cols])


def read_rows(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in r.items()} for r in csv.DictReader(fh)]


def convergence_order(errors: list[float], ratio: float = 2.0) -> list[float]:
    """log_ratio of successive error ratios under refinement by ``ratio``."""
    return [float(np.log(a / b) / np.log(ratio)) for a, b in zip(errors[:-1], errors[1:])]
