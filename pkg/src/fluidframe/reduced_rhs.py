"""Reduced evolution equations in fluid gauge.

The system has the first-order form

    M0 dz/dt + sum_A M^A d_A z + L(z) = 0,

with symmetric M^A and M0 positive definite while the fluid frame stays
inside the light cone.  Two independent routes produce dz/dt:

* :meth:`ReducedSystem.rhs` works on a whole grid and inverts M0 block by
  block (explicit acceleration/extrinsic elimination, closed-form E/B inverse).
* :func:`assemble_principal` plus :meth:`ReducedSystem.lower_order` build the
  dense 52x52 matrices at a point; :meth:`ReducedSystem.time_derivative`
  solves that system directly.

Notation in the code: ``e0[a] = e^0_a``, ``ea[A, a] = e^A_a`` (A spatial),
``S[d, a, b] = Gamma_d^a_b``, ``acc[a] = Gamma_0^0_a``, ``K[a, b] = Gamma_a^0_b``,
``theta = trace K``.  Spatial frame directions are ``D_a = e^A_a d_A``.

Equation to row map (stored index ranges):

    frame transport        0-11
    spatial connection     12-20
    acceleration           21-23   (contains nu^2 e_l(K[a, l]))
    extrinsic part         24-32   (carries an overall nu^2)
    electric Weyl          33-38   (rows weighted 1,1,1,2,2,2)
    magnetic Weyl          39-44   (same weights)
    energy density         45
    rest-mass density      46
    entropy                47
    entropy gradient       48-51
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eos import EquationOfState
from .frame_algebra import EPS3
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
    SYM_PAIRS,
    SYM_WEIGHTS,
    WEYL_B,
    WEYL_E,
    Grid,
    anti_from_stored,
    anti_to_stored,
    sym_from_stored,
    sym_to_stored,
)


# points per slab when evaluating the pointwise terms on a grid
LOWER_CHUNK_POINTS = 16384


class HyperbolicityLost(RuntimeError):
    """M0 stopped being positive definite somewhere on the grid."""

    def __init__(self, message: str, location=None, min_eig: float | None = None):
        super().__init__(message)
        self.location = location
        self.min_eig = min_eig


def curl_sym_eps(xi: np.ndarray, X: np.ndarray) -> np.ndarray:
    """C_xi(X)_ab = 1/2 sum_{m,n} xi_m (eps_bmn X_na + eps_amn X_nb)."""
    Y = np.einsum("bmn,m...,na...->ab...", EPS3, xi, X)
    return 0.5 * (Y + np.swapaxes(Y, 0, 1))


def curl_sym(xi: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Same operator as :func:`curl_sym_eps`, written as column cross products."""
    Y = np.empty(np.broadcast_shapes(X.shape, (3, 1) + xi.shape[1:]))
    Y[0] = xi[1] * X[2] - xi[2] * X[1]
    Y[1] = xi[2] * X[0] - xi[0] * X[2]
    Y[2] = xi[0] * X[1] - xi[1] * X[0]
    return 0.5 * (Y + np.swapaxes(Y, 0, 1))


def solve_weyl_block(e0: np.ndarray, rE: np.ndarray, rB: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve Edot + C Bdot = rE, Bdot - C Edot = rB with C = C_{e0}.

    C obeys C (C^2 + q)(C^2 + q/4) = 0 with q = |e0|^2, so (I + C^2)^{-1} is the
    quadratic in C^2 that interpolates 1/(1 + y) at y = 0, -q, -q/4.
    Arguments are full symmetric matrices (3, 3, ...).
    """
    q = np.sum(e0**2, axis=0)
    den = (1.0 - q) * (1.0 - 0.25 * q)
    c2 = 1.0 / den
    c1 = (1.25 * q - 1.0) / den
    w = rE - curl_sym(e0, rB)
    w2 = curl_sym(e0, curl_sym(e0, w))
    w4 = curl_sym(e0, curl_sym(e0, w2))
    Ed = w + c1 * w2 + c2 * w4
    return Ed, rB + curl_sym(e0, Ed)


def _double_eps(K: np.ndarray, B: np.ndarray) -> np.ndarray:
    """sum K_mn B_sl eps_sma eps_nlb, contracted in stages."""
    T = np.einsum("sma,sl...->mla...", EPS3, B)
    U = np.einsum("mn...,mla...->nla...", K, T)
    return np.einsum("nlb,nla...->ab...", EPS3, U)


def _curl_basis() -> np.ndarray:
    """Cm[m] is the 6x6 matrix of X -> C_{e_m}(X) on stored components."""
    out = np.zeros((3, 6, 6))
    for m in range(3):
        xi = np.zeros(3)
        xi[m] = 1.0
        for j in range(6):
            v = np.zeros(6)
            v[j] = 1.0
            out[m, :, j] = sym_to_stored(curl_sym_eps(xi, sym_from_stored(v)))
    return out


CURL_BASIS = _curl_basis()


def curl_matrix(xi: np.ndarray) -> np.ndarray:
    """6x6 matrix (leading axes) of C_xi acting on stored symmetric components."""
    return np.einsum("mkj,m...->kj...", CURL_BASIS, xi)


def _idx_acc(a):
    return ACC.start + a


def _idx_K(a, b):
    return EXTR.start + 3 * a + b


@dataclass
class PrincipalMatrices:
    M0: np.ndarray  # (52, 52)
    M: np.ndarray  # (3, 52, 52): M^1, M^2, M^3

    def all(self) -> list[np.ndarray]:
        return [self.M0, *self.M]

    def asymmetry(self) -> float:
        return max(float(np.max(np.abs(m - m.T))) for m in self.all())

    def min_eig_M0(self) -> float:
        return float(np.linalg.eigvalsh(self.M0)[0])


def assemble_principal(z: np.ndarray, eos: EquationOfState) -> PrincipalMatrices:
    """Dense symmetric M0, M^1, M^2, M^3 at a single point ``z`` (shape (52,))."""
    z = np.asarray(z, dtype=float)
    if z.shape != (NVAR,):
        raise ValueError("assemble_principal works on one point")
    nu2 = float(eos.thermo(z[REST_MASS], z[ENTROPY]).nu2)
    if not nu2 > 0:
        raise HyperbolicityLost("sound speed squared is not positive", min_eig=nu2)
    frame = z[FRAME].reshape(4, 3)
    M0 = np.eye(NVAR)
    M = np.zeros((3, NVAR, NVAR))
    coeffs = [frame[0]] + [frame[A] for A in (1, 2, 3)]
    for slot, xi in enumerate(coeffs):
        T = M0 if slot == 0 else M[slot - 1]
        for a in range(3):
            for l in range(3):
                T[_idx_acc(a), _idx_K(a, l)] = -nu2 * xi[l]
                T[_idx_K(a, l), _idx_acc(a)] = -nu2 * xi[l]
        C = SYM_WEIGHTS[:, None] * curl_matrix(xi)
        T[WEYL_E, WEYL_B] = C
        T[WEYL_B, WEYL_E] = -C
    for a in range(3):
        for b in range(3):
            M0[_idx_K(a, b), _idx_K(a, b)] = nu2
    M0[WEYL_E, WEYL_E] = np.diag(SYM_WEIGHTS)
    M0[WEYL_B, WEYL_B] = np.diag(SYM_WEIGHTS)
    return PrincipalMatrices(M0, M)


@dataclass
class _Fields:
    e0: np.ndarray
    ea: np.ndarray
    frame: np.ndarray
    S: np.ndarray
    acc: np.ndarray
    K: np.ndarray
    E: np.ndarray
    B: np.ndarray
    rho: np.ndarray
    r: np.ndarray
    s: np.ndarray
    sg: np.ndarray

    @classmethod
    def from_z(cls, z):
        batch = z.shape[1:]
        frame = z[FRAME].reshape((4, 3) + batch)
        return cls(
            e0=frame[0],
            ea=frame[1:],
            frame=frame,
            S=anti_from_stored(z[SPATIAL]),
            acc=z[ACC],
            K=z[EXTR].reshape((3, 3) + batch),
            E=sym_from_stored(z[WEYL_E]),
            B=sym_from_stored(z[WEYL_B]),
            rho=z[RHO],
            r=z[REST_MASS],
            s=z[ENTROPY],
            sg=z[SGRAD],
        )


class ReducedSystem:
    """Reduced Einstein-Euler-entropy equations for a given EOS and coupling."""

    def __init__(self, eos: EquationOfState, kappa: float = 1.0):
        self.eos = eos
        self.kappa = float(kappa)

    # ------------------------------------------------------------------
    # non-derivative terms
    def _lower_parts(self, z: np.ndarray) -> dict:
        """Every non-derivative term of each equation, unweighted.

        Keys name the equation; the returned arrays enter as ``+L`` on the
        left-hand side, next to the time derivative.
        """
        f = _Fields.from_z(z)
        th = self.eos.thermo(f.r, f.s)
        p, nu2 = th.p, th.nu2
        h = p + f.rho
        K, S, acc, E, B = f.K, f.S, f.acc, f.E, f.B
        theta = K[0, 0] + K[1, 1] + K[2, 2]
        sa = f.sg[1:]
        ein = np.einsum

        # frame transport: d_t e^A_b + K[b, m] e^A_m - acc_b delta^A_0 = 0
        L_frame = ein("bm...,Am...->Ab...", K, f.frame)
        L_frame[0] -= acc

        # spatial connection; the B term carries the sign that makes
        # d^a_b0c = 0 with W rebuilt from (E, B)
        L_S = ein("lab...,dl...->dab...", S, K)
        L_S += acc[None, :, None] * K[:, None, :]
        L_S -= K[:, :, None] * acc[None, None, :]
        L_S += ein("mab,dm...->dab...", EPS3, B)

        # acceleration row
        X = ein("l...,al...->a...", acc, K - np.swapaxes(K, 0, 1))
        X += ein("ml...,aml...->a...", K, S)
        X -= ein("ml...,lma...->a...", K, S)
        X -= ein("alm...,lm...->a...", S, K)
        X -= ein("m...,am...->a...", ein("llm...->m...", S), K)
        ent = (
            -th.nu2_s
            + (1.0 + f.r * th.nu2_r / nu2) * th.p_s / h
            - nu2 * th.rho_s / h
        )
        L_acc = (
            ein("m...,am...->a...", acc, K)
            + ent * theta * sa
            + (h / nu2 * th.p_rhorho - nu2) * theta * acc
            - nu2 * X
        )

        # extrinsic row (overall nu^2 kept)
        Y = acc[:, None] * acc[None, :] - ein("am...,mb...->ab...", K, K)
        Y -= ein("m...,amb...->ab...", acc, S)
        Y += ein("m...,amb...->ab...", acc, S - np.swapaxes(S, 0, 2))
        Y += nu2 * theta * (K - np.swapaxes(K, 0, 1))
        Y += (th.rho_s - th.p_s / nu2) / h * (acc[:, None] * sa[None, :] - sa[:, None] * acc[None, :])
        Y -= (self.kappa / 6.0) * (f.rho + 3.0 * p) * np.eye(3).reshape((3, 3) + (1,) * theta.ndim)
        L_K = -nu2 * E - nu2 * Y

        eye = np.eye(3).reshape((3, 3) + (1,) * theta.ndim)

        def sym(T):
            return T + np.swapaxes(T, 0, 1)

        def conn_curl(X_):
            # connection part of 1/2 [nabla_m X_na eps_bmn + (a<->b)]
            dX = -ein("mln...,la...->mna...", S, X_) - ein("mla...,nl...->mna...", S, X_)
            return 0.5 * sym(ein("bmn,mna...->ab...", EPS3, dX))

        def acc_curl(X_):
            return sym(ein("m...,mna,bn...->ab...", acc, EPS3, X_))

        L_E = (
            ein("mb...,am...->ab...", E, K)
            + ein("am...,bm...->ab...", E, K)
            + conn_curl(B)
            + acc_curl(B)
            - 1.5 * sym(ein("al...,bl...->ab...", K, E))
            - sym(ein("la...,bl...->ab...", K, E))
            + eye * ein("ls...,ls...->...", K, E)
            + 2.0 * theta * E
            - 0.25 * self.kappa * h * (sym(K) - (2.0 / 3.0) * eye * theta)
        )
        L_B = (
            ein("mb...,am...->ab...", B, K)
            + ein("am...,bm...->ab...", B, K)
            - conn_curl(E)
            - acc_curl(E)
            - 0.5 * sym(ein("la...,bl...->ab...", K, B))
            - sym(ein("al...,bl...->ab...", K, B))
            + theta * B
            - 0.5 * sym(_double_eps(K, B))
        )

        L_sg = np.zeros_like(f.sg)
        L_sg[1:] = -acc * f.sg[0] + ein("am...,m...->a...", K, sa)

        return {
            "frame": L_frame,
            "spatial": L_S,
            "acc": L_acc,
            "extr": L_K,
            "E": L_E,
            "B": L_B,
            "rho": h * theta,
            "r": f.r * theta,
            "s": np.zeros_like(f.s),
            "sgrad": L_sg,
            "nu2": nu2,
        }

    def _lower_parts_chunked(self, z: np.ndarray) -> dict:
        """:meth:`_lower_parts` over slabs of the first batch axis.

        The terms are pointwise, so slabbing changes nothing but the size of
        the temporaries, which then stay cache resident.
        """
        nb = z.ndim - 1
        if nb < 2:
            return self._lower_parts(z)
        rows = max(1, LOWER_CHUNK_POINTS // int(np.prod(z.shape[2:])))
        out = {}
        for i in range(0, z.shape[1], rows):
            sl = slice(i, min(i + rows, z.shape[1]))
            for k, v in self._lower_parts(z[:, sl]).items():
                if k not in out:
                    out[k] = np.empty(v.shape[: v.ndim - nb] + z.shape[1:])
                out[k][(Ellipsis, sl) + (slice(None),) * (nb - 1)] = v
        return out

    def lower_order(self, z: np.ndarray) -> np.ndarray:
        """L(z) in the row scaling of :func:`assemble_principal` (52, ...)."""
        z = np.asarray(z, dtype=float)
        parts = self._lower_parts(z)
        batch = z.shape[1:]
        w = SYM_WEIGHTS.reshape((6,) + (1,) * len(batch))
        L = np.empty((NVAR,) + batch)
        L[FRAME] = parts["frame"].reshape((12,) + batch)
        L[SPATIAL] = anti_to_stored(parts["spatial"])
        L[ACC] = parts["acc"]
        L[EXTR] = parts["extr"].reshape((9,) + batch)
        L[WEYL_E] = w * sym_to_stored(parts["E"])
        L[WEYL_B] = w * sym_to_stored(parts["B"])
        L[RHO] = parts["rho"]
        L[REST_MASS] = parts["r"]
        L[ENTROPY] = parts["s"]
        L[SGRAD] = parts["sgrad"]
        return L

    # ------------------------------------------------------------------
    # block route on a grid
    def check_hyperbolic(self, z: np.ndarray, nu2: np.ndarray | None = None) -> None:
        """Raise :class:`HyperbolicityLost` where either M0 block loses positivity.

        The (acc, K) blocks are positive iff nu^2 > 0 and nu^2 |e^0|^2 < 1; the
        E/B block iff |e^0| < 1.
        """
        if nu2 is None:
            nu2 = self.eos.thermo(z[REST_MASS], z[ENTROPY]).nu2
        e0sq = np.sum(z[0:3] ** 2, axis=0)
        margin = np.minimum(np.minimum(1.0 - nu2 * e0sq, 1.0 - e0sq), nu2)
        bad = ~(margin > 0)
        if np.any(bad):
            loc = tuple(int(i) for i in np.unravel_index(np.argmin(np.where(bad, margin, np.inf)), margin.shape))
            zp = z[(slice(None),) + loc]
            try:
                mine = assemble_principal(zp, self.eos).min_eig_M0()
            except HyperbolicityLost as exc:
                mine = exc.min_eig
            raise HyperbolicityLost(
                f"M0 not positive definite at grid point {loc} (min eigenvalue {mine:.3e})",
                location=loc,
                min_eig=mine,
            )

    def rhs(self, z: np.ndarray, grid: Grid) -> np.ndarray:
        """dz/dt on the whole grid, z of shape (52, n, n, n)."""
        parts = self._lower_parts_chunked(z)
        nu2 = parts["nu2"]
        self.check_hyperbolic(z, nu2)
        batch = z.shape[1:]
        frame = z[FRAME].reshape((4, 3) + batch)
        e0 = frame[0]
        out = np.empty_like(z)
        out[FRAME] = -parts["frame"].reshape((12,) + batch)
        out[SPATIAL] = -anti_to_stored(parts["spatial"])
        out[RHO] = -parts["rho"]
        out[REST_MASS] = -parts["r"]
        out[ENTROPY] = 0.0
        out[SGRAD] = -parts["sgrad"]

        divK = np.zeros((3,) + batch)  # sum_l D_l K[a, l]
        Dacc = np.zeros((3, 3) + batch)  # D_b acc_a
        curlB = np.zeros((3, 3) + batch)
        curlE = np.zeros((3, 3) + batch)
        for A in range(3):
            xi = frame[A + 1]
            dz = grid.d(z[ACC.start : WEYL_B.stop], A)  # acc, K, E, B are contiguous
            dK = dz[3:12].reshape((3, 3) + batch)
            divK += np.einsum("al...,l...->a...", dK, xi)
            Dacc += dz[0:3, None] * xi[None, :]
            curlE += curl_sym(xi, sym_from_stored(dz[12:18]))
            curlB += curl_sym(xi, sym_from_stored(dz[18:24]))

        rc = nu2 * divK - parts["acc"]
        rd = nu2 * Dacc - parts["extr"]
        x = (rc + np.einsum("b...,ab...->a...", e0, rd)) / (1.0 - nu2 * np.sum(e0**2, axis=0))
        out[ACC] = x
        out[EXTR] = (rd / nu2 + x[:, None] * e0[None, :]).reshape((9,) + batch)

        Ed, Bd = solve_weyl_block(e0, -curlB - parts["E"], curlE - parts["B"])
        out[WEYL_E] = sym_to_stored(Ed)
        out[WEYL_B] = sym_to_stored(Bd)
        return out

    # ------------------------------------------------------------------
    # dense route at a point
    def time_derivative(self, z_point: np.ndarray, dz: np.ndarray) -> np.ndarray:
        """Solve M0 zdot = -sum_A M^A d_A z - L at one point.

        ``dz`` holds the coordinate derivatives, shape (3, 52).
        """
        pm = assemble_principal(z_point, self.eos)
        lam = np.linalg.eigvalsh(pm.M0)[0]
        if not lam > 0:
            raise HyperbolicityLost(f"M0 not positive definite (min eigenvalue {lam:.3e})", min_eig=lam)
        rhs = -np.einsum("Aij,Aj->i", pm.M, dz) - self.lower_order(z_point)
        cho = np.linalg.cholesky(pm.M0)
        y = np.linalg.solve(cho, rhs)
        return np.linalg.solve(cho.T, y)

    def time_derivative_at(self, fs, point: tuple[int, int, int]) -> np.ndarray:
        """Dense route evaluated at one grid point of a FieldSet."""
        g = fs.grid
        dz = np.stack([g.d_at(fs.z, point, A) for A in range(3)])
        return self.time_derivative(fs.point(*point), dz)


def block_sizes() -> dict:
    """Number of rows per equation, used to document coverage."""
    return {
        "frame": 12,
        "spatial": 9,
        "acc": 3,
        "extr": 9,
        "E": len(SYM_PAIRS),
        "B": len(SYM_PAIRS),
        "rho": 1,
        "r": 1,
        "s": 1,
        "sgrad": 4,
    }
