"""Unknown vector of the reduced system, its storage layout, and the periodic grid.

A state is a float array of shape (52, *batch).  The leading axis follows the
layout below; batch axes are grid points (or a single point when empty).

    0-11   e^A_a        frame coefficients, A = 0..3, a = 1..3 (index 3A + a-1)
    12-20  Gamma_d^b_c  spatial connection, antisymmetric in (b, c);
                        stored for (b, c) in (1,2), (1,3), (2,3)
    21-23  Gamma_0^0_a  acceleration
    24-32  Gamma_a^0_b  (index 24 + 3(a-1) + b-1)
    33-38  E_ab         symmetric, pairs 11 22 33 12 13 23
    39-44  B_ab         same pairs
    45     rho
    46     r
    47     s
    48-51  s_alpha       alpha = 0..3
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .frame_algebra import ETA

NVAR = 52
FRAME = slice(0, 12)
SPATIAL = slice(12, 21)
ACC = slice(21, 24)
EXTR = slice(24, 33)
WEYL_E = slice(33, 39)
WEYL_B = slice(39, 45)
RHO = 45
REST_MASS = 46
ENTROPY = 47
SGRAD = slice(48, 52)

ANTI_PAIRS = ((0, 1), (0, 2), (1, 2))
SYM_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
# weight of each stored symmetric component in the Frobenius inner product
SYM_WEIGHTS = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])


def _field_names() -> list[str]:
    names = [f"e^{A}_{a + 1}" for A in range(4) for a in range(3)]
    names += [f"G_{d + 1}^{b + 1}_{c + 1}" for d in range(3) for b, c in ANTI_PAIRS]
    names += [f"G_0^0_{a + 1}" for a in range(3)]
    names += [f"G_{a + 1}^0_{b + 1}" for a in range(3) for b in range(3)]
    names += [f"E_{a + 1}{b + 1}" for a, b in SYM_PAIRS]
    names += [f"B_{a + 1}{b + 1}" for a, b in SYM_PAIRS]
    names += ["rho", "r", "s"] + [f"s_{a}" for a in range(4)]
    return names


FIELD_NAMES = _field_names()
assert len(FIELD_NAMES) == NVAR


def sym_from_stored(v: np.ndarray) -> np.ndarray:
    """(6, ...) stored components -> (3, 3, ...) symmetric matrix."""
    m = np.empty((3, 3) + v.shape[1:], dtype=v.dtype)
    for k, (a, b) in enumerate(SYM_PAIRS):
        m[a, b] = v[k]
        m[b, a] = v[k]
    return m


def sym_to_stored(m: np.ndarray) -> np.ndarray:
    """(3, 3, ...) -> (6, ...), reading the upper triangle."""
    return np.stack([m[a, b] for a, b in SYM_PAIRS])


def anti_from_stored(v: np.ndarray) -> np.ndarray:
    """(3, 3, ...) stored as [d, pair] -> (3, 3, 3, ...) G[d, b, c] antisymmetric in b, c."""
    v = v.reshape((3, 3) + v.shape[1:])
    m = np.zeros((3, 3, 3) + v.shape[2:], dtype=v.dtype)
    for k, (b, c) in enumerate(ANTI_PAIRS):
        m[:, b, c] = v[:, k]
        m[:, c, b] = -v[:, k]
    return m


def anti_to_stored(m: np.ndarray) -> np.ndarray:
    return np.stack([m[d, b, c] for d in range(3) for b, c in ANTI_PAIRS])


@dataclass
class FluidGaugeState:
    """Unpacked view of the 52 unknowns (arrays carry trailing batch axes)."""

    frame: np.ndarray  # (4, 3): e^A_a
    conn_spatial: np.ndarray  # (3, 3, 3): Gamma_d^b_c
    conn_lapse: np.ndarray  # (3,): Gamma_0^0_a
    conn_extr: np.ndarray  # (3, 3): Gamma_a^0_b
    weyl_E: np.ndarray  # (3, 3)
    weyl_B: np.ndarray  # (3, 3)
    rho: np.ndarray
    rest_mass: np.ndarray
    entropy: np.ndarray
    entropy_grad: np.ndarray  # (4,)

    @classmethod
    def unpack(cls, z: np.ndarray) -> "FluidGaugeState":
        z = np.asarray(z, dtype=float)
        if z.shape[0] != NVAR:
            raise ValueError(f"expected leading axis {NVAR}, got {z.shape[0]}")
        batch = z.shape[1:]
        return cls(
            frame=z[FRAME].reshape((4, 3) + batch),
            conn_spatial=anti_from_stored(z[SPATIAL]),
            conn_lapse=z[ACC],
            conn_extr=z[EXTR].reshape((3, 3) + batch),
            weyl_E=sym_from_stored(z[WEYL_E]),
            weyl_B=sym_from_stored(z[WEYL_B]),
            rho=z[RHO],
            rest_mass=z[REST_MASS],
            entropy=z[ENTROPY],
            entropy_grad=z[SGRAD],
        )

    def pack(self) -> np.ndarray:
        batch = np.shape(self.rho)
        z = np.empty((NVAR,) + batch)
        z[FRAME] = np.reshape(self.frame, (12,) + batch)
        z[SPATIAL] = anti_to_stored(np.asarray(self.conn_spatial))
        z[ACC] = self.conn_lapse
        z[EXTR] = np.reshape(self.conn_extr, (9,) + batch)
        z[WEYL_E] = sym_to_stored(np.asarray(self.weyl_E))
        z[WEYL_B] = sym_to_stored(np.asarray(self.weyl_B))
        z[RHO] = self.rho
        z[REST_MASS] = self.rest_mass
        z[ENTROPY] = self.entropy
        z[SGRAD] = self.entropy_grad
        return z


def expand_connection(z: np.ndarray) -> np.ndarray:
    """All 64 Gamma_a^c_b as G[a, c, b, ...] from the 21 stored components.

    Gauge zeros: Gamma_0^a_b = 0 for spatial a, b; Gamma_a^0_0 = 0.
    Symmetries: Gamma_a^0_b = Gamma_a^b_0, Gamma_0^a_0 = Gamma_0^0_a.
    """
    z = np.asarray(z, dtype=float)
    batch = z.shape[1:]
    G = np.zeros((4, 4, 4) + batch)
    acc = z[ACC]
    K = z[EXTR].reshape((3, 3) + batch)
    G[0, 0, 1:] = acc
    G[0, 1:, 0] = acc
    G[1:, 0, 1:] = K
    G[1:, 1:, 0] = K
    G[1:, 1:, 1:] = anti_from_stored(z[SPATIAL])
    return G


def extract_connection(G: np.ndarray) -> dict:
    """Inverse of :func:`expand_connection` on the stored components."""
    batch = G.shape[3:]
    return {
        "spatial": anti_to_stored(G[1:, 1:, 1:]),
        "lapse": G[0, 0, 1:],
        "extr": G[1:, 0, 1:].reshape((9,) + batch),
    }


def full_frame(z: np.ndarray) -> np.ndarray:
    """e^A_alpha as (4, 4, ...), with e^A_0 = delta^A_0."""
    batch = z.shape[1:]
    e = np.zeros((4, 4) + batch)
    e[0, 0] = 1.0
    e[:, 1:] = z[FRAME].reshape((4, 3) + batch)
    return e


@dataclass
class InducedMetric:
    g_inv: np.ndarray  # g^{AB}
    g_t: np.ndarray  # quadratic form on the slice, (3, 3, ...)
    f0: np.ndarray  # f^0_A
    f: np.ndarray  # f^a_A, (3, 3, ...) indexed [a, A]

    def g_t_eigenvalues(self) -> np.ndarray:
        gt = np.moveaxis(self.g_t, (0, 1), (-2, -1))
        return np.linalg.eigvalsh(gt)


class SingularFrame(ValueError):
    pass


def induced_metric(z: np.ndarray) -> InducedMetric:
    z = np.asarray(z, dtype=float)
    batch = z.shape[1:]
    e = full_frame(z)
    g_inv = np.einsum("Aa...,Bb...,ab->AB...", e, e, ETA)
    es = z[FRAME].reshape((4, 3) + batch)[1:]  # e^A_a, A spatial
    es_m = np.moveaxis(es, (0, 1), (-2, -1))
    det = np.linalg.det(es_m)
    if np.any(np.abs(det) < 1e-14):
        raise SingularFrame("spatial frame block is singular")
    f_m = np.linalg.inv(es_m)  # [a, A]
    f = np.moveaxis(f_m, (-2, -1), (0, 1))
    e0 = z[FRAME].reshape((4, 3) + batch)[0]
    f0 = -np.einsum("a...,aA...->A...", e0, f)
    g_t = np.einsum("A...,B...->AB...", f0, f0) - np.einsum("aA...,aB...->AB...", f, f)
    return InducedMetric(g_inv=g_inv, g_t=g_t, f0=f0, f=f)


@dataclass(frozen=True)
class Grid:
    """Periodic cube [0, n h)^3 with n points per axis."""

    n: int
    h: float
    fd_order: int = 4

    def __post_init__(self):
        if self.fd_order not in (2, 4):
            raise ValueError("fd_order must be 2 or 4")
        if self.n < 2 * self.fd_order:
            raise ValueError(f"n={self.n} too small for fd_order={self.fd_order}")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")

    @property
    def length(self) -> float:
        return self.n * self.h

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    def coords(self) -> np.ndarray:
        x = np.arange(self.n) * self.h
        return np.stack(np.meshgrid(x, x, x, indexing="ij"))

    def wrap(self, i: int) -> int:
        return i % self.n

    def d(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Centered periodic derivative along spatial axis 0, 1 or 2.

        ``f`` has the three spatial axes last.
        """
        ax = f.ndim - 3 + axis
        w = self.fd_order // 2
        n = f.shape[ax]
        fp = np.concatenate([f.take(range(n - w, n), axis=ax), f, f.take(range(w), axis=ax)], axis=ax)

        def shifted(k):
            idx = [slice(None)] * f.ndim
            idx[ax] = slice(w + k, w + k + n)
            return fp[tuple(idx)]

        if self.fd_order == 2:
            return (shifted(1) - shifted(-1)) / (2 * self.h)
        return (8.0 * (shifted(1) - shifted(-1)) - (shifted(2) - shifted(-2))) / (12 * self.h)

    def d_at(self, f: np.ndarray, point: tuple[int, int, int], axis: int) -> np.ndarray:
        """Same stencil as :meth:`d`, evaluated at a single grid point."""

        def at(shift):
            idx = list(point)
            idx[axis] = self.wrap(idx[axis] + shift)
            return f[(Ellipsis,) + tuple(idx)]

        if self.fd_order == 2:
            return (at(1) - at(-1)) / (2 * self.h)
        return (8.0 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12 * self.h)

    def grad(self, f: np.ndarray) -> np.ndarray:
        """Stack of the three coordinate derivatives on a new leading axis."""
        return np.stack([self.d(f, k) for k in range(3)])

    def dissipation(self, f: np.ndarray) -> np.ndarray:
        """Kreiss-Oliger operator summed over axes (without the strength factor).

        Uses (D+D-)^p with p = fd_order/2 + 1, scaled so that the added term is
        -(-1)^p h^(2p-1) / 2^(2p) (D+D-)^p f, which damps the grid mode.
        """
        p = self.fd_order // 2 + 1
        out = np.zeros_like(f)
        for axis in range(3):
            ax = f.ndim - 3 + axis
            g = f
            for _ in range(p):
                g = np.roll(g, -1, ax) - 2.0 * g + np.roll(g, 1, ax)
            out += g
        sign = -1.0 if p % 2 == 0 else 1.0
        return sign * out / (2 ** (2 * p) * self.h)


@dataclass
class FieldSet:
    grid: Grid
    z: np.ndarray  # (52, n, n, n)
    t: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.z.shape != (NVAR,) + self.grid.shape:
            raise ValueError(f"field array shape {self.z.shape} does not match grid")

    def copy(self) -> "FieldSet":
        return FieldSet(self.grid, self.z.copy(), self.t, dict(self.meta))

    def point(self, i: int, j: int, k: int) -> np.ndarray:
        g = self.grid
        return self.z[:, g.wrap(i), g.wrap(j), g.wrap(k)].copy()

    def check_admissible(self, eos) -> None:
        r = self.z[REST_MASS]
        if np.any(~(r > 0)):
            raise ValueError("rest-mass density must be positive everywhere")
        nu2 = eos.thermo(r, self.z[ENTROPY]).nu2
        if np.any(~(nu2 > 0)):
            raise ValueError("sound speed squared must be positive everywhere")


SNAPSHOT_MAGIC = b"FFSNAP01"


def write_snapshot(fs: FieldSet, path: str | Path) -> None:
    """Flat binary: magic, n (int64), h, t (float64), name count, names, body.

    The body stores float64 values point-major: for every grid point in
    C order all 52 components follow each other.
    """
    path = Path(path)
    names = "\n".join(FIELD_NAMES).encode()
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<qdd", fs.grid.n, fs.grid.h, fs.t))
        fh.write(struct.pack("<qq", NVAR, len(names)))
        fh.write(names)
        body = np.ascontiguousarray(np.moveaxis(fs.z, 0, -1), dtype="<f8")
        fh.write(body.tobytes())


def read_snapshot(path: str | Path, fd_order: int = 4) -> FieldSet:
    with open(path, "rb") as fh:
        if fh.read(8) != SNAPSHOT_MAGIC:
            raise ValueError("not a snapshot file")
        n, h, t = struct.unpack("<qdd", fh.read(24))
        nvar, nbytes = struct.unpack("<qq", fh.read(16))
        names = fh.read(nbytes).decode().split("\n")
        if nvar != NVAR or names != FIELD_NAMES:
            raise ValueError("snapshot field list does not match this layout")
        body = np.frombuffer(fh.read(), dtype="<f8")
    z = np.moveaxis(body.reshape((n, n, n, NVAR)), -1, 0).copy()
    return FieldSet(Grid(n, h, fd_order), z, t)


def export_csv(fs: FieldSet, path: str | Path) -> None:
    """One row per grid point: i, j, k, x, y, z, then all 52 components."""
    g = fs.grid
    x = g.coords().reshape(3, -1)
    idx = np.indices(g.shape).reshape(3, -1)
    vals = fs.z.reshape(NVAR, -1)
    header = "i,j,k,x,y,z," + ",".join(FIELD_NAMES)
    rows = np.concatenate([idx, x, vals]).T
    fmt = ["%d"] * 3 + ["%.17g"] * (3 + NVAR)
    np.savetxt(path, rows, fmt=fmt, delimiter=",", header=header, comments="")
