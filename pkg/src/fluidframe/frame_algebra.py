"""Constant-metric tensor algebra in an orthonormal frame.

The frame metric is diag(1, -1, -1, -1).  Tensors are dense numpy arrays whose
leading axes are frame indices (length 4, or length 3 for spatial indices);
any trailing axes are treated as batch axes (grid points).
"""

from __future__ import annotations

import itertools

import numpy as np

ETA = np.diag([1.0, -1.0, -1.0, -1.0])
ETA.setflags(write=False)
SIGNS = np.array([1.0, -1.0, -1.0, -1.0])
SIGNS.setflags(write=False)


def _perm_sign(p: tuple[int, ...]) -> int:
    sign = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def levi_civita(dim: int) -> np.ndarray:
    """Totally antisymmetric symbol with eps[0, 1, ..., dim-1] = +1."""
    eps = np.zeros((dim,) * dim)
    for p in itertools.permutations(range(dim)):
        eps[p] = _perm_sign(p)
    return eps


EPS4 = levi_civita(4)  # all indices down, eps_{0123} = +1
EPS4.setflags(write=False)
EPS3 = levi_civita(3)  # spatial symbol on indices 1..3 (shifted to 0..2)
EPS3.setflags(write=False)


def raise_lower(tensor: np.ndarray, slot: int) -> np.ndarray:
    """Raise or lower one frame index (the operation is its own inverse).

    ``slot`` counts from the left among the frame axes; the axis it names must
    have length 4.
    """
    t = np.asarray(tensor, dtype=float)
    if slot < 0 or slot >= t.ndim:
        raise IndexError(f"index slot {slot} out of range for rank-{t.ndim} array")
    if t.shape[slot] != 4:
        raise ValueError(f"slot {slot} has length {t.shape[slot]}, expected 4")
    shape = [1] * t.ndim
    shape[slot] = 4
    return t * SIGNS.reshape(shape)


def raise_all(tensor: np.ndarray, rank: int) -> np.ndarray:
    """Flip the position of the first ``rank`` frame indices."""
    t = np.asarray(tensor, dtype=float)
    for k in range(rank):
        t = raise_lower(t, k)
    return t


def eps4_up() -> np.ndarray:
    """eps^{abcd}, obtained by raising every index of eps_{abcd} with the metric."""
    return raise_all(EPS4, 4)


def spatial_eps() -> np.ndarray:
    """eps_{abc} = eps_{mabc} u^m with u = e_0, embedded as a 4x4x4 array."""
    u = np.array([1.0, 0.0, 0.0, 0.0])
    return np.einsum("m,mabc->abc", u, EPS4)


def projector(u: np.ndarray | None = None) -> np.ndarray:
    """pi_{ab} = g_{ab} - u_a u_b, with u^a = delta^a_0 unless given."""
    if u is None:
        u = np.array([1.0, 0.0, 0.0, 0.0])
    u_low = ETA @ u
    return ETA - np.outer(u_low, u_low)


def projector_mixed(u: np.ndarray | None = None) -> np.ndarray:
    """pi_a^b (first index down, second up)."""
    return projector(u) @ ETA


def symmetrize(t: np.ndarray, i: int = 0, j: int = 1) -> np.ndarray:
    return 0.5 * (t + np.swapaxes(t, i, j))


def antisymmetrize(t: np.ndarray, i: int = 0, j: int = 1) -> np.ndarray:
    return 0.5 * (t - np.swapaxes(t, i, j))


def cyclic_sum(t: np.ndarray, axes: tuple[int, int, int] = (0, 1, 2)) -> np.ndarray:
    """T_{abc} + T_{bca} + T_{cab} over the three given axes."""
    a, b, c = axes
    order = list(range(t.ndim))
    p1 = order.copy()
    p1[a], p1[b], p1[c] = b, c, a
    p2 = order.copy()
    p2[a], p2[b], p2[c] = c, a, b
    return t + np.transpose(t, p1) + np.transpose(t, p2)


def eps3_contract(a: np.ndarray) -> np.ndarray:
    """Contract eps^{m a b} eps_{m c d} A^{cd} over the spatial frame.

    Input and output are spatial rank-2 arrays (3x3, indices 1..3).  With
    spatial indices raised by the frame metric the result equals
    -(A - A^T), which is the -2 pi pi antisymmetrization identity.
    """
    A = np.asarray(a, dtype=float)
    eps = spatial_eps()[1:, 1:, 1:]
    eps_up = -eps  # three spatial indices raised
    return np.einsum("mab,mcd,cd...->ab...", eps_up, eps, A)


def eps3_identity_rhs(a: np.ndarray) -> np.ndarray:
    """Right side of the first contraction identity applied to A^{cd}.

    -2 pi^a_[c pi^b_d] A^{cd}, with pi^a_c = delta in the fluid frame.
    """
    A = np.asarray(a, dtype=float)
    return -(A - np.swapaxes(A, 0, 1))
