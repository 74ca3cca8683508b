"""Two-parameter equations of state rho = P(r, s).

r is the rest-mass density and s the specific entropy.  Pressure,
temperature and sound speed are all derived from P and its partials through
the first law d rho = ((p + rho)/r) dr + r K ds.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np


class InadmissibleState(ValueError):
    """Raised when thermodynamic input violates a precondition."""


@dataclass(frozen=True)
class Partials:
    """P and its partial derivatives at (r, s)."""

    P: np.ndarray
    P_r: np.ndarray
    P_s: np.ndarray
    P_rr: np.ndarray
    P_rs: np.ndarray
    P_rrr: np.ndarray
    P_rrs: np.ndarray


@dataclass(frozen=True)
class Thermo:
    """Derived thermodynamic quantities used by the reduced equations."""

    rho: np.ndarray
    p: np.ndarray
    K: np.ndarray
    nu2: np.ndarray
    enthalpy: np.ndarray  # (p + rho)/r
    rho_r: np.ndarray
    rho_s: np.ndarray
    p_r: np.ndarray
    p_s: np.ndarray
    nu2_r: np.ndarray
    nu2_s: np.ndarray
    p_rhorho: np.ndarray  # (d^2 p / d rho^2) at fixed s


class EquationOfState(ABC):
    """Interface: subclasses provide P(r, s) and partials up to third order in r."""

    name = "abstract"

    @abstractmethod
    def partials(self, r, s) -> Partials: ...

    def params(self) -> dict:
        return {}

    def rho(self, r, s):
        return self.partials(*_check(r, s)).P

    def pressure(self, r, s):
        r, s = _check(r, s)
        d = self.partials(r, s)
        return r * d.P_r - d.P

    def temperature(self, r, s):
        r, s = _check(r, s)
        return self.partials(r, s).P_s / r

    def sound_speed_sq(self, r, s):
        return self.thermo(r, s).nu2

    def thermo(self, r, s) -> Thermo:
        r, s = _check(r, s)
        d = self.partials(r, s)
        p = r * d.P_r - d.P
        h = p + d.P
        if np.any(h == 0):
            raise InadmissibleState("vanishing enthalpy p + rho")
        if np.any(d.P_r == 0):
            raise InadmissibleState("dP/dr vanishes; EOS not invertible here")
        p_r = r * d.P_rr
        p_s = r * d.P_rs - d.P_s
        nu2 = r * p_r / h
        # h = r P_r, so nu2 = r P_rr / P_r
        nu2_r = (d.P_rr + r * d.P_rrr) / d.P_r - r * d.P_rr**2 / d.P_r**2
        nu2_s = r * d.P_rrs / d.P_r - r * d.P_rr * d.P_rs / d.P_r**2
        return Thermo(
            rho=d.P,
            p=p,
            K=d.P_s / r,
            nu2=nu2,
            enthalpy=h / r,
            rho_r=d.P_r,
            rho_s=d.P_s,
            p_r=p_r,
            p_s=p_s,
            nu2_r=nu2_r,
            nu2_s=nu2_s,
            p_rhorho=nu2_r / d.P_r,
        )

    def second_derivatives(self, r, s) -> dict:
        t = self.thermo(r, s)
        return {
            "p_rhorho": t.p_rhorho,
            "nu2_r": t.nu2_r,
            "nu2_s": t.nu2_s,
            "p_s": t.p_s,
            "rho_s": t.rho_s,
        }

    def admissible(self, r, s, entropy_evolution: bool = True) -> np.ndarray:
        """Positivity conditions as a predicate (never raises on bad values)."""
        r = np.asarray(r, dtype=float)
        s = np.asarray(s, dtype=float)
        with np.errstate(all="ignore"):
            ok = r > 0
            t = self.thermo(np.where(ok, r, 1.0), s)
            ok = ok & (t.nu2 > 0) & (t.nu2 <= 1) & (t.enthalpy > 0)
            if entropy_evolution:
                ok = ok & (t.K > 0)
        return ok


def _check(r, s):
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(~(r > 0)):
        raise InadmissibleState("rest-mass density must be positive")
    return r, s


class EntropicPolytrope(EquationOfState):
    """P = r + e^s r^gamma / (gamma - 1), so p = e^s r^gamma."""

    name = "entropic_polytrope"

    def __init__(self, gamma: float = 2.0):
        if not gamma > 1:
            raise ValueError("adiabatic index must exceed 1")
        self.gamma = float(gamma)

    def params(self) -> dict:
        return {"gamma": self.gamma}

    def partials(self, r, s) -> Partials:
        g = self.gamma
        es = np.exp(s)
        rg = r**g
        return Partials(
            P=r + es * rg / (g - 1),
            P_r=1 + g * es * r ** (g - 1) / (g - 1),
            P_s=es * rg / (g - 1),
            P_rr=g * es * r ** (g - 2),
            P_rs=g * es * r ** (g - 1) / (g - 1),
            P_rrr=g * (g - 2) * es * r ** (g - 3),
            P_rrs=g * es * r ** (g - 2),
        )

    def closed_form(self, r, s) -> dict:
        g = self.gamma
        rho = r + np.exp(s) * r**g / (g - 1)
        p = np.exp(s) * r**g
        return {
            "rho": rho,
            "p": p,
            "K": np.exp(s) * r ** (g - 1) / (g - 1),
            "nu2": g * p / (p + rho),
        }


class LinearEOS(EquationOfState):
    """p = c rho with rho = rho0 e^s r^(1 + c); (d^2p/drho^2)_s vanishes."""

    name = "linear"

    def __init__(self, c: float = 1.0 / 3.0, rho0: float = 1.0):
        if not 0 < c:
            raise ValueError("c must be positive")
        self.c = float(c)
        self.rho0 = float(rho0)

    def params(self) -> dict:
        return {"c": self.c, "rho0": self.rho0}

    def partials(self, r, s) -> Partials:
        k = 1.0 + self.c
        P = self.rho0 * np.exp(s) * r**k
        return Partials(
            P=P,
            P_r=k * P / r,
            P_s=P,
            P_rr=k * (k - 1) * P / r**2,
            P_rs=k * P / r,
            P_rrr=k * (k - 1) * (k - 2) * P / r**3,
            P_rrs=k * (k - 1) * P / r**2,
        )


class Barotropic(EquationOfState):
    """Freeze the entropy argument of another EOS at ``s_ref``.

    All s-derivatives vanish, so the temperature is zero and the state is
    flagged inadmissible for entropy evolution.
    """

    name = "barotropic"

    def __init__(self, inner: EquationOfState, s_ref: float = 0.0):
        self.inner = inner
        self.s_ref = float(s_ref)

    def params(self) -> dict:
        return {"inner": self.inner.name, "s_ref": self.s_ref, **self.inner.params()}

    def partials(self, r, s) -> Partials:
        d = self.inner.partials(r, np.full_like(np.asarray(r, dtype=float), self.s_ref))
        z = np.zeros_like(d.P)
        return Partials(d.P, d.P_r, z, d.P_rr, z, d.P_rrr, z)


EOS_KINDS = {
    "entropic_polytrope": EntropicPolytrope,
    "linear": LinearEOS,
}


def make_eos(kind: str, **params) -> EquationOfState:
    try:
        cls = EOS_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown EOS kind {kind!r}; choose from {sorted(EOS_KINDS)}") from None
    return cls(**params)
