"""Entropy functionals of a density/velocity state.

The kappa-entropy is

    E = int rho (|w|^2 + (kappa(1-kappa) + eps) |v|^2) + H(rho|r) + 2 kappa r3 h(rho|r)

with drift fields v = 2 grad s(rho), w = u + kappa v, and G(rho|r) the Bregman
divergence of G at the mean density r.  :func:`kappa_entropy` also evaluates
the three dissipation channels that bound -dE/dt:

    D_capillary = C_diss eps int |d_xx Z(rho)|^2
    D_pressure  = kappa int mu'(rho) H''(rho) |d_x rho|^2
    D_drag      = r3 int rho |u|^2
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Callable

import numpy as np

from .constitutive import PressureLaw, ViscosityLaw, _wrap
from .errors import DomainError, VacuumReached
from .fields import PeriodicField, d2dx2, ddx

__all__ = [
    "EntropyParams",
    "EntropyReport",
    "H_of",
    "dH_of",
    "d2H_of",
    "h_of",
    "d2h_of",
    "relative",
    "H_rel",
    "h_rel",
    "Z_of",
    "Z1_of",
    "drift_fields",
    "kappa_entropy",
    "entropy_terms",
    "mechanical_energy",
    "coercivity_scalar",
]


@dataclass(frozen=True)
class EntropyParams:
    kappa: float = 0.5
    eps: float = 0.01
    r3: float = 1.0
    r: float = 1.0
    C_diss: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise DomainError(f"kappa must lie in (0, 1), got {self.kappa}")
        if not self.eps >= 0.0:
            raise DomainError(f"eps must be >= 0, got {self.eps}")
        if not self.r3 >= 0.0:
            raise DomainError(f"r3 must be >= 0, got {self.r3}")
        if not (self.r > 0.0 and math.isfinite(self.r)):
            raise DomainError(f"target mean density must be positive, got {self.r}")
        if not self.C_diss > 0.0:
            raise DomainError(f"C_diss must be positive, got {self.C_diss}")
        if not self.kappa * (1.0 - self.kappa) + self.eps > 0.0:
            raise DomainError("kappa(1-kappa) + eps must be positive")

    @property
    def drift_weight(self) -> float:
        return self.kappa * (1.0 - self.kappa) + self.eps


@dataclass(frozen=True)
class EntropyReport:
    t: float
    mass: float
    E_total: float
    E_kinetic_w: float
    E_drift_v: float
    E_pressure_H: float
    E_drag_h: float
    D_capillary: float
    D_pressure: float
    D_drag: float
    D_z1_quartic: float
    dissipation_residual: float = float("nan")

    @classmethod
    def columns(cls) -> list:
        return [f.name for f in fields(cls)]

    @property
    def D_total(self) -> float:
        return self.D_capillary + self.D_pressure + self.D_drag

    def as_row(self) -> list:
        return [getattr(self, c) for c in self.columns()]

    def to_dict(self) -> dict:
        return asdict(self)

    def with_residual(self, value: float) -> "EntropyReport":
        d = self.to_dict()
        d["dissipation_residual"] = float(value)
        return EntropyReport(**d)


# --- scalar functionals ----------------------------------------------------


def H_of(pressure: PressureLaw, rho):
    return pressure.H(rho)


def dH_of(pressure: PressureLaw, rho):
    return pressure.dH(rho)


def d2H_of(pressure: PressureLaw, rho):
    return pressure.d2H(rho)


def h_of(law: ViscosityLaw, rho):
    return law.h(rho)


def d2h_of(law: ViscosityLaw, rho):
    return law.d2h(rho)


def relative(G: Callable, dG: Callable, rho, r):
    """Bregman divergence G(rho) - G(r) - G'(r) (rho - r)."""
    rho_arr = np.asarray(rho, dtype=float)
    return _wrap(rho, G(rho_arr) - G(r) - dG(r) * (rho_arr - r))


def H_rel(pressure: PressureLaw, rho, r):
    return relative(pressure.H, pressure.dH, rho, r)


def h_rel(law: ViscosityLaw, rho, r):
    return relative(law.h, law.dh, rho, r)


def Z_of(law: ViscosityLaw, rho):
    return law.Z(rho)


def Z1_of(law: ViscosityLaw, rho):
    return law.Z1(rho)


def coercivity_scalar(law: ViscosityLaw, pressure: PressureLaw, rho):
    """mu(rho)/rho + rho H''(rho) / mu'(rho)."""
    arr = np.asarray(rho, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("coercivity scalar requires rho > 0")
    return _wrap(rho, law._mu(arr) / arr + arr * pressure.d2H(arr) / law._dmu(arr))


# --- field functionals -----------------------------------------------------


def _check_floor(rho: np.ndarray, floor: float, t: float = 0.0):
    bad = np.flatnonzero(~(rho > floor))
    if bad.size:
        i = int(bad[0])
        raise VacuumReached(i, t, float(rho[i]))


def drift_fields(law: ViscosityLaw, rho: PeriodicField, u: PeriodicField, kappa: float, floor: float = 0.0):
    """Return (v, w) with v = 2 grad s(rho) and w = u + kappa v."""
    _check_floor(rho.values, floor)
    v = 2.0 * ddx(law._s(rho.values), rho.grid.dx)
    return PeriodicField(rho.grid, v), PeriodicField(rho.grid, u.values + kappa * v)


def entropy_terms(rho: np.ndarray, u: np.ndarray, dx: float, law: ViscosityLaw,
                  pressure: PressureLaw, params: EntropyParams) -> tuple:
    """Array kernel behind :func:`kappa_entropy`; returns the report fields after ``t``."""
    k, r = params.kappa, params.r
    v = 2.0 * ddx(law._s(rho), dx)
    w = u + k * v
    e_w = dx * np.sum(rho * w * w)
    e_v = params.drift_weight * dx * np.sum(rho * v * v)
    e_H = dx * np.sum(pressure.H(rho) - pressure.H(r) - pressure.dH(r) * (rho - r))
    if params.r3 > 0.0:
        e_h = 2.0 * params.r3 * k * dx * np.sum(law._h(rho) - law.h(r) - law.dh(r) * (rho - r))
    else:
        e_h = 0.0
    dmu = law._dmu(rho)
    drho = ddx(rho, dx)
    d_p = k * dx * np.sum(dmu * pressure.d2H(rho) * drho * drho)
    d_d = params.r3 * dx * np.sum(rho * u * u)
    if params.eps > 0.0:
        lz = d2dx2(law._Z(rho), dx)
        d_c = params.C_diss * params.eps * dx * np.sum(lz * lz)
        gz1 = ddx(law._Z1(rho), dx)
        d_z1 = params.C_diss * params.eps * dx * np.sum(gz1 ** 4)
    else:
        d_c = d_z1 = 0.0
    mass = dx * np.sum(rho)
    total = e_w + e_v + e_H + e_h
    return (float(mass), float(total), float(e_w), float(e_v), float(e_H), float(e_h),
            float(d_c), float(d_p), float(d_d), float(d_z1))


def kappa_entropy(rho: PeriodicField, u: PeriodicField, law: ViscosityLaw, pressure: PressureLaw,
                  params: EntropyParams, t: float = 0.0, floor: float = 0.0) -> EntropyReport:
    if rho.grid != u.grid:
        raise ValueError("rho and u live on different grids")
    _check_floor(rho.values, floor, t)
    terms = entropy_terms(rho.values, u.values, rho.grid.dx, law, pressure, params)
    return EntropyReport(float(t), *terms)


def mechanical_energy(rho: PeriodicField, u: PeriodicField, law: ViscosityLaw,
                      pressure: PressureLaw, eps: float, r: float) -> float:
    """int rho u^2/2 + H(rho|r) + eps |D+ Pi(rho)|^2.

    Uses the forward difference of Pi, which is the discrete capillary energy
    conjugate to the solver's central-gradient / 3-point-Laplacian stencil.
    """
    dx = rho.grid.dx
    rv, uv = rho.values, u.values
    pi = law._Pi(rv)
    dpi = (np.roll(pi, -1) - pi) / dx
    hrel = pressure.H(rv) - pressure.H(r) - pressure.dH(r) * (rv - r)
    return float(dx * np.sum(0.5 * rv * uv * uv + hrel + eps * dpi * dpi))
