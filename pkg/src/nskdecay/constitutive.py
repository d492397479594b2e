"""Viscosity and pressure laws, their derived coefficients and an admissibility report.

Three closed-form viscosity families are provided:

* :class:`PowerLaw` -- mu(rho) = rho**alpha,
* :class:`Quantum` -- the power law with alpha = 1 (lambda = 0, K = 1/rho),
* :class:`PiecewiseLinearTail` -- rho**alpha below M, blended over [M, 2M]
  (quintic smoothstep in the log-slope rho mu'/mu) into c*rho above 2M.

The bulk viscosity is always tied to mu through the BD relation
lambda = 2 (rho mu' - mu).  Primitives whose integral diverges at the origin
(s, h) are based at rho = 1; the relative (Bregman) forms built on them do not
depend on that choice.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "ViscosityLaw",
    "PowerLaw",
    "Quantum",
    "PiecewiseLinearTail",
    "PressureLaw",
    "GammaCondition",
    "BetaCondition",
    "AdmissibilityReport",
    "lambda_of",
    "capillarity_of",
    "s_prime",
    "s_of",
    "check_admissibility",
    "law_from_config",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _wrap(like, arr):
    """Return a float for scalar input, an array otherwise."""
    if np.ndim(like) == 0:
        return float(np.asarray(arr).reshape(-1)[0])
    return arr


def _positive(rho, what):
    arr = np.asarray(rho, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{what} requires rho > 0")
    return arr


def _nonnegative(rho, what):
    arr = np.asarray(rho, dtype=float)
    if np.any(~(arr >= 0)):
        raise DomainError(f"{what} requires rho >= 0")
    return arr


class ViscosityLaw:
    """Interface shared by the viscosity families.

    Subclasses provide ``_mu``, ``_dmu``, ``_d2mu`` and the raw primitives on
    positive arrays.  Public methods validate domains and accept scalars.
    """

    family: str = "abstract"
    alpha: float

    # evaluators ------------------------------------------------------------

    def mu(self, rho):
        arr = _nonnegative(rho, "mu")
        out = np.zeros_like(arr)
        pos = arr > 0
        out[pos] = self._mu(arr[pos])
        return _wrap(rho, out)

    def dmu(self, rho):
        return _wrap(rho, self._dmu(_positive(rho, "mu'")))

    def d2mu(self, rho):
        return _wrap(rho, self._d2mu(_positive(rho, "mu''")))

    # derived primitives ----------------------------------------------------

    def s(self, rho):
        """Primitive of mu'(rho)/rho with s(1) = 0."""
        return _wrap(rho, self._s(_positive(rho, "s")))

    def h(self, rho):
        """rho * int_1^rho mu(t)/t^2 dt, so that h'' = mu'/rho and h(1) = 0."""
        return _wrap(rho, self._h(_positive(rho, "h")))

    def dh(self, rho):
        return _wrap(rho, self._dh(_positive(rho, "h'")))

    def d2h(self, rho):
        arr = _positive(rho, "h''")
        return _wrap(rho, self._dmu(arr) / arr)

    def Z(self, rho):
        """int_0^rho sqrt(mu) mu' / t dt."""
        self._require_z_integrable()
        arr = _nonnegative(rho, "Z")
        out = np.zeros_like(arr)
        pos = arr > 0
        out[pos] = self._Z(arr[pos])
        return _wrap(rho, out)

    def Z1(self, rho):
        """int_0^rho mu' / (mu^(1/4) t^(1/2)) dt."""
        self._require_z_integrable()
        arr = _nonnegative(rho, "Z1")
        out = np.zeros_like(arr)
        pos = arr > 0
        out[pos] = self._Z1(arr[pos])
        return _wrap(rho, out)

    def Pi(self, rho):
        """int_0^rho sqrt(K(t)) dt, the argument of the capillary Laplacian."""
        if not self.alpha > 0.5:
            raise DomainError(f"int_0 sqrt(K) diverges for alpha={self.alpha} <= 1/2")
        arr = _nonnegative(rho, "Pi")
        out = np.zeros_like(arr)
        pos = arr > 0
        out[pos] = self._Pi(arr[pos])
        return _wrap(rho, out)

    def _require_z_integrable(self):
        if not self.alpha > 2.0 / 3.0:
            raise DomainError(f"Z and Z1 need alpha > 2/3, law has alpha={self.alpha}")

    # serialization ---------------------------------------------------------

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PowerLaw(ViscosityLaw):
    alpha: float
    family: str = field(default="power", init=False)

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"power-law exponent must be positive, got {self.alpha}")

    def _mu(self, r):
        return r ** self.alpha

    def _dmu(self, r):
        return self.alpha * r ** (self.alpha - 1.0)

    def _d2mu(self, r):
        a = self.alpha
        return a * (a - 1.0) * r ** (a - 2.0)

    def _s(self, r):
        a = self.alpha
        if a == 1.0:
            return np.log(r)
        return a * (r ** (a - 1.0) - 1.0) / (a - 1.0)

    def _h(self, r):
        a = self.alpha
        if a == 1.0:
            return r * np.log(r)
        return (r ** a - r) / (a - 1.0)

    def _dh(self, r):
        a = self.alpha
        if a == 1.0:
            return np.log(r) + 1.0
        return (a * r ** (a - 1.0) - 1.0) / (a - 1.0)

    def _Z(self, r):
        e = 1.5 * self.alpha - 1.0
        return self.alpha * r ** e / e

    def _Z1(self, r):
        e = 0.75 * self.alpha - 0.5
        return self.alpha * r ** e / e

    def _Pi(self, r):
        e = self.alpha - 0.5
        return self.alpha * r ** e / e

    def to_config(self):
        return {"family": "power", "alpha": self.alpha}


@dataclass(frozen=True)
class Quantum(PowerLaw):
    """mu(rho) = rho: lambda = 0 and K(rho) = 1/rho (Bohm potential)."""

    alpha: float = field(default=1.0, init=False)
    family: str = field(default="quantum", init=False)

    def to_config(self):
        return {"family": "quantum"}


def _smoothstep(t):
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _smoothstep_d(t):
    return 30.0 * t * t * (1.0 - t) ** 2


def _smoothstep_int(t):
    # int_0^t smoothstep
    return t ** 4 * (2.5 + t * (-3.0 + t))


@dataclass(frozen=True)
class PiecewiseLinearTail(ViscosityLaw):
    """rho**alpha for rho <= M, c*rho for rho >= 2M, C^2 blend in between.

    The blend interpolates the log-slope q = rho mu'/mu from alpha to 1 with a
    quintic smoothstep in log(rho); ``c`` is whatever keeps mu continuous.
    """

    alpha: float
    M: float
    family: str = field(default="tail", init=False)

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"exponent must be positive, got {self.alpha}")
        if not (self.M > 0 and math.isfinite(self.M)):
            raise DomainError(f"tail threshold M must be positive, got {self.M}")

    @property
    def lo(self) -> float:
        return self.M

    @property
    def hi(self) -> float:
        return 2.0 * self.M

    @property
    def c(self) -> float:
        a = self.alpha
        return math.exp(a * math.log(self.lo) + math.log(2.0) * (1.0 + a) / 2.0) / self.hi

    def _tau(self, r):
        return np.clip((np.log(r) - math.log(self.lo)) / math.log(2.0), 0.0, 1.0)

    def _q(self, r):
        return self.alpha + (1.0 - self.alpha) * _smoothstep(self._tau(r))

    def _mu(self, r):
        a = self.alpha
        lnr = np.log(r)
        tau = self._tau(r)
        upper = a * math.log(self.lo) + math.log(2.0) * (a * tau + (1.0 - a) * _smoothstep_int(tau))
        upper = upper + np.maximum(lnr - math.log(self.hi), 0.0)
        return np.exp(np.where(r <= self.lo, a * lnr, upper))

    def _dmu(self, r):
        return self._q(r) * self._mu(r) / r

    def _d2mu(self, r):
        tau = self._tau(r)
        q = self._q(r)
        inside = (r > self.lo) & (r < self.hi)
        qy = np.where(inside, (1.0 - self.alpha) * _smoothstep_d(tau) / math.log(2.0), 0.0)
        return self._mu(r) / (r * r) * (qy + q * q - q)

    # primitives ------------------------------------------------------------
    # C(rho) = int_lo^rho g: closed form below lo and above hi, Gauss-Legendre
    # in log(rho) across the blend.

    def _blend_integral(self, g, r):
        ya = math.log(self.lo)
        yb = np.log(np.clip(r, self.lo, self.hi))
        half = 0.5 * (yb - ya)
        y = half[:, None] * _GL_NODES[None, :] + (0.5 * (ya + yb))[:, None]
        t = np.exp(y)
        return half * np.sum(_GL_WEIGHTS[None, :] * g(t) * t, axis=1)

    def _cumulative(self, g, a_pow, a_lin, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        below = r <= self.lo
        out[below] = a_pow(r[below]) - a_pow(np.array([self.lo]))[0]
        rest = ~below
        if np.any(rest):
            rr = r[rest]
            mid = self._blend_integral(g, rr)
            tail = np.where(rr > self.hi, a_lin(np.maximum(rr, self.hi)) - a_lin(np.array([self.hi]))[0], 0.0)
            out[rest] = mid + tail
        return out

    def _powerlaw(self):
        return PowerLaw(self.alpha)

    def _s(self, r):
        pl, c = self._powerlaw(), self.c
        g = lambda t: self._dmu(t) / t
        a_pow = lambda t: pl._s(t)
        a_lin = lambda t: c * np.log(t)
        one = np.array([1.0])
        return self._cumulative(g, a_pow, a_lin, r) - self._cumulative(g, a_pow, a_lin, one)[0]

    def _G(self, r):
        # int_1^rho mu(t)/t^2 dt
        a, c = self.alpha, self.c
        g = lambda t: self._mu(t) / (t * t)
        if a == 1.0:
            a_pow = np.log
        else:
            a_pow = lambda t: t ** (a - 1.0) / (a - 1.0)
        a_lin = lambda t: c * np.log(t)
        one = np.array([1.0])
        return self._cumulative(g, a_pow, a_lin, r) - self._cumulative(g, a_pow, a_lin, one)[0]

    def _h(self, r):
        return r * self._G(r)

    def _dh(self, r):
        return self._G(r) + self._mu(r) / r

    def _from_zero(self, g, a_pow, a_lin, r):
        # a_pow vanishes at 0 for these integrands
        zero_offset = -a_pow(np.array([self.lo]))[0]
        return self._cumulative(g, a_pow, a_lin, r) - zero_offset

    def _Z(self, r):
        pl, c = self._powerlaw(), self.c
        g = lambda t: np.sqrt(self._mu(t)) * self._dmu(t) / t
        return self._from_zero(g, pl._Z, lambda t: 2.0 * c ** 1.5 * np.sqrt(t), r)

    def _Z1(self, r):
        pl, c = self._powerlaw(), self.c
        g = lambda t: self._dmu(t) / (self._mu(t) ** 0.25 * np.sqrt(t))
        return self._from_zero(g, pl._Z1, lambda t: 4.0 * c ** 0.75 * t ** 0.25, r)

    def _Pi(self, r):
        pl, c = self._powerlaw(), self.c
        g = lambda t: self._dmu(t) / np.sqrt(t)
        return self._from_zero(g, pl._Pi, lambda t: 2.0 * c * np.sqrt(t), r)

    def to_config(self):
        return {"family": "tail", "alpha": self.alpha, "M": self.M}


@dataclass(frozen=True)
class PressureLaw:
    """p(rho) = a rho**gamma with internal-energy primitive H.

    H = a rho**gamma / (gamma - 1) for gamma > 1 and a rho log(rho) for
    gamma = 1 (base point 1, H(0) = 0 as a limit).
    """

    a: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if not (self.a >= 0 and math.isfinite(self.a)):
            raise DomainError(f"pressure coefficient must be >= 0, got {self.a}")
        if not (self.gamma >= 1 and math.isfinite(self.gamma)):
            raise DomainError(f"pressure exponent must be >= 1, got {self.gamma}")

    def p(self, rho):
        arr = _nonnegative(rho, "p")
        return _wrap(rho, self.a * arr ** self.gamma)

    def dp(self, rho):
        arr = _nonnegative(rho, "p'")
        return _wrap(rho, self.a * self.gamma * arr ** (self.gamma - 1.0))

    def H(self, rho):
        g = self.gamma
        if g > 1.0:
            arr = _nonnegative(rho, "H")
            return _wrap(rho, self.a * arr ** g / (g - 1.0))
        arr = _nonnegative(rho, "H")
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(arr > 0, self.a * arr * np.log(np.where(arr > 0, arr, 1.0)), 0.0)
        return _wrap(rho, out)

    def dH(self, rho):
        g = self.gamma
        if g > 1.0:
            arr = _nonnegative(rho, "H'")
            return _wrap(rho, self.a * g * arr ** (g - 1.0) / (g - 1.0))
        arr = _positive(rho, "H'")
        return _wrap(rho, self.a * (np.log(arr) + 1.0))

    def d2H(self, rho):
        arr = _positive(rho, "H''")
        return _wrap(rho, self.a * self.gamma * arr ** (self.gamma - 2.0))

    def to_config(self):
        return {"a": self.a, "gamma": self.gamma}


# --- derived coefficients --------------------------------------------------


def lambda_of(law: ViscosityLaw, rho):
    """BD bulk viscosity 2 (mu'(rho) rho - mu(rho)); zero at vacuum."""
    arr = _nonnegative(rho, "lambda")
    out = np.zeros_like(arr)
    pos = arr > 0
    r = arr[pos]
    out[pos] = 2.0 * (law._dmu(r) * r - law._mu(r))
    return _wrap(rho, out)


def capillarity_of(law: ViscosityLaw, rho):
    """K(rho) = mu'(rho)^2 / rho."""
    arr = _positive(rho, "K")
    return _wrap(rho, law._dmu(arr) ** 2 / arr)


def s_prime(law: ViscosityLaw, rho):
    arr = _positive(rho, "s'")
    return _wrap(rho, law._dmu(arr) / arr)


def s_of(law: ViscosityLaw, rho):
    return law.s(rho)


def law_from_config(spec: dict) -> ViscosityLaw:
    family = spec.get("family", "quantum")
    if family == "quantum":
        return Quantum()
    if family == "power":
        return PowerLaw(float(spec["alpha"]))
    if family == "tail":
        return PiecewiseLinearTail(float(spec["alpha"]), float(spec["M"]))
    raise DomainError(f"unknown viscosity family {family!r}")


# --- admissibility ---------------------------------------------------------


class GammaCondition(str, enum.Enum):
    SMALL_ALPHA_OK = "SmallAlphaOK"
    ALPHA_GE1_GAMMA_LT_ALPHA_OK = "AlphaGe1_GammaLtAlpha_OK"
    VIOLATED = "Violated"


class BetaCondition(str, enum.Enum):
    IN_RANGE = "InRange"          # 1 < beta < 4
    LINEAR_TAIL = "LinearTail"    # mu = c rho on the upper samples
    BOUNDARY = "Boundary"         # beta == 1 or 4 without an exact linear tail
    OUT_OF_RANGE = "OutOfRange"


@dataclass
class AdmissibilityReport:
    rho: np.ndarray
    log_slope: np.ndarray
    hyp1_holds: bool
    alpha1: float
    alpha2: float
    hyp2_bound: float
    prop1_nu: float
    alpha_limit: float
    beta_limit: float
    gamma_condition: GammaCondition
    beta_condition: BetaCondition
    admissible: bool
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rho_range": [float(self.rho[0]), float(self.rho[-1])],
            "samples": int(self.rho.size),
            "hyp1_holds": self.hyp1_holds,
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "hyp2_bound": self.hyp2_bound,
            "prop1_nu": self.prop1_nu,
            "alpha_limit": self.alpha_limit,
            "beta_limit": self.beta_limit,
            "gamma_condition": self.gamma_condition.value,
            "beta_condition": self.beta_condition.value,
            "admissible": self.admissible,
            "notes": list(self.notes),
        }


def _aitken(seq: Sequence[float]) -> float:
    """Aitken delta-squared on the last three terms (ordered toward the limit)."""
    x0, x1, x2 = seq[-3:]
    d1, d2 = x1 - x0, x2 - x1
    den = d2 - d1
    if abs(den) <= 1e-14 * max(1.0, abs(x2)) or abs(d2) <= 1e-15 * max(1.0, abs(x2)):
        return float(x2)
    return float(x2 - d2 * d2 / den)


def check_admissibility(
    law: ViscosityLaw,
    pressure: PressureLaw,
    rho_range: tuple = (1e-6, 1e6),
    samples: int = 2001,
) -> AdmissibilityReport:
    """Witness the viscosity hypotheses on a log-spaced density sample.

    Limits of rho mu'/mu at the range edges are Aitken extrapolations of the
    three outermost samples.  This is a numerical report, not a proof.
    """
    lo, hi = rho_range
    if not (0 < lo < hi) or not math.isfinite(hi):
        raise DomainError(f"need 0 < rho_min < rho_max, got {rho_range}")
    if samples < 100:
        raise DomainError("need at least 100 samples")
    rho = np.geomspace(lo, hi, int(samples))
    mu = law._mu(rho)
    dmu = law._dmu(rho)
    d2mu = law._d2mu(rho)
    q = rho * dmu / mu

    alpha1, alpha2 = float(q.min()), float(q.max())
    hyp1 = bool(np.all(q > 0) and alpha1 > 2.0 / 3.0 and alpha2 < 4.0)
    hyp2 = float(np.max(np.abs(rho * d2mu / dmu)))
    lam = 2.0 * (dmu * rho - mu)
    nu = float(np.min((lam + 2.0 * mu / 3.0) / mu))

    alpha_lim = _aitken(q[2::-1])
    beta_lim = _aitken(q[-3:])

    notes = []
    tol = 1e-9
    if not hyp1:
        notes.append(f"growth envelope fails: rho mu'/mu spans [{alpha1:.6g}, {alpha2:.6g}], need (2/3, 4)")
    if abs(alpha_lim - 4.0) <= tol:
        notes.append("alpha = 4 is allowed by the vacuum-limit condition but excluded by the strict growth bound < 4")
    alpha_ok = 2.0 / 3.0 < alpha_lim < 4.0 - tol
    if not alpha_ok:
        notes.append(f"vacuum exponent alpha={alpha_lim:.6g} outside (2/3, 4)")

    if alpha_lim <= 1.0 + tol and pressure.gamma >= 1.0:
        gamma_cond = GammaCondition.SMALL_ALPHA_OK
    elif alpha_lim > 1.0 and pressure.gamma < alpha_lim:
        gamma_cond = GammaCondition.ALPHA_GE1_GAMMA_LT_ALPHA_OK
    else:
        gamma_cond = GammaCondition.VIOLATED
        notes.append(f"alpha={alpha_lim:.6g} >= 1 requires gamma < alpha, got gamma={pressure.gamma:.6g}")

    # linear tail: log-slope exactly 1 across the top decade of samples
    top = rho >= hi / 10.0
    if np.all(np.abs(q[top] - 1.0) <= 1e-12):
        beta_cond = BetaCondition.LINEAR_TAIL
        notes.append("beta = 1 sits on the boundary of 1 < beta < 4; covered by the exact linear tail mu = c rho")
    elif 1.0 + tol < beta_lim < 4.0 - tol:
        beta_cond = BetaCondition.IN_RANGE
    elif abs(beta_lim - 1.0) <= tol or abs(beta_lim - 4.0) <= tol:
        beta_cond = BetaCondition.BOUNDARY
        notes.append(f"beta={beta_lim:.6g} on the boundary of (1, 4)")
    else:
        beta_cond = BetaCondition.OUT_OF_RANGE
        notes.append(f"large-density exponent beta={beta_lim:.6g} outside (1, 4) and no linear tail")

    admissible = hyp1 and nu > 0 and alpha_ok and gamma_cond is not GammaCondition.VIOLATED
    return AdmissibilityReport(
        rho=rho,
        log_slope=q,
        hyp1_holds=hyp1,
        alpha1=alpha1,
        alpha2=alpha2,
        hyp2_bound=hyp2,
        prop1_nu=nu,
        alpha_limit=alpha_lim,
        beta_limit=beta_lim,
        gamma_condition=gamma_cond,
        beta_condition=beta_cond,
        admissible=admissible,
        notes=notes,
    )
