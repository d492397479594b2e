"""Time integration of the 1D periodic Navier-Stokes-Korteweg system with drag.

Unknowns are the density rho and the momentum m = rho u on a cell-centered
periodic grid.  The semidiscrete system is

    d rho/dt = -d_x m
    d m/dt   = -d_x(m^2/rho) - d_x p(rho) + d_x(nu(rho) d_x u)
               + 2 eps rho d_x(sqrt(K(rho)) d_xx Pi(rho)) - r3 m

with nu = 2 mu + lambda = 2 rho mu'(rho) and Pi' = sqrt(K).  First
derivatives are central, d_xx is the 3-point Laplacian, and the viscous term
uses the compact face-centered flux nu_{i+1/2} (u_{i+1} - u_i) / dx so that the
implicit solve is a periodic tridiagonal system.

Two schemes are available:

* ``IMEXViscous`` (default): ARS(2,2,2), L-stable DIRK for the viscous term,
  explicit for everything else.
* ``ExplicitRK3``: three-stage SSP Runge-Kutta on the full right-hand side.

Every step is guarded by the kappa-entropy: if it grows by more than
``residual_tol * max(E(0), 1)`` the step is retried with half the time step.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import stats
from scipy.linalg import solve_banded

from .constitutive import (GammaCondition, PressureLaw, Quantum, ViscosityLaw,
                           check_admissibility)
from .entropy import EntropyParams, EntropyReport, entropy_terms
from .errors import (AdmissibilityError, ConfigError, NonpositiveEntropy,
                     SolverError, StepRejected, VacuumReached, WindowTooShort)
from .fields import Grid, PeriodicField, d2dx2, ddx

__all__ = [
    "Scheme",
    "State",
    "SolverConfig",
    "Telemetry",
    "TimeSeries",
    "DecayFit",
    "Integrator",
    "rhs",
    "step",
    "stable_dt",
    "run",
    "fit_decay_rate",
    "fit_decay_arrays",
]


class Scheme(str, enum.Enum):
    EXPLICIT_RK3 = "ExplicitRK3"
    IMEX_VISCOUS = "IMEXViscous"


@dataclass(frozen=True)
class State:
    t: float
    rho: PeriodicField
    m: PeriodicField

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    @property
    def u(self) -> PeriodicField:
        return self.m / self.rho

    @classmethod
    def from_velocity(cls, rho: PeriodicField, u: PeriodicField, t: float = 0.0) -> "State":
        return cls(float(t), rho, rho * u)

    def mirrored(self) -> "State":
        """x -> -x, u -> -u."""
        return State(self.t, self.rho.mirrored(), -self.m.mirrored())


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid
    law: ViscosityLaw
    pressure: PressureLaw
    params: EntropyParams
    t_end: float
    dt_init: float = 1e-4
    cfl_safety: float = 0.5
    rho_floor: Optional[float] = None
    residual_tol: float = 1e-6
    scheme: Scheme = Scheme.IMEX_VISCOUS
    output_interval: float = 0.05
    max_retries: int = 8
    fixed_dt: bool = False
    viscosity_scale: float = 1.0
    capillary_form: str = "sqrtK"

    def __post_init__(self):
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if not self.dt_init > 0:
            raise ConfigError(f"dt_init must be positive, got {self.dt_init}")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not self.residual_tol > 0:
            raise ConfigError(f"residual_tol must be positive, got {self.residual_tol}")
        if not self.output_interval > 0:
            raise ConfigError(f"output_interval must be positive, got {self.output_interval}")
        if self.rho_floor is not None and not self.rho_floor > 0:
            raise ConfigError(f"rho_floor must be positive, got {self.rho_floor}")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if not self.viscosity_scale >= 0:
            raise ConfigError("viscosity_scale must be >= 0")
        if self.capillary_form not in ("sqrtK", "bohm"):
            raise ConfigError(f"capillary_form must be 'sqrtK' or 'bohm', got {self.capillary_form!r}")
        if self.capillary_form == "bohm" and not isinstance(self.law, Quantum):
            raise ConfigError("the Bohm capillary form exists only for the quantum law")
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    @property
    def floor(self) -> float:
        return self.rho_floor if self.rho_floor is not None else 1e-8 * self.params.r


# --- spatial operator ------------------------------------------------------


def _check_floor(rho: np.ndarray, floor: float, t: float):
    bad = np.flatnonzero(~(rho >= floor))
    if bad.size:
        i = int(bad[0])
        raise VacuumReached(i, t, float(rho[i]))


def _nu(rho: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    return cfg.viscosity_scale * 2.0 * rho * cfg.law._dmu(rho)


def _capillary(rho: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    eps, dx = cfg.params.eps, cfg.grid.dx
    if cfg.capillary_form == "bohm":
        sq = np.sqrt(rho)
        return 4.0 * eps * rho * ddx(d2dx2(sq, dx) / sq, dx)
    sqrt_k = cfg.law._dmu(rho) / np.sqrt(rho)
    return 2.0 * eps * rho * ddx(sqrt_k * d2dx2(cfg.law._Pi(rho), dx), dx)


def _explicit_part(rho: np.ndarray, m: np.ndarray, cfg: SolverConfig):
    dx = cfg.grid.dx
    u = m / rho
    drho = -ddx(m, dx)
    dm = -ddx(m * u, dx) - ddx(cfg.pressure.a * rho ** cfg.pressure.gamma, dx) - cfg.params.r3 * m
    if cfg.params.eps > 0.0:
        dm = dm + _capillary(rho, cfg)
    return drho, dm


def _viscous_part(rho: np.ndarray, u: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    nu = _nu(rho, cfg)
    face = 0.5 * (nu + np.roll(nu, -1))
    flux = face * (np.roll(u, -1) - u)
    return (flux - np.roll(flux, 1)) / (cfg.grid.dx ** 2)


def _viscous_solve(rho: np.ndarray, b: np.ndarray, c: float, cfg: SolverConfig) -> np.ndarray:
    """Solve rho u - c d_x(nu d_x u) = b for u (periodic, symmetric tridiagonal).

    The corner entries are handled with a Sherman-Morrison correction around
    a banded solve.
    """
    n = rho.size
    nu = _nu(rho, cfg)
    face = 0.5 * (nu + np.roll(nu, -1)) * (c / cfg.grid.dx ** 2)   # coupling i <-> i+1
    diag = rho + face + np.roll(face, 1)
    off = -face                                                    # A[i, i+1]; A[n-1, 0] = off[n-1]
    corner = off[-1]
    if corner == 0.0:
        ab = np.zeros((3, n))
        ab[0, 1:] = off[:-1]
        ab[1] = diag
        ab[2, :-1] = off[:-1]
        return solve_banded((1, 1), ab, b, check_finite=False)
    g = -diag[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = off[:-1]
    ab[1] = diag
    ab[1, 0] -= g
    ab[1, -1] -= corner * corner / g
    ab[2, :-1] = off[:-1]
    uvec = np.zeros(n)
    uvec[0] = g
    uvec[-1] = corner
    sol = solve_banded((1, 1), ab, np.column_stack((b, uvec)), check_finite=False)
    y, z = sol[:, 0], sol[:, 1]
    vy = y[0] + corner / g * y[-1]
    vz = z[0] + corner / g * z[-1]
    return y - (vy / (1.0 + vz)) * z


def rhs(state: State, config: SolverConfig):
    """Full semidiscrete right-hand side (d rho/dt, d m/dt)."""
    rho, m = state.rho.values, state.m.values
    _check_floor(rho, config.floor, state.t)
    drho, dm = _explicit_part(rho, m, config)
    if config.viscosity_scale > 0:
        dm = dm + _viscous_part(rho, m / rho, config)
    return PeriodicField(state.grid, drho), PeriodicField(state.grid, dm)


def stable_dt(rho: np.ndarray, m: np.ndarray, cfg: SolverConfig) -> float:
    """A priori step budget: acoustic, viscous (explicit only) and capillary limits."""
    dx = cfg.grid.dx
    u = m / rho
    limits = []
    speed = np.max(np.abs(u) + np.sqrt(cfg.pressure.a * cfg.pressure.gamma * rho ** (cfg.pressure.gamma - 1.0)))
    if speed > 0:
        limits.append(dx / speed)
    nu = _nu(rho, cfg)
    eps = cfg.params.eps
    if eps > 0:
        rho_k = cfg.law._dmu(rho) ** 2      # rho * K(rho)
        # max of |sin t| * 2|sin(t/2)| * ... over the discrete symbol is sqrt(64/27)
        omega = math.sqrt(2.0 * eps * float(np.max(rho_k)) * 64.0 / 27.0) / dx ** 2
        if cfg.scheme is Scheme.EXPLICIT_RK3:
            limits.append(math.sqrt(3.0) / omega)
        else:
            # viscosity-dominated quasi-static rate 2 eps rho^2 K / nu * (1/dx^2)
            if np.all(nu > 0):
                lam = 2.0 * eps * float(np.max(rho * rho_k / nu)) / dx ** 2
                limits.append(max(0.5 / lam, 0.5 / omega))
            else:
                limits.append(0.5 / omega)
    if cfg.scheme is Scheme.EXPLICIT_RK3 and np.any(nu > 0):
        limits.append(2.5 * dx ** 2 / (4.0 * float(np.max(nu / rho))))
    if cfg.params.r3 > 0:
        limits.append(1.0 / cfg.params.r3)
    if not limits:
        return cfg.dt_init
    return cfg.cfl_safety * min(limits)


# --- time steppers ---------------------------------------------------------

_ARS_G = 1.0 - 1.0 / math.sqrt(2.0)
_ARS_D = 1.0 - 1.0 / (2.0 * _ARS_G)


def _imex_ars222(rho, m, dt, cfg):
    g, d = _ARS_G, _ARS_D
    k1r, k1m = _explicit_part(rho, m, cfg)
    if cfg.viscosity_scale == 0:
        r2, m2 = rho + dt * g * k1r, m + dt * g * k1m
        k2r, k2m = _explicit_part(r2, m2, cfg)
        return rho + dt * (d * k1r + (1 - d) * k2r), m + dt * (d * k1m + (1 - d) * k2m)
    r2 = rho + dt * g * k1r
    u2 = _viscous_solve(r2, m + dt * g * k1m, dt * g, cfg)
    m2 = r2 * u2
    v2 = _viscous_part(r2, u2, cfg)
    k2r, k2m = _explicit_part(r2, m2, cfg)
    r3 = rho + dt * (d * k1r + (1 - d) * k2r)
    u3 = _viscous_solve(r3, m + dt * (d * k1m + (1 - d) * k2m) + dt * (1 - g) * v2, dt * g, cfg)
    return r3, r3 * u3


def _full(rho, m, cfg):
    drho, dm = _explicit_part(rho, m, cfg)
    if cfg.viscosity_scale > 0:
        dm = dm + _viscous_part(rho, m / rho, cfg)
    return drho, dm


def _ssprk3(rho, m, dt, cfg):
    a_r, a_m = _full(rho, m, cfg)
    r1, m1 = rho + dt * a_r, m + dt * a_m
    b_r, b_m = _full(r1, m1, cfg)
    r2 = 0.75 * rho + 0.25 * (r1 + dt * b_r)
    m2 = 0.75 * m + 0.25 * (m1 + dt * b_m)
    c_r, c_m = _full(r2, m2, cfg)
    return (rho / 3.0 + 2.0 / 3.0 * (r2 + dt * c_r),
            m / 3.0 + 2.0 / 3.0 * (m2 + dt * c_m))


def _advance(rho, m, dt, cfg):
    if cfg.scheme is Scheme.EXPLICIT_RK3:
        return _ssprk3(rho, m, dt, cfg)
    return _imex_ars222(rho, m, dt, cfg)


# --- guarded integration ---------------------------------------------------


@dataclass
class Telemetry:
    dt_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    rejections: int = 0
    rejection_times: list = field(default_factory=list)
    max_step_increment: float = 0.0
    wall_time: float = 0.0

    @property
    def n_steps(self) -> int:
        return len(self.dt_history)

    def summary(self) -> dict:
        dts = np.asarray(self.dt_history) if self.dt_history else np.array([np.nan])
        return {
            "n_steps": self.n_steps,
            "dt_min": float(np.min(dts)),
            "dt_max": float(np.max(dts)),
            "rejections": self.rejections,
            "max_step_increment": self.max_step_increment,
            "wall_time_s": self.wall_time,
        }


class Integrator:
    """Guarded stepping with a cached kappa-entropy of the current state."""

    def __init__(self, config: SolverConfig, reference_entropy: Optional[float] = None):
        self.config = config
        self.telemetry = Telemetry()
        self.reference_entropy = reference_entropy
        self._dt_cap = math.inf

    def terms(self, rho: np.ndarray, m: np.ndarray) -> tuple:
        cfg = self.config
        return entropy_terms(rho, m / rho, cfg.grid.dx, cfg.law, cfg.pressure, cfg.params)

    @property
    def tolerance(self) -> float:
        ref = self.reference_entropy if self.reference_entropy is not None else 1.0
        return self.config.residual_tol * max(ref, 1.0)

    def proposed_dt(self, rho: np.ndarray, m: np.ndarray) -> float:
        cfg = self.config
        if cfg.fixed_dt:
            return cfg.dt_init
        return min(stable_dt(rho, m, cfg), self._dt_cap)

    def step(self, state: State, dt: Optional[float] = None, e_old: Optional[float] = None):
        """Advance one guarded step; returns (new_state, new_terms)."""
        cfg = self.config
        rho, m = state.rho.values, state.m.values
        if e_old is None:
            e_old = self.terms(rho, m)[1]
        if self.reference_entropy is None:
            self.reference_entropy = e_old
        dt = self.proposed_dt(rho, m) if dt is None else dt
        tol = self.tolerance
        budget = stable_dt(rho, m, cfg) * (1.0 + 1e-12)
        min_dt = 1e-12 * cfg.t_end
        vacuum = None
        for attempt in range(cfg.max_retries + 1):
            with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                r_new, m_new = _advance(rho, m, dt, cfg)
            finite = np.all(np.isfinite(r_new)) and np.all(np.isfinite(m_new))
            inc = math.inf
            if finite:
                # undershooting the floor within the stability budget is vacuum;
                # beyond it the step may simply be too long and is retried
                try:
                    _check_floor(r_new, cfg.floor, state.t + dt)
                except VacuumReached as exc:
                    if dt <= budget:
                        raise
                    vacuum = exc
                    finite = False
            if finite:
                vacuum = None
                terms = self.terms(r_new, m_new)
                inc = terms[1] - e_old
                if inc <= tol:
                    self.telemetry.dt_history.append(dt)
                    self.telemetry.max_step_increment = max(self.telemetry.max_step_increment, inc)
                    if not cfg.fixed_dt:
                        self._dt_cap = self._dt_cap * 1.25 if math.isfinite(self._dt_cap) else math.inf
                    new = State(state.t + dt, PeriodicField(cfg.grid, r_new), PeriodicField(cfg.grid, m_new))
                    return new, terms
            self.telemetry.rejections += 1
            self.telemetry.rejection_times.append(state.t)
            if attempt == cfg.max_retries or 0.5 * dt < min_dt:
                break
            dt *= 0.5
            self._dt_cap = dt
        if vacuum is not None:
            raise vacuum
        raise StepRejected(state.t, dt, inc, cfg.max_retries)


def step(state: State, config: SolverConfig, dt: Optional[float] = None) -> State:
    """One guarded step from ``state``; ``dt`` defaults to the stability budget."""
    new, _ = Integrator(config).step(state, dt)
    return new


# --- runs and series -------------------------------------------------------


@dataclass
class TimeSeries:
    records: list = field(default_factory=list)
    telemetry: Telemetry = field(default_factory=Telemetry)
    error: Optional[Exception] = None
    final_state: Optional[State] = None

    def __len__(self):
        return len(self.records)

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def t(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def E(self) -> np.ndarray:
        return np.array([r.E_total for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def max_increment(self) -> float:
        e = self.E
        return float(np.max(np.diff(e))) if e.size > 1 else 0.0

    def monotone(self, tol: float) -> bool:
        return self.max_increment() <= tol

    @classmethod
    def from_arrays(cls, t, E) -> "TimeSeries":
        nan = float("nan")
        recs = [EntropyReport(float(ti), nan, float(ei), nan, nan, nan, nan, nan, nan, nan, nan)
                for ti, ei in zip(t, E)]
        return cls(records=recs)


def _report(t, terms) -> EntropyReport:
    return EntropyReport(float(t), *terms)


def run(config: SolverConfig, initial: State, override_admissibility: bool = False,
        progress: Optional[Callable[[float], None]] = None) -> TimeSeries:
    """Integrate from ``initial`` to ``config.t_end``, recording every output interval.

    Solver failures do not raise: the partial series is returned with
    ``error`` set.  Configurations whose gamma condition is violated are
    refused unless ``override_admissibility`` is set.
    """
    report = check_admissibility(config.law, config.pressure)
    if report.gamma_condition is GammaCondition.VIOLATED and not override_admissibility:
        raise AdmissibilityError("; ".join(report.notes) or "gamma condition violated")
    if initial.grid != config.grid:
        raise ConfigError("initial state is not on the configured grid")

    wall0 = time.perf_counter()
    _check_floor(initial.rho.values, config.floor, initial.t)
    integ = Integrator(config)
    state = initial
    terms = integ.terms(state.rho.values, state.m.values)
    integ.reference_entropy = terms[1]
    series = TimeSeries(telemetry=integ.telemetry)
    series.records.append(_report(state.t, terms))

    t0 = initial.t
    n_out = int(math.floor((config.t_end - t0) / config.output_interval + 1e-9))
    out_times = [t0 + k * config.output_interval for k in range(1, n_out + 1)]
    if not out_times or out_times[-1] < config.t_end - 1e-12:
        out_times.append(config.t_end)

    try:
        for target in out_times:
            while state.t < target - 1e-13 * max(1.0, abs(target)):
                dt = integ.proposed_dt(state.rho.values, state.m.values)
                remaining = target - state.t
                if dt >= remaining * (1 - 1e-9):
                    dt = remaining
                elif dt > 0.5 * remaining:
                    dt = 0.5 * remaining
                state, terms = integ.step(state, dt, e_old=terms[1])
            state = replace(state, t=target)
            prev = series.records[-1]
            rec = _report(target, terms)
            span = rec.t - prev.t
            resid = (rec.E_total - prev.E_total) / span + 0.5 * (rec.D_total + prev.D_total)
            rec = rec.with_residual(resid)
            integ.telemetry.residual_history.append(resid)
            series.records.append(rec)
            if progress is not None:
                progress(target)
    except SolverError as exc:
        series.error = exc
    series.final_state = state
    integ.telemetry.wall_time = time.perf_counter() - wall0
    return series


# --- decay fitting ---------------------------------------------------------


class DecayFit(NamedTuple):
    C: float
    r2: float
    n: int
    window: tuple


def fit_decay_arrays(t, E, window=None) -> DecayFit:
    """Least-squares slope of log E against t; returns C = -slope and r^2."""
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    if window is not None:
        sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
        t, E = t[sel], E[sel]
    else:
        window = (float(t[0]), float(t[-1])) if t.size else (math.nan, math.nan)
    if t.size < 10:
        raise WindowTooShort(f"need at least 10 records in the window, got {t.size}")
    if np.any(~(E > 0)):
        raise NonpositiveEntropy("entropy must be positive on the fit window")
    res = stats.linregress(t, np.log(E))
    return DecayFit(float(-res.slope), float(res.rvalue ** 2), int(t.size), tuple(window))


def fit_decay_rate(series: TimeSeries, window=None) -> DecayFit:
    return fit_decay_arrays(series.t, series.E, window)
