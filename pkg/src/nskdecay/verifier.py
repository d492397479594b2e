"""Empirical checks of the functional inequalities behind exponential decay.

Each check evaluates, profile by profile, an inequality of the form
``lhs <= C * rhs`` and records ``ratio = lhs / rhs``.  A finite ensemble
maximum that is stable under grid refinement is the empirical witness for the
constant C.  Profiles are defined analytically from seeded parameters, so an
ensemble can be resampled on a finer grid and the same functions compared.

Checks
------
poincare_zero_set
    int f^2 <= C int |f'|^2 for f >= 0 vanishing on a set of measure >= delta.
coercivity_infimum
    inf of mu/rho + rho H''/mu' over a density range.
lower_bound_split
    int |rho-r|^2 1{rho0<=rho<=M} + int 1{rho<rho0} + int rho^(3(beta-eta)-2) 1{rho>=M}
    <= C int |Z''|^2, and int H 1{rho>=M} <= C int H'' mu' |rho'|^2.
modulated_entropy_bound
    int 2 kappa r3 h(rho|r) + H(rho|r) <= C (int |Z''|^2 + int H'' mu' |rho'|^2).
jensen_logsobolev_check
    int rho log(rho) 1{rho>M} <= C int |((sqrt(rho) - sqrt(2r))_+)'|^2.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constitutive import PressureLaw, ViscosityLaw, check_admissibility
from .entropy import EntropyParams, coercivity_scalar
from .errors import DomainError
from .fields import Grid, PeriodicField, d2dx2, ddx

__all__ = [
    "Generator",
    "ProfileEnsemble",
    "RatioReport",
    "make_ensemble",
    "proof_parameters",
    "poincare_zero_set",
    "poincare_by_delta",
    "coercivity_infimum",
    "coercivity_closed_form",
    "lower_bound_split",
    "modulated_entropy_bound",
    "jensen_logsobolev_check",
    "refinement_change",
]

_FINE = 1 << 14          # quadrature points for normalizing profile means


class Generator(str, enum.Enum):
    SMOOTH_RANDOM = "SmoothRandom"
    ZERO_SET_PATCHES = "ZeroSetPatches"
    HEAVY_TAIL = "HeavyTail"
    NEAR_VACUUM = "NearVacuum"


# --- profile families --------------------------------------------------------


def _periodic_offset(x, c):
    """Signed distance x - c wrapped to [-1/2, 1/2)."""
    return (x - c + 0.5) % 1.0 - 0.5


def _eval_raw(spec: dict, x: np.ndarray) -> np.ndarray:
    kind = spec["kind"]
    if kind == "smooth":
        k = np.arange(1, len(spec["a"]) + 1)
        phase = 2.0 * np.pi * np.outer(x, k)
        g = np.cos(phase) @ np.asarray(spec["a"]) + np.sin(phase) @ np.asarray(spec["b"])
        return np.exp(g)
    if kind == "patches":
        f = np.zeros_like(x)
        for c, w, amp in zip(spec["starts"], spec["widths"], spec["amps"]):
            t = ((x - c) % 1.0) / w
            inside = t < 1.0
            f = f + np.where(inside, amp * np.sin(np.pi * np.minimum(t, 1.0)) ** 4, 0.0)
        return f
    if kind == "bump":
        d = _periodic_offset(x, spec["center"])
        return spec["floor"] + np.exp(-0.5 * (d / spec["sigma"]) ** 2)
    if kind == "custom":
        return np.asarray(spec["fn"](x), dtype=float) * np.ones_like(x)
    if kind == "vacuum":
        q = np.cos(2.0 * np.pi * (x - spec["center"])) + spec["tilt"] * np.sin(4.0 * np.pi * (x - spec["center"]))
        return spec["e0"] + q * q
    raise ValueError(f"unknown profile kind {kind!r}")


def _evaluate(spec: dict, x: np.ndarray) -> np.ndarray:
    raw = _eval_raw(spec, x)
    return spec.get("scale", 1.0) * raw


def _normalize(spec: dict, r: float) -> dict:
    xf = (np.arange(_FINE) + 0.5) / _FINE
    mean = float(np.mean(_eval_raw(spec, xf)))
    spec = dict(spec)
    spec["scale"] = r / mean
    return spec


def _smooth_spec(rng, r):
    K = 4
    sigma = rng.uniform(0.1, 0.8)
    k = np.arange(1, K + 1)
    a = rng.normal(0.0, sigma / k)
    b = rng.normal(0.0, sigma / k)
    return _normalize({"kind": "smooth", "a": a.tolist(), "b": b.tolist()}, r)


def _patch_spec(rng, delta):
    frac = rng.uniform(0.5, 1.0)
    J = int(rng.integers(1, 4))
    share = rng.dirichlet(np.ones(J))
    gaps = rng.dirichlet(np.ones(J))
    amps = rng.uniform(0.5, 2.0, size=J)
    offset = rng.uniform(0.0, 1.0)
    support = frac * (1.0 - delta)
    widths = support * share
    gap_len = (1.0 - support) * gaps
    starts = []
    pos = offset
    for w, g in zip(widths, gap_len):
        starts.append(pos % 1.0)
        pos += w + g
    return {"kind": "patches", "starts": starts, "widths": widths.tolist(),
            "amps": amps.tolist(), "support": float(support)}


def _tail_spec(rng, r, M):
    peak = rng.uniform(1.2, 1.6) * M
    # keep the bump mass (about 2.5 sigma peak) below 70% of the total
    sigma = min(rng.uniform(0.016, 0.022), 0.7 * r / (2.5 * peak))
    center = rng.uniform(0.0, 1.0)
    # background level chosen so that the analytic profile has mean r
    xf = (np.arange(_FINE) + 0.5) / _FINE
    m_bump = float(np.mean(np.exp(-0.5 * (_periodic_offset(xf, center) / sigma) ** 2)))
    bg = (r - peak * m_bump) / (1.0 - m_bump)
    if bg <= 0:
        raise DomainError("tail profile too massive for the requested mean")
    # rho = bg + (peak - bg) * bump = (peak - bg) * (floor + bump)
    spec = {"kind": "bump", "center": center, "sigma": sigma,
            "floor": bg / (peak - bg)}
    return _normalize(spec, r)


def _vacuum_spec(rng, r):
    spec = {"kind": "vacuum", "center": rng.uniform(0.0, 1.0),
            "tilt": rng.uniform(-0.3, 0.3), "e0": rng.uniform(0.02, 0.1)}
    return _normalize(spec, r)


def proof_parameters(r: float) -> dict:
    """The explicit choices rho0 = r/4, M = max(8r, 16), delta = min(r/16, 1/2)."""
    return {"rho0": r / 4.0, "M": max(8.0 * r, 16.0), "delta": min(r / 16.0, 0.5)}


@dataclass
class ProfileEnsemble:
    grid: Grid
    generator: Optional[Generator]      # None for explicit profiles
    seed: int
    specs: list
    profiles: list
    metadata: list
    r: Optional[float] = None
    delta: Optional[float] = None

    def __len__(self):
        return len(self.profiles)

    @property
    def label(self) -> str:
        return self.generator.value if self.generator is not None else "explicit"

    @classmethod
    def from_functions(cls, grid: Grid, functions, r: Optional[float] = None,
                       delta: Optional[float] = None) -> "ProfileEnsemble":
        """Ensemble of explicit profiles ``f(x)`` with x in [0, 1)."""
        specs = [{"kind": "custom", "fn": fn} for fn in functions]
        profiles, meta = _materialize(grid, specs)
        return cls(grid, None, -1, specs, profiles, meta, r, delta)

    def resample(self, grid: Grid) -> "ProfileEnsemble":
        profiles, meta = _materialize(grid, self.specs)
        return ProfileEnsemble(grid, self.generator, self.seed, self.specs, profiles, meta, self.r, self.delta)


def _materialize(grid: Grid, specs):
    x = grid.x / grid.length
    profiles, meta = [], []
    for spec in specs:
        vals = _evaluate(spec, x)
        f = PeriodicField(grid, vals)
        info = {
            "mean": float(grid.dx * vals.sum() / grid.length),
            "min": float(vals.min()),
            "max": float(vals.max()),
            "zero_fraction": float(np.mean(vals == 0.0)),
        }
        if spec["kind"] == "patches":
            info["zero_measure"] = 1.0 - spec["support"]
        profiles.append(f)
        meta.append(info)
    return profiles, meta


def make_ensemble(grid: Grid, generator, size: int, seed: int, r: float = 1.0,
                  delta: float = 0.25) -> ProfileEnsemble:
    """Seeded ensemble of nonnegative profiles.

    ``r`` is the exact (continuum) mean of every profile except the
    zero-set family, whose support fraction is at most ``1 - delta``.
    """
    generator = Generator(generator)
    if size < 1:
        raise ValueError("ensemble size must be positive")
    if generator is Generator.ZERO_SET_PATCHES and not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    children = np.random.SeedSequence(seed).spawn(size)
    M = proof_parameters(r)["M"]
    specs = []
    for child in children:
        rng = np.random.default_rng(child)
        if generator is Generator.SMOOTH_RANDOM:
            specs.append(_smooth_spec(rng, r))
        elif generator is Generator.ZERO_SET_PATCHES:
            specs.append(_patch_spec(rng, delta))
        elif generator is Generator.HEAVY_TAIL:
            specs.append(_tail_spec(rng, r, M))
        else:
            specs.append(_vacuum_spec(rng, r))
    profiles, meta = _materialize(grid, specs)
    return ProfileEnsemble(grid, generator, int(seed), specs, profiles, meta,
                           None if generator is Generator.ZERO_SET_PATCHES else r,
                           delta if generator is Generator.ZERO_SET_PATCHES else None)


# --- reports -------------------------------------------------------------------


@dataclass
class RatioReport:
    """Per-profile sides of ``lhs <= C * rhs`` and their ratios.

    Skipped profiles carry NaN ratios and a reason in ``status``.
    """

    lemma_id: str
    lhs: np.ndarray
    rhs: np.ndarray
    ratio: np.ndarray
    status: list
    parameters: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    metadata: list = field(default_factory=list)

    @property
    def evaluated(self) -> np.ndarray:
        return np.isfinite(self.ratio)

    @property
    def max_ratio(self) -> float:
        r = self.ratio[~np.isnan(self.ratio)]
        return float(np.max(r)) if r.size else math.nan

    @property
    def argmax(self) -> int:
        r = np.where(np.isnan(self.ratio), -np.inf, self.ratio)
        return int(np.argmax(r)) if np.any(np.isfinite(r)) or np.any(r == np.inf) else -1

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.max_ratio))

    @property
    def n_skipped(self) -> int:
        return sum(1 for s in self.status if s != "ok")

    def summary(self) -> dict:
        return {
            "lemma": self.lemma_id,
            "max_ratio": self.max_ratio,
            "argmax": self.argmax,
            "evaluated": int(np.sum(~np.isnan(self.ratio))),
            "skipped": self.n_skipped,
            "parameters": self.parameters,
        }

    def write_csv(self, path) -> None:
        from .io import write_verify_csv
        write_verify_csv(path, [self])


def _ratio(lhs: float, rhs: float):
    if lhs == 0.0 and rhs == 0.0:
        return math.nan, "skipped: both sides vanish"
    if rhs == 0.0:
        return math.inf, "unbounded: rhs vanishes"
    return lhs / rhs, "ok"


def _integrate(v: np.ndarray, dx: float) -> float:
    return float(dx * np.sum(v))


# --- checks --------------------------------------------------------------------


def poincare_zero_set(ensemble: ProfileEnsemble) -> RatioReport:
    dx = ensemble.grid.dx
    n = len(ensemble)
    lhs, rhs, ratio, status = np.zeros(n), np.zeros(n), np.full(n, np.nan), []
    for i, f in enumerate(ensemble.profiles):
        v = f.values
        if np.any(v < 0):
            raise DomainError(f"profile {i} is negative somewhere")
        lhs[i] = _integrate(v * v, dx)
        g = ddx(v, dx)
        rhs[i] = _integrate(g * g, dx)
        if lhs[i] > 0 and rhs[i] == 0:
            warnings.warn(f"profile {i}: nonzero f with zero gradient, filtered")
            status.append("skipped: zero gradient")
            continue
        ratio[i], st = _ratio(lhs[i], rhs[i])
        status.append(st)
    params = {"delta": ensemble.delta, "seed": ensemble.seed, "n": ensemble.grid.n,
              "generator": ensemble.label}
    return RatioReport("poincare_zero_set", lhs, rhs, ratio, status, params, metadata=ensemble.metadata)


def poincare_by_delta(grid: Grid, deltas, size: int, seed: int) -> dict:
    """Poincare reports for several zero-set fractions from one seed."""
    return {float(d): poincare_zero_set(make_ensemble(grid, Generator.ZERO_SET_PATCHES, size, seed, delta=d))
            for d in deltas}


def coercivity_closed_form(alpha: float, pressure: PressureLaw, rho):
    """rho^(alpha-1) + (a gamma / alpha) rho^(gamma-alpha) for mu = rho^alpha."""
    rho = np.asarray(rho, dtype=float)
    return rho ** (alpha - 1.0) + pressure.a * pressure.gamma / alpha * rho ** (pressure.gamma - alpha)


def coercivity_infimum(law: ViscosityLaw, pressure: PressureLaw, rho_range=(1e-6, 1e6),
                       samples: int = 4001) -> float:
    lo, hi = rho_range
    if not 0 < lo < hi:
        raise DomainError(f"need 0 < rho_min < rho_max, got {rho_range}")
    rho = np.geomspace(lo, hi, samples)
    return float(np.min(coercivity_scalar(law, pressure, rho)))


def _require_mean(ensemble: ProfileEnsemble) -> float:
    if ensemble.r is None:
        raise ValueError("this check needs an ensemble with a prescribed mean density")
    return ensemble.r


def lower_bound_split(ensemble: ProfileEnsemble, law: ViscosityLaw, pressure: PressureLaw,
                      params: Optional[EntropyParams] = None, eta: float = 0.05) -> RatioReport:
    """Both lower-bound inequalities; ``ratio`` is the larger of the two per profile."""
    r = _require_mean(ensemble)
    pp = proof_parameters(r)
    rho0, M = pp["rho0"], pp["M"]
    beta = check_admissibility(law, pressure).beta_limit
    expo = 3.0 * (beta - eta) - 2.0
    dx = ensemble.grid.dx
    n = len(ensemble)
    lhs, rhs, ratio, status = np.zeros(n), np.zeros(n), np.full(n, np.nan), []
    second_lhs, second_rhs, first_r, second_r = np.zeros(n), np.zeros(n), np.full(n, np.nan), np.full(n, np.nan)
    for i, f in enumerate(ensemble.profiles):
        rho = f.values
        mid = (rho >= rho0) & (rho <= M)
        high = rho >= M
        pieces = (np.where(mid, (rho - r) ** 2, 0.0)
                  + (rho < rho0)
                  + np.where(high, rho ** expo, 0.0))
        lhs[i] = _integrate(pieces, dx)
        lz = d2dx2(law._Z(rho), dx)
        rhs[i] = _integrate(lz * lz, dx)
        second_lhs[i] = _integrate(np.where(high, pressure.H(rho), 0.0), dx)
        g = ddx(rho, dx)
        second_rhs[i] = _integrate(pressure.d2H(rho) * law._dmu(rho) * g * g, dx)
        r1, s1 = _ratio(lhs[i], rhs[i])
        r2, s2 = _ratio(second_lhs[i], second_rhs[i])
        first_r[i], second_r[i] = r1, r2
        if s1.startswith("skipped") and s2.startswith("skipped"):
            status.append("skipped: equilibrium")
            continue
        ratio[i] = np.nanmax([r1, r2])
        status.append(s1 if s1 != "ok" else s2 if s2.startswith("unbounded") else "ok")
    # for beta at the boundary value 1 both the tail branch and the gamma = 1
    # branch are evaluated; record which of them produced finite constants
    first_ok = bool(np.all(~np.isinf(first_r)))
    second_ok = bool(np.all(~np.isinf(second_r)))
    parameters = {"rho0": rho0, "M": M, "eta": eta, "beta": beta, "tail_exponent": expo,
                  "second_branch_applies": bool(beta >= 1.0 - 1e-6),
                  "first_held": first_ok, "second_held": second_ok,
                  "seed": ensemble.seed, "n": ensemble.grid.n, "generator": ensemble.label}
    extra = {"first_ratio": first_r, "second_lhs": second_lhs, "second_rhs": second_rhs, "second_ratio": second_r}
    return RatioReport("lower_bound_split", lhs, rhs, ratio, status, parameters, extra, ensemble.metadata)


def modulated_entropy_bound(ensemble: ProfileEnsemble, law: ViscosityLaw, pressure: PressureLaw,
                            params: EntropyParams) -> RatioReport:
    r = _require_mean(ensemble)
    k, r3 = params.kappa, params.r3
    dx = ensemble.grid.dx
    n = len(ensemble)
    lhs, rhs, ratio, status = np.zeros(n), np.zeros(n), np.full(n, np.nan), []
    for i, f in enumerate(ensemble.profiles):
        rho = f.values
        h_rel = law._h(rho) - law.h(r) - law.dh(r) * (rho - r)
        H_rel = pressure.H(rho) - pressure.H(r) - pressure.dH(r) * (rho - r)
        lhs[i] = _integrate(2.0 * k * r3 * h_rel + H_rel, dx)
        lz = d2dx2(law._Z(rho), dx)
        g = ddx(rho, dx)
        rhs[i] = _integrate(lz * lz + pressure.d2H(rho) * law._dmu(rho) * g * g, dx)
        ratio[i], st = _ratio(lhs[i], rhs[i])
        status.append(st)
    parameters = {"kappa": k, "r3": r3, "r": r, "seed": ensemble.seed, "n": ensemble.grid.n,
                  "generator": ensemble.label}
    return RatioReport("modulated_entropy_bound", lhs, rhs, ratio, status, parameters, metadata=ensemble.metadata)


def jensen_logsobolev_check(ensemble: ProfileEnsemble, params: Optional[EntropyParams] = None) -> RatioReport:
    """Generalized log-Sobolev step for gamma = 1 with f = sqrt(rho)."""
    r = _require_mean(ensemble)
    M = proof_parameters(r)["M"]
    dx = ensemble.grid.dx
    n = len(ensemble)
    lhs, rhs, ratio, status = np.zeros(n), np.zeros(n), np.full(n, np.nan), []
    shift = math.sqrt(2.0 * r)
    for i, f in enumerate(ensemble.profiles):
        rho = f.values
        tail = rho > M
        if not np.any(tail):
            status.append("skipped: no mass above M")
            continue
        lhs[i] = _integrate(np.where(tail, rho * np.log(rho), 0.0), dx)
        g = ddx(np.maximum(np.sqrt(rho) - shift, 0.0), dx)
        rhs[i] = _integrate(g * g, dx)
        ratio[i], st = _ratio(lhs[i], rhs[i])
        status.append(st)
    parameters = {"M": M, "r": r, "seed": ensemble.seed, "n": ensemble.grid.n,
                  "generator": ensemble.label}
    return RatioReport("jensen_logsobolev_check", lhs, rhs, ratio, status, parameters, metadata=ensemble.metadata)


def refinement_change(coarse: RatioReport, fine: RatioReport) -> float:
    """Relative change of max_ratio between two resolutions."""
    a, b = coarse.max_ratio, fine.max_ratio
    if not (math.isfinite(a) and math.isfinite(b)) or a == 0:
        return math.inf
    return abs(b - a) / abs(a)
