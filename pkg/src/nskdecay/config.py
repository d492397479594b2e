"""Run configuration: a nested, documented schema with strict parsing.

A configuration file (YAML or JSON) holds any subset of the sections below.
Missing keys take the defaults shown; unknown sections or keys are errors.
Command-line overrides use dotted keys, e.g. ``solver.t_end=5`` or
``viscosity.family=power``.

grid
    n (256), length (1.0)
viscosity
    family ("quantum" | "power" | "tail"), alpha (1.0), M (4.0; tail only)
pressure
    a (1.0), gamma (2.0)
entropy
    kappa (0.5), eps (0.01), r3 (1.0), r (1.0), C_diss (1.0)
solver
    t_end (10.0), dt_init (1e-4), cfl_safety (0.5), rho_floor (null = 1e-8 r),
    residual_tol (1e-6), scheme ("IMEXViscous" | "ExplicitRK3"),
    output_interval (0.05), max_retries (8), viscosity_scale (1.0),
    capillary_form ("sqrtK" | "bohm")
initial
    profile ("sine" | "random"), amplitude (0.3), mode (1), velocity (0.0)
    rho0 = r (1 + amplitude sin(2 pi mode x / L)), u0 = velocity sin(2 pi x / L);
    "random" draws one seeded SmoothRandom profile with mean r instead.
fit
    t0 (2.0), t1 (null = t_end)
verify
    lemma ("all"), size (200), delta (0.25), refine (true), tail_r (2.0),
    eta (0.05), tolerance (0.05)
seed (0), out (null)
"""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .constitutive import PressureLaw, ViscosityLaw, law_from_config
from .entropy import EntropyParams
from .errors import ConfigError, DomainError
from .fields import Grid
from .solver import Scheme, SolverConfig, State

__all__ = ["RunConfig", "load_config", "parse_override"]

LEMMAS = ("poincare", "lower_bound", "modulated", "jensen")


@dataclass
class GridSection:
    n: int = 256
    length: float = 1.0


@dataclass
class ViscositySection:
    family: str = "quantum"
    alpha: float = 1.0
    M: float = 4.0


@dataclass
class PressureSection:
    a: float = 1.0
    gamma: float = 2.0


@dataclass
class EntropySection:
    kappa: float = 0.5
    eps: float = 0.01
    r3: float = 1.0
    r: float = 1.0
    C_diss: float = 1.0


@dataclass
class SolverSection:
    t_end: float = 10.0
    dt_init: float = 1e-4
    cfl_safety: float = 0.5
    rho_floor: Optional[float] = None
    residual_tol: float = 1e-6
    scheme: str = Scheme.IMEX_VISCOUS.value
    output_interval: float = 0.05
    max_retries: int = 8
    viscosity_scale: float = 1.0
    capillary_form: str = "sqrtK"


@dataclass
class InitialSection:
    profile: str = "sine"
    amplitude: float = 0.3
    mode: int = 1
    velocity: float = 0.0


@dataclass
class FitSection:
    t0: float = 2.0
    t1: Optional[float] = None


@dataclass
class VerifySection:
    lemma: str = "all"
    size: int = 200
    delta: float = 0.25
    refine: bool = True
    tail_r: float = 2.0
    eta: float = 0.05
    tolerance: float = 0.05


_SECTIONS = {
    "grid": GridSection,
    "viscosity": ViscositySection,
    "pressure": PressureSection,
    "entropy": EntropySection,
    "solver": SolverSection,
    "initial": InitialSection,
    "fit": FitSection,
    "verify": VerifySection,
}
_SCALARS = {"seed": int, "out": str}

_OPTIONAL = {("solver", "rho_floor"), ("fit", "t1")}


def _coerce(section: str, key: str, value, default):
    if value is None:
        if (section, key) in _OPTIONAL or default is None:
            return None
        raise ConfigError(f"{section}.{key} may not be null")
    kind = type(default) if default is not None else float
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.lower() in ("true", "false", "yes", "no", "1", "0"):
                return value.lower() in ("true", "yes", "1")
            raise ValueError(value)
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{key}: cannot interpret {value!r} as {kind.__name__}") from None


@dataclass
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    viscosity: ViscositySection = field(default_factory=ViscositySection)
    pressure: PressureSection = field(default_factory=PressureSection)
    entropy: EntropySection = field(default_factory=EntropySection)
    solver: SolverSection = field(default_factory=SolverSection)
    initial: InitialSection = field(default_factory=InitialSection)
    fit: FitSection = field(default_factory=FitSection)
    verify: VerifySection = field(default_factory=VerifySection)
    seed: int = 0
    out: Optional[str] = None

    # -- (de)serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "RunConfig":
        cfg = cls()
        for key, value in (data or {}).items():
            cfg.set(key, value, whole_section=True)
        return cfg

    def set(self, key: str, value, whole_section: bool = False) -> None:
        """Assign a dotted key (``section.name``) or a whole section mapping."""
        if key in _SCALARS:
            if value is None and key == "out":
                self.out = None
                return
            try:
                setattr(self, key, _SCALARS[key](value))
            except (TypeError, ValueError):
                raise ConfigError(f"{key}: cannot interpret {value!r}") from None
            return
        section, _, name = key.partition(".")
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config key {key!r}")
        target = getattr(self, section)
        if not name:
            if not whole_section or not isinstance(value, dict):
                raise ConfigError(f"section {section!r} needs a mapping of keys")
            for k, v in value.items():
                self.set(f"{section}.{k}", v)
            return
        known = {f.name: f for f in fields(target)}
        if name not in known:
            raise ConfigError(f"unknown config key {key!r}")
        default = getattr(_SECTIONS[section](), name)
        setattr(target, name, _coerce(section, name, value, default))

    def with_overrides(self, overrides) -> "RunConfig":
        cfg = copy.deepcopy(self)
        for item in overrides or ():
            key, value = parse_override(item)
            cfg.set(key, value)
        return cfg

    # -- builders ----------------------------------------------------------

    def build_grid(self) -> Grid:
        try:
            return Grid(self.grid.n, self.grid.length)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def build_law(self) -> ViscosityLaw:
        spec = {"family": self.viscosity.family, "alpha": self.viscosity.alpha, "M": self.viscosity.M}
        try:
            return law_from_config(spec)
        except (DomainError, KeyError, TypeError) as exc:
            raise ConfigError(f"viscosity: {exc}") from None

    def build_pressure(self) -> PressureLaw:
        try:
            return PressureLaw(self.pressure.a, self.pressure.gamma)
        except DomainError as exc:
            raise ConfigError(f"pressure: {exc}") from None

    def build_params(self) -> EntropyParams:
        e = self.entropy
        try:
            return EntropyParams(e.kappa, e.eps, e.r3, e.r, e.C_diss)
        except DomainError as exc:
            raise ConfigError(f"entropy: {exc}") from None

    def build_solver(self) -> SolverConfig:
        s = self.solver
        try:
            scheme = Scheme(s.scheme)
        except ValueError:
            raise ConfigError(f"solver.scheme must be one of {[m.value for m in Scheme]}") from None
        return SolverConfig(
            grid=self.build_grid(), law=self.build_law(), pressure=self.build_pressure(),
            params=self.build_params(), t_end=s.t_end, dt_init=s.dt_init, cfl_safety=s.cfl_safety,
            rho_floor=s.rho_floor, residual_tol=s.residual_tol, scheme=scheme,
            output_interval=s.output_interval, max_retries=s.max_retries,
            viscosity_scale=s.viscosity_scale, capillary_form=s.capillary_form,
        )

    def build_initial(self, grid: Optional[Grid] = None) -> State:
        grid = grid or self.build_grid()
        ini, r = self.initial, self.entropy.r
        x = grid.x / grid.length
        if ini.profile == "sine":
            if not abs(ini.amplitude) < 1:
                raise ConfigError("initial.amplitude must satisfy |amplitude| < 1 to keep rho > 0")
            rho = r * (1.0 + ini.amplitude * np.sin(2.0 * np.pi * ini.mode * x))
        elif ini.profile == "random":
            from .verifier import Generator, make_ensemble
            rho = make_ensemble(grid, Generator.SMOOTH_RANDOM, 1, self.seed, r=r).profiles[0].values
        else:
            raise ConfigError(f"initial.profile must be 'sine' or 'random', got {ini.profile!r}")
        u = ini.velocity * np.sin(2.0 * np.pi * x)
        return State.from_velocity(grid.field(rho), grid.field(u))

    def fit_window(self) -> tuple:
        t1 = self.fit.t1 if self.fit.t1 is not None else self.solver.t_end
        return (self.fit.t0, t1)


def parse_override(item: str):
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    try:
        value = yaml.safe_load(raw) if raw != "" else None
    except yaml.YAMLError:
        value = raw
    return key.strip(), value


def load_config(path=None, overrides=()) -> RunConfig:
    data = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping at the top level")
    return RunConfig.from_dict(data).with_overrides(overrides)
