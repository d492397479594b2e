"""Entropy decay of 1D periodic Navier-Stokes-Korteweg flow with drag.

Modules: ``fields`` (grid and stencils), ``constitutive`` (viscosity and
pressure laws), ``entropy`` (kappa-entropy and dissipation channels),
``solver`` (time integration and decay fits), ``verifier`` (empirical
inequality ratios) and ``cli``.
"""
from .constitutive import (PiecewiseLinearTail, PowerLaw, PressureLaw, Quantum,
                           check_admissibility)
from .entropy import EntropyParams, EntropyReport, kappa_entropy
from .fields import Grid, PeriodicField
from .solver import Scheme, SolverConfig, State, fit_decay_rate, run

__version__ = "0.1.0"

__all__ = [
    "Grid", "PeriodicField", "PowerLaw", "Quantum", "PiecewiseLinearTail", "PressureLaw",
    "check_admissibility", "EntropyParams", "EntropyReport", "kappa_entropy",
    "Scheme", "SolverConfig", "State", "run", "fit_decay_rate",
]
