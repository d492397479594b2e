"""Exception hierarchy shared across the package."""


class NSKError(Exception):
    """Base class for all package errors."""


class DomainError(NSKError, ValueError):
    """A constitutive or entropy function was evaluated outside its domain."""


class NonFiniteError(NSKError, ValueError):
    """A field operation produced NaN or Inf."""


class ConfigError(NSKError, ValueError):
    """Invalid configuration value or unknown key."""


class AdmissibilityError(ConfigError):
    """The viscosity/pressure pair violates the gamma condition."""


class SolverError(NSKError, RuntimeError):
    """Run-ending failure of the time integrator."""


class VacuumReached(SolverError):
    def __init__(self, cell, t, value=None):
        self.cell = int(cell)
        self.t = float(t)
        self.value = value
        msg = f"density fell below floor in cell {self.cell} at t={self.t:.6g}"
        if value is not None:
            msg += f" (rho={value:.3e})"
        super().__init__(msg)


class StepRejected(SolverError):
    def __init__(self, t, dt, increment, retries):
        self.t = float(t)
        self.dt = float(dt)
        self.increment = float(increment)
        self.retries = int(retries)
        super().__init__(
            f"entropy increased by {increment:.3e} at t={t:.6g} "
            f"after {retries} dt halvings (last dt={dt:.3e})"
        )


class FitError(NSKError, ValueError):
    """Decay-rate regression could not be performed."""


class WindowTooShort(FitError):
    pass


class NonpositiveEntropy(FitError):
    pass
