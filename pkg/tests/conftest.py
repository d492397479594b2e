import numpy as np
import pytest

from nskdecay import EntropyParams, Grid, PressureLaw, Quantum, SolverConfig, State


@pytest.fixture
def grid64():
    return Grid(64)


@pytest.fixture
def sine_state():
    def make(grid, amp=0.3, r=1.0, u=None):
        rho = grid.sample(lambda x: r * (1.0 + amp * np.sin(2 * np.pi * x)))
        vel = grid.constant(0.0) if u is None else grid.sample(u)
        return State.from_velocity(rho, vel)
    return make


@pytest.fixture
def quantum_config():
    def make(grid, **kw):
        opts = dict(t_end=1.0)
        opts.update(kw)
        pressure = opts.pop("pressure", PressureLaw(1.0, 2.0))
        params = opts.pop("params", EntropyParams())
        return SolverConfig(grid, Quantum(), pressure, params, **opts)
    return make


_ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        _ACCEPTANCE[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
