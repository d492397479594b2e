import math

import numpy as np
import pytest

from nskdecay.constitutive import PowerLaw, PressureLaw, Quantum
from nskdecay.entropy import EntropyParams, mechanical_energy
from nskdecay.errors import (AdmissibilityError, ConfigError, NonpositiveEntropy, StepRejected,
                             VacuumReached, WindowTooShort)
from nskdecay.fields import Grid
from nskdecay.solver import (Integrator, Scheme, SolverConfig, State, TimeSeries, fit_decay_arrays,
                             fit_decay_rate, rhs, run, stable_dt, step)
from nskdecay.solver import _viscous_part, _viscous_solve

TWO_PI = 2 * np.pi


class TestConfig:
    def test_validation(self, grid64, quantum_config):
        for kw in (dict(t_end=0.0), dict(dt_init=-1.0), dict(cfl_safety=1.5), dict(residual_tol=0.0),
                   dict(rho_floor=0.0), dict(capillary_form="other")):
            with pytest.raises(ConfigError):
                quantum_config(grid64, **kw)

    def test_bohm_needs_quantum(self, grid64):
        with pytest.raises(ConfigError):
            SolverConfig(grid64, PowerLaw(1.5), PressureLaw(), EntropyParams(), 1.0, capillary_form="bohm")

    def test_floor_default(self, grid64, quantum_config):
        cfg = quantum_config(grid64, params=EntropyParams(r=3.0))
        assert cfg.floor == pytest.approx(3e-8)


class TestRhs:
    def test_equilibrium(self, grid64, quantum_config):
        dr, dm = rhs(State.from_velocity(grid64.constant(1.0), grid64.constant(0.0)), quantum_config(grid64))
        assert np.all(dr.values == 0) and np.all(dm.values == 0)

    def test_pure_drag(self, grid64, quantum_config):
        cfg = quantum_config(grid64, params=EntropyParams(r3=1.7, r=2.0))
        dr, dm = rhs(State.from_velocity(grid64.constant(2.0), grid64.constant(0.4)), cfg)
        assert np.all(dr.values == 0)
        np.testing.assert_allclose(dm.values, -1.7 * 2.0 * 0.4, rtol=1e-14)

    def test_bohm_and_sqrtK_agree(self, quantum_config, sine_state):
        for n in (64, 256):
            g = Grid(n)
            s = sine_state(g, u=lambda x: 0.1 * np.cos(TWO_PI * x))
            a = rhs(s, quantum_config(g))[1].values
            b = rhs(s, quantum_config(g, capillary_form="bohm"))[1].values
            assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))

    def test_capillary_converges(self, quantum_config, sine_state):
        # pure capillary force against a spectral evaluation on the same cell centers
        def spectral(f, order):
            k = 2j * np.pi * np.fft.fftfreq(f.size, d=1.0 / f.size)
            return np.real(np.fft.ifft(k ** order * np.fft.fft(f)))

        errs = []
        for n in (64, 128, 256):
            g = Grid(n)
            cfg = quantum_config(g, pressure=PressureLaw(0.0, 2.0), params=EntropyParams(r3=0.0),
                                 viscosity_scale=0.0)
            s = sine_state(g)
            rho = s.rho.values
            sq = np.sqrt(rho)
            exact = 4 * cfg.params.eps * rho * spectral(spectral(sq, 2) / sq, 1)
            errs.append(np.max(np.abs(rhs(s, cfg)[1].values - exact)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all((orders > 1.9) & (orders < 2.1))

    def test_vacuum(self, grid64, quantum_config):
        rho = grid64.field(np.r_[np.ones(63), 1e-10])
        with pytest.raises(VacuumReached):
            rhs(State.from_velocity(rho, grid64.constant(0.0)), quantum_config(grid64))


class TestViscousSolve:
    def test_inverts_operator(self, grid64, quantum_config):
        cfg = quantum_config(grid64)
        rho = grid64.sample(lambda x: 1 + 0.4 * np.sin(TWO_PI * x)).values
        u = np.random.default_rng(0).normal(size=64)
        c = 3e-3
        b = rho * u - c * _viscous_part(rho, u, cfg)
        np.testing.assert_allclose(_viscous_solve(rho, b, c, cfg), u, rtol=1e-10, atol=1e-10)

    def test_viscous_part_conserves_momentum(self, grid64, quantum_config):
        cfg = quantum_config(grid64)
        rho = grid64.sample(lambda x: 1 + 0.4 * np.sin(TWO_PI * x)).values
        u = np.cos(TWO_PI * grid64.x)
        assert abs(np.sum(_viscous_part(rho, u, cfg))) < 1e-10


class TestStep:
    def test_equilibrium_fixed_point(self, grid64, quantum_config):
        cfg = quantum_config(grid64, dt_init=1e-3, fixed_dt=True)
        it = Integrator(cfg)
        s = State.from_velocity(grid64.constant(1.0), grid64.constant(0.0))
        for _ in range(1000):
            s, _ = it.step(s)
        assert np.max(np.abs(s.rho.values - 1)) < 1e-12
        assert np.max(np.abs(s.u.values)) < 1e-12
        assert s.t == pytest.approx(1.0)

    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_pure_drag_decay(self, grid64, quantum_config, scheme):
        errs = []
        for dt in (0.02, 0.01):
            cfg = quantum_config(grid64, dt_init=dt, fixed_dt=True, scheme=scheme)
            it = Integrator(cfg)
            s = State.from_velocity(grid64.constant(1.0), grid64.constant(0.5))
            for _ in range(int(round(0.2 / dt))):
                s, _ = it.step(s)
            errs.append(np.max(np.abs(s.u.values - 0.5 * math.exp(-0.2))))
        assert errs[0] < 1e-4
        order = math.log2(errs[0] / errs[1])
        assert order > (2.8 if scheme is Scheme.EXPLICIT_RK3 else 1.8)

    def test_mass_conserved(self, grid64, quantum_config, sine_state):
        cfg = quantum_config(grid64)
        it = Integrator(cfg)
        s = sine_state(grid64, u=lambda x: 0.2 * np.cos(TWO_PI * x))
        m0 = np.sum(s.rho.values)
        for _ in range(1000):
            s, _ = it.step(s)
        assert abs(np.sum(s.rho.values) - m0) <= 1e-12 * m0

    def test_module_step(self, grid64, quantum_config, sine_state):
        s = sine_state(grid64)
        new = step(s, quantum_config(grid64), dt=1e-4)
        assert new.t == pytest.approx(1e-4)

    def test_rejection_halves_dt(self, grid64, quantum_config, sine_state):
        cfg = quantum_config(grid64, max_retries=12)
        it = Integrator(cfg)
        s = sine_state(grid64)
        big = 200 * stable_dt(s.rho.values, s.m.values, cfg)
        new, _ = it.step(s, big)
        assert it.telemetry.rejections >= 1
        assert new.t - s.t == pytest.approx(big / 2 ** it.telemetry.rejections)

    def test_retry_cap(self, grid64, quantum_config, sine_state):
        cfg = quantum_config(grid64, max_retries=0)
        with pytest.raises(StepRejected):
            Integrator(cfg).step(sine_state(grid64), 1.0)

    def test_dispersive_limit(self, sine_state):
        # no pressure, viscosity or drag: mechanical energy changes by O(dt^3) per step or less
        g = Grid(64)
        law, P = Quantum(), PressureLaw(0.0, 2.0)
        params = EntropyParams(r3=0.0)
        drift = []
        for dt in (1e-4, 5e-5):
            cfg = SolverConfig(g, law, P, params, 1.0, dt_init=dt, fixed_dt=True, residual_tol=1e6,
                               viscosity_scale=0.0)
            it = Integrator(cfg)
            s = sine_state(g)
            e = mechanical_energy(s.rho, s.u, law, P, params.eps, 1.0)
            m0 = np.sum(s.rho.values)
            worst = 0.0
            for _ in range(20):
                s, _ = it.step(s)
                e1 = mechanical_energy(s.rho, s.u, law, P, params.eps, 1.0)
                worst, e = max(worst, abs(e1 - e)), e1
            assert abs(np.sum(s.rho.values) - m0) <= 1e-13 * m0
            drift.append(worst)
        assert drift[0] / drift[1] >= 2 ** 2.7


class TestStableDt:
    def test_imex_allows_larger_steps(self, grid64, quantum_config, sine_state):
        s = sine_state(grid64)
        imex = stable_dt(s.rho.values, s.m.values, quantum_config(grid64))
        rk3 = stable_dt(s.rho.values, s.m.values, quantum_config(grid64, scheme=Scheme.EXPLICIT_RK3))
        assert imex > rk3 > 0

    def test_scales_with_safety(self, grid64, quantum_config, sine_state):
        s = sine_state(grid64)
        a = stable_dt(s.rho.values, s.m.values, quantum_config(grid64, cfl_safety=0.5))
        b = stable_dt(s.rho.values, s.m.values, quantum_config(grid64, cfl_safety=0.25))
        assert a == pytest.approx(2 * b)


class TestRun:
    def test_short_run(self, grid64, quantum_config, sine_state):
        cfg = quantum_config(grid64, t_end=2.0, output_interval=0.1)
        series = run(cfg, sine_state(grid64))
        assert series.ok
        assert len(series) == 21
        assert np.all(np.diff(series.t) > 0)
        assert series.t[-1] == pytest.approx(2.0)
        assert series.monotone(1e-6 * series.E[0])
        res = series.column("dissipation_residual")[1:]
        assert np.all(res <= 1e-8)
        mass = series.column("mass")
        assert np.max(np.abs(mass - mass[0])) <= 1e-12 * mass[0]

    def test_explicit_scheme_agrees(self, quantum_config, sine_state):
        g = Grid(32)
        a = run(quantum_config(g, t_end=0.5, cfl_safety=0.1), sine_state(g))
        b = run(quantum_config(g, t_end=0.5, cfl_safety=0.1, scheme=Scheme.EXPLICIT_RK3), sine_state(g))
        assert a.ok and b.ok
        np.testing.assert_allclose(a.E, b.E, rtol=5e-4)

    def test_refuses_violated(self, grid64, sine_state):
        cfg = SolverConfig(grid64, PowerLaw(2.0), PressureLaw(1.0, 3.0), EntropyParams(), 0.1)
        with pytest.raises(AdmissibilityError):
            run(cfg, sine_state(grid64))
        series = run(cfg, sine_state(grid64), override_admissibility=True)
        assert len(series) >= 2

    def test_mirror_symmetry(self, grid64, quantum_config):
        rho = grid64.sample(lambda x: 1 + 0.3 * np.sin(TWO_PI * x) + 0.1 * np.cos(6 * np.pi * x))
        u = grid64.sample(lambda x: 0.2 * np.sin(4 * np.pi * x) + 0.1)
        s0 = State.from_velocity(rho, u)
        cfg = quantum_config(grid64, t_end=0.2)
        a, b = run(cfg, s0), run(cfg, s0.mirrored())
        fb = b.final_state.mirrored()
        np.testing.assert_allclose(a.final_state.rho.values, fb.rho.values, atol=1e-13)
        np.testing.assert_allclose(a.final_state.m.values, fb.m.values, atol=1e-13)
        np.testing.assert_allclose(a.E, b.E, rtol=1e-12)

    def test_vacuum_is_reported(self, grid64, quantum_config):
        # a deep density well opened further by a diverging flow
        rho = grid64.sample(lambda x: 1 - 0.9 * np.exp(-((x - 0.5) / 0.08) ** 2))
        u = grid64.sample(lambda x: 5.0 * np.sin(TWO_PI * (x - 0.5)))
        cfg = quantum_config(grid64, t_end=0.5, rho_floor=0.05)
        series = run(cfg, State.from_velocity(rho, u))
        assert isinstance(series.error, VacuumReached)
        assert series.final_state is not None and series.final_state.rho.min() >= 0.05

    def test_initial_below_floor(self, grid64, quantum_config):
        rho = grid64.field(np.r_[np.ones(63), 1e-9])
        with pytest.raises(VacuumReached):
            run(quantum_config(grid64), State.from_velocity(rho, grid64.constant(0.0)))

    def test_oversized_trial_step_is_retried(self, grid64, quantum_config, sine_state):
        cfg = quantum_config(grid64, max_retries=14)
        it = Integrator(cfg)
        s = sine_state(grid64)
        new, _ = it.step(s, 1000 * stable_dt(s.rho.values, s.m.values, cfg))
        assert it.telemetry.rejections >= 2 and new.rho.min() > 0

    def test_grid_mismatch(self, quantum_config, sine_state):
        with pytest.raises(ConfigError):
            run(quantum_config(Grid(32)), sine_state(Grid(64)))


class TestFit:
    def test_exact_exponential(self):
        t = np.linspace(0, 5, 51)
        f = fit_decay_arrays(t, 5 * np.exp(-3 * t))
        assert f.C == pytest.approx(3.0, rel=1e-12)
        assert f.r2 == pytest.approx(1.0, abs=1e-12)

    def test_oscillatory(self):
        t = np.linspace(0, 10, 201)
        f = fit_decay_arrays(t, np.exp(-t) * (2 + np.cos(t)))
        assert 0.8 <= f.C <= 1.2
        assert f.r2 < 1.0

    def test_window(self):
        t = np.linspace(0, 10, 101)
        E = np.where(t < 2, np.exp(-5 * t), np.exp(-10) * np.exp(-2 * (t - 2)))
        f = fit_decay_rate(TimeSeries.from_arrays(t, E), (2.0, 10.0))
        assert f.C == pytest.approx(2.0, rel=1e-10)
        assert f.n == 81

    def test_errors(self):
        t = np.linspace(0, 1, 9)
        with pytest.raises(WindowTooShort):
            fit_decay_arrays(t, np.exp(-t))
        t = np.linspace(0, 1, 20)
        with pytest.raises(NonpositiveEntropy):
            fit_decay_arrays(t, np.r_[np.exp(-t[:-1]), 0.0])
