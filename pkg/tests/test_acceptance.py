"""Acceptance criteria, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict; the lines are printed in an
``acceptance`` section at the end of the pytest run.
"""
import dataclasses

import numpy as np
import pytest

from nskdecay import cli
from nskdecay import verifier as V
from nskdecay.config import RunConfig
from nskdecay.constitutive import PowerLaw, PressureLaw, Quantum, capillarity_of, lambda_of
from nskdecay.entropy import coercivity_scalar, relative
from nskdecay.fields import Grid, divergence, gradient, laplacian, product_rule_residual
from nskdecay.solver import Integrator, State, fit_decay_rate, run

TWO_PI = 2 * np.pi


def _experiment(**overrides):
    cfg = RunConfig().with_overrides([f"{k}={v}" for k, v in overrides.items()])
    solver_cfg = cfg.build_solver()
    series = run(solver_cfg, cfg.build_initial(solver_cfg.grid))
    return cfg, series


@pytest.fixture(scope="module")
def quantum256():
    return _experiment()


@pytest.fixture(scope="module")
def quantum512():
    return _experiment(**{"grid.n": 512})


def _mono_tol(series):
    return 1e-6 * series.records[0].E_total


@pytest.mark.slow
def test_1_quantum_decay(quantum256, acceptance):
    cfg, series = quantum256
    fit = fit_decay_rate(series, (2.0, 10.0))
    wall = series.telemetry.wall_time
    mono = series.monotone(_mono_tol(series))
    ok = series.ok and mono and fit.C > 0 and fit.r2 >= 0.99 and wall < 60.0
    acceptance(1, ok, f"C={fit.C:.5g} r2={fit.r2:.7f} monotone={mono} "
                      f"max_inc={series.max_increment():.2e} wall={wall:.1f}s")
    assert ok


@pytest.mark.slow
def test_2_general_mu_decay(acceptance):
    cfg, series = _experiment(**{"viscosity.family": "power", "viscosity.alpha": 0.75, "pressure.gamma": 1})
    fit = fit_decay_rate(series, (2.0, 10.0))
    mono = series.monotone(_mono_tol(series))
    ok = series.ok and mono and fit.C > 0 and fit.r2 >= 0.98
    acceptance(2, ok, f"C={fit.C:.5g} r2={fit.r2:.7f} monotone={mono}")
    assert ok


@pytest.mark.slow
def test_3_conservation_and_fixed_point(quantum256, acceptance):
    _, series = quantum256
    mass = series.column("mass")
    drift = float(np.max(np.abs(mass - mass[0])) / mass[0])
    steps = series.telemetry.n_steps

    cfg = RunConfig().build_solver()
    cfg = dataclasses.replace(cfg, dt_init=1e-3, fixed_dt=True)
    it = Integrator(cfg)
    s = State.from_velocity(cfg.grid.constant(1.0), cfg.grid.constant(0.0))
    for _ in range(1000):
        s, _ = it.step(s)
    eq = max(np.max(np.abs(s.rho.values - 1.0)), np.max(np.abs(s.m.values)))

    ok = steps >= 10_000 and drift <= 1e-12 and eq <= 1e-12
    acceptance(3, ok, f"mass drift={drift:.2e} over {steps} steps; equilibrium deviation={eq:.2e} after 1000 steps")
    assert ok


def _closed_forms(alpha, rho):
    a = alpha
    if a == 1.0:
        return {"s": np.log(rho), "h": rho * np.log(rho), "Z": 2 * np.sqrt(rho), "Z1": 4 * rho ** 0.25,
                "lambda": np.zeros_like(rho), "K": 1 / rho}
    return {
        "s": a * (rho ** (a - 1) - 1) / (a - 1),
        "h": (rho ** a - rho) / (a - 1),
        "Z": a * rho ** (1.5 * a - 1) / (1.5 * a - 1),
        "Z1": a * rho ** (0.75 * a - 0.5) / (0.75 * a - 0.5),
        "lambda": 2 * (a - 1) * rho ** a,
        "K": a * a * rho ** (2 * a - 3),
    }


def _rel_err(got, exact):
    got, exact = np.asarray(got, float), np.asarray(exact, float)
    scale = np.where(exact != 0, np.abs(exact), 1.0)
    return float(np.max(np.abs(got - exact) / scale))


def test_4_closed_form_oracles(acceptance):
    rho = np.geomspace(1e-3, 1e3, 20)
    worst, worst_fd = 0.0, 0.0
    for alpha in (1.0, 0.75, 1.5):
        law = Quantum() if alpha == 1.0 else PowerLaw(alpha)
        exact = _closed_forms(alpha, rho)
        got = {"s": law.s(rho), "h": law.h(rho), "Z": law.Z(rho), "Z1": law.Z1(rho),
               "lambda": lambda_of(law, rho), "K": capillarity_of(law, rho)}
        for name in exact:
            # s and h vanish at rho = 1; compare against the natural magnitude there
            if name in ("s", "h"):
                scale = np.maximum(np.abs(exact[name]), np.abs(law.dh(rho)) * np.abs(rho - 1) + 1e-300)
                err = float(np.max(np.abs(got[name] - exact[name]) / scale))
            else:
                err = _rel_err(got[name], exact[name])
            worst = max(worst, err)
        for r in (0.01, 0.1, 1.0, 10.0, 100.0):
            d = 1e-4 * r
            fd = (law.h(r + d) - 2 * law.h(r) + law.h(r - d)) / d ** 2
            worst_fd = max(worst_fd, abs(fd - law.dmu(r) / r) / (law.dmu(r) / r))
    for gamma in (1.0, 2.0, 3.0):
        P = PressureLaw(1.0, gamma)
        H = rho * np.log(rho) if gamma == 1.0 else rho ** gamma / (gamma - 1)
        scale = np.maximum(np.abs(H), rho)
        worst = max(worst, float(np.max(np.abs(P.H(rho) - H) / scale)))
    ok = worst < 1e-10 and worst_fd < 1e-6
    acceptance(4, ok, f"max closed-form error={worst:.1e}; h'' finite-difference error={worst_fd:.1e}")
    assert ok


def test_5_bregman(acceptance):
    rng = np.random.default_rng(20240601)
    laws = [Quantum(), PowerLaw(0.75), PowerLaw(1.5)]
    pressures = [PressureLaw(1.0, 1.0), PressureLaw(1.0, 2.0), PressureLaw(2.0, 3.0)]
    n = 10_000
    rho = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), n))
    r = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), n))
    a, b = rng.uniform(-100, 100, n), rng.uniform(-100, 100, n)
    neg, missed, at_base, shift = 0.0, 0, 0.0, 0.0
    pairs = [(P.H, P.dH) for P in pressures] + [(law.h, law.dh) for law in laws]
    for G, dG in pairs:
        scale = np.abs(G(rho)) + np.abs(G(r)) + np.abs(dG(r)) * np.abs(rho - r)
        val = relative(G, dG, rho, r)
        neg = max(neg, float(np.max(-val / scale)))
        far = np.abs(rho - r) > 1e-3 * r
        missed += int(np.sum(val[far] <= 1e-12 * scale[far]))
        at_base = max(at_base, float(np.max(np.abs(relative(G, dG, r, r)) / (np.abs(G(r)) + 1))))
        shifted = relative(lambda x: G(x) + a + b * x, lambda x: dG(x) + b, rho, r)
        shift = max(shift, float(np.max(np.abs(shifted - val) / (scale + np.abs(a) + np.abs(b) * (rho + r)))))
    ok = neg <= 1e-12 and missed == 0 and at_base <= 1e-12 and shift <= 1e-12
    acceptance(5, ok, f"{len(pairs)} functionals x {n} pairs; worst negative={neg:.1e}, "
                      f"nonzero-off-base misses={missed}, value at base={at_base:.1e}, affine shift={shift:.1e}")
    assert ok


def test_6_coercivity(acceptance):
    good = V.coercivity_infimum(Quantum(), PressureLaw(1.0, 1.0), (1e-6, 1e6))
    bad = V.coercivity_infimum(PowerLaw(2.0), PressureLaw(1.0, 3.0), (1e-6, 1e6))
    at_end = float(coercivity_scalar(PowerLaw(2.0), PressureLaw(1.0, 3.0), 1e-6))
    ok = good >= 0.1 and abs(good - 2.0) <= 1e-10 and bad < 0.01 and bad == pytest.approx(at_end, rel=1e-12)
    acceptance(6, ok, f"admissible infimum={good!r}; violated infimum={bad:.3e} at rho=1e-6")
    assert ok


def test_7_inequality_ensembles(tmp_path, acceptance):
    cfg = RunConfig().with_overrides([f"out={tmp_path}"])
    assert cfg.verify.size == 200 and cfg.grid.n == 256
    summary = cli.verify(cfg, tmp_path)
    parts, ok = [], summary["ok"]
    for name, entry in summary["lemmas"].items():
        reports = entry["reports"]
        finite = all(e["finite"] for e in reports)
        change = max(e["refinement_change"] for e in reports)
        ok = ok and finite and change < 0.05
        parts.append(f"{name} max={entry['max_ratio']:.3g} dn={100 * change:.1f}%")
    scan = summary["lemmas"]["poincare"]["delta_scan"]
    mono = summary["lemmas"]["poincare"]["delta_monotone"]
    ok = ok and mono and len(summary["lemmas"]) == 4
    parts.append("poincare by delta " + "<".join(f"{scan[k]:.3g}" for k in ("0.5", "0.25", "0.125")))
    acceptance(7, ok, "; ".join(parts))
    assert ok


def _orders(errs):
    return np.log2(np.array(errs[:-1]) / np.array(errs[1:]))


@pytest.mark.slow
def test_8_discretization(quantum256, quantum512, acceptance):
    ns = (64, 128, 256, 512)
    ops = {"gradient": [], "divergence": [], "laplacian": []}
    prod = []
    for n in ns:
        g = Grid(n)
        f = g.sample(lambda x: np.sin(TWO_PI * x) + 0.5 * np.cos(2 * TWO_PI * x))
        df = TWO_PI * np.cos(TWO_PI * g.x) - TWO_PI * np.sin(2 * TWO_PI * g.x)
        d2f = -TWO_PI ** 2 * np.sin(TWO_PI * g.x) - 2 * TWO_PI ** 2 * np.cos(2 * TWO_PI * g.x)
        ops["gradient"].append(np.max(np.abs(gradient(f).values - df)))
        ops["divergence"].append(np.max(np.abs(divergence(f).values - df)))
        ops["laplacian"].append(np.max(np.abs(laplacian(f).values - d2f)))
        prod.append(product_rule_residual(g.sample(lambda x: 1 + 0.5 * np.sin(TWO_PI * x)),
                                          g.sample(lambda x: np.cos(TWO_PI * x))))
    orders = np.concatenate([_orders(e) for e in ops.values()])
    prod_ratio = np.array(prod[:-1]) / np.array(prod[1:])

    (_, s256), (_, s512) = quantum256, quantum512
    c256 = fit_decay_rate(s256, (2.0, 10.0)).C
    c512 = fit_decay_rate(s512, (2.0, 10.0)).C
    rel = abs(c512 - c256) / c256
    dt_ratio = max(s256.telemetry.dt_history) / max(s512.telemetry.dt_history)

    ok = (bool(np.all((orders >= 1.9) & (orders <= 2.1))) and bool(np.all(np.abs(prod_ratio - 4) < 0.4))
          and s512.ok and rel < 0.05 and dt_ratio >= 2)
    acceptance(8, ok, f"orders {orders.min():.3f}..{orders.max():.3f}; product-rule ratios "
                      f"{', '.join(f'{x:.3f}' for x in prod_ratio)}; C256={c256:.5g} C512={c512:.5g} "
                      f"diff={100 * rel:.2f}% dt ratio={dt_ratio:.2f}")
    assert ok


def test_9_determinism(tmp_path, acceptance):
    sim = RunConfig().with_overrides(["grid.n=64", "solver.t_end=2.5", "initial.profile=random", "seed=11"])
    ver = RunConfig().with_overrides(["verify.size=50", "verify.refine=false", "seed=11"])
    same = []
    for label, cfg, fn, files in (
        ("simulate", sim, cli.simulate, ["series.csv"]),
        ("verify", ver, cli.verify, [f"{k}/verify.csv" for k in ("poincare", "lower_bound", "modulated", "jensen")]),
    ):
        a, b = tmp_path / f"{label}-a", tmp_path / f"{label}-b"
        fn(cfg, a)
        fn(cfg, b)
        same += [(a / f).read_bytes() == (b / f).read_bytes() for f in files]
    ok = len(same) == 5 and all(same)
    acceptance(9, ok, f"{sum(same)}/{len(same)} CSV files byte-identical across repeated runs")
    assert ok
