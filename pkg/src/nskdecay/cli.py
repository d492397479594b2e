"""Command-line entry point: ``nskdecay simulate | verify | sweep | check-law``.

Exit codes: 0 success, 1 a verification or admissibility check failed,
2 configuration error, 3 vacuum or stability failure during a run.
The default output root is ``$NSKDECAY_OUT`` (else ``./nskdecay-out``).
"""
from __future__ import annotations

import argparse
import itertools
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import yaml

from . import io
from . import verifier as V
from .config import LEMMAS, RunConfig, load_config
from .constitutive import GammaCondition, check_admissibility
from .errors import ConfigError, FitError, NSKError, SolverError
from .solver import fit_decay_rate, run

log = logging.getLogger("nskdecay")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUN = 0, 1, 2, 3
MAX_SWEEP = 64
OUT_ENV = "NSKDECAY_OUT"


def _out_dir(cfg: RunConfig, command: str) -> Path:
    if cfg.out:
        return Path(cfg.out)
    return Path(os.environ.get(OUT_ENV, "nskdecay-out")) / command


# --- simulate -----------------------------------------------------------------


def simulate(cfg: RunConfig, out: Path, override_admissibility: bool = False) -> dict:
    """Run one configuration and write series.csv and run.json into ``out``.

    Returns the run.json payload.  Raises ConfigError (including refused
    admissibility) before anything is integrated.
    """
    solver_cfg = cfg.build_solver()
    initial = cfg.build_initial(solver_cfg.grid)
    adm = check_admissibility(solver_cfg.law, solver_cfg.pressure)
    series = run(solver_cfg, initial, override_admissibility=override_admissibility)

    out.mkdir(parents=True, exist_ok=True)
    io.write_series_csv(out / "series.csv", series.records)

    tol = solver_cfg.residual_tol * max(series.records[0].E_total, 1.0)
    fit, fit_error = None, None
    try:
        f = fit_decay_rate(series, cfg.fit_window())
        fit = {"C": f.C, "r2": f.r2, "n": f.n, "window": list(f.window)}
    except FitError as exc:
        fit_error = f"{type(exc).__name__}: {exc}"
    error = None
    if series.error is not None:
        error = {"type": type(series.error).__name__, "message": str(series.error)}
    payload = {
        "schema_version": io.SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "admissibility": adm.to_dict(),
        "override_admissibility": override_admissibility,
        "fit": fit,
        "fit_error": fit_error,
        "monotone": series.monotone(tol),
        "max_record_increment": series.max_increment(),
        "mass_drift": abs(series.records[-1].mass - series.records[0].mass) / series.records[0].mass,
        "telemetry": series.telemetry.summary(),
        "error": error,
    }
    io.write_json(out / "run.json", payload)
    log.info("run finished in %.1f s, %d steps", series.telemetry.wall_time, series.telemetry.n_steps)
    return payload


def _verdict(payload: dict) -> str:
    fit = payload["fit"] or {"C": math.nan, "r2": math.nan}
    mono = "true" if payload["monotone"] else "false"
    return f"decay: C={fit['C']:.6g} r2={fit['r2']:.6g} monotone={mono}"


def cmd_simulate(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg, "simulate")
    payload = simulate(cfg, out, args.override_admissibility)
    print(_verdict(payload))
    if payload["error"] is not None:
        print(f"run stopped: {payload['error']['type']}: {payload['error']['message']}", file=sys.stderr)
        return EXIT_RUN
    return EXIT_OK


# --- verify -------------------------------------------------------------------


def _lemma_reports(lemma: str, cfg: RunConfig, grid):
    """The RatioReports for one check on ``grid`` (one per generator used)."""
    v, seed = cfg.verify, cfg.seed
    law, pressure, params = cfg.build_law(), cfg.build_pressure(), cfg.build_params()
    r = params.r
    if lemma == "poincare":
        ens = V.make_ensemble(grid, V.Generator.ZERO_SET_PATCHES, v.size, seed, delta=v.delta)
        return [V.poincare_zero_set(ens)]
    gens = [(V.Generator.SMOOTH_RANDOM, r), (V.Generator.NEAR_VACUUM, r), (V.Generator.HEAVY_TAIL, v.tail_r)]
    if lemma == "lower_bound":
        return [V.lower_bound_split(V.make_ensemble(grid, g, v.size, seed, r=rr), law, pressure, params, v.eta)
                for g, rr in gens]
    if lemma == "modulated":
        return [V.modulated_entropy_bound(V.make_ensemble(grid, g, v.size, seed, r=rr), law, pressure, params)
                for g, rr in gens]
    if lemma == "jensen":
        ens = V.make_ensemble(grid, V.Generator.HEAVY_TAIL, v.size, seed, r=v.tail_r)
        return [V.jensen_logsobolev_check(ens, params)]
    raise ConfigError(f"unknown lemma {lemma!r}; choose from {', '.join(LEMMAS)} or all")


def verify(cfg: RunConfig, out: Path) -> dict:
    lemma = cfg.verify.lemma
    lemmas = list(LEMMAS) if lemma == "all" else [lemma]
    for name in lemmas:
        if name not in LEMMAS:
            raise ConfigError(f"unknown lemma {name!r}; choose from {', '.join(LEMMAS)} or all")
    grid = cfg.build_grid()
    out.mkdir(parents=True, exist_ok=True)
    summary = {"schema_version": io.SCHEMA_VERSION, "seed": cfg.seed, "n": grid.n,
               "size": cfg.verify.size, "config": cfg.to_dict(), "lemmas": {}}
    all_ok = True
    for name in lemmas:
        reports = _lemma_reports(name, cfg, grid)
        sub = out / name
        sub.mkdir(exist_ok=True)
        io.write_verify_csv(sub / "verify.csv", reports)
        entries = []
        fine = _lemma_reports(name, cfg, grid.refined()) if cfg.verify.refine else []
        for k, rep in enumerate(reports):
            entry = rep.summary()
            entry["finite"] = rep.finite
            if fine:
                match = fine[k]
                change = V.refinement_change(rep, match)
                entry["max_ratio_refined"] = match.max_ratio
                entry["refinement_change"] = change
                entry["refinement_stable"] = bool(change < cfg.verify.tolerance)
            ok = entry["finite"] and entry.get("refinement_stable", True)
            entry["ok"] = ok
            all_ok = all_ok and ok
            entries.append(entry)
        lemma_entry = {"reports": entries, "max_ratio": max(e["max_ratio"] for e in entries)}
        if name == "poincare":
            scan = {}
            for d in (0.5, 0.25, 0.125):
                ens = V.make_ensemble(grid, V.Generator.ZERO_SET_PATCHES, cfg.verify.size, cfg.seed, delta=d)
                scan[repr(d)] = V.poincare_zero_set(ens).max_ratio
            vals = [scan[repr(d)] for d in (0.5, 0.25, 0.125)]
            lemma_entry["delta_scan"] = scan
            lemma_entry["delta_monotone"] = bool(vals[0] < vals[1] < vals[2])
            all_ok = all_ok and lemma_entry["delta_monotone"]
        summary["lemmas"][name] = lemma_entry
    summary["ok"] = all_ok
    io.write_json(out / "verify-summary.json", summary)
    return summary


def cmd_verify(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg, "verify")
    summary = verify(cfg, out)
    for name, entry in summary["lemmas"].items():
        flags = "ok" if all(e["ok"] for e in entry["reports"]) else "FAILED"
        print(f"{name}: max_ratio={entry['max_ratio']:.6g} {flags}")
    return EXIT_OK if summary["ok"] else EXIT_FAIL


# --- sweep --------------------------------------------------------------------


def parse_grid(items) -> list:
    """``key=v1,v2`` items to a list of override dictionaries (cartesian product)."""
    axes = []
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep or not key or not raw:
            raise ConfigError(f"sweep parameter {item!r} is not of the form key=v1,v2")
        values = [yaml.safe_load(s) for s in raw.split(",") if s.strip()]
        if not values:
            raise ConfigError(f"sweep parameter {key!r} has no values")
        axes.append((key.strip(), values))
    if not axes:
        raise ConfigError("empty sweep grid; pass at least one --param key=v1,v2")
    keys = [k for k, _ in axes]
    combos = [dict(zip(keys, vals)) for vals in itertools.product(*(v for _, v in axes))]
    if len(combos) > MAX_SWEEP:
        raise ConfigError(f"sweep grid has {len(combos)} configurations; the limit is {MAX_SWEEP}")
    return combos


def _sweep_one(job):
    index, base, overrides, out, override_adm = job
    cfg = RunConfig.from_dict(base)
    for k, v in overrides.items():
        cfg.set(k, v)
    sub = Path(out) / f"run-{index:03d}"
    cfg.out = str(sub)
    try:
        payload = simulate(cfg, sub, override_adm)
    except (NSKError, ValueError) as exc:
        return {"status": f"failed: {type(exc).__name__}: {exc}", "C": math.nan, "r2": math.nan, "monotone": False}
    fit = payload["fit"] or {"C": math.nan, "r2": math.nan}
    status = "ok" if payload["error"] is None else f"stopped: {payload['error']['type']}"
    return {"status": status, "C": fit["C"], "r2": fit["r2"], "monotone": payload["monotone"]}


def sweep(cfg: RunConfig, combos: list, out: Path, override_admissibility: bool = False,
          jobs: int = 1) -> list:
    # validate every combination before launching anything
    for combo in combos:
        trial = RunConfig.from_dict(cfg.to_dict())
        for k, v in combo.items():
            trial.set(k, v)
    out.mkdir(parents=True, exist_ok=True)
    base = cfg.to_dict()
    work = [(i, base, combo, str(out), override_admissibility) for i, combo in enumerate(combos)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_one, work))
    else:
        results = [_sweep_one(w) for w in work]
    keys = list(combos[0])
    rows = [[f"run-{i:03d}", *(combo[k] for k in keys), res["C"], res["r2"], res["monotone"], res["status"]]
            for i, (combo, res) in enumerate(zip(combos, results))]
    io.write_table_csv(out / "sweep-summary.csv", ["run", *keys, "C", "r2", "monotone", "status"], rows)
    return results


def cmd_sweep(args, cfg: RunConfig) -> int:
    combos = parse_grid(args.param)
    out = _out_dir(cfg, "sweep")
    results = sweep(cfg, combos, out, args.override_admissibility, args.jobs)
    for i, (combo, res) in enumerate(zip(combos, results)):
        desc = " ".join(f"{k}={v}" for k, v in combo.items())
        print(f"run-{i:03d} {desc}: C={res['C']:.6g} r2={res['r2']:.6g} monotone={str(res['monotone']).lower()} {res['status']}")
    return EXIT_OK


# --- check-law ------------------------------------------------------------------


def cmd_check_law(args, cfg: RunConfig) -> int:
    law, pressure = cfg.build_law(), cfg.build_pressure()
    report = check_admissibility(law, pressure)
    d = report.to_dict()
    for key in ("gamma_condition", "beta_condition", "alpha_limit", "beta_limit", "alpha1", "alpha2",
                "hyp1_holds", "hyp2_bound", "prop1_nu", "admissible"):
        print(f"{key}: {d[key]}")
    for note in d["notes"]:
        print(f"note: {note}")
    if cfg.out:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        io.write_json(Path(cfg.out) / "law.json", {"schema_version": io.SCHEMA_VERSION,
                                                   "config": cfg.to_dict(), "admissibility": d})
    return EXIT_OK if report.gamma_condition is not GammaCondition.VIOLATED else EXIT_FAIL


# --- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML or JSON config file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. solver.t_end=5 (repeatable)")
    common.add_argument("--seed", type=int, help="seed for generated profiles")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<command>)")
    common.add_argument("--override-admissibility", action="store_true",
                        help="run configurations whose gamma condition is violated")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nskdecay", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="integrate one configuration")
    p = sub.add_parser("verify", parents=[common], help="evaluate inequality ratios on profile ensembles")
    p.add_argument("--lemma", help=f"one of {', '.join(LEMMAS)} or all")
    p.add_argument("--delta", type=float, help="zero-set fraction for the Poincare check")
    p.add_argument("--size", type=int, help="profiles per ensemble")
    p = sub.add_parser("sweep", parents=[common], help="run a grid of configurations")
    p.add_argument("--param", action="append", default=[], metavar="KEY=V1,V2",
                   help="sweep axis, e.g. entropy.r3=0.5,1,2 (repeatable)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sub.add_parser("check-law", parents=[common], help="report admissibility of a law/pressure pair")
    return parser


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config, args.overrides)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    for flag, key in (("lemma", "verify.lemma"), ("delta", "verify.delta"), ("size", "verify.size")):
        value = getattr(args, flag, None)
        if value is not None:
            cfg.set(key, value)
    return cfg


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "sweep": cmd_sweep, "check-law": cmd_check_law}


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_RUN
    except NSKError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
