"""Command-line scenario runner.

    python -m grwlab scenario --config cat.yaml --threads 4 --out-dir out/

Subcommands ``oracle``, ``ensemble``, ``repeated``, ``compare`` and
``scenario`` all accept ``--config``, ``--seed``, ``--threads`` and
``--out-dir``. Outputs are CSV series (``t,name,mean,stderr,method``) and a
plain-text report; every file starts with a ``#`` header echoing the
resolved configuration. The exit status is 0 iff every equivalence check
passes. ``GRWLAB_OUT_DIR`` overrides the output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import DOCUMENTATION_CONSTANTS, ScenarioConfig, load_config, parse_config
from .ensemble import equivalence_report, gisin_mixture_test, mc_errors, run_ensemble, trace_distance
from .errors import GRWLabError
from .lindblad import decoherence_rate, evolve_master, fit_decay_rate, stable_step, steps_between
from .model import basis_state, build_grid, build_model, cat_state, gaussian_packet, nearest_site, uniform_state
from .observables import (
    coherence_block_norm,
    density_observables,
    exact_mean_jump_kick,
    expected_heating_rate,
    heating_rate,
)
from .repeated import run_repeated

SERIES_COLUMNS = ("t", "name", "mean", "stderr", "method")


def build_from_config(cfg: ScenarioConfig):
    grid = build_grid(cfg.n_sites, cfg.x_min, cfg.x_max)
    lam = 0.0 if cfg.scenario == "control" else cfg.lambda_
    model = build_model(grid, lam, cfg.r_c, cfg.mass, free=cfg.free)
    if cfg.initial_state == "gaussian":
        psi0 = gaussian_packet(grid, cfg.x0, cfg.p0, cfg.sigma)
    elif cfg.initial_state == "cat":
        psi0 = cat_state(grid, cfg.x1, cfg.x2, cfg.sigma)
    elif cfg.initial_state == "basis":
        psi0 = basis_state(grid, cfg.site)
    else:
        psi0 = uniform_state(grid)
    return model, psi0


def _method_step(cfg: ScenarioConfig, method: str) -> float:
    return cfg.tau if method.startswith("repeated") else cfg.dt


def run_oracle(cfg: ScenarioConfig, model, psi0):
    dt = stable_step(model, cfg.output_dt, cfg.dt)
    return evolve_master(model, psi0, cfg.t_final, dt, cfg.output_dt)


def run_ensembles(cfg: ScenarioConfig, model, psi0, threads: int):
    if cfg.scenario == "negative-control":
        model = model.with_lambda(model.lam * cfg.negative_control_ratio)
    return [
        run_ensemble(model, psi0, meth, cfg.m, cfg.t_final, _method_step(cfg, meth), cfg.output_dt, cfg.seed, threads)
        for meth in cfg.methods
    ]


# output -----------------------------------------------------------------


def header(cfg: ScenarioConfig) -> str:
    lines = [f"grwlab {__version__}", f"seed: {cfg.seed}", "resolved config:"]
    lines += ["  " + ln for ln in cfg.dump().splitlines()]
    lines += [f"{k}: {v!r}" for k, v in DOCUMENTATION_CONSTANTS.items()]
    return "".join(f"# {ln}\n" for ln in lines)


def _fmt(v) -> str:
    return repr(float(v))


def oracle_rows(model, oracle):
    rows = []
    for t, rho in zip(oracle.times, oracle.states):
        for name, val in density_observables(model, rho).items():
            rows.append((t, name, val, 0.0, "oracle"))
    return rows


def ensemble_rows(model, record):
    sig = mc_errors(record) if record.n_trajectories >= 10 else np.zeros(record.n_times)
    rows = []
    for i, t in enumerate(record.times):
        for name, series in record.observable_means.items():
            rows.append((t, name, series[i], record.observable_stderrs[name][i], record.method))
        rows.append((t, "coherence_block_norm", coherence_block_norm(model.grid, record.mean_rho[i]), 0.0, record.method))
        rows.append((t, "mc_error", sig[i], 0.0, record.method))
    return rows


def write_series(path: Path, cfg: ScenarioConfig, rows):
    with open(path, "w") as fh:
        fh.write(header(cfg))
        fh.write(",".join(SERIES_COLUMNS) + "\n")
        for t, name, mean, err, meth in rows:
            fh.write(f"{_fmt(t)},{name},{_fmt(mean)},{_fmt(err)},{meth}\n")


def write_density(path: Path, cfg: ScenarioConfig, times, states):
    with open(path, "w") as fh:
        fh.write(header(cfg))
        fh.write("t,i,j,re,im\n")
        for t, rho in zip(times, states):
            for (i, j), v in np.ndenumerate(rho):
                fh.write(f"{_fmt(t)},{i},{j},{_fmt(v.real)},{_fmt(v.imag)}\n")


def write_report(path: Path, cfg: ScenarioConfig, sections):
    """``sections`` is a list of ``(title, rows, extras)``."""
    with open(path, "w") as fh:
        fh.write(header(cfg))
        for title, rows, extras in sections:
            fh.write(f"[{title}]\n")
            for k, v in extras.items():
                fh.write(f"{k} = {v}\n")
            for r in rows:
                verdict = "PASS" if r["pass"] else "FAIL"
                cells = " ".join(f"{k}={_fmt(v) if isinstance(v, float) else v}" for k, v in r.items() if k != "pass")
                fh.write(f"{verdict} {cells}\n")
            fh.write("\n")


def write_failures(path: Path, cfg: ScenarioConfig, failures: list[dict]):
    with open(path, "w") as fh:
        json.dump({"config": cfg.to_dict(), "seed": cfg.seed, "failures": failures}, fh, indent=2, sort_keys=True)
        fh.write("\n")


# pipelines ----------------------------------------------------------------


def scenario_extras(cfg: ScenarioConfig, model, psi0, oracle, records, threads):
    """Scenario-specific checks; returns ``(sections, reports)``."""
    sections, reports = [], []
    if cfg.scenario == "cat":
        block = [coherence_block_norm(model.grid, rho) for rho in oracle.states]
        ok = [i for i, v in enumerate(block) if v > 1e-12]
        fitted = fit_decay_rate(oracle.times[ok], np.array(block)[ok]) if len(ok) > 2 else float("nan")
        extras = {"fitted_coherence_decay": _fmt(fitted),
                  "closed_form_rate": _fmt(decoherence_rate(model.lam, model.r_c, abs(cfg.x2 - cfg.x1)))}
        for rec in records:
            if rec.method == "jump":
                wl = rec.trajectory_observables["weight_left"][:, -1]
                extras["jump_fraction_selected_0.999"] = _fmt(np.mean(np.maximum(wl, 1 - wl) >= 0.999))
                extras["jump_mean_weight_left"] = _fmt(rec.observable_means["weight_left"][-1])
                extras["jump_mean_weight_left_stderr"] = _fmt(rec.observable_stderrs["weight_left"][-1])
        sections.append(("cat", [], extras))
    elif cfg.scenario == "sound":
        slope = heating_rate(model, oracle)
        extras = {"heating_slope": _fmt(slope),
                  "expected_slope": _fmt(expected_heating_rate(model.lam, model.mass, model.r_c)),
                  "lambda_times_mean_kick": _fmt(model.lam * exact_mean_jump_kick(model, psi0))}
        for rec in records:
            if rec.method == "jump" and rec.event_counts is not None:
                extras["jump_mean_events"] = _fmt(rec.event_counts.mean())
        sections.append(("sound", [], extras))
    elif cfg.scenario == "gisin":
        a, b = nearest_site(model.grid, cfg.x1), nearest_site(model.grid, cfg.x2)
        e0, e1 = basis_state(model.grid, a), basis_state(model.grid, b)
        plus, minus = (e0 + e1) / np.sqrt(2), (e0 - e1) / np.sqrt(2)
        for meth in cfg.methods:
            rep = gisin_mixture_test(model, [(0.5, e0), (0.5, e1)], [(0.5, plus), (0.5, minus)], meth, cfg.m,
                                     cfg.t_final, cfg.seed, _method_step(cfg, meth), cfg.output_dt, threads)
            reports.append(rep)
            sections.append((f"gisin:{meth}", rep.rows, {"passed": rep.passed}))
    return sections, reports


def run_scenario(cfg: ScenarioConfig, threads: int | None = None, out_dir: str | None = None) -> int:
    threads = threads or cfg.threads
    out = Path(out_dir or os.environ.get("GRWLAB_OUT_DIR") or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, psi0 = build_from_config(cfg)
    if cfg.scenario == "gisin":
        # the mixtures replace psi0; the oracle starts from their common rho0
        a, b = nearest_site(model.grid, cfg.x1), nearest_site(model.grid, cfg.x2)
        rho0 = 0.5 * (np.outer(basis_state(model.grid, a), basis_state(model.grid, a))
                      + np.outer(basis_state(model.grid, b), basis_state(model.grid, b)))
        oracle = evolve_master(model, rho0, cfg.t_final, stable_step(model, cfg.output_dt, cfg.dt), cfg.output_dt)
        records = []
        report = None
    else:
        oracle = run_oracle(cfg, model, psi0)
        records = run_ensembles(cfg, model, psi0, threads)
        report = equivalence_report(records, oracle, model)
    sections, reports = scenario_extras(cfg, model, psi0, oracle, records, threads)

    write_series(out / "oracle.csv", cfg, oracle_rows(model, oracle))
    if cfg.dump_density:
        write_density(out / "rho_oracle.csv", cfg, oracle.times, oracle.states)
    for rec in records:
        write_series(out / f"ensemble_{rec.method}.csv", cfg, ensemble_rows(model, rec))
        if cfg.dump_density:
            write_density(out / f"rho_{rec.method}.csv", cfg, rec.times, rec.mean_rho)

    all_sections = []
    failures = []
    if report is not None:
        all_sections.append(("equivalence", report.rows, {"passed": report.passed, "max_distance_over_threshold": _fmt(report.max_ratio())}))
        all_sections.append(("observables", report.observable_rows, {"passed": report.observables_passed}))
        failures += report.failures()
    for rep in reports:
        failures += rep.failures()
    all_sections += sections
    passed = not failures
    all_sections.insert(0, ("summary", [], {"scenario": cfg.scenario, "passed": passed, "n_failures": len(failures)}))
    write_report(out / "report.txt", cfg, all_sections)
    if not passed:
        write_failures(out / "failures.json", cfg, failures)
    return 0 if passed else 1


def run_compare(cfg, threads, out):
    model, psi0 = build_from_config(cfg)
    oracle = run_oracle(cfg, model, psi0)
    records = run_ensembles(cfg, model, psi0, threads)
    report = equivalence_report(records, oracle, model)
    write_report(out / "report.txt", cfg, [("equivalence", report.rows, {"passed": report.passed})])
    if not report.passed:
        write_failures(out / "failures.json", cfg, report.failures())
    return 0 if report.passed else 1


def run_repeated_cmd(cfg, threads, out):
    """Traced channel versus z- and x-measured ensembles at collision time tau."""
    model, psi0 = build_from_config(cfg)
    n_coll = steps_between(cfg.t_final, cfg.tau, "t_final")
    every = steps_between(cfg.output_dt, cfg.tau, "output_dt")
    traced = run_repeated(model, psi0, n_coll, cfg.tau, "traced", output_every=every)
    write_series(out / "repeated_traced.csv", cfg, [(t, k, v, 0.0, "repeated_traced")
                                                    for t, rho in zip(traced.times, traced.states)
                                                    for k, v in density_observables(model, rho).items()])
    records = [run_ensemble(model, psi0, meth, cfg.m, cfg.t_final, cfg.tau, cfg.output_dt, cfg.seed, threads)
               for meth in ("repeated_z", "repeated_x")]
    for rec in records:
        write_series(out / f"ensemble_{rec.method}.csv", cfg, ensemble_rows(model, rec))
    report = equivalence_report(records, traced, model)
    write_report(out / "report.txt", cfg, [("repeated", report.rows, {"passed": report.passed})])
    if not report.passed:
        write_failures(out / "failures.json", cfg, report.failures())
    return 0 if report.passed else 1


def _resolve(args) -> tuple[ScenarioConfig, int, Path]:
    cfg = load_config(args.config) if args.config else parse_config("scenario: custom\nseed: 0\n")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    threads = args.threads or cfg.threads
    out = Path(args.out_dir or os.environ.get("GRWLAB_OUT_DIR") or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, threads, out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="grwlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("oracle", "ensemble", "repeated", "compare", "scenario"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML scenario document")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--out-dir")
    args = parser.parse_args(argv)
    try:
        cfg, threads, out = _resolve(args)
        if args.command == "scenario":
            return run_scenario(cfg, threads, str(out))
        if args.command == "compare":
            return run_compare(cfg, threads, out)
        if args.command == "repeated":
            return run_repeated_cmd(cfg, threads, out)
        model, psi0 = build_from_config(cfg)
        if args.command == "oracle":
            oracle = run_oracle(cfg, model, psi0)
            write_series(out / "oracle.csv", cfg, oracle_rows(model, oracle))
            if cfg.dump_density:
                write_density(out / "rho_oracle.csv", cfg, oracle.times, oracle.states)
            return 0
        for rec in run_ensembles(cfg, model, psi0, threads):
            write_series(out / f"ensemble_{rec.method}.csv", cfg, ensemble_rows(model, rec))
            if cfg.dump_density:
                write_density(out / f"rho_{rec.method}.csv", cfg, rec.times, rec.mean_rho)
        return 0
    except GRWLabError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
