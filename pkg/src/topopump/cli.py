"""Reproducible experiment runner.

``topopump run <config.json>`` executes one of the pipelines (single,
meanfield, full, oracle-check, chern) and writes, per sweep point,
``series_pn.csv`` (long form: t, n, P_n), ``series_obs.csv`` (wide form:
t, R, Var, A, B, peak, offset, R_sub) and ``meta.json`` with the fully
resolved configuration. Identical inputs produce byte-identical outputs.

Exit codes: 0 success, 1 configuration error, 2 physics guard (gap closed,
no peak, wraparound, ...), 3 numerical failure (unitarity or trace drift).

Config files are JSON with a ``schema_version`` field. All physical
quantities carry their unit in the key name (``T_over_gap``,
``eta_over_gap``, ``omega0_tau`` for the fig2 cycle, ``tau`` in schedule
units for fig3/custom); bare ``T``/``eta``/``tau`` top-level keys are
rejected as ambiguous.
"""

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NumericsError, PhysicsGuardError, PumpError, ValidationError
from .evolve import PropagatorConfig
from .model import MomentumGrid, constant_schedule, fig2_schedule, fig3_schedule, min_gap, rmm_sampler
from .oracle import brute_force_rho_aux
from .pipelines import (
    band_pump_run,
    full_pump_run,
    output_grid,
    tau_for_temperature,
)
from .pump_full import assemble_rho_aux, full_dynamics_series
from .pump_single import SpinorField
from .spectral import chern_number
from .thermal import ThermalParams, meanfield_sampler

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema_version", "pipeline", "schedule", "L", "band", "n0",
    "steps_per_cycle", "n_output_times", "mu_c", "eta_over_gap",
    "T_over_gap", "beta", "tau_scaling", "init_state", "ensemble",
    "offset_estimator", "seed", "cases", "L_list", "out_dir",
}
_AMBIGUOUS = {"T", "temperature", "eta", "tau", "coupling"}
_PIPELINES = ("single", "meanfield", "full", "oracle-check", "chern")


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def load_config(path):
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    bad = _AMBIGUOUS & set(cfg)
    if bad:
        raise ConfigError(
            f"ambiguous keys {sorted(bad)}: use unit-tagged keys "
            "(T_over_gap, eta_over_gap, schedule.omega0_tau / schedule.tau)"
        )
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if cfg.get("pipeline") not in _PIPELINES:
        raise ConfigError(f"pipeline must be one of {_PIPELINES}")
    return cfg


def build_schedule(spec):
    if not isinstance(spec, dict) or "variant" not in spec:
        raise ConfigError("schedule must be an object with a 'variant' key")
    variant = spec["variant"]
    if variant == "fig2":
        extra = set(spec) - {"variant", "omega0", "omega0_tau"}
        if extra:
            raise ConfigError(f"fig2 schedule takes omega0/omega0_tau, not {sorted(extra)}")
        if "omega0_tau" not in spec:
            raise ConfigError("fig2 schedule needs omega0_tau (dimensionless cycle time)")
        omega0 = float(spec.get("omega0", 1.0))
        if omega0 <= 0:
            raise ConfigError("omega0 must be positive")
        return fig2_schedule(omega0, float(spec["omega0_tau"]) / omega0)
    if variant == "fig3":
        extra = set(spec) - {"variant", "tau"}
        if extra:
            raise ConfigError(f"fig3 schedule takes tau only, not {sorted(extra)}")
        if "tau" not in spec:
            raise ConfigError("fig3 schedule needs tau (schedule units)")
        return fig3_schedule(float(spec["tau"]))
    if variant == "custom":
        needed = {"tau", "t1", "t2", "delta"}
        if set(spec) - needed - {"variant"} or not needed <= set(spec):
            raise ConfigError("custom schedule needs exactly tau, t1, t2, delta")
        return constant_schedule(float(spec["t1"]), float(spec["t2"]),
                                 float(spec["delta"]), tau=float(spec["tau"]))
    raise ConfigError(f"unknown schedule variant {variant!r}")


def _temperature_list(cfg):
    has_t = "T_over_gap" in cfg
    has_b = "beta" in cfg
    if has_t == has_b:
        raise ConfigError("specify exactly one of T_over_gap or beta")
    vals = cfg["T_over_gap"] if has_t else cfg["beta"]
    if not isinstance(vals, list):
        vals = [vals]
    return [float(v) for v in vals], ("T_over_gap" if has_t else "beta")


def write_series_pn(path, times, dists):
    lines = ["t,n,P_n"]
    for t, d in zip(times, dists):
        for n, p in enumerate(d.p_cell):
            lines.append(f"{_fmt(t)},{n},{_fmt(p)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_series_obs(path, result):
    lines = ["t,R,Var,A,B,peak,offset,R_sub"]
    for rec, pk, off, rs in zip(result.records, result.peak_shift,
                                result.offset, result.r_sub):
        lines.append(
            f"{_fmt(rec.t)},{_fmt(rec.R)},{_fmt(rec.Var)},{_fmt(rec.A)},"
            f"{_fmt(rec.B)},{pk},{_fmt(off)},{_fmt(rs)}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_meta(path, meta):
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _resolved(cfg, out_dir):
    resolved = dict(cfg)
    resolved["out_dir"] = str(out_dir)
    return resolved


def _sweep_meta(cfg, schedule, gap, eta, c_sys, c_mf):
    return {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "pipeline": cfg["pipeline"],
        "delta_gap": gap,
        "eta": eta,
        "chern_system": c_sys,
        "chern_meanfield": c_mf,
        "schedule_variant": schedule.variant,
        "conventions": {
            "covariance_index_order": "m[mu,nu] = <cdag_mu c_nu>; mean-field h follows h(-k)",
            "plaquette_orientation": "k-then-t loop; integer equals COM displacement per cycle",
        },
    }


def run_pipeline(cfg, out_root, check_convergence=False):
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    pipeline = cfg["pipeline"]
    schedule = build_schedule(cfg.get("schedule", {"variant": "fig2", "omega0_tau": 100.0}))
    L = int(cfg.get("L", 32))
    band = int(cfg.get("band", 0))
    n0 = int(cfg.get("n0", 0))
    steps = int(cfg.get("steps_per_cycle", 4096))
    n_out = int(cfg.get("n_output_times", 64))
    mu_c = float(cfg.get("mu_c", 0.0))
    grid = MomentumGrid(L)
    pcfg = PropagatorConfig(steps_per_cycle=steps)

    system = rmm_sampler(schedule)
    gap = min_gap(schedule, system)
    c_sys = chern_number(system, schedule, band)

    if pipeline == "single":
        times = output_grid(schedule.tau, n_out)
        res = band_pump_run(system, grid, band, n0, pcfg, times)
        meta = _sweep_meta(cfg, schedule, gap, None, c_sys, None)
        meta["resolved_config"] = _resolved(cfg, out_root)
        meta["tau"] = schedule.tau
        meta["gauge_fingerprint"] = res.extras["gauge_fingerprint"]
        if check_convergence:
            res2 = band_pump_run(system, grid, band, n0,
                                 PropagatorConfig(steps_per_cycle=2 * steps), times)
            meta["convergence"] = {
                "steps_doubled": 2 * steps,
                "max_R_delta": max(abs(a.R - b.R) for a, b in zip(res.records, res2.records)),
                "final_P_delta": float(np.abs(res.dists[-1].p_cell - res2.dists[-1].p_cell).max()),
            }
        write_series_pn(out_root / "series_pn.csv", times, res.dists)
        write_series_obs(out_root / "series_obs.csv", res)
        write_meta(out_root / "meta.json", meta)
        return 0

    if pipeline == "chern":
        eta = gap * float(cfg.get("eta_over_gap", 0.01))
        temps, kind = _temperature_list(cfg)
        entries = []
        for tv in temps:
            beta = (1.0 / (tv * gap) if kind == "T_over_gap" else tv)
            tp = ThermalParams(beta=beta, mu_c=mu_c)
            c_mf = chern_number(meanfield_sampler(system, tp, eta), schedule, band)
            entries.append({kind: tv, "beta": beta, "chern_meanfield": c_mf})
        meta = _sweep_meta(cfg, schedule, gap, eta, c_sys, entries[0]["chern_meanfield"])
        meta["resolved_config"] = _resolved(cfg, out_root)
        meta["sweep"] = entries
        write_meta(out_root / "meta.json", meta)
        return 0

    if pipeline == "oracle-check":
        return _oracle_check(cfg, out_root, pcfg)

    # thermal sweeps: meanfield / full
    eta = gap * float(cfg.get("eta_over_gap", 0.01))
    temps, kind = _temperature_list(cfg)
    tau_scaling = cfg.get("tau_scaling", "fixed")
    if tau_scaling not in ("fixed", "tanh"):
        raise ConfigError("tau_scaling must be 'fixed' or 'tanh'")
    betas = [(1.0 / (tv * gap) if kind == "T_over_gap" else tv) for tv in temps]
    beta_ref = betas[0]

    for tv, beta in zip(temps, betas):
        tau = schedule.tau
        sched_t = schedule
        if tau_scaling == "tanh":
            tau = tau_for_temperature(schedule.tau, beta_ref, beta, gap)
            sched_t = (fig2_schedule(schedule.meta["omega0"], tau)
                       if schedule.variant == "fig2" else fig3_schedule(tau))
        system_t = rmm_sampler(sched_t)
        tp = ThermalParams(beta=beta, mu_c=mu_c)
        c_mf = chern_number(meanfield_sampler(system_t, tp, eta), sched_t, band)
        times = output_grid(tau, n_out)
        point_dir = out_root / f"{kind}_{tv:g}"
        point_dir.mkdir(parents=True, exist_ok=True)

        captured = []
        with warnings.catch_warnings(record=True) as wlist:
            warnings.simplefilter("always")
            if pipeline == "meanfield":
                res = band_pump_run(meanfield_sampler(system_t, tp, eta),
                                    grid, band, n0, pcfg, times)
            else:
                res = full_pump_run(
                    system_t, sched_t, tp, eta, grid, band, n0, pcfg, times,
                    init_state=cfg.get("init_state", "meanfield"),
                    offset_estimator=cfg.get("offset_estimator", "min"),
                    ensemble=cfg.get("ensemble", "insulator"),
                )
            captured = [str(w.message) for w in wlist]

        meta = _sweep_meta(cfg, sched_t, gap, eta, c_sys, c_mf)
        meta["resolved_config"] = _resolved(cfg, out_root)
        meta["tau"] = tau
        meta[kind] = tv
        meta["beta"] = beta
        meta["gauge_fingerprint"] = res.extras["gauge_fingerprint"]
        meta["warnings"] = captured
        if pipeline == "full":
            meta["init_state"] = res.extras["init_state"]
            meta["ensemble"] = res.extras["ensemble"]
        if check_convergence:
            meta["convergence"] = _convergence_probe(
                pipeline, cfg, system_t, sched_t, tp, eta, grid, band, n0,
                steps, times, res)
        write_series_pn(point_dir / "series_pn.csv", times, res.dists)
        write_series_obs(point_dir / "series_obs.csv", res)
        write_meta(point_dir / "meta.json", meta)

    top = _sweep_meta(cfg, schedule, gap, eta, c_sys, None)
    top["resolved_config"] = _resolved(cfg, out_root)
    top["sweep_points"] = [f"{kind}_{tv:g}" for tv in temps]
    write_meta(out_root / "meta.json", top)
    return 0


def _convergence_probe(pipeline, cfg, system, schedule, tp, eta, grid, band, n0,
                       steps, times, res):
    pcfg2 = PropagatorConfig(steps_per_cycle=2 * steps)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if pipeline == "meanfield":
            res2 = band_pump_run(meanfield_sampler(system, tp, eta),
                                 grid, band, n0, pcfg2, times)
        else:
            res2 = full_pump_run(system, schedule, tp, eta, grid, band, n0,
                                 pcfg2, times,
                                 init_state=cfg.get("init_state", "meanfield"),
                                 offset_estimator=cfg.get("offset_estimator", "min"),
                                 ensemble=cfg.get("ensemble", "insulator"))
    return {
        "steps_doubled": 2 * steps,
        "max_R_delta": max(abs(a.R - b.R) for a, b in zip(res.records, res2.records)),
        "final_P_delta": float(np.abs(res.dists[-1].p_cell - res2.dists[-1].p_cell).max()),
    }


def _oracle_check(cfg, out_root, pcfg):
    seed = int(cfg.get("seed", 20240801))
    cases = int(cfg.get("cases", 10))
    l_list = [int(x) for x in cfg.get("L_list", [2, 3])]
    if any(l > 3 for l in l_list):
        raise ConfigError("oracle-check supports L <= 3")
    rng = np.random.default_rng(seed)
    etas = [0.0, 0.05, 0.3]
    report = []
    worst = 0.0
    for i in range(cases):
        L = l_list[i % len(l_list)]
        grid = MomentumGrid(L)
        t1, t2, delta = rng.uniform(-2.0, 2.0, size=3)
        span = 5.0
        sched = constant_schedule(float(t1), float(t2), float(delta), tau=span)
        beta = float(rng.uniform(0.2, 5.0))
        eta = etas[i % len(etas)]
        tp = ThermalParams(beta=beta, mu_c=float(cfg.get("mu_c", 0.0)))
        psi = rng.normal(size=(L, 2)) + 1j * rng.normal(size=(L, 2))
        psi /= np.linalg.norm(psi, axis=1)[:, None]
        field = SpinorField(psi=psi, k=grid.k)
        times = np.linspace(0.0, span, 8)
        system = rmm_sampler(sched)
        series = full_dynamics_series(system, sched, tp, eta, field, pcfg, times)
        amps = np.linalg.norm(field.psi, axis=1) / np.sqrt(L)
        bf = brute_force_rho_aux(system, sched, grid, tp, eta, field, pcfg, times)
        dev = max(
            float(np.abs(assemble_rho_aux(series.g[j], series.G[j], amps).rho
                         - bf[j].rho).max())
            for j in range(len(times))
        )
        worst = max(worst, dev)
        report.append({
            "L": L, "t1": float(t1), "t2": float(t2), "delta": float(delta),
            "beta": beta, "eta": eta, "max_deviation": dev,
        })
    meta = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "pipeline": "oracle-check",
        "seed": seed,
        "resolved_config": _resolved(cfg, out_root),
        "cases": report,
        "max_deviation": worst,
        "tolerance": 1e-8,
        "passed": bool(worst <= 1e-8),
    }
    write_meta(out_root / "meta.json", meta)
    if worst > 1e-8:
        raise NumericsError(f"oracle check failed: max deviation {worst:.3e}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="topopump", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "chern"):
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON config file")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--steps", type=int, default=None, help="override steps_per_cycle")
        p.add_argument("--check-convergence", action="store_true",
                       help="re-run with doubled steps and report deltas in meta.json")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.command == "chern":
            cfg["pipeline"] = "chern"
        if args.steps is not None:
            cfg["steps_per_cycle"] = args.steps
        out = args.out or cfg.get("out_dir")
        if not out:
            raise ConfigError("no output directory: set out_dir in the config or pass --out")
        return run_pipeline(cfg, out, check_convergence=args.check_convergence)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except PhysicsGuardError as exc:
        print(f"physics guard: {exc}", file=sys.stderr)
        return 2
    except (NumericsError, ValidationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except PumpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
