"""Command-line entry point: ``kinkchain {static-scan,quench,ensemble,verify}``.

Parameters come from an optional flat config file (``--config``) and are
overridden by flags of the same name. Exit codes: 0 success, 2 bad
configuration, 3 numerical failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import ed
from .bdg import SingularOverlap, pair_wavefunction, solve_ground_modes
from .dynamics import NormDriftExceeded, QuenchProtocol, run_quench, SCHEMES
from .ensemble import EnsemblePlan, StaticPlan, CorrelationFit, run_ensemble, run_static_ensemble, default_realizations
from .io import ConfigError, Param, RunMeta, coerce_config, default_output_dir, read_config_file, write_metadata, write_table
from .lattice import ChainSpec, NoCriticalPoint, QuadratureFailure, critical_field, effective_fields, realization_seed, sample_disorder
from .observables import correlation_bundle, kink_density, kink_overlap, log_abs_det_overlap, log_fidelity, zz_correlator

log = logging.getLogger("kinkchain")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4

_COMMON = {
    "seed": Param(int, 0, "base seed of all disorder streams"),
    "out": Param(str, None, "output directory (default: $KINKCHAIN_OUTPUT_DIR or ./kinkchain-out)"),
    "format": Param(str, "csv", "table format: csv or json"),
    "threads": Param(int, 1, "worker processes for ensemble work"),
}

_PROTOCOL = {
    "g_init": Param(float, 10.0, "initial uniform field"),
    "g_final": Param(float, 0.0, "final uniform field"),
    "dt": Param(float, None, "time step (default: scheme dependent)"),
    "scheme": Param(str, "yoshida4", f"split-step composition: {', '.join(sorted(SCHEMES))}"),
}

SCHEMAS: dict[str, dict[str, Param]] = {
    "static-scan": {
        **_COMMON,
        "sigma": Param(float, (0.0, 0.4, 0.8), "disorder strengths", is_list=True),
        "g": Param(float, tuple(np.round(np.linspace(0.0, 3.0, 31), 10)), "uniform fields", is_list=True),
        "n": Param(int, (64, 128, 256, 512), "chain lengths", is_list=True),
        "realizations": Param(int, None, "realizations per cell (default: max(4, ceil(2048/N)))"),
        "gc_sigma": Param(float, tuple(np.round(np.linspace(0.0, 1.88, 48), 10)), "sigma grid of the critical-field table", is_list=True),
        "bundle_g": Param(float, (0.5,), "fields at which C_r and P_n are written", is_list=True),
    },
    "quench": {
        **_COMMON,
        **_PROTOCOL,
        "sigma": Param(float, 0.1, "disorder strength"),
        "tau_q": Param(float, 64.0, "quench time"),
        "n": Param(int, 512, "chain length"),
        "realization": Param(int, 0, "realization index within (seed, sigma, n)"),
        "snapshots": Param(int, 200, "number of evenly spaced snapshot fields"),
        "static_reference": Param(bool, True, "also record the instantaneous ground-state density"),
        "zz_max_r": Param(int, 0, "largest separation of the final zz table (0: none)"),
    },
    "ensemble": {
        **_COMMON,
        **_PROTOCOL,
        "sigma": Param(float, (0.1, 0.8), "disorder strengths", is_list=True),
        "tau_q": Param(float, (16.0, 64.0, 256.0), "quench times", is_list=True),
        "n": Param(int, (256,), "chain lengths", is_list=True),
        "realizations": Param(int, None, "realizations per cell (default: max(4, ceil(2048/N)))"),
    },
    "verify": {
        **_COMMON,
        "n": Param(int, (4, 6, 8), "chain lengths of the static checks", is_list=True),
        "draws": Param(int, 20, "random (g, sigma) draws per length"),
        "dynamic_n": Param(int, 8, "chain length of the quench check"),
        "dynamic_tau_q": Param(float, 4.0, "quench time of the quench check"),
    },
}


def _config_from_args(command: str, args: argparse.Namespace) -> dict[str, Any]:
    raw: dict[str, Any] = {}
    if args.config:
        raw.update(read_config_file(args.config))
    for key in SCHEMAS[command]:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    cfg = coerce_config(SCHEMAS[command], raw)
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg['format']!r}")
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    for key, p in SCHEMAS[command].items():
        if p.is_list and cfg[key] is not None and len(cfg[key]) == 0:
            raise ConfigError(f"{key} must not be empty")
    return cfg


def _outdir(cfg) -> Path:
    out = Path(cfg["out"]) if cfg["out"] else default_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _rule(cfg) -> Callable[[int], int]:
    fixed = cfg.get("realizations")
    if fixed is None:
        return default_realizations
    if fixed < 1:
        raise ConfigError("realizations must be >= 1")
    return _Fixed(fixed)


class _Fixed:
    # picklable constant rule for worker processes
    def __init__(self, k: int):
        self.k = k

    def __call__(self, n: int) -> int:
        return self.k


def _protocol(cfg, tau_q: float = 1.0) -> QuenchProtocol:
    try:
        return QuenchProtocol(tau_q, cfg["g_init"], cfg["g_final"], dt=cfg["dt"], scheme=cfg["scheme"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _fit_row(key, fit) -> list:
    if isinstance(fit, CorrelationFit):
        return [*key, fit.c, fit.slope, fit.residual, fit.n_points, fit.d, ""]
    return [*key, math.nan, math.nan, math.nan, 0, math.nan, fit]


_CELL_COLUMNS = ["sigma", "tau_q", "g", "n_sites", "n_ok", "n_failed", "d", "d_err", "d_ground", "d_ground_err",
                 "delta_d", "delta_d_err", "log_f", "f", "f_err", "flagged"]
_RECORD_COLUMNS = ["sigma", "tau_q", "g", "n_sites", "index", "seed", "d", "log_f", "d_ground", "delta_d",
                   "norm_drift", "dt", "retried", "error"]


def cmd_static_scan(cfg: Mapping[str, Any], meta: RunMeta) -> tuple[list[Path], dict]:
    out, fmt = _outdir(cfg), cfg["format"]
    files = []
    rows = []
    for s in cfg["gc_sigma"]:
        try:
            rows.append([s, critical_field(s), True])
        except NoCriticalPoint:
            rows.append([s, math.nan, False])
    files.append(write_table(out / "critical_field", ["sigma", "g_c", "exists"], rows, meta, fmt))

    plan = StaticPlan(cfg["sigma"], cfg["g"], cfg["n"], cfg["seed"], _rule(cfg))
    res = run_static_ensemble(plan, workers=cfg["threads"])
    files.append(write_table(out / "density", _CELL_COLUMNS, ([c.row()[k] for k in _CELL_COLUMNS] for c in res.cells), meta, fmt))
    fit_rows = [_fit_row(key, fit) for key, fit in sorted(res.fits["c"].items())]
    files.append(write_table(out / "correlation_coefficient", ["sigma", "g", "c", "slope", "residual", "n_points", "d", "note"], fit_rows, meta, fmt))

    # single realization (index 0) of the longest chain, as in a typical-sample plot
    n = max(cfg["n"])
    crow, prow = [], []
    for s in cfg["sigma"]:
        r = sample_disorder(ChainSpec(n, s, realization_seed(cfg["seed"], int(round(s * 1_000_000)), n, 0)))
        for g in cfg["bundle_g"]:
            try:
                b = correlation_bundle(pair_wavefunction(kink_overlap(solve_ground_modes(effective_fields(r, g)))))
            except SingularOverlap:
                continue
            crow += [[s, g, n, i, x] for i, x in enumerate(b.C_r)]
            prow += [[s, g, n, i, p, pp] for i, (p, pp) in enumerate(zip(b.P_n, b.PP_r))]
    files.append(write_table(out / "pair_correlator", ["sigma", "g", "n_sites", "r", "C_r"], crow, meta, fmt))
    files.append(write_table(out / "kink_distribution", ["sigma", "g", "n_sites", "n", "P_n", "PP_r"], prow, meta, fmt))
    return files, {}


def cmd_quench(cfg: Mapping[str, Any], meta: RunMeta) -> tuple[list[Path], dict]:
    out, fmt = _outdir(cfg), cfg["format"]
    try:
        spec = ChainSpec(cfg["n"], cfg["sigma"], realization_seed(cfg["seed"], int(round(cfg["sigma"] * 1_000_000)), cfg["n"], cfg["realization"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg["snapshots"] < 2:
        raise ConfigError("snapshots must be >= 2")
    from dataclasses import replace

    p = replace(_protocol(cfg, cfg["tau_q"]), n_snapshots=cfg["snapshots"])
    r = sample_disorder(spec)

    def ground_d(modes, g):
        return kink_density(kink_overlap(solve_ground_modes(effective_fields(r, g))))

    observers = {"d": lambda modes, g: kink_density(kink_overlap(modes))}
    if cfg["static_reference"]:
        observers["d_static"] = ground_d
    final, traj = run_quench(r, p, observers)
    cols = ["g", "t", "step", "d"] + (["d_static"] if cfg["static_reference"] else [])
    files = [write_table(out / "trajectory", cols, ([rec[c] for c in cols] for rec in traj), meta, fmt)]

    ov = kink_overlap(final.modes)
    try:
        b = correlation_bundle(pair_wavefunction(ov))
        lf = log_fidelity(pair_wavefunction(ov))
        files.append(write_table(out / "final_bundle", ["r", "C_r", "P_n", "PP_r"],
                                 ([i, c, pn, pp] for i, (c, pn, pp) in enumerate(zip(b.C_r, b.P_n, b.PP_r))), meta, fmt))
    except SingularOverlap:
        lf = log_abs_det_overlap(ov)
    if cfg["zz_max_r"] > 0:
        rmax = min(cfg["zz_max_r"], cfg["n"] - 1)
        files.append(write_table(out / "zz", ["R", "zz"], ([R, zz_correlator(final.modes, 0, R)] for R in range(rmax + 1)), meta, fmt))
    summary = {"d_final": kink_density(ov), "log_f_final": lf, "norm_drift": final.norm_drift,
               "steps": final.steps_taken, "dt": p.step_size, "d_ground_final": ground_d(None, p.g_final)}
    files.append(write_table(out / "final", list(summary), [list(summary.values())], meta, fmt))
    return files, {"final": summary}


def cmd_ensemble(cfg: Mapping[str, Any], meta: RunMeta) -> tuple[list[Path], dict]:
    out, fmt = _outdir(cfg), cfg["format"]
    plan = EnsemblePlan(cfg["sigma"], cfg["tau_q"], cfg["n"], cfg["seed"], _rule(cfg), _protocol(cfg))
    res = run_ensemble(plan, workers=cfg["threads"])
    files = [
        write_table(out / "cells", _CELL_COLUMNS, ([c.row()[k] for k in _CELL_COLUMNS] for c in res.cells), meta, fmt),
        write_table(out / "realizations", _RECORD_COLUMNS, ([r.row()[k] for k in _RECORD_COLUMNS] for r in res.records), meta, fmt),
        write_table(out / "fits_c", ["sigma", "tau_q", "c", "slope", "residual", "n_points", "d", "note"],
                    (_fit_row(k, f) for k, f in sorted(res.fits["c"].items())), meta, fmt),
    ]
    wrows = []
    for (s, n), slopes in sorted(res.fits["w"].items()):
        if isinstance(slopes, str):
            wrows.append([s, n, math.nan, math.nan, math.nan, math.nan, slopes])
        else:
            wrows += [[s, n, w.tau_lo, w.tau_hi, w.w, w.w_err, ""] for w in slopes]
    files.append(write_table(out / "fits_w", ["sigma", "n_sites", "tau_lo", "tau_hi", "w", "w_err", "note"], wrows, meta, fmt))
    flagged = [c for c in res.cells if c.flagged]
    return files, {"flagged_cells": len(flagged), "failed_realizations": len(res.failures())}


def cmd_verify(cfg: Mapping[str, Any], meta: RunMeta) -> tuple[list[Path], dict]:
    from .verify import run_checks, summary

    checks = run_checks(cfg["n"], cfg["draws"], cfg["seed"], cfg["dynamic_n"], cfg["dynamic_tau_q"])
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: max error {c.max_error:.3e} (tolerance {c.tolerance:.0e}, {c.cases} cases)")
    report = summary(checks)
    out = _outdir(cfg)
    path = out / "verify_report.json"
    path.write_text(json.dumps({"meta": meta.header(), **report}, indent=1, sort_keys=True) + "\n")
    return [path], {"verification": report}


COMMANDS = {"static-scan": cmd_static_scan, "quench": cmd_quench, "ensemble": cmd_ensemble, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kinkchain", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name, help=COMMANDS[name].__doc__ or name)
        sp.add_argument("--config", help="flat key = value config file")
        for key, p in schema.items():
            default = ",".join(map(str, p.default)) if p.is_list and p.default is not None else p.default
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=f"{p.help} [default: {default}]")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from_args(args.command, args)
        meta = RunMeta(args.command, cfg, cfg["seed"])
        files, extra = COMMANDS[args.command](cfg, meta)
        files.append(write_metadata(_outdir(cfg), meta, files, extra))
    except (ConfigError, ed.SizeExceeded) as exc:
        print(f"kinkchain: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NormDriftExceeded, QuadratureFailure, SingularOverlap, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"kinkchain: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for f in files:
        log.info("wrote %s", f)
    if args.command == "verify" and not extra["verification"]["passed"]:
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
