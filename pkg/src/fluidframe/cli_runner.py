"""Command-line front end: ``fluidframe {run, sweep, check-initial-data, speeds}``.

Configuration is a sectioned key=value file::

    [run]
    scenario = perturbed_flrw
    n = 32
    t_final = 0.2

    [scenario]
    amplitude = 1e-4
    wavevector = 1 0 0

    [sweep]
    n_values = 16 32 64

Command-line flags override file values; every override is recorded in the
run manifest.  Exit status: 0 success, 1 numerical failure, 2 configuration
or I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    SCHEMA_VERSION,
    characteristic_speeds,
    constraint_residuals,
    convergence_order,
    diagnostic_row,
    write_rows,
)
from .evolution import NumericalBreakdown, RunConfig, evolve
from .initial_data import build_reduced_initial_data
from .initial_data import constraint_residuals as cauchy_residuals
from .reduced_rhs import HyperbolicityLost, ReducedSystem
from .scenarios import SCENARIOS, make_scenario
from .state_grid import write_snapshot

log = logging.getLogger("fluidframe")

RUN_KEYS = {
    "scenario": str,
    "n": int,
    "t_final": float,
    "cfl": float,
    "dt": float,
    "fd_order": int,
    "ko": float,
    "kappa": float,
    "cadence": int,
    "out": str,
    "snapshots": bool,
}
SCENARIO_KEYS = {
    "eos": str,
    "gamma": float,
    "c": float,
    "r0": float,
    "s0": float,
    "amplitude": float,
    "wavevector": "vector",
    "beta": float,
}
SWEEP_KEYS = {"n_values": "intlist"}
SECTIONS = {"run": RUN_KEYS, "scenario": SCENARIO_KEYS, "sweep": SWEEP_KEYS}
FLAG_KEYS = ("scenario", "n", "cfl", "t_final", "fd_order", "ko", "kappa", "out", "dt", "cadence")
DEFAULT_SWEEP = (16, 32, 64)


class ConfigError(ValueError):
    pass


def _line_of(text: str, section: str, key: str) -> int | None:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            cur = s[1:-1].strip()
        elif cur == section and s.split("=", 1)[0].split(":", 1)[0].strip() == key:
            return i
    return None


def _convert(kind, raw: str, where: str):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(raw)
            return low in ("true", "yes", "1", "on")
        if kind == "vector":
            vals = [float(x) for x in raw.replace(",", " ").split()]
            if len(vals) != 3:
                raise ValueError(raw)
            return tuple(vals)
        if kind == "intlist":
            return [int(x) for x in raw.replace(",", " ").split()]
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse value {raw!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse file text into {'run': {...}, 'scenario': {...}, 'sweep': {...}}."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    out = {name: {} for name in SECTIONS}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}, line {_line_of(text, section, '') or '?'}: unknown section [{section}]")
        allowed = SECTIONS[section]
        for key, raw in cp.items(section):
            line = _line_of(text, section, key)
            where = f"{source}, line {line}, key {key!r}"
            if key not in allowed:
                raise ConfigError(f"{where}: unknown key in [{section}]")
            out[section][key] = _convert(allowed[key], raw, where)
    return out


def resolve_config(file_values: dict | None, flags: dict) -> tuple[RunConfig, dict, list[int], dict]:
    """Merge defaults, file values and flags (flags win).

    Returns the validated RunConfig, scenario parameters, sweep resolutions and
    the record of flag overrides.
    """
    file_values = file_values or {name: {} for name in SECTIONS}
    run = dict(file_values.get("run", {}))
    overrides = {}
    for key in FLAG_KEYS:
        val = flags.get(key)
        if val is None:
            continue
        if key in run and run[key] != val:
            overrides[key] = {"file": run[key], "flag": val}
        run[key] = val
    params = dict(file_values.get("scenario", {}))
    cfg = RunConfig(**run, params=params)
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {cfg.scenario!r}; choose from {', '.join(SCENARIOS)}")
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    sweep = file_values.get("sweep", {}).get("n_values", list(DEFAULT_SWEEP))
    return cfg, params, sweep, overrides


def load_config(path: str | None, flags: dict):
    values = None
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        values = parse_config_text(text, source=str(path))
    return resolve_config(values, flags)


# ----------------------------------------------------------------------
def prepare_out_dir(path: str | Path) -> Path:
    """Create the directory and prove it is writable; OSError otherwise."""
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(dir=p, prefix=".probe-"):
        pass
    return p


def write_json_atomic(obj: dict, path: str | Path) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def build_state(cfg: RunConfig):
    # bad scenario parameters surface here as ValueError (inadmissible thermodynamics,
    # a slice that is not spacelike, ...); they are configuration problems
    try:
        sc = make_scenario(cfg.scenario, cfg.n, kappa_const=cfg.kappa, fd_order=cfg.fd_order, **cfg.params)
        fs = build_reduced_initial_data(sc.data, sc.grid)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"scenario {cfg.scenario!r}: {exc}") from None
    return sc, fs, ReducedSystem(sc.data.eos, cfg.kappa)


def execute_run(cfg: RunConfig, out_dir: Path, overrides: dict | None = None) -> tuple[int, dict]:
    """Evolve one configuration, writing CSV, optional snapshots and the manifest."""
    t0 = time.perf_counter()
    files = []
    status, message = "ok", ""
    sc = None
    traj = None
    try:
        sc, fs, system = build_state(cfg)
        traj = evolve(
            fs,
            system,
            cfg.t_final,
            cfl=cfg.cfl,
            dt=cfg.dt,
            ko=cfg.ko,
            cadence=cfg.cadence,
            monitor=lambda cur: diagnostic_row(cur, system),
        )
    except (HyperbolicityLost, NumericalBreakdown) as exc:
        status, message = "numerical_failure", str(exc)
    except ValueError as exc:
        # a fixed dt above the CFL bound
        raise ConfigError(str(exc)) from None
    if traj is not None:
        csv_path = out_dir / "diagnostics.csv"
        write_rows(traj.rows, csv_path)
        files.append(csv_path.name)
        if cfg.snapshots:
            snap = out_dir / "final.ffsnap"
            write_snapshot(traj.final, snap)
            files.append(snap.name)
    manifest = {
        "code_version": __version__,
        "csv_schema_version": SCHEMA_VERSION,
        "config": cfg.as_dict(),
        "overrides": overrides or {},
        "grid": {"n": cfg.n, "h": 1.0 / cfg.n, "fd_order": cfg.fd_order},
        "eos": sc.params if sc is not None else None,
        "constraint_status": sc.constraint_status if sc is not None else None,
        "steps": traj.steps if traj is not None else 0,
        "first_inadmissible_time": traj.first_inadmissible if traj is not None else None,
        "wall_time_s": time.perf_counter() - t0,
        "exit_status": status,
        "message": message,
        "files": files + ["manifest.json"],
    }
    write_json_atomic(manifest, out_dir / "manifest.json")
    return (0 if status == "ok" else 1), (traj.rows[-1] if traj is not None and traj.rows else {})


# ----------------------------------------------------------------------
def cmd_run(args, cfg, params, sweep, overrides) -> int:
    out = prepare_out_dir(cfg.out or "fluidframe-out")
    code, last = execute_run(cfg, out, overrides)
    if code == 0:
        print(f"run finished at t={last.get('t', cfg.t_final):.6g}; outputs in {out}")
    else:
        print(f"run failed; see {out / 'manifest.json'}", file=sys.stderr)
    return code


SUMMARY_QUANTITIES = ("torsion_linf", "d_tensor_linf", "friedrich_div_linf", "q_linf")


def cmd_sweep(args, cfg, params, sweep, overrides) -> int:
    ns = args.n_values or sweep
    if len(ns) < 2:
        raise ConfigError("a sweep needs at least two resolutions")
    out = Path(cfg.out or "fluidframe-sweep")
    subs = {}
    for n in ns:
        try:
            subs[n] = RunConfig(**{**cfg.as_dict(), "n": n, "out": str(out / f"n{n}")}).validate()
        except ValueError as exc:
            raise ConfigError(f"sweep resolution n={n}: {exc}") from None
    prepare_out_dir(out)
    finals = {}
    worst = 0
    for n, sub in subs.items():
        code, last = execute_run(sub, prepare_out_dir(out / f"n{n}"), overrides)
        worst = max(worst, code)
        finals[n] = last
        print(f"n={n}: {'ok' if code == 0 else 'failed'}", flush=True)
    if worst:
        return worst
    rows = []
    for q in SUMMARY_QUANTITIES:
        errs = [finals[n][q] for n in ns]
        orders = convergence_order(errs, ns[1] / ns[0]) if all(e > 0 for e in errs) else [float("nan")] * (len(ns) - 1)
        rows.append({"quantity": q, "linf": errs, "orders": orders})
        print(f"{q:22s} " + " ".join(f"{e:.3e}" for e in errs) + "  orders " + " ".join(f"{o:.2f}" for o in orders))
    write_json_atomic({"n_values": list(ns), "t_final": cfg.t_final, "table": rows}, out / "convergence.json")
    return 0


def cmd_check(args, cfg, params, sweep, overrides) -> int:
    sc, fs, system = build_state(cfg)
    cons = cauchy_residuals(sc.data, sc.grid)
    res = constraint_residuals(fs, system).linf()
    boost = fs.meta["boost"]
    report = {
        "scenario": cfg.scenario,
        "constraint_status": sc.constraint_status,
        "hamiltonian_linf": float(np.max(np.abs(cons["hamiltonian"]))),
        "momentum_linf": float(np.max(np.abs(cons["momentum"]))),
        "lorentz_orthogonality": float(np.max(boost.orthogonality_residual())),
        "u_normalization": float(np.max(np.abs(boost.u0**2 - np.sum(boost.vt**2, axis=0) - 1.0))),
        "weyl_asymmetry": list(fs.meta["weyl_asym"]),
        "weyl_trace_removed": list(fs.meta["weyl_trace"]),
        **{f"{k}_linf": v for k, v in res.items()},
    }
    for k, v in report.items():
        print(f"{k:28s} {v}")
    if cfg.out:
        out = prepare_out_dir(cfg.out)
        write_json_atomic(report, out / "initial_data.json")
    return 0


def cmd_speeds(args, cfg, params, sweep, overrides) -> int:
    _, fs, system = build_state(cfg)
    point = tuple(args.point)
    dirs = [np.array(d, dtype=float) for d in (args.direction or [(1, 0, 0), (0, 1, 0), (0, 0, 1)])]
    for d in dirs:
        d = d / np.linalg.norm(d)
        spectrum = characteristic_speeds(fs.point(*point), system.eos, d)
        uniq = np.unique(np.round(spectrum.speeds, 12))
        print(f"xi=({d[0]:+.4f},{d[1]:+.4f},{d[2]:+.4f})  speeds: " + " ".join(f"{s:+.10f}" for s in uniq))
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "check-initial-data": cmd_check, "speeds": cmd_speeds}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="sectioned key=value file")
    common.add_argument("--scenario", choices=SCENARIOS)
    common.add_argument("--n", type=int, help="grid points per axis")
    common.add_argument("--cfl", type=float)
    common.add_argument("--t-final", dest="t_final", type=float)
    common.add_argument("--dt", type=float, help="fixed step, must respect the CFL bound")
    common.add_argument("--fd-order", dest="fd_order", type=int, choices=(2, 4))
    common.add_argument("--ko", type=float, help="Kreiss-Oliger strength")
    common.add_argument("--kappa", type=float, help="coupling constant")
    common.add_argument("--cadence", type=int, help="steps between diagnostic rows")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="fluidframe", description="Einstein-Euler-entropy evolution in fluid gauge")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="evolve one configuration")
    sw = sub.add_parser("sweep", parents=[common], help="run several resolutions and report convergence")
    sw.add_argument("--n-values", dest="n_values", type=int, nargs="+")
    sub.add_parser("check-initial-data", parents=[common], help="report t=0 constraint residuals")
    sp = sub.add_parser("speeds", parents=[common], help="print characteristic speeds at t=0")
    sp.add_argument("--point", type=int, nargs=3, default=(0, 0, 0))
    sp.add_argument("--direction", type=float, nargs=3, action="append")
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    flags = {k: getattr(args, k, None) for k in FLAG_KEYS}
    try:
        cfg, params, sweep, overrides = load_config(args.config, flags)
        return COMMANDS[args.command](args, cfg, params, sweep, overrides)
    except ConfigError as exc:
        print(f"fluidframe: configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fluidframe: I/O error: {exc}", file=sys.stderr)
        return 2
    except (HyperbolicityLost, NumericalBreakdown) as exc:
        print(f"fluidframe: numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
