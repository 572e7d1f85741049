"""Command-line front end.

Every subcommand reads its settings from flags and, optionally, a JSON
config file (``--config``).  The file may hold shared keys at top level and
a section per subcommand; flags override both.  Reports are JSON by default
or flat ``key=value`` lines with ``--format text``.

Exit status: 0 pass / success, 1 verdict fail, 2 usage or config error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import catalog
from .endpoints import classify_endpoint
from .errors import (
    AmbiguousEndpointError,
    BoundaryConditionError,
    BracketError,
    ConstraintViolation,
    DomainError,
    InsufficientResolutionError,
    IntegrationError,
    MalformedProfileError,
    ShootingError,
    SingularPointError,
    UnknownFamilyError,
    WarpError,
)
from .geometry import SpaceParams, mu_invariant
from .ode import IVPState, integrate
from .profile import _jsonable, profile_to_csv, read_profile_csv, write_profile_csv
from .residuals import verify
from .shooting import ShootingProblem, solve_shooting

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

COMMANDS = ("verify", "solve", "shoot", "catalog", "classify", "sweep")

DEFAULTS = {
    "k": 0.0,
    "tol": 1e-9,
    "ode_tol": 1e-10,
    "event_tol": 1e-12,
    "classify_tol": 1e-6,
    "shoot_tol": 1e-6,
    "method": "rk",
    "format": "json",
    "max_iter": 60,
    "jobs": 1,
    "form": "resolved",
}

# errors that mean the request itself is wrong
USAGE_ERRORS = (MalformedProfileError, UnknownFamilyError, ConstraintViolation, DomainError, OSError,
                json.JSONDecodeError)
NUMERIC_ERRORS = (BoundaryConditionError, SingularPointError, IntegrationError, BracketError, ShootingError,
                  AmbiguousEndpointError, InsufficientResolutionError)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Fully resolved settings of one invocation."""

    command: str
    params: Optional[SpaceParams] = None
    verify_tol: float = DEFAULTS["tol"]
    ode_tol: float = DEFAULTS["ode_tol"]
    event_tol: float = DEFAULTS["event_tol"]
    grid: Optional[tuple] = None
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    profile_path: Optional[str] = None
    family: Optional[str] = None
    constants: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)


# parsing helpers

def _floats(raw, count, name):
    if isinstance(raw, (list, tuple)):
        parts = list(raw)
    else:
        parts = [p for p in str(raw).split(",") if p.strip()]
    if len(parts) != count:
        raise UsageError(f"--{name.replace('_', '-')} needs {count} comma-separated values, got {raw!r}")
    try:
        return [float(p) for p in parts]
    except (TypeError, ValueError):
        raise UsageError(f"--{name.replace('_', '-')}: not a number in {raw!r}") from None


def parse_grid(raw):
    a, b, nodes = _floats(raw, 3, "grid")
    if nodes != int(nodes) or nodes < 2:
        raise UsageError(f"grid needs at least 2 nodes, got {nodes:g}")
    if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
        raise UsageError(f"grid needs finite a < b, got {a:g}, {b:g}")
    return a, b, int(nodes)


def _positive(name, value):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise UsageError(f"{name} must be a number, got {value!r}") from None
    if not value > 0:
        raise UsageError(f"{name} must be positive, got {value:g}")
    return value


def _normalise_keys(d: dict) -> dict:
    out = {}
    for key, val in d.items():
        key = key.replace("-", "_")
        out["lam" if key == "lambda" else key] = val
    return out


def load_config(path, command):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed config file {path}: {exc}") from None
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    merged = {k: v for k, v in data.items() if k not in COMMANDS}
    section = data.get(command) or {}
    if not isinstance(section, dict):
        raise UsageError(f"config section {command!r} must be an object")
    merged.update(section)
    return _normalise_keys(merged)


def merge_settings(args: argparse.Namespace) -> dict:
    """Defaults < config file < flags."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(load_config(args.config, args.command))
    for key, val in vars(args).items():
        if val is not None and key != "config":
            settings[key] = val
    return settings


def _params(s):
    missing = [name for name in ("n", "m", "lam") if s.get(name) is None]
    if missing:
        flags = ", ".join("--lambda" if m == "lam" else f"--{m}" for m in missing)
        raise UsageError(f"missing {flags}")
    try:
        return SpaceParams(int(s["n"]), int(s["m"]), float(s["lam"]), float(s.get("k") or 0.0))
    except (TypeError, ValueError, WarpError) as exc:
        raise UsageError(str(exc)) from None


def build_config(settings: dict) -> RunConfig:
    cmd = settings["command"]
    cfg = RunConfig(command=cmd)
    cfg.verify_tol = _positive("tol", settings["tol"])
    cfg.ode_tol = _positive("ode-tol", settings["ode_tol"])
    cfg.event_tol = _positive("event-tol", settings["event_tol"])
    nodes = settings.get("nodes")
    if nodes is not None and (int(nodes) != nodes or int(nodes) < 2):
        raise UsageError(f"nodes must be an integer >= 2, got {nodes}")
    cfg.output_path = settings.get("output")
    cfg.profile_path = settings.get("profile_out")
    cfg.input_path = settings.get("input")
    if settings.get("grid") is not None:
        cfg.grid = parse_grid(settings["grid"])
    if settings.get("format") not in ("json", "text"):
        raise UsageError("format must be 'json' or 'text'")
    cfg.options = {k: settings.get(k) for k in ("format", "method", "through_boundary", "nodes", "classify_tol",
                                                 "max_iter", "jobs", "out_dir", "list", "emit", "form",
                                                 "target", "free", "bracket", "t_end", "t_span", "t0",
                                                 "families", "ns", "ms", "direction", "shoot_tol")}
    if cmd in ("verify", "classify"):
        if not cfg.input_path:
            raise UsageError("--input is required")
        cfg.params = _params(settings)
    elif cmd in ("solve", "shoot"):
        cfg.params = _params(settings)
        init = {}
        for key in ("u0", "du0", "f0", "df0", "ddf0"):
            if settings.get(key) is not None:
                try:
                    init[key[:-1]] = float(settings[key])
                except (TypeError, ValueError):
                    raise UsageError(f"--{key} must be a number") from None
        cfg.initial = init
        if cmd == "solve":
            if settings.get("t_span") is None:
                raise UsageError("--t-span is required")
            cfg.options["t_span"] = _floats(settings["t_span"], 2, "t_span")
            need = [k for k in ("u", "du", "f", "df") if k not in init]
            if need:
                raise UsageError("missing " + ", ".join(f"--{k}0" for k in need))
        else:
            if not settings.get("target"):
                raise UsageError("--target is required")
            if not settings.get("free"):
                raise UsageError("--free is required")
            if settings.get("bracket") is None:
                raise UsageError("--bracket is required")
            cfg.options["bracket"] = _floats(settings["bracket"], 2, "bracket")
    elif cmd == "catalog":
        if bool(settings.get("list")) == bool(settings.get("emit")):
            raise UsageError("use exactly one of --list and --emit NAME")
        if settings.get("emit"):
            cfg.family = settings["emit"]
            for name in ("n", "m"):
                if settings.get(name) is None:
                    raise UsageError(f"--emit needs --{name}")
            cfg.constants = {k: settings.get(k) for k in ("C", "kbar", "a", "lam") if settings.get(k) is not None}
            cfg.params = None
            cfg.options["n"], cfg.options["m"] = int(settings["n"]), int(settings["m"])
    elif cmd == "sweep":
        cfg.options["families"] = _names(settings.get("families")) or catalog.family_names()
        cfg.options["ns"] = [int(x) for x in _names(settings.get("ns") or "3,4,5")]
        cfg.options["ms"] = [int(x) for x in _names(settings.get("ms") or "2,3")]
        cfg.options["nodes"] = int(settings.get("nodes") or 501)
    return cfg


def _names(raw):
    if raw is None:
        return []
    if isinstance(raw, (list, tuple)):
        return [str(x) for x in raw]
    return [p.strip() for p in str(raw).split(",") if p.strip()]


# reports

def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for key, val in obj.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), val, out)
    elif isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        for i, val in enumerate(obj):
            _flatten(f"{prefix}.{i}", val, out)
    else:
        if isinstance(obj, list):
            obj = ";".join(_scalar_text(v) for v in obj)
        else:
            obj = _scalar_text(obj)
        out.append(f"{prefix}={obj}")


def _scalar_text(v):
    if isinstance(v, float):
        return "%.17g" % v
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def render(report: dict, fmt: str) -> str:
    report = _jsonable(report)
    if fmt == "text":
        lines = []
        _flatten("", report, lines)
        return "\n".join(lines) + "\n"
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _write(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def mu_stats(profile) -> dict:
    st = profile.states
    keep = np.asarray(st.u > 0) & np.isfinite(st.u) & np.isfinite(st.f)
    if not np.any(keep):
        return {"min": None, "max": None, "mean": None, "spread": None, "nodes": 0}
    mu = np.asarray(mu_invariant(st[keep], profile.params), dtype=float)
    return {"min": float(mu.min()), "max": float(mu.max()), "mean": float(mu.mean()),
            "spread": float(mu.max() - mu.min()), "nodes": int(mu.size)}


def _ends(profile, tol, oddness=False) -> dict:
    out = {}
    for which in ("left", "right"):
        try:
            out[which] = classify_endpoint(profile, which, tol=tol, oddness=oddness).as_dict()
        except AmbiguousEndpointError as exc:
            out[which] = {"kind": None, "error": str(exc)}
    return out


# commands

def cmd_verify(cfg: RunConfig) -> int:
    prof = read_profile_csv(cfg.input_path, cfg.params)
    rep = verify(prof, cfg.verify_tol)
    report = {
        "command": "verify",
        "input": cfg.input_path,
        "params": cfg.params.as_dict(),
        "tolerances": {"verify_tol": cfg.verify_tol},
        "residuals": rep.as_dict(),
        "mu": mu_stats(prof),
        "endpoints": _ends(prof, cfg.options["classify_tol"]),
        "verdict": rep.verdict_text,
    }
    _write(render(report, cfg.options["format"]), cfg.output_path)
    return EXIT_OK if rep.verdict else EXIT_FAIL


def cmd_classify(cfg: RunConfig) -> int:
    prof = read_profile_csv(cfg.input_path, cfg.params)
    tol = cfg.options["classify_tol"]
    ends = {which: classify_endpoint(prof, which, tol=tol, oddness=False).as_dict() for which in ("left", "right")}
    report = {"command": "classify", "input": cfg.input_path, "params": cfg.params.as_dict(),
              "tolerances": {"classify_tol": tol}, "endpoints": ends,
              "radial_geodesic_case": ends["left"]["diagnostics"].get("radial_geodesic_case")}
    _write(render(report, cfg.options["format"]), cfg.output_path)
    return EXIT_OK


def _grid_or_none(cfg):
    if cfg.grid is None:
        return None
    a, b, nodes = cfg.grid
    return np.linspace(a, b, nodes)


def cmd_solve(cfg: RunConfig) -> int:
    a, b = cfg.options["t_span"]
    t0 = cfg.options.get("t0")
    t0 = a if t0 is None else float(t0)
    init = IVPState(t0, cfg.initial["u"], cfg.initial["du"], cfg.initial["f"], cfg.initial["df"],
                    cfg.initial.get("ddf"))
    prof = integrate(init, cfg.params, (a, b), cfg.ode_tol, grid=_grid_or_none(cfg),
                     method=cfg.options.get("method") or "rk", through_boundary=bool(cfg.options.get("through_boundary")),
                     event_tol=cfg.event_tol, nodes=int(cfg.options.get("nodes") or 201))
    if cfg.profile_path:
        write_profile_csv(prof, cfg.profile_path)
    check_tol = 100 * cfg.ode_tol
    try:
        rep = verify(prof, check_tol).as_dict()
    except MalformedProfileError as exc:
        rep = {"error": str(exc)}
    report = {
        "command": "solve",
        "params": cfg.params.as_dict(),
        "initial": init.as_dict(),
        "tolerances": {"ode_tol": cfg.ode_tol, "event_tol": cfg.event_tol, "verify_tol": check_tol},
        "span": [a, b],
        "reached": [float(prof.ts[0]), float(prof.ts[-1])],
        "endpoints": {"left": prof.left_end.as_dict(), "right": prof.right_end.as_dict()},
        "events": [{k: v for k, v in ev.items()} for ev in prof.events],
        "mu": mu_stats(prof),
        "residuals": rep,
        "profile": cfg.profile_path,
    }
    _write(render(report, cfg.options["format"]), cfg.output_path)
    return EXIT_OK


def cmd_shoot(cfg: RunConfig) -> int:
    free = cfg.options["free"].replace("0", "")
    fixed = {k: v for k, v in cfg.initial.items() if k != free}
    t0 = cfg.options.get("t0")
    fixed["t"] = 0.0 if t0 is None else float(t0)
    t_end = cfg.options.get("t_end")
    kwargs = {}
    if cfg.options.get("direction") is not None:
        kwargs["direction"] = int(cfg.options["direction"])
    try:
        problem = ShootingProblem(cfg.params, cfg.options["target"], free, fixed, tuple(cfg.options["bracket"]),
                                  tol=_positive("tol", cfg.options["shoot_tol"]), t_end=None if t_end is None else float(t_end),
                                  ode_tol=cfg.ode_tol, method=cfg.options.get("method") or "rk",
                                  max_iter=int(cfg.options.get("max_iter") or 60), **kwargs)
    except BracketError:
        raise
    except WarpError as exc:
        # inconsistent problem statement, not a numerical failure
        raise UsageError(str(exc)) from None
    res = solve_shooting(problem)
    if cfg.profile_path:
        write_profile_csv(res.profile, cfg.profile_path)
    report = {"command": "shoot", "params": cfg.params.as_dict(), "target": problem.target, "free": free,
              "bracket": list(problem.bracket), "tolerances": {"tol": problem.tol, "ode_tol": problem.ode_tol},
              "result": res.as_dict()}
    _write(render(report, cfg.options["format"]), cfg.output_path)
    return EXIT_OK


def cmd_catalog(cfg: RunConfig) -> int:
    fmt = cfg.options["format"]
    if cfg.options.get("list"):
        _write(render({"command": "catalog", "cells": catalog.list_table()}, fmt), cfg.output_path)
        return EXIT_OK
    c = cfg.constants
    fam = catalog.instantiate(cfg.family, cfg.options["n"], cfg.options["m"], C=c.get("C"), kbar=c.get("kbar"),
                              a=c.get("a"), lam=c.get("lam"), form=cfg.options.get("form") or "resolved")
    if cfg.grid is None:
        ts = catalog.interior_grid(fam, 501)
    else:
        ts = _grid_or_none(cfg)
    prof = catalog.sample(fam, ts)
    csv_text = profile_to_csv(prof)
    if cfg.profile_path:
        _write(csv_text, cfg.profile_path)
        report = {"command": "catalog", "family": fam.as_dict(), "grid": [float(ts[0]), float(ts[-1]), int(ts.size)],
                  "profile": cfg.profile_path, "mu": mu_stats(prof)}
        _write(render(report, fmt), cfg.output_path)
    else:
        _write(csv_text, cfg.output_path)
    return EXIT_OK


def sweep_one(name, n, m, nodes, tol, out_dir=None) -> dict:
    """Emit and verify one catalog family; safe to run in a worker process."""
    fam = catalog.instantiate(name, n, m)
    prof = catalog.sample(fam, catalog.interior_grid(fam, nodes))
    rep = verify(prof, tol)
    entry = {"family": name, "n": n, "m": m, "verdict": rep.verdict_text, "r_second": rep.r_second,
             "r_compat": rep.r_compat, "r_first": rep.r_first, "mu": mu_stats(prof),
             "expected_mu": fam.expected_mu}
    if out_dir:
        stem = os.path.join(out_dir, f"{name}_n{n}_m{m}")
        write_profile_csv(prof, stem + ".csv")
        with open(stem + ".json", "w") as fh:
            fh.write(render({"family": fam.as_dict(), "residuals": rep.as_dict(), "mu": entry["mu"]}, "json"))
    return entry


def cmd_sweep(cfg: RunConfig) -> int:
    o = cfg.options
    out_dir = o.get("out_dir")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    for name in o["families"]:
        if name not in catalog.FAMILIES and name not in catalog.ALIASES:
            raise UnknownFamilyError(f"unknown family {name!r}")
    jobs = [(name, n, m, o["nodes"], cfg.verify_tol, out_dir) for name in o["families"] for n in o["ns"]
            for m in o["ms"]]
    workers = int(o.get("jobs") or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(sweep_one, *zip(*jobs)))
    else:
        runs = [sweep_one(*job) for job in jobs]
    ok = all(r["verdict"] == "pass" for r in runs)
    report = {"command": "sweep", "tolerances": {"verify_tol": cfg.verify_tol}, "nodes": o["nodes"], "runs": runs,
              "verdict": "pass" if ok else "fail"}
    _write(render(report, o["format"]), cfg.output_path)
    return EXIT_OK if ok else EXIT_FAIL


HANDLERS = {"verify": cmd_verify, "solve": cmd_solve, "shoot": cmd_shoot, "catalog": cmd_catalog,
            "classify": cmd_classify, "sweep": cmd_sweep}


def run(config: RunConfig) -> int:
    return HANDLERS[config.command](config)


# argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="JSON", help="config file; flags override its values")
    common.add_argument("-o", "--output", metavar="PATH", help="report destination (default stdout)")
    common.add_argument("--format", choices=["json", "text"], help="report format (default json)")

    space = argparse.ArgumentParser(add_help=False)
    space.add_argument("--n", type=int, help="base dimension")
    space.add_argument("--m", type=int, help="fiber dimension")
    space.add_argument("--lambda", dest="lam", type=float, help="Einstein constant")
    space.add_argument("--k", type=float, help="curvature of N, Ric_N = k (n-2) g_N (default 0)")

    data = argparse.ArgumentParser(add_help=False)
    for name in ("u0", "du0", "f0", "df0", "ddf0"):
        data.add_argument(f"--{name}", type=float)
    data.add_argument("--t0", type=float, help="time of the initial data")
    data.add_argument("--ode-tol", type=float)
    data.add_argument("--method", choices=["rk", "taylor"])
    data.add_argument("--profile-out", metavar="CSV", help="write the computed profile here")

    parser = argparse.ArgumentParser(prog="warpein",
                                     description="Verify, integrate and classify warped-product Einstein profiles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common, space], help="residuals of a profile file")
    p.add_argument("--input", metavar="CSV")
    p.add_argument("--tol", type=float)
    p.add_argument("--classify-tol", type=float)

    p = sub.add_parser("solve", parents=[common, space, data], help="integrate an initial-value problem")
    p.add_argument("--t-span", metavar="A,B")
    p.add_argument("--event-tol", type=float)
    p.add_argument("--grid", metavar="A,B,N")
    p.add_argument("--nodes", type=int)
    p.add_argument("--through-boundary", action="store_true", default=None)

    p = sub.add_parser("shoot", parents=[common, space, data], help="shoot for an endpoint kind")
    p.add_argument("--target", choices=["boundary", "critical-min", "critical-max"])
    p.add_argument("--free", choices=["u0", "du0", "f0", "df0", "ddf0"])
    p.add_argument("--bracket", metavar="A,B")
    p.add_argument("--t-end", type=float, help="where a boundary target must be reached")
    p.add_argument("--direction", type=int, choices=[-1, 1])
    p.add_argument("--tol", dest="shoot_tol", type=float, help="endpoint tolerance (default 1e-6)")
    p.add_argument("--max-iter", type=int)

    p = sub.add_parser("catalog", parents=[common], help="list or sample closed-form families")
    p.add_argument("--list", action="store_true", default=None)
    p.add_argument("--emit", metavar="NAME")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--grid", metavar="A,B,N")
    p.add_argument("--C", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--kbar", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--form", choices=["resolved", "table"])
    p.add_argument("--profile-out", metavar="CSV")

    p = sub.add_parser("classify", parents=[common, space], help="classify the ends of a profile file")
    p.add_argument("--input", metavar="CSV")
    p.add_argument("--classify-tol", "--tol", dest="classify_tol", type=float)

    p = sub.add_parser("sweep", parents=[common], help="verify catalog families over many (n, m)")
    p.add_argument("--families", metavar="NAMES")
    p.add_argument("--ns", metavar="LIST", help="base dimensions, e.g. 3,4,5")
    p.add_argument("--ms", metavar="LIST", help="fiber dimensions, e.g. 2,3")
    p.add_argument("--nodes", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--out-dir", metavar="DIR")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(merge_settings(args))
        return run(cfg)
    except OSError as exc:
        where = f" {exc.filename}" if exc.filename else ""
        print(f"warpein: error: cannot access{where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError,) + USAGE_ERRORS as exc:
        print(f"warpein: error: {_one_line(exc)}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"warpein: numerical failure: {_one_line(exc)}", file=sys.stderr)
        return EXIT_NUMERIC
    except WarpError as exc:
        print(f"warpein: numerical failure: {_one_line(exc)}", file=sys.stderr)
        return EXIT_NUMERIC


def _one_line(exc):
    msg = str(exc).strip().splitlines()
    return msg[0] if msg else exc.__class__.__name__


if __name__ == "__main__":
    sys.exit(main())
