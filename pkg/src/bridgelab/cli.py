"""Command-line driver: ``bridgelab <command> [--config file.json] [flags]``.

Each command writes its outputs plus ``manifest.json`` into ``--out``.  All
outputs carry the sha1 hash of the resolved config; the wall-clock
timestamp appears only in the manifest, so reruns are byte-identical
elsewhere.  Exit codes: 0 ok, 2 config error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import copy
import csv
import datetime
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import _backend
from .attractor import (basin_sweep, decay_rates, decompose_simulate,
                        reports_jsonl, sample_ball)
from .diagnostics import COLUMNS, energy_identity_residual, guaranteed_rate
from .dynamics import IntegrationError, simulate
from .equilibria import (ConvergenceError, branch_csv, catalog_json, continue_branch, multistart,
                         newton_solve, single_mode_equilibria)
from .modal import ModalField, State
from .params import BridgeParams, ForcingSpec, Sinusoid

COMMANDS = ("simulate", "steady", "bifurcate", "decay", "omega", "decompose", "audit")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_num = {"type": "number"}
_coeffs = {"type": "array", "items": _num, "minItems": 1}
_field = {"oneOf": [_coeffs, {"type": "object", "additionalProperties": False,
                              "required": ["mode"],
                              "properties": {"mode": {"type": "integer", "minimum": 1},
                                             "amplitude": _num}}]}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "params": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "p": _num, "b": _num, "k": {"type": "number", "minimum": 0}, "kappa": _num,
                "N": {"type": "integer", "minimum": 1},
                "M": {"type": "integer", "minimum": 2},
                "damping": {"type": "number", "exclusiveMinimum": 0},
                "forcing": {
                    "type": "object", "additionalProperties": False,
                    "properties": {
                        "static": _field, "modulated": _field,
                        "modulation": {"type": "object", "additionalProperties": False,
                                       "properties": {"amplitude": _num, "omega": _num,
                                                      "phase": _num}},
                    },
                },
            },
        },
        "init": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "preset": {"enum": ["rest", "mode1", "near-negative-branch",
                                    "near-positive-branch"]},
                "u": _coeffs, "v": _coeffs,
                "random": {"type": "object", "additionalProperties": False,
                           "properties": {"radius": {"type": "number", "minimum": 0},
                                          "index": {"type": "integer", "minimum": 0}}},
            },
        },
        "time": {
            "type": "object", "additionalProperties": False,
            "properties": {"T": {"type": "number", "exclusiveMinimum": 0},
                           "dt": {"type": "number", "exclusiveMinimum": 0},
                           "stride": {"type": "integer", "minimum": 1},
                           "scheme": {"enum": ["exponential", "rk4"]}},
        },
        "options": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "b_range": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "b_step": {"type": "number", "exclusiveMinimum": 0},
                "count": {"type": "integer", "minimum": 1},
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "window": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "refinements": {"type": "integer", "minimum": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}

DEFAULTS = {
    "seed": 0,
    "params": {"p": 0.0, "k": 0.0, "N": 16, "damping": 1.0},
    "init": {"preset": "mode1"},
    "time": {"T": 10.0, "dt": 1e-3, "stride": 1, "scheme": "exponential"},
    "options": {},
}

COMMAND_DEFAULTS = {
    "decay": {"time": {"T": 30.0, "stride": 10}, "options": {"count": 4, "radius": 0.1}},
    "omega": {"time": {"T": 200.0}, "params": {"b": 3.0, "kappa": 1.0},
              "options": {"count": 64, "radius": 10.0}},
    "decompose": {"time": {"T": 50.0, "stride": 10}, "params": {"b": 3.0, "kappa": 1.0},
                  "init": {"random": {"radius": 10.0}}},
    "bifurcate": {"params": {"kappa": 1.0}, "options": {"b_range": [0.0, 4.0], "b_step": 0.05}},
}


class ConfigError(ValueError):
    def __init__(self, message, pointer=""):
        super().__init__(message)
        self.pointer = pointer


def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def validate(cfg):
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        pointer = "/" + "/".join(str(p) for p in exc.absolute_path)
        raise ConfigError(exc.message, pointer) from None


def _parse_range(text):
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"--b-range expects LO:HI, got {text!r}", "/options/b_range") from None
    return [lo, hi]


def resolve_config(args) -> dict:
    """File values, then flag overrides, then defaults; validated before and after merging."""
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}", "") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object", "")
        validate(cfg)
    over = {"params": {}, "time": {}, "options": {}}
    for flag, section, key in (("n_modes", "params", "N"), ("quad_intervals", "params", "M"),
                               ("p", "params", "p"), ("b", "params", "b"),
                               ("k", "params", "k"), ("kappa", "params", "kappa"),
                               ("dt", "time", "dt"), ("T", "time", "T"),
                               ("stride", "time", "stride"), ("count", "options", "count"),
                               ("b_step", "options", "b_step"), ("radius", "options", "radius")):
        val = getattr(args, flag, None)
        if val is not None:
            over[section][key] = val
    if getattr(args, "b_range", None):
        over["options"]["b_range"] = _parse_range(args.b_range)
    if args.seed is not None:
        over["seed"] = args.seed
    threads = args.threads
    if threads is None and os.environ.get("BRIDGELAB_THREADS"):
        try:
            threads = int(os.environ["BRIDGELAB_THREADS"])
        except ValueError:
            raise ConfigError("BRIDGELAB_THREADS must be an integer", "/threads") from None
    if threads is not None:
        over["threads"] = threads
    # flags on load/stiffness replace whichever form the file used
    fp = cfg.get("params", {})
    if {"p", "b"} & over["params"].keys():
        fp.pop("p", None), fp.pop("b", None)
    if {"k", "kappa"} & over["params"].keys():
        fp.pop("k", None), fp.pop("kappa", None)
    cfg = _merge(cfg, over)
    cfg["command"] = args.command
    par = cfg.get("params", {})
    if "p" in par and "b" in par:
        raise ConfigError("give either p or b, not both", "/params")
    if "k" in par and "kappa" in par:
        raise ConfigError("give either k or kappa, not both", "/params")
    extra = COMMAND_DEFAULTS.get(args.command, {})
    base = _merge(DEFAULTS, extra)
    if "init" in extra:
        base["init"] = copy.deepcopy(extra["init"])
    bp = base["params"]
    for long, short in (("b", "p"), ("kappa", "k")):
        if long in par or short in par:
            bp.pop(long, None), bp.pop(short, None)
        elif long in bp:
            bp.pop(short)
    if "init" in cfg:
        base["init"] = {}
    cfg = _merge(base, cfg)
    validate(cfg)
    return cfg


def config_hash(cfg) -> str:
    """git blob sha1 of the canonical JSON form of the config.

    The worker count is left out: results do not depend on it.
    """
    cfg = {k: v for k, v in cfg.items() if k != "threads"}
    data = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _field_of(spec, order):
    if spec is None:
        return None
    if isinstance(spec, dict):
        return ModalField.mode(spec["mode"], order, spec.get("amplitude", 1.0))
    return ModalField(np.asarray(spec, dtype=float)).resized(order)


def build_params(cfg) -> BridgeParams:
    par = cfg["params"]
    n = par["N"]
    fcfg = par.get("forcing", {})
    mod = fcfg.get("modulation")
    forcing = ForcingSpec(static=_field_of(fcfg.get("static"), n),
                          modulation=None if mod is None else Sinusoid(**mod),
                          modulated=_field_of(fcfg.get("modulated"), n))
    p = par["b"] * np.pi ** 2 if "b" in par else par["p"]
    k = abs(par["kappa"]) * np.pi ** 2 if "kappa" in par else par["k"]
    try:
        return BridgeParams(p=float(p), k=float(k), forcing=forcing, N=n, M=par.get("M"),
                            damping=par["damping"])
    except ValueError as exc:
        raise ConfigError(str(exc), "/params") from None


def build_init(cfg, params: BridgeParams) -> State:
    ini = cfg["init"]
    n = params.N
    if "random" in ini:
        r = ini["random"]
        return sample_ball(n, r.get("radius", 1.0), cfg["seed"], r.get("index", 0))
    if "u" in ini or "v" in ini:
        u = _field_of(ini.get("u", [0.0]), n)
        v = _field_of(ini.get("v", [0.0]), n)
        return State(u, v)
    preset = ini.get("preset", "mode1")
    if preset == "rest":
        return State.zeros(n)
    if preset == "mode1":
        return State(ModalField.mode(1, n, 0.1), ModalField.zeros(n))
    label = "mode1-negative" if preset == "near-negative-branch" else "mode1-positive"
    eqs = {e.branch_label: e for e in single_mode_equilibria(params.b, params.kappa, N=n,
                                                              M=params.M)}
    if label not in eqs:
        raise ConfigError(f"preset {preset!r} does not exist at b = {params.b}", "/init/preset")
    u = eqs[label].field + ModalField.mode(2, n, 0.01)
    return State(u, ModalField.mode(1, n, 0.05))


def fmt(x) -> str:
    return format(float(x), ".17g")


def trajectory_csv(traj, chash: str) -> str:
    n = traj.params.N
    buf = io.StringIO()
    buf.write(f"# config_hash: {chash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"a{i}" for i in range(1, n + 1)] + [f"v{i}" for i in range(1, n + 1)]
               + list(COLUMNS))
    cols = [traj.column(c) for c in COLUMNS]
    for i in range(len(traj)):
        row = [traj.times[i], *traj.positions[i], *traj.velocities[i], *(c[i] for c in cols)]
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_simulate(cfg, params, chash):
    tm = cfg["time"]
    init = build_init(cfg, params)
    traj = simulate(params, init, tm["T"], dt=tm["dt"], stride=tm["stride"], scheme=tm["scheme"])
    return {"trajectory.csv": trajectory_csv(traj, chash),
            "final_state.json": _json({"config_hash": chash, "time": float(traj.times[-1]),
                                       "state": traj.final.to_dict()})}


def cmd_steady(cfg, params, chash):
    opt = cfg["options"]
    eqs = multistart(params, count=opt.get("count", 32), seed=cfg["seed"],
                     tol=opt.get("tol", 1e-9))
    cat = json.loads(catalog_json(eqs))
    return {"catalog.json": _json({"config_hash": chash, "equilibria": cat})}


def cmd_bifurcate(cfg, params, chash):
    opt = cfg["options"]
    lo, hi = opt["b_range"]
    if hi <= lo:
        raise ConfigError("b_range must satisfy LO < HI", "/options/b_range")
    step = opt["b_step"]
    tol = opt.get("tol", 1e-9)
    branches = []
    trivial = newton_solve(ModalField.zeros(params.N), params.with_(p=lo * np.pi ** 2), tol=tol,
                           label="trivial")
    branches.append(continue_branch(trivial, (lo, hi), step, base=params, tol=tol))
    for seed in single_mode_equilibria(hi, params.kappa, N=params.N, M=params.M)[1:]:
        branches.append(continue_branch(seed, (hi, lo), step, base=params, tol=tol))
    summary = {"config_hash": chash, "kappa": params.kappa, "b_range": [lo, hi],
               "branches": [{"label": br.label, "points": len(br.points), "origin_b": br.origin_b,
                             "reason": br.reason} for br in branches]}
    return {"branches.csv": f"# config_hash: {chash}\n" + branch_csv(branches),
            "branches.json": _json(summary)}


def cmd_decay(cfg, params, chash):
    opt = cfg["options"]
    tm = cfg["time"]
    T = tm["T"]
    window = opt.get("window", [T / 6.0, T])
    if not params.forcing.autonomous or np.any(params.forcing.static_coeffs(params.N)):
        raise ConfigError("decay experiments need f = 0", "/params/forcing")
    inits = [sample_ball(params.N, opt["radius"], cfg["seed"], i) for i in range(opt["count"])]
    rates = decay_rates(params, inits, T, window, dt=tm["dt"], stride=tm["stride"])
    try:
        cp, eps, c = guaranteed_rate(params.p)
    except ValueError:
        cp = eps = c = None
    out = {"config_hash": chash, "p": params.p, "k": params.k, "fitted_rates": rates,
           "min_fitted_rate": min(rates), "guaranteed_rate": c, "C_p": cp, "eps": eps,
           "window": window, "T": T}
    return {"decay.json": _json(out)}


def cmd_omega(cfg, params, chash):
    opt = cfg["options"]
    tm = cfg["time"]
    catalog = multistart(params, count=32, seed=cfg["seed"])
    reports, summary = basin_sweep(params, catalog, opt["count"], tm["T"],
                                   radius=opt["radius"], seed=cfg["seed"], dt=tm["dt"],
                                   tol=opt.get("tol", 1e-4), threads=cfg.get("threads"))
    summary["config_hash"] = chash
    summary["catalog"] = [e.branch_label for e in catalog]
    lines = "".join(json.dumps({"config_hash": chash, **json.loads(line)}, sort_keys=True) + "\n"
                    for line in reports_jsonl(reports).splitlines())
    return {"omega.jsonl": lines, "summary.json": _json(summary)}


def cmd_decompose(cfg, params, chash):
    tm = cfg["time"]
    init = build_init(cfg, params)
    rep = decompose_simulate(params, init, tm["T"], alpha=cfg["options"].get("alpha"),
                             dt=tm["dt"], stride=tm["stride"])
    return {"decomposition.json": _json({"config_hash": chash, **rep.to_dict(), "T": tm["T"]})}


def cmd_audit(cfg, params, chash):
    tm = cfg["time"]
    init = build_init(cfg, params)
    levels = cfg["options"].get("refinements", 3)
    rows = []
    for j in range(levels):
        dt = tm["dt"] / 2 ** j
        traj = simulate(params, init, tm["T"], dt=dt, stride=1, scheme=tm["scheme"])
        rows.append({"dt": dt, "residual": energy_identity_residual(traj)})
    ratios = [a["residual"] / b["residual"] if b["residual"] > 0 else None
              for a, b in zip(rows, rows[1:])]
    return {"audit.json": _json({"config_hash": chash, "levels": rows, "ratios": ratios})}


HANDLERS = {"simulate": cmd_simulate, "steady": cmd_steady, "bifurcate": cmd_bifurcate,
            "decay": cmd_decay, "omega": cmd_omega, "decompose": cmd_decompose,
            "audit": cmd_audit}


def build_parser():
    ap = argparse.ArgumentParser(prog="bridgelab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--n-modes", dest="n_modes", type=int)
        sp.add_argument("--quad-intervals", dest="quad_intervals", type=int)
        sp.add_argument("--dt", type=float)
        sp.add_argument("--T", type=float)
        sp.add_argument("--stride", type=int)
        load = sp.add_mutually_exclusive_group()
        load.add_argument("--p", type=float, help="axial load")
        load.add_argument("--b", type=float, help="axial load in units of pi^2")
        stiff = sp.add_mutually_exclusive_group()
        stiff.add_argument("--k", type=float, help="cable stiffness")
        stiff.add_argument("--kappa", type=float, help="cable stiffness in units of pi^2")
        sp.add_argument("--threads", type=int)
        if name == "bifurcate":
            sp.add_argument("--b-range", dest="b_range", help="LO:HI")
            sp.add_argument("--b-step", dest="b_step", type=float)
        if name in ("steady", "decay", "omega"):
            sp.add_argument("--count", type=int)
        if name in ("decay", "omega"):
            sp.add_argument("--radius", type=float)
    return ap


def _fail(code, kind, message, out=None, pointer=None):
    err = {"error": kind, "message": message, "exit_code": code}
    if pointer is not None:
        err["pointer"] = pointer
    text = json.dumps(err, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        params = build_params(cfg)
        chash = config_hash(cfg)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        outputs = HANDLERS[args.command](cfg, params, chash)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), args.out, exc.pointer)
    except (IntegrationError, ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, "numerical", str(exc), args.out)
    except ValueError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), args.out)
    for name, text in outputs.items():
        (out / name).write_text(text)
    manifest = {"command": args.command, "config": cfg, "config_hash": chash,
                "outputs": sorted(outputs), "backend": _backend.backend_name(),
                "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()}
    (out / "manifest.json").write_text(_json(manifest))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
