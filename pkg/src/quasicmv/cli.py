"""Batch command line: ``quasicmv <command> CONFIG [options]``.

Every run writes CSV data and a ``manifest.json`` into the output directory,
including failed runs.  The output directory defaults to $QUASICMV_OUT_DIR,
then ``./quasicmv-out``.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import platform
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .cmv import build, dump_matrix_market
from .cocycle import lyapunov
from .frequency import NAMED
from .greens import NearSingularError, greens_direct
from .lab import (CapError, SCHEMA_VERSION, ldt_curves, localization_report, positivity_scan,
                  spectrum, write_json, decay_rate)
from .sampling import (DomainError, StripError, TrigPolynomial, ZhangForm, phase_polynomial,
                       sequence)
from .walk import LightConeError, build_walk, coins_from_alpha_function, random_coins, simulate

ENV_OUT_DIR = "QUASICMV_OUT_DIR"
COMMANDS = ("lyapunov", "spectrum", "greens", "ldt", "walk", "localize", "scan")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_SCHEMA = 2
EXIT_DOMAIN = 3
EXIT_STRIP = 4
EXIT_CAP = 5
EXIT_NEAR_SINGULAR = 6
EXIT_LIGHT_CONE = 7


class ConfigError(ValueError):
    pass


_number = {"type": "number"}
_complex = {"oneOf": [_number, {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}]}
_coeffs = {"type": "array", "items": {"type": "array", "items": _number, "minItems": 2,
                                      "maxItems": 3}}
_window = {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}
_ints = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}
_numbers = {"type": "array", "items": _number, "minItems": 1}

SAMPLING_SCHEMA = {
    "oneOf": [
        {"type": "object", "required": ["type", "value"], "additionalProperties": False,
         "properties": {"type": {"const": "constant"}, "value": _complex}},
        {"type": "object", "required": ["type", "coeffs"], "additionalProperties": False,
         "properties": {"type": {"const": "trig"}, "coeffs": _coeffs, "strip": _number}},
        {"type": "object", "required": ["type", "lambda"], "additionalProperties": False,
         "properties": {"type": {"const": "zhang"}, "lambda": _number,
                        "k": {"type": "integer"}, "theta": _coeffs, "theta_cos": _number}},
    ]
}

COMMAND_SCHEMAS = {
    "lyapunov": {"t": _numbers, "schedule": _ints, "grid": {"type": "integer", "minimum": 1}},
    "spectrum": {"window": _window, "beta_t": _number, "gamma_t": _number,
                 "cap": {"type": "integer", "minimum": 1}, "dump": {"type": "boolean"}},
    "greens": {"window": _window, "beta_t": _number, "gamma_t": _number, "t": _number},
    "ldt": {"t": _number, "kappas": _numbers, "n_schedule": _ints,
            "grid": {"type": "integer", "minimum": 1}, "n_min": {"type": "integer"},
            "strip_norm": _number},
    "walk": {"window": _window, "T": {"type": "integer", "minimum": 1},
             "start": {"type": "integer"}, "spin": {"enum": ["up", "down"]},
             "coins": {"enum": ["alpha", "random"]}},
    "localize": {"window": _window, "arc": {"type": "array", "items": _number, "minItems": 2,
                                            "maxItems": 2},
                 "beta_t": _number, "gamma_t": _number,
                 "lyap_n": {"type": "integer", "minimum": 1},
                 "lyap_grid": {"type": "integer", "minimum": 1},
                 "tail": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
                 "r2_min": _number, "min_points": {"type": "integer"},
                 "cap": {"type": "integer", "minimum": 1}},
    "scan": {"k": {"type": "integer"}, "theta": _coeffs, "theta_cos": _number,
             "lambdas": _numbers, "omegas": {"type": "array", "minItems": 1},
             "ts": _numbers, "n": {"type": "integer", "minimum": 1},
             "grid": {"type": "integer", "minimum": 1}, "form": {"enum": ["szego", "walk"]}},
}


def config_schema(command: str) -> dict:
    needs_sampling = command != "scan"
    return {
        "type": "object",
        "required": ["schema"] + (["sampling", "frequency"] if needs_sampling else []),
        "properties": {
            "schema": {"const": SCHEMA_VERSION},
            "sampling": SAMPLING_SCHEMA,
            "frequency": {"oneOf": [_number, {"enum": sorted(NAMED)}]},
            "x0": _number,
            command: {"type": "object", "properties": COMMAND_SCHEMAS[command],
                      "additionalProperties": False},
        },
    }


def _complex_value(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _coeff_dict(rows) -> dict:
    return {int(r[0]): complex(r[1], r[2] if len(r) > 2 else 0.0) for r in rows}


def _theta(block):
    if "theta" in block:
        return phase_polynomial(_coeff_dict(block["theta"]))
    amp = block.get("theta_cos")
    if amp:
        return phase_polynomial({1: amp / 2, -1: amp / 2})
    return None


def make_sampling(block: dict):
    kind = block["type"]
    if kind == "constant":
        return TrigPolynomial.constant(_complex_value(block["value"]))
    if kind == "trig":
        return TrigPolynomial(_coeff_dict(block["coeffs"]), strip=block.get("strip", np.inf))
    return ZhangForm(float(block["lambda"]), int(block.get("k", 1)), _theta(block))


def frequency_value(v) -> float:
    return NAMED[v] if isinstance(v, str) else float(v)


def _unit(t: float) -> complex:
    return complex(np.exp(2j * np.pi * t))


def _fmt(x) -> str:
    return repr(float(x))


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def apply_override(cfg: dict, assignment: str) -> tuple[str, object]:
    """Apply ``a.b.c=VALUE`` (VALUE parsed as JSON, else kept as a string)."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {key!r} crosses a non-object")
    node[parts[-1]] = value
    return key, value


# each runner returns the list of files it wrote

def run_lyapunov(cfg, params, out: Path, ctx) -> list[str]:
    f = make_sampling(cfg["sampling"])
    w = frequency_value(cfg["frequency"])
    schedule = params.get("schedule", [64, 128, 256])
    grid = params.get("grid", 1024)
    rows = []
    ts = params.get("t", [0.0])

    def one(t):
        return t, lyapunov(f, w, _unit(t), schedule, grid)

    for t, est in ctx["map"](one, ts):
        for n, v in est.values.items():
            rows.append([_fmt(t), n, _fmt(v), _fmt(est.estimate), _fmt(est.uncertainty),
                         int(est.divisibility_ok)])
    _write_rows(out / "lyapunov.csv", ["t", "n", "L_n", "estimate", "uncertainty",
                                       "divisibility_ok"], rows)
    return ["lyapunov.csv"]


def _section(cfg, params):
    f = make_sampling(cfg["sampling"])
    w = frequency_value(cfg["frequency"])
    lo, hi = params.get("window", [0, 99])
    seq = sequence(f, w, cfg.get("x0", 0.0), (lo - 1, hi + 1))
    return seq, lo, hi, _unit(params.get("beta_t", 0.0)), _unit(params.get("gamma_t", 0.0))


def run_spectrum(cfg, params, out, ctx):
    seq, lo, hi, beta, gamma = _section(cfg, params)
    E = build(seq, (lo, hi), beta=beta, gamma=gamma)
    pairs = spectrum(E, params.get("cap", 2000))
    rows = []
    for i, p in enumerate(pairs):
        fit = decay_rate(p.xi)
        rows.append([i, _fmt(p.z.real), _fmt(p.z.imag), _fmt(np.angle(p.z) % (2 * np.pi)),
                     _fmt(p.residual), lo + fit.center])
    _write_rows(out / "spectrum.csv", ["index", "re", "im", "arg", "residual", "peak_site"], rows)
    files = ["spectrum.csv"]
    if params.get("dump", True):
        dump_matrix_market(E, out / "operator.mtx")
        files.append("operator.mtx")
    return files


def run_greens(cfg, params, out, ctx):
    seq, lo, hi, beta, gamma = _section(cfg, params)
    g = greens_direct(seq, (lo, hi), beta, gamma, _unit(params.get("t", 0.0)))
    g.to_csv(out / "greens.csv")
    return ["greens.csv"]


def run_ldt(cfg, params, out, ctx):
    f = make_sampling(cfg["sampling"])
    w = frequency_value(cfg["frequency"])
    curves = ldt_curves(f, w, _unit(params.get("t", 0.0)), params.get("kappas", [0.1]),
                        params.get("n_schedule", [32, 64, 128, 256, 512, 1024]),
                        params.get("grid", 1024), params.get("strip_norm"),
                        params.get("n_min", 0))
    rows = []
    for c in curves:
        for n, m, L in zip(c.ns, c.measures, c.lyapunov):
            rows.append([_fmt(c.kappa), int(n), _fmt(m), _fmt(L), _fmt(c.slope), _fmt(c.r2),
                         _fmt(c.implied_c1)])
    _write_rows(out / "ldt.csv", ["kappa", "n", "measure", "L_n", "slope", "r2", "implied_c1"],
                rows)
    return ["ldt.csv"]


def run_walk(cfg, params, out, ctx):
    lo, hi = params.get("window", [-200, 200])
    T = params.get("T", 100)
    if params.get("coins", "alpha") == "random":
        coins = random_coins(np.random.default_rng(ctx["seed"]), lo, hi)
    else:
        f = make_sampling(cfg["sampling"])
        coins = coins_from_alpha_function(f, frequency_value(cfg["frequency"]),
                                          cfg.get("x0", 0.0), (lo, hi))
    U = build_walk(coins)
    psi0 = np.zeros(U.size, complex)
    psi0[U.flat_index(params.get("start", 0), 0 if params.get("spin", "up") == "up" else 1)] = 1
    simulate(U, psi0, T).to_csv(out / "walk.csv")
    return ["walk.csv"]


def run_localize(cfg, params, out, ctx):
    f = make_sampling(cfg["sampling"])
    w = frequency_value(cfg["frequency"])
    rep = localization_report(
        f, w, cfg.get("x0", 0.0), tuple(params.get("window", [0, 499])),
        boundary=(_unit(params.get("beta_t", 0.0)), _unit(params.get("gamma_t", 0.0))),
        arc=tuple(params.get("arc", [0.0, 2 * np.pi])), lyap_n=params.get("lyap_n", 256),
        lyap_grid=params.get("lyap_grid", 256), tail=tuple(params.get("tail", [0.25, 0.9])),
        r2_min=params.get("r2_min", 0.9), min_points=params.get("min_points", 20),
        cap=params.get("cap", 2000))
    rep.to_csv(out / "localize.csv")
    write_json(rep.summary(), out / "localize.json")
    return ["localize.csv", "localize.json"]


def run_scan(cfg, params, out, ctx):
    scan = positivity_scan(
        int(params.get("k", 1)), _theta(params), params.get("lambdas", [0.5, 0.9, 0.99]),
        [frequency_value(v) for v in params.get("omegas", ["golden"])],
        params.get("ts", [0.0]), params.get("n", 256), params.get("grid", 256),
        params.get("form", "szego"), mapper=ctx["map"])
    scan.to_csv(out / "scan.csv")
    write_json(scan.summary(), out / "scan.json")
    return ["scan.csv", "scan.json"]


RUNNERS = {"lyapunov": run_lyapunov, "spectrum": run_spectrum, "greens": run_greens,
           "ldt": run_ldt, "walk": run_walk, "localize": run_localize, "scan": run_scan}


def error_code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, jsonschema.ValidationError, json.JSONDecodeError)):
        return EXIT_SCHEMA
    if isinstance(exc, StripError):
        return EXIT_STRIP
    if isinstance(exc, CapError):
        return EXIT_CAP
    if isinstance(exc, NearSingularError):
        return EXIT_NEAR_SINGULAR
    if isinstance(exc, LightConeError):
        return EXIT_LIGHT_CONE
    if isinstance(exc, (DomainError, ValueError)):
        return EXIT_DOMAIN
    return EXIT_INTERNAL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quasicmv", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("config", help="JSON config file")
    p.add_argument("--out-dir", default=None,
                   help=f"output directory (default ${ENV_OUT_DIR} or ./quasicmv-out)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized inputs")
    p.add_argument("--threads", type=int, default=1, help="worker threads for scans")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field, e.g. --set ldt.grid=512")
    return p


def run(command: str, config_path, out_dir=None, seed: int = 0, threads: int = 1,
        overrides=()) -> int:
    out = Path(out_dir or os.environ.get(ENV_OUT_DIR) or "quasicmv-out")
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "manifest_schema": SCHEMA_VERSION, "command": command, "config_path": str(config_path),
        "seed": seed, "threads": threads, "overrides": {}, "config": None, "files": [],
        "versions": {"quasicmv": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
    }
    t0 = time.perf_counter()
    code = EXIT_OK
    pool = None
    try:
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        with open(config_path) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        cfg = copy.deepcopy(cfg)
        for a in overrides:
            k, v = apply_override(cfg, a)
            manifest["overrides"][k] = v
        manifest["config"] = cfg
        jsonschema.validate(cfg, config_schema(command))
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
        if threads > 1:
            pool = ThreadPoolExecutor(threads)
            mapper = pool.map
        else:
            mapper = map
        ctx = {"seed": seed, "map": mapper}
        manifest["files"] = RUNNERS[command](cfg, cfg.get(command, {}), out, ctx)
        manifest["status"] = "ok"
    except Exception as exc:  # every failure still produces a manifest
        code = error_code(exc)
        manifest["status"] = "error"
        manifest["error"] = {"code": code, "type": type(exc).__name__, "message": str(exc)}
        if code == EXIT_INTERNAL:
            manifest["error"]["traceback"] = traceback.format_exc()
    finally:
        if pool is not None:
            pool.shutdown()
    manifest["exit_code"] = code
    manifest["timings"] = {"elapsed_s": round(time.perf_counter() - t0, 6)}
    write_json(manifest, out / "manifest.json")
    if code:
        print(f"quasicmv: error {code}: {manifest['error']['message']}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.command, args.config, args.out_dir, args.seed, args.threads, args.set)
