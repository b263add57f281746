"""Command-line driver: ``spinchaos <subcommand> --config run.json``.

Config files are JSON with sections ``model``, ``sweep``, ``dynamics``,
``control`` and ``output`` plus top-level ``seed``. Every default is
materialized into the resolved config, which is echoed in the manifest; a
manifest can be fed back as ``--config`` to reproduce the run.

Exit codes: 0 success, 1 computation error, 2 configuration error.
"""

import argparse
import copy
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import ConfigError, SpinChaosError
from .experiments import (
    ControlSettings,
    SweepSpec,
    check_symmetry_policy,
    run_control_sweep,
    run_eta_sweep,
    run_fluctuation_scaling,
    run_purity_sweep,
    run_temperature_sweep,
)
from .operators import MODEL_PARAMS, ModelKind, SpinModel
from .spectral import SectorPolicy

logger = logging.getLogger("spinchaos")

RUNNERS = {
    "purity-sweep": run_purity_sweep,
    "eta-sweep": run_eta_sweep,
    "fluctuations": run_fluctuation_scaling,
    "control-sweep": run_control_sweep,
    "temperature-sweep": run_temperature_sweep,
}
SUBCOMMANDS = (*RUNNERS, "validate")

DEFAULT_GRID = {"start": 0.01, "stop": 1.5, "num": 30}

DEFAULTS = {
    "experiment": "purity-sweep",
    "seed": None,
    "workers": None,
    "model": {"kind": "ising", "L": 6, "include_probe_hamiltonian": True,
              "random_couplings": None},
    "sweep": {"param": "h_z", "grid": DEFAULT_GRID, "realizations": 50, "eta_length": None,
              "sector": "odd", "n_up": None, "eta_realizations": 50, "betas": [0.0],
              "angle_uniform": False},
    "dynamics": {"T": 50.0, "dt": 0.1, "window": None},
    "control": {"protocol": "transfer", "T": 20.0, "n_ts": 20, "bounds": [-2.0, 2.0],
                "n_seeds": 10, "realizations": 1, "maxiter": 200},
    "output": {"name": None, "dir": "."},
}

# per-experiment defaults layered over DEFAULTS
EXPERIMENT_DEFAULTS = {
    "eta-sweep": {"model": {"L": 12}, "sweep": {"eta_length": 12}},
    "fluctuations": {"sweep": {"param": "L", "grid": [4, 5, 6, 7, 8, 9, 10]},
                     "dynamics": {"T": 100.0, "window": [50.0, 100.0]}},
}

_TYPES = {
    "L": int, "realizations": int, "eta_realizations": int, "n_ts": int, "n_seeds": int,
    "maxiter": int, "T": float, "dt": float, "include_probe_hamiltonian": bool,
    "angle_uniform": bool, "kind": str, "param": str, "protocol": str, "name": str, "dir": str,
}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "grid":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path):
    """Read a JSON config, unwrapping a manifest if one is given."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found", "--config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "--config") from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", "--config")
    if "resolved_config" in data:
        data = data["resolved_config"]
    return data


def _parse_override(text):
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {text!r} is not of the form key=value", "--override")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _allowed_keys(cfg):
    kind = cfg.get("model", {}).get("kind", "ising")
    try:
        kind = ModelKind(kind)
    except ValueError:
        raise ConfigError(f"unknown model kind {kind!r}; choose from "
                          f"{[k.value for k in ModelKind]}", "model.kind") from None
    allowed = {sec: set(v) for sec, v in DEFAULTS.items() if isinstance(v, dict)}
    allowed["model"] |= set(MODEL_PARAMS[kind])
    return allowed


def apply_override(cfg, key, value):
    parts = key.split(".")
    if len(parts) == 1:
        if parts[0] not in ("seed", "workers", "experiment"):
            raise ConfigError("unknown top-level key", key)
        cfg[parts[0]] = value
        return cfg
    if len(parts) != 2:
        raise ConfigError("overrides take the form section.key=value", key)
    section, name = parts
    allowed = _allowed_keys(_merge(cfg, {section: {name: value}} if name == "kind" else {}))
    if section not in allowed or name not in allowed[section]:
        raise ConfigError("unknown key", key)
    cfg.setdefault(section, {})[name] = value
    return cfg


def _check_types(cfg):
    for section, values in cfg.items():
        if not isinstance(values, dict):
            continue
        for name, value in values.items():
            want = _TYPES.get(name)
            if want is None or value is None:
                continue
            key = f"{section}.{name}"
            if want is bool and not isinstance(value, bool):
                raise ConfigError(f"expected a boolean, got {value!r}", key)
            if want is int and (isinstance(value, bool) or not isinstance(value, int)):
                if not (isinstance(value, float) and value.is_integer()):
                    raise ConfigError(f"expected an integer, got {value!r}", key)
                values[name] = int(value)
            if want is float and (isinstance(value, bool) or not isinstance(value, (int, float))):
                raise ConfigError(f"expected a number, got {value!r}", key)
            if want is float:
                values[name] = float(value)
            if want is str and not isinstance(value, str):
                raise ConfigError(f"expected a string, got {value!r}", key)


def _materialize_grid(grid):
    if isinstance(grid, dict):
        if set(grid) != {"start", "stop", "num"}:
            raise ConfigError("grid object needs exactly start, stop, num", "sweep.grid")
        num = grid["num"]
        if not isinstance(num, int) or num < 1:
            raise ConfigError("num must be a positive integer", "sweep.grid")
        return [float(v) for v in np.linspace(grid["start"], grid["stop"], num)]
    if isinstance(grid, (int, float)) and not isinstance(grid, bool):
        return [float(grid)]
    if not isinstance(grid, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in grid
    ):
        raise ConfigError("grid must be a list of numbers or {start, stop, num}", "sweep.grid")
    return [float(v) for v in grid]


def resolve_config(raw, experiment=None, overrides=(), seed=None, workers=None, out=None):
    """Merge defaults, the config file, overrides and flags into a full config."""
    if experiment is None:
        experiment = raw.get("experiment", DEFAULTS["experiment"])
    if experiment not in RUNNERS:
        raise ConfigError(f"unknown experiment {experiment!r}", "experiment")
    for key in raw:
        if key not in DEFAULTS:
            raise ConfigError("unknown top-level key", key)
    allowed = _allowed_keys(raw)
    for section, values in raw.items():
        if isinstance(DEFAULTS[section], dict):
            if not isinstance(values, dict):
                raise ConfigError("section must be an object", section)
            for name in values:
                if name not in allowed[section]:
                    raise ConfigError("unknown key", f"{section}.{name}")

    cfg = _merge(DEFAULTS, EXPERIMENT_DEFAULTS.get(experiment, {}))
    cfg = _merge(cfg, raw)
    cfg["experiment"] = experiment
    for text in overrides:
        apply_override(cfg, *_parse_override(text))
    if seed is not None:
        cfg["seed"] = seed
    if workers is not None:
        cfg["workers"] = workers
    if out is not None:
        cfg["output"]["dir"] = str(out)

    if cfg["seed"] is None:
        raise ConfigError("a seed is required (config 'seed' or --seed)", "seed")
    if isinstance(cfg["seed"], bool) or not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a nonnegative integer", "seed")
    if cfg["workers"] is None:
        cfg["workers"] = int(os.environ.get("SPINCHAOS_WORKERS", 0)) or (os.cpu_count() or 1)
    if not isinstance(cfg["workers"], int) or cfg["workers"] < 1:
        raise ConfigError("workers must be a positive integer", "workers")
    _check_types(cfg)

    model = cfg["model"]
    kind = ModelKind(model["kind"])
    for name, default in MODEL_PARAMS[kind].items():
        model.setdefault(name, default)
    sweep = cfg["sweep"]
    sweep["grid"] = _materialize_grid(sweep["grid"])
    if sweep["sector"] not in ("odd", "even", "none", None):
        raise ConfigError("sector must be 'odd', 'even' or 'none'", "sweep.sector")
    if sweep["sector"] is None:
        sweep["sector"] = "none"
    if cfg["output"]["name"] is None:
        cfg["output"]["name"] = experiment.replace("-", "_")
    return cfg


def build_spec(cfg):
    """Translate a resolved config into a :class:`SweepSpec`, validating it."""
    m = dict(cfg["model"])
    kind = ModelKind(m.pop("kind"))
    L = m.pop("L")
    probe = m.pop("include_probe_hamiltonian")
    random_couplings = m.pop("random_couplings")
    try:
        model = SpinModel(kind, L, m, probe)
    except ValueError as exc:
        raise ConfigError(str(exc), "model") from None
    s, d, c = cfg["sweep"], cfg["dynamics"], cfg["control"]
    sector = SectorPolicy(None if s["sector"] == "none" else s["sector"], s["n_up"],
                          s["eta_realizations"], 0)
    try:
        control = ControlSettings(c["protocol"], c["T"], c["n_ts"], tuple(c["bounds"]),
                                  c["n_seeds"], c["realizations"], c["maxiter"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "control") from None
    if random_couplings is not None:
        if not (isinstance(random_couplings, list) and len(random_couplings) == 2):
            raise ConfigError("expected [lo, hi]", "model.random_couplings")
        random_couplings = tuple(float(v) for v in random_couplings)
    try:
        spec = SweepSpec(
            model=model, param=s["param"], grid=tuple(s["grid"]),
            realizations=s["realizations"], T=d["T"], dt=d["dt"],
            window=None if d["window"] is None else tuple(d["window"]),
            eta_length=s["eta_length"], sector=sector, random_couplings=random_couplings,
            angle_uniform=s["angle_uniform"], seed=cfg["seed"], workers=cfg["workers"],
            betas=tuple(float(b) for b in s["betas"]), control=control,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "sweep") from None
    if cfg["experiment"] == "fluctuations" and spec.param != "L":
        raise ConfigError("fluctuation scaling sweeps the chain length", "sweep.param")
    if cfg["experiment"] == "eta-sweep" and spec.eta_length is None:
        raise ConfigError("eta sweep needs sweep.eta_length", "sweep.eta_length")
    check_symmetry_policy(spec)
    _check_random_parity(spec)
    return spec


def _check_random_parity(spec):
    """Random bonds break chain reversal, so a parity sector cannot go with them."""
    if spec.random_couplings is not None and spec.sector.parity is not None \
            and spec.eta_length is not None:
        raise ConfigError("parity sector requested for a randomly coupled chain; "
                          "use sector=none", "sweep.sector")


def _write_atomic(path, text):
    tmp = path.with_name(path.name + ".partial")
    tmp.write_text(text, encoding="utf-8", newline="\n")
    os.replace(tmp, path)


def execute(cfg):
    """Run a resolved config; returns the exit code."""
    spec = build_spec(cfg)
    out_dir = Path(cfg["output"]["dir"])
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}", "output.dir") from None
    if not os.access(out_dir, os.W_OK):
        raise ConfigError("output directory is not writable", "output.dir")
    name = cfg["output"]["name"]
    csv_path = out_dir / f"{name}.csv"
    partial = out_dir / f"{name}.csv.partial"
    partial.write_text("", encoding="utf-8")

    def progress(i, value):
        with open(partial, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps({"index": i, "value": np.asarray(value, dtype=object).tolist()},
                                default=float) + "\n")

    start = time.perf_counter()
    result = RUNNERS[cfg["experiment"]](spec, progress=progress)
    wall = time.perf_counter() - start
    _write_atomic(csv_path, result.to_csv())
    manifest = {
        "tool": "spinchaos",
        "version": __version__,
        "experiment": cfg["experiment"],
        "seed": cfg["seed"],
        "wall_time_s": wall,
        "csv": csv_path.name,
        "metadata": result.meta,
        "resolved_config": cfg,
    }
    _write_atomic(out_dir / f"{name}.manifest.json",
                  json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    logger.info("wrote %s (%d rows) in %.1f s", csv_path, len(result.rows), wall)
    return 0


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def build_parser():
    parser = argparse.ArgumentParser(prog="spinchaos", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config or a previous manifest")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="section.key=value (JSON value); repeatable")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="parallel workers (else SPINCHAOS_WORKERS)")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    experiment = None if args.command == "validate" else args.command
    try:
        cfg = resolve_config(load_config(args.config), experiment, args.override, args.seed,
                             args.workers, args.out)
        if args.command == "validate":
            build_spec(cfg)
            print(json.dumps(cfg, indent=2, sort_keys=True))
            return 0
        return execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SpinChaosError, ArithmeticError, MemoryError, ValueError) as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
