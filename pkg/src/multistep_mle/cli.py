"""Command-line front end: ``multistep-mle {simulate,fisher,estimate,montecarlo,compare}``.

Settings resolve in three layers, later layers winning: built-in defaults,
then a YAML config file (``--config``, plus ``--set section.key=value``
overrides applied to it), then explicit command-line flags.

Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure,
3 acceptance gate failed (``montecarlo --gate``).
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import estimate as est
from .errors import ConfigError, ExperimentFailedError, NumericalError, WindowError
from .models import MODEL_IDS, get_model
from .montecarlo import ExperimentConfig, efficiency_report, run_experiment, trajectory_cost_ratio
from .simulate import SamplePath, euler_maruyama, simulate_paths
from .stationary import build_density, fisher_quadrature

SCHEMA_VERSION = 1
OUTPUT_ENV = "MULTISTEP_MLE_OUTPUT_DIR"

DEFAULTS = {
    "model": {"id": "quartic", "theta": [1.0], "lower": None, "upper": None},
    "sim": {"T": 1000.0, "h": 0.01, "seed": 0, "x0": None, "init": "stationary", "init_range": None},
    "estimate": {"delta": 0.75, "method": "one_step", "fisher_mode": "quadrature", "tau_grid": None},
    "montecarlo": {"replicates": 300, "batch_size": 64, "workers": 1, "standardize": "true"},
    "gate": {"var_low": 0.8, "var_high": 1.2, "mean_max": 0.15},
    "output": {"dir": None, "format": "json", "name": None},
}

PRESETS = {
    # Scalar quartic example: one-step at delta 3/4 and two-step at delta 3/8.
    "paper-example": {
        "model": {"id": "quartic", "theta": [1.0], "lower": [0.0], "upper": [2.0]},
        "sim": {"T": 1000.0, "h": 0.01},
        "estimate": {"delta": 0.75, "method": "one_step", "tau_grid": [0.25, 0.5, 0.75, 1.0]},
        "montecarlo": {"replicates": 300},
        "compare": {"two_step_delta": 0.375},
    },
}

# flag dest -> (section, key)
FLAG_KEYS = {
    "model": ("model", "id"),
    "theta": ("model", "theta"),
    "lower": ("model", "lower"),
    "upper": ("model", "upper"),
    "T": ("sim", "T"),
    "h": ("sim", "h"),
    "seed": ("sim", "seed"),
    "x0": ("sim", "x0"),
    "init": ("sim", "init"),
    "delta": ("estimate", "delta"),
    "method": ("estimate", "method"),
    "fisher_mode": ("estimate", "fisher_mode"),
    "tau": ("estimate", "tau_grid"),
    "replicates": ("montecarlo", "replicates"),
    "workers": ("montecarlo", "workers"),
    "batch_size": ("montecarlo", "batch_size"),
    "out": ("output", "dir"),
    "format": ("output", "format"),
    "name": ("output", "name"),
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageError(message)


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _common(p, *, sim=True, estimate=False, mc=False):
    p.add_argument("--config", help="YAML config file with sections model/sim/estimate/montecarlo/output")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named settings applied below the config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. --set sim.T=500")
    p.add_argument("--model", choices=MODEL_IDS, help="model id (default quartic)")
    p.add_argument("--theta", type=_floats, help="parameter, comma-separated (default 1.0)")
    p.add_argument("--lower", type=_floats, help="lower bounds of the parameter box")
    p.add_argument("--upper", type=_floats, help="upper bounds of the parameter box")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or none)")
    p.add_argument("--name", help="output file stem")
    p.add_argument("-v", "--verbose", action="count", default=0)
    if sim:
        p.add_argument("--T", type=float, help="horizon (default 1000)")
        p.add_argument("--h", type=float, help="grid step (default 0.01)")
        p.add_argument("--seed", type=int, help="experiment seed (default 0)")
        p.add_argument("--init", choices=("stationary", "burn_in"), help="initialisation (default stationary)")
    if estimate or mc:
        p.add_argument("--delta", type=float, help="learning-window exponent (default 0.75)")
        p.add_argument("--method", choices=est.METHODS, help="estimator (default one_step)")
        p.add_argument("--fisher-mode", dest="fisher_mode", choices=("quadrature", "empirical"),
                       help="Fisher information source (default quadrature)")
        p.add_argument("--tau", type=_floats, help="tau grid, comma-separated (default 100-point grid)")
    if mc:
        p.add_argument("--replicates", type=int, help="number of replicates (default 300)")
        p.add_argument("--workers", type=int, help="worker processes (default 1)")
        p.add_argument("--batch-size", dest="batch_size", type=int, help="paths per lockstep batch (default 64)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="multistep-mle", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate one sample path")
    _common(p)
    p.add_argument("--x0", type=float, help="fixed start (default: stationary draw)")
    p.add_argument("--format", choices=("csv", "binary"), help="path format (default csv)")

    p = sub.add_parser("fisher", help="Fisher information by quadrature, as JSON")
    _common(p, sim=False)

    p = sub.add_parser("estimate", help="estimator trajectory on one simulated or loaded path")
    _common(p, estimate=True)
    p.add_argument("--path", help="read the path from a CSV or binary file instead of simulating")
    p.add_argument("--format", choices=("csv", "json"), help="trajectory format (default csv)")

    p = sub.add_parser("montecarlo", help="replicate experiment and summary statistics")
    _common(p, mc=True)
    p.add_argument("--gate", action="store_true", help="exit 3 unless the final-tau checks pass")

    p = sub.add_parser("compare", help="one-step vs two-step vs reference MLE")
    _common(p, mc=True)
    return parser


# --- configuration -----------------------------------------------------------


def _merge(base, layer):
    for key, value in (layer or {}).items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def _apply_override(cfg, item):
    key, sep, raw = item.partition("=")
    if not sep or "." not in key:
        raise ConfigError(f"override {item!r} must look like section.key=value")
    section, name = key.split(".", 1)
    cfg.setdefault(section, {})[name] = yaml.safe_load(raw)


def load_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config file {p}: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"config file {p} must hold a mapping of sections")
    return data


def resolve_config(args) -> dict:
    """Defaults < preset < config file < ``--set`` < explicit flags."""
    cfg = copy.deepcopy(DEFAULTS)
    if getattr(args, "preset", None):
        _merge(cfg, copy.deepcopy(PRESETS[args.preset]))
    if getattr(args, "config", None):
        _merge(cfg, load_config_file(args.config))
    for item in getattr(args, "set", []) or []:
        _apply_override(cfg, item)
    for dest, (section, key) in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            cfg.setdefault(section, {})[key] = value
    if cfg["output"]["dir"] is None and os.environ.get(OUTPUT_ENV):
        cfg["output"]["dir"] = os.environ[OUTPUT_ENV]
    if cfg["model"]["theta"] is not None:
        cfg["model"]["theta"] = [float(v) for v in np.atleast_1d(cfg["model"]["theta"])]
    if cfg["estimate"].get("tau_grid") is not None and len(cfg["estimate"]["tau_grid"]) == 0:
        raise ConfigError("tau grid is empty")
    return cfg


def _model(cfg):
    m = cfg["model"]
    return get_model(m["id"], m.get("lower"), m.get("upper"))


def _experiment(cfg, **changes) -> ExperimentConfig:
    m, s, e, mc = cfg["model"], cfg["sim"], cfg["estimate"], cfg["montecarlo"]
    kw = dict(
        model_id=m["id"], theta_true=m["theta"], T=float(s["T"]), h=float(s["h"]),
        delta=float(e["delta"]), method=e["method"], tau_grid=e.get("tau_grid"),
        replicates=int(mc["replicates"]), seed=int(s["seed"]), fisher_mode=e["fisher_mode"],
        lower=m.get("lower"), upper=m.get("upper"), init=s.get("init", "stationary"),
        init_range=s.get("init_range"), standardize=mc.get("standardize", "true"),
        batch_size=int(mc.get("batch_size", 64)), workers=int(mc.get("workers", 1)),
    )
    kw.update(changes)
    return ExperimentConfig(**kw)


# --- outputs ----------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def emit_outputs(results: dict, fmt: str, cfg: dict, stem: str, csv_text: str = None, stream=None):
    """Write ``results`` as JSON or CSV to the configured directory and/or ``stream``.

    JSON carries ``schema_version`` and the resolved ``config``.  CSV output
    starts with a ``#`` line holding the resolved config as JSON, then the
    header row.  Floats are written in shortest round-trip form (JSON) or at
    17 significant digits (CSV).
    """
    if fmt == "json":
        text = json.dumps(
            _jsonable({"schema_version": SCHEMA_VERSION, "config": cfg, **results}), indent=2
        ) + "\n"
    elif fmt == "csv":
        if csv_text is None:
            raise ConfigError("CSV output is not available for this command")
        text = "# config: " + json.dumps(_jsonable(cfg), separators=(",", ":")) + "\n" + csv_text
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    written = []
    out_dir = cfg["output"].get("dir")
    if out_dir:
        target = Path(out_dir)
        try:
            target.mkdir(parents=True, exist_ok=True)
            name = target / f"{cfg['output'].get('name') or stem}.{fmt}"
            name.write_text(text)
        except OSError as exc:
            raise ConfigError(f"cannot write to output directory {target}: {exc}")
        written.append(name)
    if stream is not None:
        stream.write(text)
    return written


# --- subcommands ----------------------------------------------------------


def _read_path(source) -> SamplePath:
    p = Path(source)
    if not p.is_file():
        raise ConfigError(f"path file not found: {p}")
    blob = p.read_bytes()
    if blob[:8] == b"MSMLPATH":
        return SamplePath.from_bytes(blob)
    text = blob.decode()
    lines = [ln for ln in text.splitlines() if not ln.startswith("# config:")]
    return SamplePath.from_csv("\n".join(lines) + "\n")


def _simulate_one(cfg) -> SamplePath:
    model = _model(cfg)
    s = cfg["sim"]
    theta = np.asarray(cfg["model"]["theta"])
    if s.get("x0") is not None:
        return euler_maruyama(model, theta, float(s["x0"]), float(s["T"]), float(s["h"]), int(s["seed"]))
    batch = simulate_paths(
        model, theta, float(s["T"]), float(s["h"]), int(s["seed"]), [0],
        init=s.get("init", "stationary"), init_range=s.get("init_range"),
    )
    return batch.path(0)


def cmd_simulate(args, cfg, stdout):
    path = _simulate_one(cfg)
    fmt = args.format or "csv"
    out_dir = cfg["output"].get("dir")
    stem = cfg["output"].get("name") or "path"
    if fmt == "binary":
        if not out_dir:
            raise ConfigError("binary output needs --out or a configured output directory")
        target = Path(out_dir)
        try:
            target.mkdir(parents=True, exist_ok=True)
            path.write_binary(target / f"{stem}.bin")
        except OSError as exc:
            raise ConfigError(f"cannot write to output directory {target}: {exc}")
        stdout.write(str(target / f"{stem}.bin") + "\n")
        return 0
    emit_outputs({}, "csv", cfg, stem, csv_text=path.to_csv(), stream=None if out_dir else stdout)
    return 0


def cmd_fisher(args, cfg, stdout):
    model = _model(cfg)
    theta = np.asarray(cfg["model"]["theta"])
    if not model.theta_space.contains(theta):
        raise ConfigError(f"theta {theta.tolist()} lies outside the parameter box")
    info = fisher_quadrature(model, theta)
    results = {"fisher": info.to_dict()}
    if model.name == "quartic":
        from .stationary import mde_limit_variance_quartic

        results["preliminary_limit_variance"] = mde_limit_variance_quartic(build_density(model, theta))
    emit_outputs(results, "json", cfg, "fisher", stream=stdout)
    return 0


def cmd_estimate(args, cfg, stdout):
    model = _model(cfg)
    path = _read_path(args.path) if args.path else _simulate_one(cfg)
    e = cfg["estimate"]
    tau = e.get("tau_grid")
    traj = est.estimate_trajectory(model, path, e["method"], float(e["delta"]), tau, e["fisher_mode"])
    fmt = args.format or "csv"
    results = {"trajectory": {**traj.metadata(), "tau": traj.tau_grid, "estimates": traj.estimates}}
    emit_outputs(results, fmt, cfg, "trajectory", csv_text=traj.to_csv(), stream=stdout)
    return 0


def _gate(stats, cfg):
    g = cfg["gate"]
    vr = stats.variance_ratio[-1]
    mean = stats.mean[-1]
    return bool(np.all((vr >= g["var_low"]) & (vr <= g["var_high"])) and np.all(np.abs(mean) < g["mean_max"]))


def cmd_montecarlo(args, cfg, stdout):
    config = _experiment(cfg)
    stats = run_experiment(config)
    sys.stderr.write(stats.summary_line() + "\n")
    results = {"stats": stats.to_dict()}
    passed = _gate(stats, cfg)
    results["gate"] = {"passed": passed, **cfg["gate"]}
    emit_outputs(results, "json", cfg, "montecarlo", stream=stdout)
    if args.gate and not passed:
        return 3
    return 0


def cmd_compare(args, cfg, stdout):
    delta_two = float(cfg.get("compare", {}).get("two_step_delta", 0.375))
    base = _experiment(cfg, method="one_step")
    configs = [base, base.replace(method="two_step", delta=delta_two),
               base.replace(method="reference_mle")]
    stats = [run_experiment(c) for c in configs]
    for s in stats:
        sys.stderr.write(s.summary_line() + "\n")
    report = efficiency_report(configs, stats)
    model = _model(cfg)
    path = _simulate_one(cfg)
    tau = est.default_tau_grid(path.T, base.delta)
    report["single_path_cost"] = trajectory_cost_ratio(model, path, base.delta, tau, repeats=1)
    emit_outputs({"report": report}, "json", cfg, "compare", stream=stdout)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fisher": cmd_fisher,
    "estimate": cmd_estimate,
    "montecarlo": cmd_montecarlo,
    "compare": cmd_compare,
}


def parse_and_dispatch(argv=None, stdout=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg, stdout)
    except _UsageError:
        return 1
    except (ConfigError, WindowError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    except (NumericalError, ExperimentFailedError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 2


def main(argv=None) -> int:
    sys.exit(parse_and_dispatch(argv))


if __name__ == "__main__":
    main()
