"""Command-line front end: JSON configs in, CSV/JSON artifacts out.

Subcommands: simulate, fit, diagnose, experiment, lambda-max.  Configs are
plain JSON with an explicit seed wherever randomness is involved; dotted
``--set key=value`` overrides are applied after parsing and validated
against the subcommand's schema, so unknown keys are always rejected.
Exit codes: 0 success, 2 config error (message names the offending key),
1 numeric failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from .core import Dataset, NumericError, save_matrix_csv
from .diagnostics import diagnostics_report, estimate_support
from .estimators import EstimatorSpec, fit, lambda_max
from .experiments import ExperimentConfig, emit, run_experiment
from .simulate import SimulationSpec, dump_dataset, load_dataset, simulate


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


# allowed-key schemas; None marks a leaf value
_SIM_SCHEMA = {k: None for k in (
    "n", "p", "q", "s", "rho_x", "snr", "seed", "normalization", "design")}
_GRID_SCHEMA = {"count": None, "min_ratio": None}
_EST_SCHEMA = {k: None for k in (
    "kind", "lambda", "sigma_min", "sigma_max", "tol", "max_epochs", "s_update_every")}
_DATA_SCHEMA = {"dir": None, "sim": _SIM_SCHEMA}
_SCHEMAS = {
    "simulate": {"sim": _SIM_SCHEMA},
    "fit": {"data": _DATA_SCHEMA, "estimator": _EST_SCHEMA},
    "diagnose": {"data": _DATA_SCHEMA, "estimator": _EST_SCHEMA, "s": None,
                 "alpha": None, "A": None, "rep_trials": None, "seed": None},
    "lambda-max": {"data": _DATA_SCHEMA,
                   "estimator": {"kind": None, "sigma_min": None, "sigma_max": None}},
    "experiment": {
        "experiment": None, "sim": _SIM_SCHEMA, "lambda_grid": _GRID_SCHEMA,
        "replicates": None, "folds": None, "estimators": None, "sigma_min_grid": None,
        "noise_points": None, "snr_decades": None, "A": None, "sigma_min_ratio": None,
        "tol": None, "max_epochs": None, "output_path": None,
    },
}


def _validate_keys(obj, schema, path=""):
    if not isinstance(obj, dict):
        raise ConfigError(f"config section {path or '<root>'} must be a JSON object")
    for key, value in obj.items():
        full = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config key: {full}")
        sub = schema[key]
        if sub is not None and isinstance(value, dict):
            _validate_keys(value, sub, full)
        elif sub is not None:
            raise ConfigError(f"config key {full} must be a JSON object")


def _apply_override(cfg, schema, assignment):
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    dotted, raw = assignment.split("=", 1)
    keys = dotted.split(".")
    node, sub = cfg, schema
    for k in keys[:-1]:
        if k not in sub or sub[k] is None:
            raise ConfigError(f"unknown config key: {dotted}")
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"config key {dotted} does not address an object")
        sub = sub[k]
    leaf = keys[-1]
    if leaf not in sub:
        raise ConfigError(f"unknown config key: {dotted}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node[leaf] = value


def _load_config(path, name, overrides):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    schema = _SCHEMAS[name]
    for assignment in overrides or ():
        _apply_override(cfg, schema, assignment)
    _validate_keys(cfg, schema)
    return cfg


def _require(cfg, key):
    if key not in cfg:
        raise ConfigError(f"missing config key: {key}")
    return cfg[key]


def _sim_spec(obj):
    try:
        return SimulationSpec.from_json(obj)
    except TypeError as exc:
        raise ConfigError(f"sim: {exc}")
    except ValueError as exc:
        raise ConfigError(f"sim: {exc}")


def _dataset(cfg):
    data_cfg = _require(cfg, "data")
    if "dir" in data_cfg:
        return load_dataset(data_cfg["dir"])
    if "sim" in data_cfg:
        return simulate(_sim_spec(data_cfg["sim"]))
    raise ConfigError("data: needs either data.dir or data.sim")


def _estimator_spec(obj, need_lambda=True):
    obj = dict(obj)
    kind = obj.pop("kind", None)
    if kind is None:
        raise ConfigError("missing config key: estimator.kind")
    lam = obj.pop("lambda", None)
    if need_lambda and lam is None:
        raise ConfigError("missing config key: estimator.lambda")
    try:
        return EstimatorSpec(kind=kind, lam=lam if lam is not None else 1.0, **obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"estimator: {exc}")


def _fit_summary(spec, result):
    support = sorted(estimate_support(result.B_hat, 0.0))
    return {
        "kind": spec.kind,
        "lambda": spec.lam,
        "objective": result.objective,
        "epochs_run": result.epochs_run,
        "kkt_violation": result.kkt_violation,
        "converged": result.converged,
        "sigma_hat": result.sigma_hat,
        "support_hat": support,
    }


def _write_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _cmd_simulate(args):
    cfg = _load_config(args.config, "simulate", args.set)
    spec = _sim_spec(_require(cfg, "sim"))
    data = simulate(spec)
    path = dump_dataset(data, args.out, spec=spec)
    print(path)
    return 0


def _cmd_fit(args):
    cfg = _load_config(args.config, "fit", args.set)
    data = _dataset(cfg)
    spec = _estimator_spec(_require(cfg, "estimator"))
    result = fit(data, spec)
    os.makedirs(args.out, exist_ok=True)
    save_matrix_csv(result.B_hat, os.path.join(args.out, "B_hat.csv"))
    save_matrix_csv(result.residuals, os.path.join(args.out, "residuals.csv"))
    if result.S_hat is not None:
        save_matrix_csv(result.S_hat, os.path.join(args.out, "S_hat.csv"))
    path = _write_json(_fit_summary(spec, result), os.path.join(args.out, "fit.json"))
    print(path)
    return 0


def _cmd_diagnose(args):
    cfg = _load_config(args.config, "diagnose", args.set)
    data = _dataset(cfg)
    spec = _estimator_spec(_require(cfg, "estimator"))
    result = fit(data, spec)
    report = diagnostics_report(
        data, result, spec.lam,
        s=cfg.get("s"), alpha=cfg.get("alpha"), A=cfg.get("A", 2.0),
        rep_trials=cfg.get("rep_trials", 200), seed=cfg.get("seed", 0),
    )
    os.makedirs(args.out, exist_ok=True)
    path = _write_json(report.to_json(), os.path.join(args.out, "diagnostics.json"))
    print(path)
    return 0


def _cmd_lambda_max(args):
    cfg = _load_config(args.config, "lambda-max", args.set)
    data = _dataset(cfg)
    est = _require(cfg, "estimator")
    kind = est.get("kind")
    if kind is None:
        raise ConfigError("missing config key: estimator.kind")
    value = lambda_max(kind, data, sigma_min=est.get("sigma_min"),
                       sigma_max=est.get("sigma_max"))
    print(repr(value))
    return 0


def _cmd_experiment(args):
    cfg_json = _load_config(args.config, "experiment", args.set)
    try:
        cfg = ExperimentConfig.from_json(cfg_json)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"experiment config: {exc}")
    table = run_experiment(cfg, jobs=args.jobs)
    csv_path, cfg_path = emit(cfg, table, args.out)
    print(csv_path)
    print(cfg_path)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "diagnose": _cmd_diagnose,
    "experiment": _cmd_experiment,
    "lambda-max": _cmd_lambda_max,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pivlasso",
        description="Pivotal sparse estimators: simulation, fitting, diagnostics "
                    "and experiment pipelines.")
    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    for name, help_text in (
        ("simulate", "draw a synthetic dataset and write it as CSV + manifest"),
        ("fit", "fit one estimator on a dataset"),
        ("diagnose", "fit and emit the certificate report"),
        ("experiment", "run an experiment pipeline, write CSV + resolved config"),
        ("lambda-max", "print the estimator-specific smallest lambda giving B = 0"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="dotted-path config override, e.g. sim.snr=2")
        p.add_argument("--out", default=".", help="output directory")
        if name == "experiment":
            p.add_argument("--jobs", type=int, default=1,
                           help="worker processes for replicate fan-out")
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 0 on --help, 2 on usage errors
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help()
        return 0
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc.filename or ''}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
