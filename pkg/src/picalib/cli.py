"""Batch command-line front end.

Every pipeline is a subcommand over a JSON config; outputs are a JSON
report (always) plus CSV for tabular results.  Exit codes: 0 success,
2 config/validation error, 3 numerical error (improper posterior,
non-convergence, infeasible calibration, failed self-check).  Failures
print a machine-readable error object and write no files; report writes
go through a temp file and an atomic rename.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import os
import sys
import tempfile

import jsonschema
import numpy as np

from . import __version__
from ._schemas import CONFIG_SCHEMA, ERROR_SCHEMA, REPORT_SCHEMA
from .asymptotics import coverage_vs_n
from .calibration import (CalibrationSpec, exact_calibration_residual, run_coverage)
from .errors import (CalibrationInfeasibleError, ConfigError, DomainError,
                     EmptyLikelihoodError, ImproperPosteriorError, InvalidInputError,
                     NonConvergenceError, PicalibError, SingularityError,
                     UnsupportedOperationError)
from .factors import factor_by_kind, factorization_scan
from .families import Sample, make_family
from .grids import GridSpec, ParameterGrid, explicit_axis
from .posterior import PosteriorDensity, assign, credible_interval, update
from . import selfcheck

_VALIDATION_ERRORS = (ConfigError, DomainError, UnsupportedOperationError,
                      jsonschema.ValidationError)
_NUMERICAL_ERRORS = (ImproperPosteriorError, EmptyLikelihoodError,
                     NonConvergenceError, SingularityError,
                     CalibrationInfeasibleError, InvalidInputError)


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (bool, int, str)) or obj is None:
        return obj
    if isinstance(obj, float):
        return obj
    return str(obj)


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".picalib-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _report_json(command: str, config: dict, result: dict) -> str:
    report = {
        "command": command,
        "metadata": {
            "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "package_version": __version__,
            "config": _jsonify(config),
        },
        "result": _jsonify(result),
    }
    jsonschema.validate(report, REPORT_SCHEMA)
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _csv_text(header: list, rows: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------

def _load_config(args) -> dict:
    config = {}
    if args.config:
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}")
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    config.setdefault("command", args.command)
    if config["command"] != args.command:
        raise ConfigError(f"config command {config['command']!r} does not match "
                          f"subcommand {args.command!r}")
    # flag overrides
    if args.seed is not None:
        config["seed"] = args.seed
    if args.trials is not None:
        config["trials"] = args.trials
    if args.grid_points is not None:
        config.setdefault("grid", {})["nodes"] = args.grid_points
    if args.out is not None:
        config["out"] = args.out
    if args.format is not None:
        config["format"] = args.format
    if getattr(args, "sweep", None):
        config["true_params"] = [float(v) for v in args.sweep.split(",")]
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        path = ".".join(str(p) for p in e.absolute_path) or "(top level)"
        raise ConfigError(f"config field {path}: {e.message}")
    return config


def _need(config: dict, *keys):
    missing = [k for k in keys if k not in config]
    if missing:
        raise ConfigError(f"{config['command']}: missing config field(s) {missing}")


def _family_from(config):
    block = config.get("family")
    if block is None:
        raise ConfigError(f"{config['command']}: missing config field(s) ['family']")
    return make_family(block["id"], **block.get("hyper", {}))


def _factor_from(config, family):
    block = config.get("factor")
    if block is None:
        raise ConfigError(f"{config['command']}: missing config field(s) ['factor']")
    return factor_by_kind(block["kind"], q=block.get("q"), r=block.get("r"),
                          dim_hint=family.n_params)


def _grid_from(config) -> GridSpec | None:
    block = config.get("grid")
    if block is None:
        return None
    nodes = block.get("nodes")
    if isinstance(nodes, list):
        nodes = tuple(nodes)
    bounds = block.get("bounds")
    if bounds is not None:
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    return GridSpec(n_nodes=nodes, bounds=bounds,
                    tail_rel=block.get("tail_rel", 1e-10))


def _sample_from(config, family) -> Sample:
    _need(config, "sample")
    return Sample(values=np.asarray(config["sample"], dtype=float),
                  family_id=family.id)


def _posterior_result(post: PosteriorDensity) -> dict:
    if post.dims == 1:
        out = {"nodes": post.nodes, "values": post.values,
               "mean": post.mean(), "sd": post.sd(), "mode": post.mode()}
    else:
        out = {"axes": [ax.nodes for ax in post.grid.axes], "values": post.values}
    out["diagnostics"] = dict(post.diagnostics)
    return out


def _calibration_spec(config) -> CalibrationSpec:
    _need(config, "family", "factor", "true_params", "n", "delta", "trials", "seed")
    fam_block, factor_block = config["family"], config["factor"]
    grid = config.get("grid", {})
    nodes = grid.get("nodes", 1001)
    if isinstance(nodes, list):
        nodes = nodes[0]
    return CalibrationSpec(
        family_id=fam_block["id"], hyper=fam_block.get("hyper", {}),
        factor=factor_block["kind"], q=factor_block.get("q"), r=factor_block.get("r"),
        true_params=config["true_params"], n=config["n"], delta=config["delta"],
        trials=config["trials"], seed=config["seed"],
        method=config.get("method", "exact_assign"),
        param_index=config.get("param_index", 0),
        grid_nodes=int(nodes), tail_rel=grid.get("tail_rel", 1e-10),
        workers=config.get("workers"))


# ---------------------------------------------------------------------------
# Command implementations: each returns (result dict, csv payload or None)
# ---------------------------------------------------------------------------

def _cmd_assign(config):
    fam = _family_from(config)
    factor = _factor_from(config, fam)
    post = assign(fam, factor, _sample_from(config, fam), _grid_from(config))
    result = _posterior_result(post)
    if "delta" in config and post.dims == 1:
        iv = credible_interval(post, config["delta"])
        result["interval"] = {"lo": iv.lo, "hi": iv.hi, "level": iv.level}
    csv_payload = None
    if post.dims == 1 and config.get("format") == "csv":
        csv_payload = (["node", "density"], list(zip(post.nodes, post.values)))
    return result, csv_payload


def _cmd_interval(config):
    _need(config, "delta")
    return _cmd_assign(config)


def _cmd_update(config):
    _need(config, "prior", "x")
    fam = _family_from(config)
    try:
        with open(config["prior"]) as fh:
            prior_report = json.load(fh)
        jsonschema.validate(prior_report, REPORT_SCHEMA)
        nodes = np.asarray(prior_report["result"]["nodes"], dtype=float)
        values = np.asarray(prior_report["result"]["values"], dtype=float)
    except (OSError, KeyError, json.JSONDecodeError, jsonschema.ValidationError) as e:
        raise ConfigError(f"cannot read prior report: {e}")
    grid = ParameterGrid((explicit_axis(nodes),))
    prior = PosteriorDensity(grid=grid, values=values / grid.integrate(values))
    post = update(prior, fam, config["x"])
    result = _posterior_result(post)
    if "delta" in config:
        iv = credible_interval(post, config["delta"])
        result["interval"] = {"lo": iv.lo, "hi": iv.hi, "level": iv.level}
    return result, None


def _cmd_calibrate(config):
    spec = _calibration_spec(config)
    report = run_coverage(spec)
    result = report.to_dict()
    csv_payload = None
    if len(report.by_value) > 1:
        k = len(report.by_value[0].true_params)
        header = [f"true_{i}" for i in range(k)] + ["coverage", "std_error"]
        rows = [list(v.true_params) + [v.coverage, v.std_error]
                for v in report.by_value]
        csv_payload = (header, rows)
    return result, csv_payload


def _cmd_factor_scan(config):
    _need(config, "family", "sample", "q_list", "r_list")
    fam = _family_from(config)
    sample = _sample_from(config, fam)
    qs, rs = config["q_list"], config["r_list"]
    grid = _grid_from(config)
    mat = factorization_scan(qs, rs, sample, grid, fam)
    result = {"q_list": qs, "r_list": rs, "matrix": mat}
    header = ["q\\r"] + [str(r) for r in rs]
    rows = [[q] + list(row) for q, row in zip(qs, mat)]
    return result, (header, rows)


def _cmd_asymptotics(config):
    _need(config, "n_list")
    spec = _calibration_spec(config)
    reports = coverage_vs_n(spec, config["n_list"], config.get("method"))
    result = {"n_list": config["n_list"],
              "reports": [r.to_dict() for r in reports]}
    header = ["n", "coverage", "std_error", "improper_count"]
    rows = [[n, r.coverage, r.std_error, r.improper_count]
            for n, r in zip(config["n_list"], reports)]
    return result, (header, rows)


def _cmd_residual(config):
    _need(config, "family", "factor", "x_values")
    fam = _family_from(config)
    factor = _factor_from(config, fam)
    grid = _grid_from(config)
    per_x = {str(x): exact_calibration_residual(fam, factor, [x], grid)
             for x in config["x_values"]}
    return {"max_residual": max(per_x.values()), "per_x": per_x}, None


def _cmd_self_check(config):
    scale = config.get("trials_scale", 1.0)
    if "trials" in config:
        scale = config["trials"] / 100_000.0
    report = selfcheck.run_all(seed=config.get("seed", selfcheck.DEFAULT_SEED),
                               trials_scale=scale, workers=config.get("workers"))
    for crit in report.criteria:
        print(crit.line())
    # a failed criterion is a reportable numerical outcome, not an abort:
    # the table is still written, and the exit status carries the verdict
    return report.to_dict(), None, (0 if report.all_passed else 3)


_COMMANDS = {
    "assign": _cmd_assign,
    "interval": _cmd_interval,
    "update": _cmd_update,
    "calibrate": _cmd_calibrate,
    "factor-scan": _cmd_factor_scan,
    "asymptotics": _cmd_asymptotics,
    "residual": _cmd_residual,
    "self-check": _cmd_self_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="picalib",
        description="Invariant-weight posterior assignment and calibration checks")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="report path (default <command>_report.json)")
        p.add_argument("--format", choices=["json", "csv"],
                       help="also emit CSV for 1-d densities")
        p.add_argument("--grid-points", type=int, help="override grid node count")
        p.add_argument("--trials", type=int, help="override Monte Carlo trial count")
        if name in ("calibrate", "asymptotics"):
            p.add_argument("--sweep", help="comma-separated true values to sweep")
    return parser


def _emit_error(exc: Exception, exit_code: int) -> int:
    obj = {"error": {"type": type(exc).__name__, "message": str(exc),
                     "exit_code": exit_code}}
    partial = getattr(exc, "report", None)
    if partial is not None:
        to_dict = getattr(partial, "to_dict", None)
        obj["error"]["partial_report"] = _jsonify(to_dict() if to_dict else partial)
    jsonschema.validate(obj, ERROR_SCHEMA)
    print(json.dumps(obj, sort_keys=True, indent=2))
    return exit_code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # `picalib --self-check` as an alias for the subcommand
    if "--self-check" in argv:
        argv = ["self-check"] + [a for a in argv if a != "--self-check"]
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args)
        outcome = _COMMANDS[args.command](config)
        result, csv_payload = outcome[0], outcome[1]
        exit_code = outcome[2] if len(outcome) > 2 else 0
        out_path = config.get("out") or f"{args.command.replace('-', '_')}_report.json"
        _atomic_write(out_path, _report_json(args.command, config, result))
        if csv_payload is not None:
            header, rows = csv_payload
            csv_path = os.path.splitext(out_path)[0] + ".csv"
            _atomic_write(csv_path, _csv_text(header, rows))
        print(f"report written to {out_path}")
        return exit_code
    except _VALIDATION_ERRORS as e:
        return _emit_error(e, 2)
    except _NUMERICAL_ERRORS as e:
        return _emit_error(e, 3)
    except PicalibError as e:
        return _emit_error(e, 3)


if __name__ == "__main__":
    sys.exit(main())
