"""Command-line runner: ``evoeq {check,schur,solve,homogenize,cellmig,piezo}``.

Every run resolves a full config (shipped defaults, then ``--config``,
then flags), validates it against ``schema/config.schema.json`` and
writes artifacts that echo the resolved config. Exit status: 0 when every
certificate and pass threshold holds, 1 on numerical failure (with a
``failure.json`` naming the certificate and inequality), 2 on an invalid
config.
"""

import argparse
import copy
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import io as artifact_io
from . import suites
from .errors import EvoEqError
from .linop import (
    Decomposition,
    alpha_fit,
    op_norm,
    random_accretive,
    schur_components,
    schur_reconstruct,
)
from .models.cellmig import cellmig_experiment
from .models.diffusion import homogenization_experiment
from .models.picard import MODELS, picard_experiment, picard_passed
from .models.piezo import piezo_certificates, piezo_convergence, shipped_set
from .spectral import TimeGrid

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA = 0, 1, 2
COMMANDS = ("check", "schur", "solve", "homogenize", "cellmig", "piezo")

DEFAULTS = {
    "check": {"n_cases": suites.DEFAULT_CASES, "suites": list(suites.PROPERTY_SUITES)},
    "schur": {"d0": 6, "d1": 4, "accretivity": 0.5, "n_cases": suites.DEFAULT_CASES},
    "solve": {"model": "heat", "n_inputs": 100, "cut": 0.0, "signal_index": 0,
              "time_grid": {"t0": -8.0, "dt": 0.03125, "n_steps": 1024, "nu": 1.0}},
    "homogenize": {"n_values": [2, 4, 8, 16, 32, 64], "alpha": 1.0, "beta": 3.0,
                   "n_cells": 128, "limit": "harmonic", "nu0": 0.5,
                   "time_grid": {"t0": 0.0, "dt": 0.125, "n_steps": 256, "nu": 1.0}},
    "cellmig": {"r_values": [2.0**-k for k in range(1, 7)], "a1": 2.0, "a2": 0.5, "a3": 0.5,
                "n_cells": 256, "nu0": 0.5,
                "time_grid": {"t0": 0.0, "dt": 0.125, "n_steps": 256, "nu": 1.0}},
    "piezo": {"sets": ["baseline", "coupled", "conductive"],
              "kinds": ["perturbation", "oscillating"],
              "n_values": [1, 2, 4, 8, 16, 32, 64], "block_size": 3,
              "time_grid": {"t0": 0.0, "dt": 0.125, "n_steps": 256, "nu": 1.0}},
}


class ConfigError(Exception):
    pass


class RunFailure(Exception):
    """Numerical failure; ``report`` is written to ``failure.json``."""

    def __init__(self, report):
        super().__init__(report.get("message", "failure"))
        self.report = report


def load_schema():
    text = resources.files("evoeq").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def _path(error):
    parts = ["config"]
    for p in error.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else f".{p}")
    return "".join(parts)


def validate_config(config, schema=None):
    """Raise :class:`ConfigError` listing every violation with its path."""
    schema = load_schema() if schema is None else schema
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(f"{_path(e)}: {e.message}" for e in errors))


def resolve_config(kind, user=None, seed=None, fmt=None, overrides=None):
    """Shipped defaults overlaid with ``user`` and CLI flags; validated."""
    user = {} if user is None else copy.deepcopy(user)
    if "kind" in user and user["kind"] != kind:
        raise ConfigError(f"config.kind: {user['kind']!r} does not match subcommand {kind!r}")
    cfg = {"kind": kind, "seed": 0, "format": "json"}
    cfg.update({k: v for k, v in user.items() if k != kind})
    section = copy.deepcopy(DEFAULTS[kind])
    if isinstance(user.get(kind), dict):
        section.update(user[kind])
    elif kind in user:
        section = user[kind]
    if overrides and isinstance(section, dict):
        section.update(overrides)
    cfg[kind] = section
    if seed is not None:
        cfg["seed"] = seed
    if fmt is not None:
        cfg["format"] = fmt
    validate_config(cfg)
    return cfg


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items()
                if k != "seconds" and not k.startswith("_")}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def _failure(certificate, inequality, message, **details):
    return RunFailure({"certificate": certificate, "inequality": inequality,
                       "message": message, "details": details})


# ---------------------------------------------------------------------------
# subcommands; each returns (summary dict, {filename: csv text}, failure or None)
# ---------------------------------------------------------------------------

def run_check(cfg, workers):
    sec = cfg["check"]
    results = []
    for offset, name in enumerate(sec["suites"]):
        fn = suites.PROPERTY_SUITES[name]
        kw = {"seed": cfg["seed"] + offset}
        if name not in ("holomorphy", "product_inverse_rules"):
            kw["n_cases"] = sec["n_cases"]
        results.extend(fn(**kw))
    failed = [r for r in results if not r.passed]
    summary = {"suites": [r.to_json() for r in results], "pass": not failed}
    rows = [(r.name, r.inequality, r.n_cases, r.n_failures, r.worst_margin, r.tolerance)
            for r in results]
    csvs = {"check.csv": artifact_io.rows_to_csv(
        ["suite", "inequality", "cases", "failures", "worst_margin", "tolerance"], rows)}
    fail = None
    if failed:
        r = failed[0]
        fail = _failure(r.name, r.inequality,
                        f"{r.n_failures} of {r.n_cases} cases violate {r.inequality}",
                        worst_margin=r.worst_margin)
    return summary, csvs, fail


def run_schur(cfg, workers):
    sec = cfg["schur"]
    rng = np.random.default_rng(cfg["seed"])
    dec = Decomposition.random(rng, sec["d0"], sec["d1"])
    m = random_accretive(rng, dec.total_dim, sec["accretivity"])
    q = schur_components(m, dec)
    roundtrip = op_norm(schur_reconstruct(q, dec) - m) / op_norm(m)
    alpha = alpha_fit(m, dec)
    results = (suites.suite_schur_bijection(seed=cfg["seed"], n_cases=sec["n_cases"])
               + suites.suite_perturbed_inverse(seed=cfg["seed"] + 1, n_cases=sec["n_cases"]))
    failed = [r for r in results if not r.passed]
    summary = {
        "components_norm": {k: op_norm(v) for k, v in zip("abcd", q.as_tuple())},
        "roundtrip_residual": roundtrip,
        "alpha": alpha.to_dict(),
        "suites": [r.to_json() for r in results],
        "pass": not failed and roundtrip < 1e-10,
    }
    rows = [(r.name, r.n_cases, r.n_failures, r.worst_margin) for r in results]
    csvs = {"schur.csv": artifact_io.rows_to_csv(["suite", "cases", "failures", "worst_margin"],
                                                 rows)}
    fail = None
    if failed:
        r = failed[0]
        fail = _failure(r.name, r.inequality, f"{r.n_failures} of {r.n_cases} cases fail")
    elif roundtrip >= 1e-10:
        fail = _failure("schur_roundtrip", "reconstruct(components(M)) = M",
                        f"round-trip residual {roundtrip:.3g}")
    return summary, csvs, fail


def run_solve(cfg, workers):
    sec = cfg["solve"]
    model = MODELS[sec["model"]]()
    grid = TimeGrid(**sec["time_grid"])
    result = picard_experiment(model, sec["n_inputs"], cfg["seed"], grid, sec["cut"], workers)
    idx = min(sec["signal_index"], sec["n_inputs"] - 1)
    passed = picard_passed(result)
    summary = {**_strip_timing(result), "pass": passed}
    csvs = {
        "solve_signal.csv": result["_solutions"][idx].to_csv(),
        "solve_input.csv": result["_inputs"][idx].to_csv(),
        "solve_metrics.csv": artifact_io.rows_to_csv(
            ["metric", "value", "bound"],
            [("residual", result["max_residual"], 1e-6),
             ("norm_ratio", result["max_norm_ratio"], result["inverse_c"] + 1e-6),
             ("causality_defect", result["max_causality_defect"], 1e-6)]),
    }
    fail = None
    if not passed:
        fail = _failure("picard_solution", "(d/dt M(d/dt) + A) U = f, |U| <= |f|/c, causal",
                        "solver metrics exceed tolerance", **_strip_timing(result))
    return summary, csvs, fail


def _convergence_outputs(report, stem):
    summary = report.to_json()
    fail = None
    if not report.passed:
        fail = _failure(f"{stem}.convergence",
                        "gap_n decreasing (log-log slope < 0) and final gap <= threshold",
                        f"{report.experiment} did not converge to its limit",
                        slopes=report.slopes, thresholds=report.thresholds,
                        final_freq=report.freq_worst[-1], final_time=report.time_gaps[-1])
    finals = {"freq": report.freq_worst[-1], "time": report.time_gaps[-1]}
    fit = artifact_io.rows_to_csv(
        ["series", "slope", "final_gap", "threshold"],
        [(k, report.slopes[k], finals[k], report.thresholds[k]) for k in ("freq", "time")])
    return summary, {f"{stem}.csv": report.to_csv(), f"{stem}_fit.csv": fit}, fail


def run_homogenize(cfg, workers):
    sec = dict(cfg["homogenize"])
    sec["time_grid"] = TimeGrid(**sec["time_grid"])
    report = homogenization_experiment(workers=workers, **sec)
    return _convergence_outputs(report, "homogenize")


def run_cellmig(cfg, workers):
    sec = dict(cfg["cellmig"])
    sec["time_grid"] = TimeGrid(**sec["time_grid"])
    report = cellmig_experiment(workers=workers, **sec)
    summary, csvs, fail = _convergence_outputs(report, "cellmig")
    ex = report.extra
    csvs["cellmig_unity.csv"] = artifact_io.rows_to_csv(
        ["r", "unity_defect", "sr_norm", "sot_inverse_defect"],
        zip(ex["r_values"], ex["unity_defect"], ex["sr_norms"], ex["sot_inverse_defect"]))
    unity = ex["unity_defect"]
    if fail is None and not all(b < a for a, b in zip(unity, unity[1:])):
        fail = _failure("approximation_of_unity", "|S_r q - q| decreasing as r -> 0",
                        "unity defect is not decreasing", unity_defect=unity)
        summary["pass"] = False
    return summary, csvs, fail


def run_piezo(cfg, workers):
    sec = cfg["piezo"]
    grid = TimeGrid(**sec["time_grid"])
    certs, runs, fail = {}, [], None
    rows = []
    for name in sec["sets"]:
        blocks, constants = shipped_set(name, sec["block_size"])
        table = piezo_certificates(blocks, constants)
        certs[name] = {k: {"value": v, "bound": b, "ok": ok} for k, (v, b, ok) in table.items()}
        for k, (v, b, ok) in table.items():
            if not ok and fail is None:
                fail = _failure(f"piezo[{name}]", k, f"certificate {k} fails: {v:.6g} vs {b:.6g}")
        for kind in sec["kinds"]:
            rep = piezo_convergence(name, sec["n_values"], kind, sec["block_size"],
                                    time_grid=grid, workers=workers)
            runs.append(rep.to_json())
            for n, fg, tg in zip(rep.n_values, rep.freq_worst, rep.time_gaps):
                rows.append((name, kind, n, fg, tg))
            if not rep.passed and fail is None:
                audit = rep.extra["audit"]
                ineq = ("gap_n decreasing and final gap <= threshold" if audit["passed"]
                        else "Re zM(z) >= c, Re M(z)^-1 >= 1/d inherited by the limit")
                fail = _failure(f"piezo[{name},{kind}]", ineq,
                                f"{rep.experiment} failed", audit=audit)
    summary = {"certificates": certs, "convergence": runs, "pass": fail is None}
    csvs = {"piezo.csv": artifact_io.rows_to_csv(["set", "kind", "n", "freq_gap", "time_gap"],
                                                 rows)}
    return summary, csvs, fail


RUNNERS = {"check": run_check, "schur": run_schur, "solve": run_solve,
           "homogenize": run_homogenize, "cellmig": run_cellmig, "piezo": run_piezo}


def _csv_with_config(text, cfg):
    return f"# config {json.dumps(cfg, sort_keys=True, separators=(',', ':'))}\n{text}"


def run(cfg, out_dir, workers=1):
    """Execute a resolved config and write artifacts into ``out_dir``; returns the exit code."""
    kind = cfg["kind"]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    try:
        summary, csvs, fail = RUNNERS[kind](cfg, workers)
    except EvoEqError as exc:
        summary, csvs = None, {}
        fail = RunFailure(exc.to_dict())
    elapsed = time.perf_counter() - started

    if summary is not None:
        payload = {"config": cfg, "result": _strip_timing(summary)}
        if cfg["format"] == "json":
            artifact_io.write_json(payload, out_dir / f"{kind}.json")
        else:
            for fname, text in csvs.items():
                artifact_io.write_text(_csv_with_config(text, cfg), out_dir / fname)
    print(f"{kind}: {elapsed:.2f} s, artifacts in {out_dir}", file=sys.stderr)
    if fail is not None:
        report = {"config": cfg, "failure": _strip_timing(fail.report)}
        artifact_io.write_json(report, out_dir / "failure.json")
        r = fail.report
        print(f"FAIL [{r.get('certificate')}] {r.get('inequality')}: {r.get('message')}",
              file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") \
            from exc


def build_parser():
    parser = argparse.ArgumentParser(prog="evoeq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--out", type=Path, default=None, help="artifact directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None,
                       help="worker threads (default: $EVOEQ_WORKERS or 1)")
        p.add_argument("--format", choices=("json", "csv"), default=None)
        if name == "homogenize":
            p.add_argument("--n", type=_int_list, default=None, help="e.g. 2,4,8,16,32,64")
    return parser


def _workers(flag):
    if flag is not None:
        return flag
    env = os.environ.get("EVOEQ_WORKERS", "").strip()
    return int(env) if env else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        user = None
        if args.config is not None:
            try:
                user = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
            if not isinstance(user, dict):
                raise ConfigError("config: top level must be an object")
            validate_config({"kind": args.command, **user})
        overrides = {"n_values": args.n} if getattr(args, "n", None) else None
        cfg = resolve_config(args.command, user, args.seed, args.format, overrides)
        workers = _workers(args.workers)
        if workers < 1:
            raise ConfigError("--workers: must be at least 1")
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    out = args.out or Path(cfg.get("out", "evoeq-out"))
    return run(cfg, out, workers)


if __name__ == "__main__":
    sys.exit(main())
