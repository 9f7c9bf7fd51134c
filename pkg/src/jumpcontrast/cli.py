"""Command-line front end.

Every subcommand reads a JSON config (``"schema": 1``), validates it against a
fixed set of keys and hands off to the library. Exit codes:
0 success, 1 a kernel check failed, 2 bad configuration, 3 simulation failure,
4 degenerate data or too many failed replications.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .contrast import (
    ContrastProblem,
    DegenerateDataError,
    MinimizerConfig,
    estimate_generic,
    estimate_linear_closed_form,
    evaluate_contrast,
)
from .kernels import TruncationKernel, kernel_moment, kernel_plot_data, moment_tolerance
from .mc_harness import (
    ExperimentAborted,
    ExperimentConfig,
    check_conditional_moment,
    check_filter_rate,
    compare_estimators,
    format_table,
    reports_to_csv,
    run_experiment,
)
from .moments import FilterConfig
from .simulate import PathSample, SimulationError, simulate_path

log = logging.getLogger("jumpcontrast")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_DEGENERATE = 4

SCHEMA_VERSION = 1

# section -> allowed keys; None marks a scalar top-level entry
SCHEMA: dict[str, frozenset | None] = {
    "schema": None,
    "seed": None,
    "output": None,
    "input": None,
    "x0": None,
    "model": frozenset({"theta1", "theta2", "sigma", "gamma", "lambda", "mu_J", "sigma_J"}),
    "grid": frozenset({"T", "n", "kind", "ratio"}),
    "filter": frozenset({"beta", "c", "k"}),
    "kernel": frozenset({"level", "d"}),
    "estimation": frozenset({"variant", "estimator", "free_slope", "box", "evaluate_at"}),
    "mc": frozenset({"replications", "variants"}),
    "kernel_check": frozenset({"kernels", "rel_tol", "plot_points"}),
    "diagnose": frozenset({"x", "deltas", "M", "paths"}),
}


class ConfigError(ValueError):
    pass


def _num(v):
    """JSON ``null`` stands for +inf in threshold-like fields."""
    return math.inf if v is None else float(v)


def load_config(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg) -> None:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"config must declare \"schema\": {SCHEMA_VERSION}")
    for key, val in cfg.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        allowed = SCHEMA[key]
        if allowed is None:
            continue
        if not isinstance(val, dict):
            raise ConfigError(f"section {key!r} must be an object")
        extra = set(val) - allowed
        if extra:
            raise ConfigError(f"unknown keys in {key!r}: {sorted(extra)}")


def experiment_from_config(cfg: dict, seed: int) -> ExperimentConfig:
    m, g = cfg.get("model", {}), cfg.get("grid", {})
    f, k = cfg.get("filter", {}), cfg.get("kernel", {})
    e, mc = cfg.get("estimation", {}), cfg.get("mc", {})
    kw = dict(
        theta1=float(m.get("theta1", -1.0)), theta2=float(m.get("theta2", 2.0)), sigma=float(m.get("sigma", 0.5)),
        gamma=float(m.get("gamma", 1.0)), lam=float(m.get("lambda", 0.0)), mu_j=float(m.get("mu_J", 0.0)),
        sigma_j=float(m.get("sigma_J", 1.0)),
        T=float(g.get("T", 1000.0)), n=g.get("n", 10_000), grid=g.get("kind", "uniform"),
        grid_ratio=float(g.get("ratio", 1.0)), x0=float(cfg.get("x0", 0.0)),
        beta=float(f.get("beta", 0.49)), c=_num(f.get("c", 2.0)), k_trunc=_num(f.get("k")),
        kernel_level=int(k.get("level", 0)), kernel_d=k.get("d"),
        variant=e.get("variant", "exact-ou"), estimator=e.get("estimator", "closed-form"),
        free_slope=bool(e.get("free_slope", True)), replications=int(mc.get("replications", 200)),
        base_seed=seed,
    )
    if "box" in e:
        kw["box"] = tuple(e["box"])
    return ExperimentConfig(**kw)


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(cfg: dict, args) -> Path:
    out = Path(args.output or cfg.get("output", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- subcommands -------------------------------------------------------------

def cmd_simulate(cfg: dict, args) -> int:
    exp = experiment_from_config(cfg, args.seed)
    out = _outdir(cfg, args)
    try:
        path = simulate_path(exp.build_model(), (exp.theta2, exp.sigma), exp.x0, exp.build_grid(), seed=args.seed)
    except SimulationError as exc:
        log.error("simulation failed: %s", exc)
        return EXIT_SIMULATION
    path.to_csv(out / "path.csv", out / "jumps.csv")
    meta = {
        "seed": args.seed,
        "model": cfg.get("model", {}),
        "grid": {"T": exp.T, "n": exp.n, "kind": exp.grid, "ratio": exp.grid_ratio},
        "x0": exp.x0,
        "n_jumps": int(path.jump_times.size),
    }
    _write_json(out / "meta.json", meta)
    log.info("wrote %d observations to %s", exp.n + 1, out / "path.csv")
    return EXIT_OK


def cmd_estimate(cfg: dict, args) -> int:
    src = args.input or cfg.get("input")
    if src is None:
        raise ConfigError("estimate needs an input path CSV (\"input\" or --input)")
    if not Path(src).exists():
        raise ConfigError(f"input file not found: {src}")
    exp = experiment_from_config(cfg, args.seed)
    est = cfg.get("estimation", {})
    out = _outdir(cfg, args)
    try:
        data = PathSample.from_csv(src)
    except (ValueError, KeyError) as exc:
        log.error("cannot use %s: %s", src, exc)
        return EXIT_DEGENERATE
    data.seed = args.seed
    model, box = exp.build_model(), exp.build_box()
    try:
        problem = ContrastProblem(data, model, exp.build_approximator(), exp.build_filter(), box)
        if "evaluate_at" in est:
            mu, sigma = (float(v) for v in est["evaluate_at"])
            if not box.contains(mu, sigma):
                raise ConfigError(f"evaluation point ({mu}, {sigma}) lies outside the parameter box")
            record = {"mu": mu, "sigma": sigma, "contrast": evaluate_contrast(problem, mu, sigma), "seed": args.seed}
        else:
            if exp.estimator == "closed-form":
                res = estimate_linear_closed_form(problem, free_slope=exp.free_slope)
            else:
                res = estimate_generic(problem, MinimizerConfig())
            record = res.to_record()
    except DegenerateDataError as exc:
        log.error("degenerate data: %s", exc)
        return EXIT_DEGENERATE
    _write_json(out / "estimate.json", record)
    print(json.dumps(record, sort_keys=True))
    return EXIT_OK


def _report_outputs(out: Path, stem: str, reports, seed: int, extra=None) -> None:
    reports_to_csv(reports, out / f"{stem}.csv")
    table = format_table(reports)
    (out / f"{stem}.txt").write_text(table + "\n")
    payload = {"seed": seed, "reports": [r.summary() for r in reports]}
    if extra:
        payload.update(extra)
    _write_json(out / f"{stem}.json", payload)
    print(table)


def cmd_mc(cfg: dict, args) -> int:
    exp = experiment_from_config(cfg, args.seed)
    out = _outdir(cfg, args)
    log.info("running %d replications of %s", exp.replications, exp.display_label())
    try:
        rep = run_experiment(exp, workers=args.workers)
    except ExperimentAborted as exc:
        log.error("%s", exc)
        return EXIT_DEGENERATE
    log.info("done: %d ok, %d failed, %.1fs", rep.M, rep.failures, rep.wall_time)
    _report_outputs(out, "mc", [rep], args.seed)
    return EXIT_OK


def cmd_compare(cfg: dict, args) -> int:
    exp = experiment_from_config(cfg, args.seed)
    variants = cfg.get("mc", {}).get("variants")
    if not variants or len(variants) < 2:
        raise ConfigError("compare needs mc.variants with at least two entries")
    out = _outdir(cfg, args)
    try:
        cmp = compare_estimators(exp, variants, workers=args.workers)
    except ExperimentAborted as exc:
        log.error("%s", exc)
        return EXIT_DEGENERATE
    paired = [vars(d) for d in cmp.differences]
    _report_outputs(out, "compare", cmp.reports, args.seed, {"paired_differences": paired})
    return EXIT_OK


DEFAULT_KERNELS = ({"level": 1, "d": 2.0}, {"level": 2, "d": 1.4}, {"level": 4, "d": 1.2})


def cmd_kernel_check(cfg: dict, args) -> int:
    kc = cfg.get("kernel_check", {})
    rel = float(kc.get("rel_tol", 1e-8))
    points = int(kc.get("plot_points", 401))
    out = _outdir(cfg, args)
    results, ok = [], True
    for spec in kc.get("kernels", DEFAULT_KERNELS):
        extra = set(spec) - {"level", "d", "moments"}
        if extra:
            raise ConfigError(f"unknown kernel_check entry keys: {sorted(extra)}")
        kern = TruncationKernel(int(spec["level"]), spec.get("d"))
        orders = spec.get("moments", list(range(kern.level + 1)) if kern.level else [1])
        for k in orders:
            val = kernel_moment(kern, int(k))
            tol = moment_tolerance(kern, int(k), rel)
            passed = abs(val) <= tol
            ok &= passed
            results.append({"kernel": kern.label(), "k": int(k), "moment": val, "tolerance": tol, "pass": passed})
            print(f"{kern.label():>10}  k={k}  moment={val: .3e}  tol={tol:.1e}  {'PASS' if passed else 'FAIL'}")
        np.savetxt(out / f"kernel_{kern.label()}.csv", kernel_plot_data(kern, points), delimiter=",",
                   header="x,phi", comments="", fmt="%.17g")
    _write_json(out / "kernel_check.json", {"seed": args.seed, "results": results, "all_pass": ok})
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_diagnose(cfg: dict, args) -> int:
    exp = experiment_from_config(cfg, args.seed)
    dg = cfg.get("diagnose", {})
    out = _outdir(cfg, args)
    model, theta0 = exp.build_model(), (exp.theta2, exp.sigma)
    filt, kern = exp.build_filter(), exp.build_kernel()
    deltas = dg.get("deltas", [2.0**-j for j in range(6, 13)])
    cm = check_conditional_moment(model, theta0, float(dg.get("x", 0.0)), filt, kern, deltas,
                                  int(dg.get("M", 100_000)), seed=args.seed)
    fr = check_filter_rate(model, theta0, exp.T, exp.n, filt, int(dg.get("paths", 5)), kern, seed=args.seed,
                           x0=exp.x0)
    record = {
        "seed": args.seed,
        "conditional_moment": {
            "deltas": list(map(float, cm.deltas)), "second_moments": list(map(float, cm.second_moments)),
            "coefficient": cm.coefficient, "target": cm.target, "ratio": cm.ratio,
        },
        "filter_rate": vars(fr),
    }
    _write_json(out / "diagnose.json", record)
    print(f"leading coefficient {cm.coefficient:.5g} vs a^2 = {cm.target:.5g} (ratio {cm.ratio:.4f})")
    print(f"false-positive rate {fr.false_positive_rate:.3g} (Gaussian tail {fr.gaussian_tail:.3g}); "
          f"detection rate {fr.detection_rate:.4g} over {fr.n_big_jumps} large jumps")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "mc": cmd_mc,
    "compare": cmd_compare,
    "kernel-check": cmd_kernel_check,
    "diagnose": cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jumpcontrast", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("config", help="JSON config file")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--output", default=None, help="output directory")
        s.add_argument("--workers", type=int, default=1)
        if name == "estimate":
            s.add_argument("--input", default=None, help="path CSV to estimate from")
        else:
            s.set_defaults(input=None)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is None:
            args.seed = int(cfg.get("seed", 0))
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ValueError, TypeError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
