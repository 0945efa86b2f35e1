"""Command-line entry point.

Exit codes: 0 success; 1 usage or configuration error; 2 hypothesis or
validation failure (a stated precondition does not hold); 3 a certified
inequality was violated numerically.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import load_config
from .errors import (
    BlowupLabError,
    ConfigError,
    ConvergenceError,
    DomainError,
    FitError,
    HypothesisError,
    InapplicableError,
    InequalityViolationError,
    InvalidFieldError,
    InvalidResolutionError,
    PreconditionError,
)
from .runner import eigen_report, emit_tables, resolve_out_dir, run_experiment
from .solver import RunRecord, Verdict, run

USAGE_ERRORS = (ConfigError, InvalidResolutionError)
HYPOTHESIS_ERRORS = (
    PreconditionError,
    HypothesisError,
    InapplicableError,
    ConvergenceError,
    FitError,
    DomainError,
    InvalidFieldError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="blowuplab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, max_cells=False):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="JSON config file")
        if max_cells:
            p.add_argument("--max-cells", type=int, default=None, dest="max_cells",
                           help="execute at most this many new cells, leave the rest pending")
        return p

    add("solve", "run a single problem to its verdict", max_cells=True)
    add("sweep", "run a parameter sweep and emit classification tables", max_cells=True)
    add("eigen", "principal Dirichlet eigenpair, numeric vs analytic")
    add("verify-bounds", "blow-up constant, threshold, and time bound")
    add("check-supersolution", "exponential upper-solution residual check")
    add("check-subsolution", "self-similar sub-solution residual check")

    fit = sub.add_parser("fit-rate", help="fit blow-up time and rate from a run directory")
    fit.add_argument("run_dir", help="directory holding series.csv and summary.json")

    cmp_p = sub.add_parser("compare", help="run two configs and check sup-ordering")
    cmp_p.add_argument("config_a", help="first JSON config")
    cmp_p.add_argument("config_b", help="second JSON config")
    return parser


def _require_kind(plan, wanted: str, command: str):
    if plan.kind != wanted:
        raise ConfigError(
            f"experiment.kind is {plan.kind!r}; the {command} subcommand "
            f"needs {wanted!r}"
        )


def _require_verify(plan, which: str, command: str):
    if plan.kind != "verify" or plan.experiment.get("which") != which:
        raise ConfigError(
            f"the {command} subcommand needs experiment "
            f'{{"kind": "verify", "which": "{which}"}}'
        )


def _print_entries(index):
    for entry in index.entries:
        if "error" in entry:
            print(f"run {entry['run_id']}: ERROR {entry['error']}")
            continue
        line = (f"run {entry['run_id']}: {entry['verdict']} "
                f"t_last={entry['t_last']:.6g}")
        if entry.get("t_est") is not None:
            line += f" t_est={entry['t_est']:.6g}"
        if entry.get("t_tilde") is not None:
            line += f" t_tilde={entry['t_tilde']:.6g}"
        print(line)


def _cmd_solve(args) -> int:
    plan = load_config(args.config)
    _require_kind(plan, "solve", "solve")
    index = run_experiment(plan, max_cells=args.max_cells)
    _print_entries(index)
    print(f"results in {index.out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    plan = load_config(args.config)
    _require_kind(plan, "sweep", "sweep")
    index = run_experiment(plan, max_cells=args.max_cells)
    _print_entries(index)
    print(f"executed={index.executed} skipped={index.skipped} "
          f"pending={index.pending} failed={index.failed}")
    if index.pending == 0 and index.entries:
        paths = emit_tables(index)
        print(f"classification table: {paths[0]}")
    print(f"results in {index.out_dir}")
    return 0


def _cmd_eigen(args) -> int:
    plan = load_config(args.config)
    report = eigen_report(plan)
    out_dir = resolve_out_dir(plan.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "eigen.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"lambda numeric  = {report['lam_numeric']:.12g}")
    print(f"lambda analytic = {report['lam_analytic']:.12g}")
    print(f"residual        = {report['residual']:.3e} "
          f"({report['iterations']} iterations)")
    print(f"results in {out_dir}")
    return 0


def _cmd_verify_bounds(args) -> int:
    plan = load_config(args.config)
    _require_verify(plan, "bounds", "verify-bounds")
    index = run_experiment(plan)
    payload = json.loads((Path(index.out_dir) / "verify.json").read_text())
    b = payload["bounds"]
    print(f"C = {b['c_total']:.12g} (C3 = {b['c3']:.12g}, C4 = {b['c4']:.12g})")
    print(f"threshold = {b['threshold']:.12g}, M0 = {b['m0']:.12g}")
    if b["condition_met"]:
        print(f"condition met: T_tilde = {b['t_tilde']:.12g}")
    else:
        print("condition not met: no finite-time certificate")
    print(f"results in {index.out_dir}")
    return 0


def _cmd_fit_rate(args) -> int:
    run_dir = Path(args.run_dir)
    summary_path = run_dir / "summary.json"
    series_path = run_dir / "series.csv"
    if not summary_path.exists() or not series_path.exists():
        raise ConfigError(f"{run_dir} lacks summary.json or series.csv")
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    rr = _record_from_files(summary, series_path)

    from .bounds import analyze_blowup

    est = analyze_blowup(rr)
    print(f"t_est = {est.t_est:.12g}")
    print(f"exponent = {est.exponent:.6g} +/- {est.exponent_stderr:.2g}")
    print(f"fit window: t in [{est.fit_window[0]:.6g}, {est.fit_window[1]:.6g}] "
          f"({est.n_samples} samples)")
    print(f"lower rate bound holds: {est.lower_bound_ok}")
    return 0


def _record_from_files(summary: dict, series_path: Path) -> RunRecord:
    from .config import build_plan

    plan = build_plan(summary["config"])
    times, sups, mins, mass, dts = [], [], [], [], []
    with series_path.open(encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            times.append(float(row["t"]))
            sups.append(float(row["sup_norm"]))
            mins.append(float(row["min_value"]))
            mass.append(float(row["mass"]) if row["mass"] else None)
            dts.append(float(row["dt"]))
    v = summary["verdict"]
    verdict = Verdict(v["kind"], v["t_last"], v["sup_last"], v.get("detail", ""))
    return RunRecord(
        problem=plan.problem, grid=plan.grid, policy=plan.policy,
        times=tuple(times), sup_norm=tuple(sups), min_value=tuple(mins),
        dts=tuple(dts),
        mass=None if mass and mass[0] is None else tuple(mass),
        snapshots={}, final=None, verdict=verdict,
        steps=summary.get("steps", 0), validation=None,
    )


def _cmd_check_supersolution(args) -> int:
    plan = load_config(args.config)
    _require_verify(plan, "supersolution", "check-supersolution")
    index = run_experiment(plan)
    payload = json.loads((Path(index.out_dir) / "verify.json").read_text())
    s = payload["supersolution"]
    print(f"U = {s['k']:.6g} * exp({s['alpha']:.6g} x_{s['axis']} "
          f"+ {s['eta_c']:.6g} t)")
    print(f"min interior residual / scale = {s['min_interior'] / s['scale']:.3e}")
    print(f"min boundary residual / scale = {s['min_boundary'] / s['scale']:.3e}")
    print("upper-solution inequalities hold")
    print(f"results in {index.out_dir}")
    return 0


def _cmd_check_subsolution(args) -> int:
    plan = load_config(args.config)
    _require_verify(plan, "subsolution", "check-subsolution")
    index = run_experiment(plan)
    payload = json.loads((Path(index.out_dir) / "verify.json").read_text())
    s = payload["subsolution"]
    print(f"profile: gamma={s['gamma']:.6g} kappa={s['kappa']:.6g} "
          f"mu={s['mu']:.6g} m={s['m_ss']:.6g} A={s['a']:.6g} eps={s['eps']:.6g}")
    print(f"max residual / scale = {s['max_residual'] / s['scale']:.3e} "
          f"over {s['n_evaluated']} node-times")
    print("sub-solution inequality holds")
    print(f"results in {index.out_dir}")
    return 0


def _cmd_compare(args) -> int:
    plan_a = load_config(args.config_a)
    plan_b = load_config(args.config_b)
    for plan, name in ((plan_a, args.config_a), (plan_b, args.config_b)):
        if plan.kind != "solve":
            raise ConfigError(f"{name}: compare needs experiment.kind solve")
    if plan_a.grid != plan_b.grid:
        raise ConfigError("compare needs both configs on the same grid")

    times = plan_a.policy.snapshot_times
    if not times:
        horizon = min(plan_a.policy.t_horizon, plan_b.policy.t_horizon)
        times = tuple(k * horizon / 5.0 for k in range(6))
    policy_a = replace(plan_a.policy, snapshot_times=times)
    policy_b = replace(plan_b.policy, snapshot_times=times)

    from .comparison import compare_runs

    rr_a = run(plan_a.problem, plan_a.grid, policy_a)
    rr_b = run(plan_b.problem, plan_b.grid, policy_b)
    report = compare_runs(rr_a, rr_b)

    out_dir = resolve_out_dir(plan_a.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "comparison.json").write_text(json.dumps({
        "times": list(report.times),
        "excess_ab": list(report.excess_ab),
        "excess_ba": list(report.excess_ba),
        "a_le_b": report.a_le_b,
        "b_le_a": report.b_le_a,
        "tol": report.tol,
    }, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    print(f"compared at {len(report.times)} snapshot times")
    print(f"A <= B everywhere: {report.a_le_b}")
    print(f"B <= A everywhere: {report.b_le_a}")
    print(f"results in {out_dir}")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "eigen": _cmd_eigen,
    "verify-bounds": _cmd_verify_bounds,
    "fit-rate": _cmd_fit_rate,
    "check-supersolution": _cmd_check_supersolution,
    "check-subsolution": _cmd_check_subsolution,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except USAGE_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except InequalityViolationError as e:
        print(f"inequality violated: {e}", file=sys.stderr)
        return 3
    except HYPOTHESIS_ERRORS as e:
        print(f"hypothesis failure: {e}", file=sys.stderr)
        return 2
    except BlowupLabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
