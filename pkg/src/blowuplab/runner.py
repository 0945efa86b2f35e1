"""Experiment execution: single runs, sweeps, comparisons, verification.

Each run cell gets a directory named by the first 12 hex digits of its config
digest; the cell writes series.csv and summary.json atomically (temp file
plus rename), so a completed cell is exactly one whose summary.json exists
and matches the digest. Re-running a plan skips completed cells, which makes
interrupted sweeps resumable. Sweep cells run in worker processes bounded by
policy.workers; solve and compare cells run inline. No timestamps or other
nondeterministic values enter the output files: identical configs reproduce
bit-identical CSVs.
"""

from __future__ import annotations

import copy
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .bounds import (
    BoundsInput,
    analyze_blowup,
    blowup_constant,
    check_condition_and_bound,
    select_alpha,
)
from .comparison import (
    build_subsolution_sw,
    build_upper_solution,
    compare_runs,
    exp_envelope_bound,
    residual_sub_sw,
    residual_upper,
)
from .config import ExperimentPlan, build_plan, config_digest, normalize_config
from .errors import (
    ConvergenceError,
    DomainError,
    FitError,
    HypothesisError,
    InapplicableError,
    PreconditionError,
)
from .solver import run
from .spectral import eigenpair_analytic, eigenpair_numeric, grad_phi_m_integral

ENV_OUT = "BLOWUPLAB_OUT"


@dataclass(frozen=True)
class ResultIndex:
    """Completed-cell entries of one run_experiment invocation."""

    out_dir: str
    entries: tuple
    executed: int
    skipped: int
    pending: int
    failed: int


def _atomic_write_text(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_json(path: Path, payload: dict):
    _atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _series_csv(rr) -> str:
    rows = ["t,sup_norm,min_value,mass,dt"]
    for k in range(len(rr.times)):
        mass = "" if rr.mass is None else f"{rr.mass[k]:.17g}"
        rows.append(
            f"{rr.times[k]:.17g},{rr.sup_norm[k]:.17g},"
            f"{rr.min_value[k]:.17g},{mass},{rr.dts[k]:.17g}"
        )
    return "\n".join(rows) + "\n"


def _cell_params(norm: dict) -> dict:
    r = norm["reaction"]
    c = norm["convection"]
    s = norm["sigma"]
    return {
        "p": r.get("p"),
        "q": c["q"][0] if c["kind"] != "zero" else None,
        "alpha": c["alpha"][0] if c["kind"] != "zero" else None,
        "sigma": s.get("value") if s["kind"] == "dynamical" else None,
    }


def _certificate_setup(problem, grid, policy):
    """Certificate report and eigen-weighted mass vector, when applicable.

    Applicable means: power reaction, non-zero convection whose first
    exponent q lies in (1, p), and the sampled domination gate passes with
    the auto-selected alpha on (0, 10 * blowup_threshold].
    """
    r = problem.reaction
    c = problem.convection
    if r.kind != "power" or c.is_zero:
        return None, None
    q = c.components[0].q
    if not 1.0 < q < r.p:
        return None, None
    try:
        ep = eigenpair_analytic(grid)
        bi = BoundsInput.from_problem(problem, ep, q=q,
                                      omega_max=10.0 * policy.blowup_threshold)
        br = blowup_constant(bi)
        br = check_condition_and_bound(br, problem.initial.materialize(grid), ep)
        weight = grid.trapezoid_weights() * ep.phi.values**bi.m
        return br, weight
    except (HypothesisError, InapplicableError, DomainError, ConvergenceError):
        return None, None


def _execute_cell(cell_norm: dict, cell_dir: str):
    """Run one cell and persist series.csv + summary.json. Returns the summary."""
    plan = build_plan(cell_norm)
    digest = config_digest(cell_norm)
    bounds_report, mass_weight = _certificate_setup(plan.problem, plan.grid, plan.policy)
    rr = run(plan.problem, plan.grid, plan.policy, mass_weight=mass_weight)

    summary = {
        "run_id": digest[:12],
        "digest": digest,
        "config": cell_norm,
        "params": _cell_params(cell_norm),
        "verdict": {
            "kind": rr.verdict.kind,
            "t_last": rr.verdict.t_last,
            "sup_last": rr.verdict.sup_last,
            "detail": rr.verdict.detail,
        },
        "steps": rr.steps,
        "n_samples": int(len(rr.times)),
        "t_est": None,
        "fit_window": None,
        "exponent": None,
        "exponent_stderr": None,
        "lower_bound_ok": None,
        "bounds": None if bounds_report is None else asdict(bounds_report),
    }
    if rr.verdict.blew_up and plan.problem.reaction.kind in ("power", "exponential"):
        try:
            est = analyze_blowup(rr)
            summary.update(
                t_est=est.t_est,
                fit_window=list(est.fit_window),
                exponent=est.exponent,
                exponent_stderr=est.exponent_stderr,
                lower_bound_ok=est.lower_bound_ok,
            )
        except (PreconditionError, FitError, InapplicableError) as e:
            summary["fit_error"] = f"{type(e).__name__}: {e}"

    out = Path(cell_dir)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(out / "series.csv", _series_csv(rr))
    _write_json(out / "summary.json", summary)
    return summary, rr


def _execute_cell_safe(cell_norm: dict, cell_dir: str):
    """Sweep-cell wrapper: convert failures into an error record."""
    digest = config_digest(cell_norm)
    try:
        summary, _ = _execute_cell(cell_norm, cell_dir)
        return summary
    except Exception as e:  # per-cell isolation: one bad cell must not kill a sweep
        return {
            "run_id": digest[:12],
            "digest": digest,
            "params": _cell_params(cell_norm),
            "error": f"{type(e).__name__}: {e}",
        }


def _sweep_cells(plan: ExperimentPlan):
    """Deterministic cell configs for a sweep plan, in axis-product order."""
    exp = plan.experiment
    axes = [(name, exp[name]) for name in ("p", "q", "alpha", "sigma") if name in exp]
    names = [name for name, _ in axes]
    cells = []
    for combo in product(*(values for _, values in axes)):
        cell = copy.deepcopy(plan.norm)
        chosen = dict(zip(names, combo))
        if "p" in chosen:
            cell["reaction"]["p"] = chosen["p"]
        dim = len(cell["domain"]["bounds"])
        if "q" in chosen:
            cell["convection"]["q"] = [chosen["q"]] * dim
        if "alpha" in chosen:
            cell["convection"]["alpha"] = [chosen["alpha"]] * dim
        if "sigma" in chosen:
            cell["sigma"] = {"kind": "dynamical", "value": chosen["sigma"]}
        cell["experiment"] = {"kind": "solve", "output_dir": exp["output_dir"]}
        cells.append(normalize_config(cell))
    return cells


def _entry_from_summary(summary: dict) -> dict:
    run_id = summary["run_id"]
    entry = {
        "run_id": run_id,
        "digest": summary["digest"],
        "params": summary.get("params", {}),
        "paths": {
            "series": f"{run_id}/series.csv",
            "summary": f"{run_id}/summary.json",
        },
    }
    if "error" in summary:
        entry["error"] = summary["error"]
        entry["paths"] = {}
        return entry
    bounds = summary.get("bounds") or {}
    entry.update(
        verdict=summary["verdict"]["kind"],
        t_last=summary["verdict"]["t_last"],
        t_est=summary.get("t_est"),
        t_tilde=bounds.get("t_tilde"),
        exponent=summary.get("exponent"),
    )
    return entry


def resolve_out_dir(plan_out: str) -> Path:
    return Path(os.environ.get(ENV_OUT) or plan_out)


def run_experiment(plan: ExperimentPlan, max_cells: int | None = None) -> ResultIndex:
    """Execute a plan and write its result files; returns the index.

    max_cells caps how many not-yet-completed cells this invocation executes
    (completed cells are always counted as skipped); the remainder is left
    pending for a later invocation, which is also how interrupted sweeps
    resume.
    """
    out_dir = resolve_out_dir(plan.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if plan.kind == "verify":
        return _run_verify(plan, out_dir)
    if plan.kind == "compare":
        return _run_compare(plan, out_dir)

    cells = [plan.norm] if plan.kind == "solve" else _sweep_cells(plan)
    entries = []
    todo = []
    skipped = 0
    for cell in cells:
        digest = config_digest(cell)
        cell_dir = out_dir / digest[:12]
        summary_path = cell_dir / "summary.json"
        if summary_path.exists():
            stored = json.loads(summary_path.read_text(encoding="utf-8"))
            if stored.get("digest") == digest:
                entries.append(_entry_from_summary(stored))
                skipped += 1
                continue
        todo.append((cell, cell_dir))

    pending = 0
    if max_cells is not None and len(todo) > max_cells:
        pending = len(todo) - max_cells
        todo = todo[:max_cells]

    failed = 0
    if plan.kind == "solve":
        for cell, cell_dir in todo:
            summary, _ = _execute_cell(cell, str(cell_dir))
            entries.append(_entry_from_summary(summary))
    else:
        workers = min(plan.policy.workers, max(len(todo), 1))
        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(_execute_cell_safe, cell, str(cell_dir))
                    for cell, cell_dir in todo
                ]
                summaries = [f.result() for f in futures]
        else:
            summaries = [
                _execute_cell_safe(cell, str(cell_dir)) for cell, cell_dir in todo
            ]
        for summary in summaries:
            if "error" in summary:
                failed += 1
            entries.append(_entry_from_summary(summary))

    entries.sort(key=lambda e: e["run_id"])
    index = ResultIndex(str(out_dir), tuple(entries), len(todo) - failed,
                        skipped, pending, failed)
    _write_json(out_dir / "index.json", {
        "entries": list(entries),
        "executed": index.executed,
        "skipped": index.skipped,
        "pending": index.pending,
        "failed": index.failed,
    })
    return index


def _shared_snapshot_times(policy_norm: dict) -> list:
    if policy_norm["snapshot_times"]:
        return policy_norm["snapshot_times"]
    horizon = policy_norm["t_horizon"]
    return [k * horizon / 5.0 for k in range(6)]


def _run_compare(plan: ExperimentPlan, out_dir: Path) -> ResultIndex:
    base = copy.deepcopy(plan.norm)
    base["policy"]["snapshot_times"] = _shared_snapshot_times(base["policy"])
    cells = []
    for patch in plan.experiment["variants"]:
        merged = copy.deepcopy(base)
        for section, content in patch.items():
            merged[section] = copy.deepcopy(content)
        merged["policy"]["snapshot_times"] = base["policy"]["snapshot_times"]
        merged["experiment"] = {"kind": "solve", "output_dir": plan.experiment["output_dir"]}
        cells.append(normalize_config(merged))

    entries = []
    records = []
    for cell in cells:
        digest = config_digest(cell)
        summary, rr = _execute_cell(cell, str(out_dir / digest[:12]))
        entries.append(_entry_from_summary(summary))
        records.append(rr)

    report = compare_runs(records[0], records[1])
    _write_json(out_dir / "comparison.json", {
        "run_a": entries[0]["run_id"],
        "run_b": entries[1]["run_id"],
        "times": list(report.times),
        "excess_ab": list(report.excess_ab),
        "excess_ba": list(report.excess_ba),
        "a_le_b": report.a_le_b,
        "b_le_a": report.b_le_a,
        "tol": report.tol,
    })
    entries.sort(key=lambda e: e["run_id"])
    return ResultIndex(str(out_dir), tuple(entries), len(cells), 0, 0, 0)


def _run_verify(plan: ExperimentPlan, out_dir: Path) -> ResultIndex:
    exp = plan.experiment
    which = exp["which"]
    ps, grid, policy = plan.problem, plan.grid, plan.policy
    payload = {"which": which, "digest": plan.digest}
    post_write_check = None

    if which == "bounds":
        ep = eigenpair_analytic(grid)
        omega_max = exp.get("omega_max", 10.0 * policy.blowup_threshold)
        alpha = exp.get("alpha")
        if alpha is None:
            alpha = select_alpha(ps.convection, exp["q"], omega_max)
        bi = BoundsInput.from_problem(ps, ep, q=exp["q"], alpha=alpha,
                                      omega_max=omega_max)
        br = blowup_constant(bi)
        br = check_condition_and_bound(br, ps.initial.materialize(grid), ep)
        payload["bounds"] = asdict(br)
    elif which == "rates":
        rr = run(ps, grid, policy)
        if not rr.verdict.blew_up:
            raise HypothesisError(
                f"rate verification needs a blow-up run, verdict was {rr.verdict.kind}"
            )
        est = analyze_blowup(rr)
        payload["rates"] = {
            "t_est": est.t_est,
            "fit_window": list(est.fit_window),
            "exponent": est.exponent,
            "exponent_stderr": est.exponent_stderr,
            "lower_bound_ok": est.lower_bound_ok,
            "n_samples": est.n_samples,
        }
    elif which == "supersolution":
        us = build_upper_solution(ps, grid, exp.get("axis", 0), exp["c_conv"])
        t_samples = exp.get("t_samples")
        if not t_samples:
            t_samples = list(np.linspace(0.0, policy.t_horizon, 11))
        report = residual_upper(us, grid, t_samples)
        payload["supersolution"] = {
            "k": us.k, "alpha": us.alpha, "axis": us.axis, "eta_c": us.eta_c,
            "min_interior": report.min_interior,
            "min_boundary": report.min_boundary,
            "scale": report.scale,
            "ok": report.ok,
        }
    else:  # subsolution
        if ps.reaction.p is None:
            raise InapplicableError(
                f"sub-solution recipe needs a reaction exponent, got {ps.reaction.kind}"
            )
        q = exp["q"]
        c_g = exp.get("c_g")
        if c_g is None:
            c_g = exp_envelope_bound(ps.convection, q)
        ss = build_subsolution_sw(ps.reaction.p, q, c_g)
        t_hi = exp["t_max_frac"] / ss.eps
        times = list(np.linspace(0.0, t_hi, exp["n_times"]))
        report = residual_sub_sw(ss, grid, times)
        payload["subsolution"] = {
            "gamma": ss.gamma, "kappa": ss.kappa, "mu": ss.mu,
            "m_ss": ss.m_ss, "a": ss.a, "eps": ss.eps, "c_g": ss.c_g,
            "max_residual": report.max_residual,
            "scale": report.scale,
            "n_evaluated": report.n_evaluated,
            "ok": report.ok,
        }
        # record the measurement before the violation (if any) is raised
        post_write_check = report.check

    _write_json(out_dir / "verify.json", payload)
    if post_write_check is not None:
        post_write_check()
    entry = {"run_id": f"verify-{which}", "digest": plan.digest,
             "paths": {"verify": "verify.json"}}
    return ResultIndex(str(out_dir), (entry,), 1, 0, 0, 0)


def emit_tables(index: ResultIndex):
    """Write classification.csv and per-blow-up-run gnuplot .dat series.

    Rows sort by (p, q, alpha, sigma) with absent values last. Returns the
    list of written paths.
    """
    if not index.entries:
        raise PreconditionError("result index is empty; nothing to tabulate")
    out_dir = Path(index.out_dir)
    tables = out_dir / "tables"
    tables.mkdir(parents=True, exist_ok=True)

    def sort_key(entry):
        p = entry.get("params", {})
        return tuple(
            (v is None, v if v is not None else 0.0)
            for v in (p.get("p"), p.get("q"), p.get("alpha"), p.get("sigma"))
        )

    def cell(v):
        return "" if v is None else f"{v:.17g}"

    rows = ["p,q,alpha,sigma,verdict,t_est,t_tilde,exponent"]
    written = []
    for entry in sorted(index.entries, key=sort_key):
        params = entry.get("params", {})
        verdict = entry.get("verdict", "error" if "error" in entry else "")
        rows.append(",".join([
            cell(params.get("p")), cell(params.get("q")),
            cell(params.get("alpha")), cell(params.get("sigma")),
            verdict, cell(entry.get("t_est")), cell(entry.get("t_tilde")),
            cell(entry.get("exponent")),
        ]))
        if entry.get("verdict") == "blew_up" and entry.get("paths", {}).get("series"):
            series = (out_dir / entry["paths"]["series"]).read_text(encoding="utf-8")
            lines = ["# t sup_norm"]
            for line in series.splitlines()[1:]:
                parts = line.split(",")
                lines.append(f"{parts[0]} {parts[1]}")
            dat = tables / f"{entry['run_id']}.dat"
            _atomic_write_text(dat, "\n".join(lines) + "\n")
            written.append(dat)

    table = tables / "classification.csv"
    _atomic_write_text(table, "\n".join(rows) + "\n")
    written.insert(0, table)
    return written


def eigen_report(plan: ExperimentPlan) -> dict:
    """Numeric and analytic principal eigenpairs of the plan's grid."""
    numeric = eigenpair_numeric(plan.grid)
    analytic = eigenpair_analytic(plan.grid)
    m = 2.0
    return {
        "lam_numeric": numeric.lam,
        "lam_analytic": analytic.lam,
        "residual": numeric.residual,
        "iterations": numeric.iterations,
        "grad_sq_integral_numeric": grad_phi_m_integral(numeric, m, "quadrature"),
        "grad_sq_integral_analytic": grad_phi_m_integral(analytic, m),
    }
