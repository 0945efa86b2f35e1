import json
import math

import pytest

import blowuplab as bl
from blowuplab.cli import main
from blowuplab.errors import ConfigError, PreconditionError
from blowuplab.runner import resolve_out_dir


@pytest.fixture(autouse=True)
def _no_out_override(monkeypatch):
    # keep config-declared output dirs authoritative unless a test opts in
    monkeypatch.delenv("BLOWUPLAB_OUT", raising=False)


def _solve_doc(out_dir="results", **sections):
    doc = {
        "domain": {"bounds": [[0.0, 1.0]]},
        "grid": {"n": [21]},
        "reaction": {"kind": "power", "p": 2.0},
        "initial": {"kind": "constant", "value": 1.0},
        "policy": {"t_horizon": 2.0, "blowup_threshold": 1.0e4},
        "experiment": {"kind": "solve", "output_dir": out_dir},
    }
    doc.update(sections)
    return doc


def _plan(doc):
    return bl.build_plan(bl.normalize_config(doc))


def _write_cfg(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------------------
# schema: defaults
# ---------------------------------------------------------------------------

def test_defaults_fill_every_optional_section():
    plan = _plan({"domain": {"bounds": [[0.0, 1.0]]}})
    assert plan.kind == "solve"
    assert plan.output_dir == "results"
    assert plan.grid.shape == (101,)
    assert plan.norm["reaction"] == {"kind": "zero"}
    assert plan.norm["convection"]["kind"] == "zero"
    assert plan.norm["sigma"] == {"kind": "neumann"}
    assert plan.norm["initial"] == {"kind": "constant", "value": 1.0}
    assert plan.policy.t_horizon == 1.0
    assert plan.policy.dt_max == 0.05
    assert plan.policy.record_last == 50
    assert plan.policy.snapshot_times == ()


def test_rectangle_defaults_square_grid():
    plan = _plan({"domain": {"bounds": [[0.0, 1.0], [0.0, 2.0]]},
                          "grid": {"n": [11, 21]}})
    assert plan.grid.shape == (11, 21)
    assert plan.problem.domain.dim == 2


# ---------------------------------------------------------------------------
# schema: rejection messages cite dotted paths
# ---------------------------------------------------------------------------

def test_unknown_keys_cite_dotted_path():
    with pytest.raises(ConfigError, match="unknown key bogus"):
        _plan(_solve_doc(bogus=1))
    with pytest.raises(ConfigError, match="unknown key sigma.bogus"):
        _plan(_solve_doc(sigma={"kind": "neumann", "bogus": 1}))
    with pytest.raises(ConfigError, match="unknown key policy.bogus"):
        _plan(_solve_doc(policy={"bogus": 1}))


def test_domain_and_grid_validation():
    with pytest.raises(ConfigError, match="domain: missing required section"):
        _plan({})
    with pytest.raises(ConfigError, match=r"domain.bounds\[0\]: need lo < hi"):
        _plan({"domain": {"bounds": [[1.0, 0.0]]}})
    with pytest.raises(ConfigError, match="grid.n: every axis needs at least 3 nodes"):
        _plan(_solve_doc(grid={"n": [2]}))


def test_reaction_and_sigma_validation():
    with pytest.raises(ConfigError, match="reaction.p: power reaction needs p > 1"):
        _plan(_solve_doc(reaction={"kind": "power", "p": 1.0}))
    with pytest.raises(ConfigError, match="sigma.value: missing required key"):
        _plan(_solve_doc(sigma={"kind": "dynamical"}))
    with pytest.raises(ConfigError, match="sigma.value: must be positive"):
        _plan(_solve_doc(sigma={"kind": "dynamical", "value": -1.0}))
    with pytest.raises(ConfigError, match=r"sigma.values\[1\]: must be positive"):
        _plan(_solve_doc(sigma={"kind": "dynamical", "values": [1.0, 0.0]}))


def test_initial_values_length_checked_against_grid():
    with pytest.raises(ConfigError, match="initial.values: expected 21 entries"):
        _plan(_solve_doc(initial={"kind": "tabulated", "values": [1.0] * 5}))


def test_snapshot_times_must_fit_horizon():
    with pytest.raises(ConfigError, match=r"policy.snapshot_times\[1\]"):
        _plan(_solve_doc(
            policy={"t_horizon": 1.0, "snapshot_times": [0.5, 2.0]}))


def test_sweep_axis_validation():
    base = _solve_doc()
    base["experiment"] = {"kind": "sweep", "output_dir": "results"}
    with pytest.raises(ConfigError,
                       match="sweep needs at least one of p, q, alpha, sigma"):
        _plan(base)

    doc = _solve_doc(experiment={"kind": "sweep", "q": [1.5], "output_dir": "r"})
    with pytest.raises(ConfigError, match="non-zero convection"):
        _plan(doc)

    doc = _solve_doc(experiment={"kind": "sweep", "sigma": [0.5, 0.0],
                                 "output_dir": "r"})
    with pytest.raises(ConfigError, match=r"experiment.sigma\[1\]: must be positive"):
        _plan(doc)

    doc = _solve_doc(experiment={"kind": "sweep", "p": [1.0], "output_dir": "r"})
    with pytest.raises(ConfigError, match=r"experiment.p\[0\]"):
        _plan(doc)


def test_verify_schema_requires_kind_specific_keys():
    with pytest.raises(ConfigError, match="experiment.q: missing required key"):
        _plan(_solve_doc(
            experiment={"kind": "verify", "which": "bounds", "output_dir": "r"}))
    with pytest.raises(ConfigError, match="experiment.c_conv"):
        _plan(_solve_doc(
            experiment={"kind": "verify", "which": "supersolution",
                        "output_dir": "r"}))
    with pytest.raises(ConfigError, match="experiment.q"):
        _plan(_solve_doc(
            experiment={"kind": "verify", "which": "subsolution",
                        "output_dir": "r"}))
    with pytest.raises(ConfigError, match="which"):
        _plan(_solve_doc(
            experiment={"kind": "verify", "which": "frobnicate",
                        "output_dir": "r"}))

    plan = _plan(_solve_doc(
        experiment={"kind": "verify", "which": "subsolution", "q": 1.0,
                    "output_dir": "r"}))
    assert plan.experiment["n_times"] == 20
    assert plan.experiment["t_max_frac"] == 0.9


def test_compare_needs_exactly_two_patch_variants():
    with pytest.raises(ConfigError, match="expected exactly 2 variants"):
        _plan(_solve_doc(experiment={
            "kind": "compare", "output_dir": "r",
            "variants": [{"sigma": {"kind": "dynamical", "value": 1.0}}],
        }))
    with pytest.raises(ConfigError, match="unknown key"):
        _plan(_solve_doc(experiment={
            "kind": "compare", "output_dir": "r",
            "variants": [{"grid": {"n": [11]}},
                         {"grid": {"n": [21]}}],
        }))


def test_parse_and_load_config_errors():
    with pytest.raises(ConfigError, match="invalid JSON"):
        bl.parse_config("{ this is not json")
    with pytest.raises(ConfigError):
        bl.load_config("/nonexistent/config.json")


# ---------------------------------------------------------------------------
# digest: invariant to key order and bookkeeping fields, sensitive to physics
# ---------------------------------------------------------------------------

def test_digest_ignores_key_order_and_bookkeeping():
    a = _solve_doc()
    b = {k: a[k] for k in reversed(list(a))}  # same content, reversed key order
    assert _plan(a).digest == _plan(b).digest

    moved = _solve_doc(out_dir="elsewhere")
    moved["policy"] = dict(moved["policy"], workers=7)
    assert _plan(moved).digest == _plan(a).digest

    physics = _solve_doc(reaction={"kind": "power", "p": 3.0})
    assert _plan(physics).digest != _plan(a).digest


# ---------------------------------------------------------------------------
# runner: solve determinism
# ---------------------------------------------------------------------------

def test_solve_rerun_is_bit_identical(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    idx_a = bl.run_experiment(_plan(_solve_doc(str(out_a))))
    idx_b = bl.run_experiment(_plan(_solve_doc(str(out_b))))

    assert idx_a.executed == 1 and idx_a.failed == 0
    entry = idx_a.entries[0]
    assert entry["verdict"] == "blew_up"
    assert entry["t_est"] == pytest.approx(1.0, abs=0.02)
    assert entry["run_id"] == idx_b.entries[0]["run_id"]

    run_id = entry["run_id"]
    series_a = (out_a / run_id / "series.csv").read_bytes()
    series_b = (out_b / run_id / "series.csv").read_bytes()
    assert series_a == series_b

    # summaries agree on everything except the self-referential output dir
    sum_a = json.loads((out_a / run_id / "summary.json").read_text())
    sum_b = json.loads((out_b / run_id / "summary.json").read_text())
    sum_a["config"]["experiment"].pop("output_dir")
    sum_b["config"]["experiment"].pop("output_dir")
    assert sum_a == sum_b


def test_completed_solve_is_skipped_on_rerun(tmp_path):
    plan = _plan(_solve_doc(str(tmp_path)))
    first = bl.run_experiment(plan)
    again = bl.run_experiment(plan)
    assert first.executed == 1 and first.skipped == 0
    assert again.executed == 0 and again.skipped == 1
    assert again.entries[0]["verdict"] == "blew_up"


# ---------------------------------------------------------------------------
# runner: sweep kill/resume and tables
# ---------------------------------------------------------------------------

def _sweep_doc(out_dir):
    return _solve_doc(
        out_dir,
        convection={"kind": "power", "alpha": [0.2], "q": [1.0]},
        policy={"t_horizon": 2.0, "blowup_threshold": 1.0e4, "workers": 1},
        experiment={"kind": "sweep", "p": [2.0, 3.0], "alpha": [0.2, 0.4],
                    "output_dir": out_dir},
    )


def test_sweep_interrupted_then_resumed(tmp_path):
    plan = _plan(_sweep_doc(str(tmp_path)))

    part = bl.run_experiment(plan, max_cells=2)
    assert part.executed == 2 and part.skipped == 0 and part.pending == 2
    assert len(part.entries) == 2

    rest = bl.run_experiment(plan)
    assert rest.executed == 2 and rest.skipped == 2 and rest.pending == 0
    assert len(rest.entries) == 4

    third = bl.run_experiment(plan)
    assert third.executed == 0 and third.skipped == 4

    # constant data under reflecting boundaries stays spatially uniform, so
    # every cell follows the homogeneous law and its known blow-up time
    by_p = {}
    for entry in third.entries:
        assert entry["verdict"] == "blew_up"
        by_p.setdefault(entry["params"]["p"], []).append(entry["t_est"])
    assert sorted(by_p) == [2.0, 3.0]
    for t_est in by_p[2.0]:
        assert t_est == pytest.approx(1.0, abs=0.02)
    for t_est in by_p[3.0]:
        assert t_est == pytest.approx(0.5, abs=0.02)

    on_disk = json.loads((tmp_path / "index.json").read_text())
    assert on_disk["skipped"] == 4 and len(on_disk["entries"]) == 4


def test_sweep_runs_cells_in_parallel(tmp_path):
    doc = _sweep_doc(str(tmp_path))
    doc["policy"]["workers"] = 2
    doc["experiment"] = {"kind": "sweep", "p": [2.0, 3.0],
                         "output_dir": str(tmp_path)}
    index = bl.run_experiment(_plan(doc))
    assert index.executed == 2 and index.failed == 0
    assert all(e["verdict"] == "blew_up" for e in index.entries)


def test_emit_tables_sorted_classification_and_dat_series(tmp_path):
    plan = _plan(_sweep_doc(str(tmp_path)))
    index = bl.run_experiment(plan)
    paths = bl.emit_tables(index)

    table = tmp_path / "tables" / "classification.csv"
    assert paths[0] == table
    lines = table.read_text().splitlines()
    assert lines[0] == "p,q,alpha,sigma,verdict,t_est,t_tilde,exponent"
    cells = [line.split(",") for line in lines[1:]]
    assert [(float(c[0]), float(c[2])) for c in cells] == [
        (2.0, 0.2), (2.0, 0.4), (3.0, 0.2), (3.0, 0.4)]
    assert all(c[4] == "blew_up" for c in cells)

    dats = sorted((tmp_path / "tables").glob("*.dat"))
    assert len(dats) == 4
    first = dats[0].read_text().splitlines()
    assert first[0] == "# t sup_norm"
    assert len(first[1].split()) == 2

    empty = bl.ResultIndex(str(tmp_path), (), 0, 0, 0, 0)
    with pytest.raises(PreconditionError):
        bl.emit_tables(empty)


# ---------------------------------------------------------------------------
# runner: verdict classification across regimes
# ---------------------------------------------------------------------------

def test_marginal_convection_cell_gets_no_certificate(tmp_path):
    # g = u^2 with p = 3 sits exactly on the g ~ u^(p-1) domination line, so
    # K exp(x + t) is an upper solution and the run stays under it; the
    # certificate, sampled over the range the data actually visits, must
    # decline rather than promise a finite blow-up time
    doc = _solve_doc(
        str(tmp_path),
        reaction={"kind": "power", "p": 3.0},
        convection={"kind": "power", "alpha": [1.0], "q": [2.0]},
        sigma={"kind": "dynamical", "value": 1.0},
        initial={"kind": "constant", "value": 30.0},
        policy={"t_horizon": 0.02, "blowup_threshold": 1.0e4},
    )
    index = bl.run_experiment(_plan(doc))
    entry = index.entries[0]
    assert entry["verdict"] == "reached_horizon"
    assert entry["t_tilde"] is None

    summary = json.loads(
        (tmp_path / entry["run_id"] / "summary.json").read_text())
    assert summary["bounds"]["condition_met"] is False
    assert summary["verdict"]["sup_last"] <= 30.0 * math.exp(1.0 + 0.02)


def test_dominant_convection_cell_reaches_horizon(tmp_path):
    doc = _solve_doc(
        str(tmp_path),
        grid={"n": [41]},
        convection={"kind": "power", "alpha": [1.0], "q": [1.0]},
        sigma={"kind": "dynamical", "value": 1.0},
        policy={"t_horizon": 0.6},
    )
    index = bl.run_experiment(_plan(doc))
    entry = index.entries[0]
    assert entry["verdict"] == "reached_horizon"
    summary = json.loads(
        (tmp_path / entry["run_id"] / "summary.json").read_text())
    # the exponential envelope exp(x + 2t) caps the sup at e^2.2
    assert summary["verdict"]["sup_last"] < math.exp(2.2)


def test_compare_experiment_orders_variants(tmp_path):
    doc = _solve_doc(
        str(tmp_path),
        reaction={"kind": "zero"},
        policy={"t_horizon": 0.1},
        experiment={"kind": "compare", "output_dir": str(tmp_path),
                    "variants": [
                        {"initial": {"kind": "constant", "value": 1.0}},
                        {"initial": {"kind": "constant", "value": 2.0}},
                    ]},
    )
    index = bl.run_experiment(_plan(doc))
    assert index.executed == 2
    payload = json.loads((tmp_path / "comparison.json").read_text())
    assert payload["a_le_b"] is True
    assert payload["b_le_a"] is False
    assert len(payload["times"]) == 6


def test_out_dir_env_override(tmp_path, monkeypatch):
    target = tmp_path / "envout"
    monkeypatch.setenv("BLOWUPLAB_OUT", str(target))
    assert resolve_out_dir("results") == target

    doc = _solve_doc("results", reaction={"kind": "zero"},
                     policy={"t_horizon": 0.05})
    index = bl.run_experiment(_plan(doc))
    assert index.out_dir == str(target)
    assert (target / "index.json").exists()


# ---------------------------------------------------------------------------
# CLI: exit code 0 paths
# ---------------------------------------------------------------------------

def test_cli_solve_then_fit_rate(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path / "solve.json", _solve_doc(str(out)))
    assert main(["solve", cfg]) == 0
    stdout = capsys.readouterr().out
    assert "blew_up" in stdout and f"results in {out}" in stdout

    index = json.loads((out / "index.json").read_text())
    run_dir = out / index["entries"][0]["run_id"]
    assert (run_dir / "series.csv").exists()

    assert main(["fit-rate", str(run_dir)]) == 0
    stdout = capsys.readouterr().out
    assert "t_est = " in stdout and "lower rate bound holds: True" in stdout


def test_cli_sweep_writes_classification(tmp_path, capsys):
    cfg = _write_cfg(tmp_path / "sweep.json", _sweep_doc(str(tmp_path / "out")))
    assert main(["sweep", cfg, "--max-cells", "2"]) == 0
    assert "pending=2" in capsys.readouterr().out
    assert main(["sweep", cfg]) == 0
    stdout = capsys.readouterr().out
    assert "executed=2 skipped=2 pending=0 failed=0" in stdout
    assert (tmp_path / "out" / "tables" / "classification.csv").exists()


def test_cli_eigen(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path / "eigen.json",
                     _solve_doc(str(out), grid={"n": [41]},
                                reaction={"kind": "zero"}))
    assert main(["eigen", cfg]) == 0
    assert "lambda numeric" in capsys.readouterr().out
    payload = json.loads((out / "eigen.json").read_text())
    assert payload["lam_analytic"] == pytest.approx(math.pi**2, rel=1e-12)
    assert payload["lam_numeric"] == pytest.approx(math.pi**2, rel=2e-3)
    assert payload["iterations"] >= 1


def test_cli_verify_bounds_certificate(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path / "bounds.json", _solve_doc(
        str(out),
        grid={"n": [101]},
        reaction={"kind": "power", "p": 3.0},
        convection={"kind": "power", "alpha": [1.0], "q": [2.0]},
        sigma={"kind": "dynamical", "value": 1.0},
        initial={"kind": "constant", "value": 30.0},
        experiment={"kind": "verify", "which": "bounds", "q": 2.0,
                    "alpha": 1.0, "omega_max": 3.0, "output_dir": str(out)},
    ))
    assert main(["verify-bounds", cfg]) == 0
    assert "condition met" in capsys.readouterr().out
    payload = json.loads((out / "verify.json").read_text())
    b = payload["bounds"]
    assert b["threshold"] == pytest.approx(11.957127627385281, rel=1e-9)
    assert b["condition_met"] is True
    assert b["t_tilde"] == pytest.approx(0.03591112255667115, rel=1e-5)


def test_cli_check_supersolution(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path / "super.json", _solve_doc(
        str(out),
        grid={"n": [41]},
        convection={"kind": "power", "alpha": [1.0], "q": [1.0]},
        sigma={"kind": "dynamical", "value": 1.0},
        policy={"t_horizon": 1.0},
        experiment={"kind": "verify", "which": "supersolution",
                    "c_conv": 1.0, "axis": 0, "output_dir": str(out)},
    ))
    assert main(["check-supersolution", cfg]) == 0
    assert "inequalities hold" in capsys.readouterr().out
    s = json.loads((out / "verify.json").read_text())["supersolution"]
    assert s["ok"] is True
    assert s["eta_c"] == 2.0 and s["k"] == 1.0
    assert s["min_interior"] > 0.0 and s["min_boundary"] > 0.0


def test_cli_compare_two_configs(tmp_path, capsys):
    out = tmp_path / "out"
    low = _solve_doc(str(out), reaction={"kind": "zero"},
                     policy={"t_horizon": 0.1})
    high = _solve_doc(str(out), reaction={"kind": "zero"},
                      policy={"t_horizon": 0.1},
                      initial={"kind": "constant", "value": 2.0})
    cfg_a = _write_cfg(tmp_path / "a.json", low)
    cfg_b = _write_cfg(tmp_path / "b.json", high)
    assert main(["compare", cfg_a, cfg_b]) == 0
    stdout = capsys.readouterr().out
    assert "A <= B everywhere: True" in stdout
    payload = json.loads((out / "comparison.json").read_text())
    assert payload["a_le_b"] is True and payload["b_le_a"] is False


# ---------------------------------------------------------------------------
# CLI: exit code 1 (usage), 2 (hypothesis), 3 (violated inequality)
# ---------------------------------------------------------------------------

def test_cli_usage_errors_exit_1(tmp_path, capsys):
    assert main([]) == 1
    assert main(["solve", str(tmp_path / "missing.json")]) == 1

    bad = _write_cfg(tmp_path / "bad.json", _solve_doc(bogus=1))
    assert main(["solve", bad]) == 1

    sweep = _write_cfg(tmp_path / "sweep.json", _sweep_doc(str(tmp_path)))
    assert main(["solve", sweep]) == 1

    (tmp_path / "empty").mkdir()
    assert main(["fit-rate", str(tmp_path / "empty")]) == 1

    grid_a = _write_cfg(tmp_path / "ga.json", _solve_doc(str(tmp_path)))
    grid_b = _write_cfg(tmp_path / "gb.json",
                        _solve_doc(str(tmp_path), grid={"n": [31]}))
    assert main(["compare", grid_a, grid_b]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_failed_domination_gate_exits_2(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path / "bounds.json", _solve_doc(
        str(out),
        reaction={"kind": "power", "p": 3.0},
        convection={"kind": "power", "alpha": [1.0], "q": [2.0]},
        experiment={"kind": "verify", "which": "bounds", "q": 2.0,
                    "alpha": 1.0, "omega_max": 30.0, "output_dir": str(out)},
    ))
    assert main(["verify-bounds", cfg]) == 2
    assert "hypothesis failure" in capsys.readouterr().err
    assert not (out / "verify.json").exists()


def test_cli_subsolution_violation_exits_3_after_recording(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _write_cfg(tmp_path / "sub.json", _solve_doc(
        str(out),
        domain={"bounds": [[-10.0, 10.0]]},
        grid={"n": [201]},
        convection={"kind": "power", "alpha": [1.0], "q": [1.0]},
        experiment={"kind": "verify", "which": "subsolution", "q": 1.0,
                    "c_g": 1.0, "output_dir": str(out)},
    ))
    assert main(["check-subsolution", cfg]) == 3
    assert "inequality violated" in capsys.readouterr().err

    # the measurement is on disk even though the check failed
    s = json.loads((out / "verify.json").read_text())["subsolution"]
    assert s["ok"] is False
    assert s["max_residual"] > 0.0
    assert s["gamma"] == 1.5 and s["eps"] == 0.1
