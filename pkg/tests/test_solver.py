import math

import numpy as np
import pytest

import blowuplab as bl
from blowuplab.errors import PreconditionError

from conftest import make_problem


def _ode_problem(reaction, z0, bounds=(0.0, 1.0)):
    # zero convection + Neumann + constant data: the PDE collapses to z' = f(z)
    return make_problem(
        bounds=bounds,
        reaction=reaction,
        initial=bl.InitialDataSpec.constant(z0),
    )


def test_ode_limit_power_tracks_oracle():
    ps = _ode_problem(bl.ReactionSpec.power(2.0), 1.0)
    grid = bl.build_grid(ps.domain, 41)
    rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=2.0, dt_max=1e-3, blowup_threshold=1e6))
    assert rr.verdict.blew_up
    sol = bl.ode_oracle(ps.reaction, 1.0)
    assert sol.t_blow == 1.0
    # trajectory follows z(t) = 1/(1-t) to 1% through 0.9 T
    for t, sup in zip(rr.times, rr.sup_norm):
        if t > 0.9:
            break
        assert abs(sup - sol.value(t)) <= 0.01 * sol.value(t)
    assert abs(rr.verdict.t_last - 1.0) < 0.01


def test_ode_limit_exponential_tracks_oracle():
    ps = _ode_problem(bl.ReactionSpec.exponential(1.0), 0.0)
    grid = bl.build_grid(ps.domain, 41)
    rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=2.0, dt_max=1e-3, blowup_threshold=1e6))
    assert rr.verdict.blew_up
    sol = bl.ode_oracle(ps.reaction, 0.0)
    assert sol.t_blow == 1.0
    for t, sup in zip(rr.times, rr.sup_norm):
        if t > 0.9:
            break
        assert abs(sup - sol.value(t)) <= 0.01 * max(sol.value(t), 1.0)
    assert abs(rr.verdict.t_last - 1.0) < 0.01


def test_log_linear_never_blows_up():
    # z' = z log z has the double exponential solution, global in time
    ps = _ode_problem(bl.ReactionSpec.log_linear(), math.e)
    grid = bl.build_grid(ps.domain, 21)
    rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=1.0, dt_max=1e-3))
    assert rr.verdict.kind == "reached_horizon"
    expected = math.exp(math.e)  # z(1) = exp(e^1 log z0) with z0 = e
    assert abs(rr.verdict.sup_last - expected) <= 0.01 * expected


def test_dirichlet_heat_mode_decay():
    # u0 = sin(pi x) under pure diffusion decays as e^{-pi^2 t}
    dom = bl.Domain.interval(0.0, 1.0)
    grid = bl.build_grid(dom, 201)
    x = grid.axes[0]
    ps = bl.ProblemSpec(
        domain=dom,
        reaction=bl.ReactionSpec.zero(),
        convection=bl.ConvectionSpec.zero(1),
        sigma=bl.SigmaSpec.dirichlet(),
        initial=bl.InitialDataSpec.tabulated(np.sin(np.pi * x)),
    )
    rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=0.05, snapshot_times=(0.05,)))
    assert rr.verdict.kind == "reached_horizon"
    expected = math.exp(-math.pi**2 * 0.05)
    assert abs(rr.verdict.sup_last - expected) <= 0.02 * expected


def test_neumann_conserves_trapezoid_mass():
    dom = bl.Domain.interval(0.0, 1.0)
    grid = bl.build_grid(dom, 101)
    ps = bl.ProblemSpec(
        domain=dom,
        reaction=bl.ReactionSpec.zero(),
        convection=bl.ConvectionSpec.zero(1),
        sigma=bl.SigmaSpec.neumann(),
        initial=bl.InitialDataSpec.gaussian_bump((0.4,), 1.0, 0.1),
    )
    w = grid.trapezoid_weights()
    rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=0.02), mass_weight=w)
    assert rr.mass is not None
    m0 = rr.mass[0]
    assert np.all(np.abs(np.asarray(rr.mass) - m0) <= 1e-10 * abs(m0))


def test_dirichlet_pins_boundary_to_zero():
    # data with a nonzero trace: the boundary condition overrides it
    dom = bl.Domain.interval(0.0, 1.0)
    grid = bl.build_grid(dom, 51)
    x = grid.axes[0]
    ps = bl.ProblemSpec(
        domain=dom,
        reaction=bl.ReactionSpec.power(2.0),
        convection=bl.ConvectionSpec.zero(1),
        sigma=bl.SigmaSpec.dirichlet(),
        initial=bl.InitialDataSpec.tabulated(0.5 + 0.5 * np.sin(np.pi * x)),
    )
    rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=0.1, snapshot_times=(0.05, 0.1)))
    for _, field in rr.snapshots:
        assert field.values[0] == 0.0
        assert field.values[-1] == 0.0
    assert rr.final.values[0] == 0.0
    assert rr.final.values[-1] == 0.0
    # interior values are untouched by the pinning and keep evolving
    assert rr.final.values[25] > 0.0


def test_positivity_preserved():
    ps = make_problem(
        reaction=bl.ReactionSpec.power(2.0),
        convection=bl.ConvectionSpec.power(1.0, 1.0, 1),
        sigma=bl.SigmaSpec.dynamical(1.0),
        initial=bl.InitialDataSpec.gaussian_bump((0.3,), 1.0, 0.08),
    )
    grid = bl.build_grid(ps.domain, 101)
    rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=0.2))
    sups = np.asarray(rr.sup_norm)
    mins = np.asarray(rr.min_value)
    assert np.all(mins >= -1e-8 * np.maximum(sups, 1.0))


def test_verdict_stagnated_on_max_steps():
    ps = _ode_problem(bl.ReactionSpec.power(2.0), 1.0)
    grid = bl.build_grid(ps.domain, 21)
    rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=1.5, max_steps=10))
    assert rr.verdict.kind == "stagnated"
    assert rr.steps == 10


def test_blowup_threshold_crossing_records_increasing_tail():
    ps = _ode_problem(bl.ReactionSpec.power(3.0), 2.0)
    grid = bl.build_grid(ps.domain, 21)
    rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=1.0, blowup_threshold=100.0))
    assert rr.verdict.kind == "blew_up"
    assert rr.verdict.sup_last >= 100.0
    # oracle: T = z0^{1-p}/(p-1) = 1/8
    assert abs(rr.verdict.t_last - 0.125) < 0.01


def test_step_collapse_while_climbing_is_blowup():
    # exponential reaction on a fine grid creeps: the physics step falls
    # below dt_min near the singularity while sup is still rising, which is
    # blow-up, not stagnation
    ps = _ode_problem(bl.ReactionSpec.exponential(1.0), 0.0)
    grid = bl.build_grid(ps.domain, 101)
    rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=2.0))
    assert rr.verdict.kind == "blew_up"
    assert "below dt_min" in rr.verdict.detail
    assert abs(rr.verdict.t_last - 1.0) < 0.01


def test_snapshots_land_on_requested_times():
    ps = _ode_problem(bl.ReactionSpec.zero(), 1.0)
    grid = bl.build_grid(ps.domain, 21)
    times = (0.0, 0.013, 0.04, 0.1)
    rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=0.1, snapshot_times=times))
    assert tuple(t for t, _ in rr.snapshots) == times
    # requested times also appear in the scalar series
    for t in times:
        assert np.any(np.isclose(np.asarray(rr.times), t, rtol=0, atol=1e-12))


def test_snapshot_at_horizon_always_recorded():
    # drifted accumulation must not skip a snapshot requested at the horizon
    ps = _ode_problem(bl.ReactionSpec.power(2.0), 0.5)
    grid = bl.build_grid(ps.domain, 41)
    times = tuple(k * 0.5 / 5.0 for k in range(6))
    rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=0.5, dt_max=1e-3, snapshot_times=times))
    assert rr.verdict.kind == "reached_horizon"
    assert len(rr.snapshots) == 6


def test_series_strictly_sorted_unique():
    ps = _ode_problem(bl.ReactionSpec.power(2.0), 1.0)
    grid = bl.build_grid(ps.domain, 21)
    rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=0.9, snapshot_times=(0.3, 0.6)))
    t = np.asarray(rr.times)
    assert np.all(np.diff(t) > 0)
    assert len(rr.times) == len(rr.sup_norm) == len(rr.dts)


def test_policy_validation():
    with pytest.raises(PreconditionError):
        bl.StepPolicy(t_horizon=-1.0)
    with pytest.raises(PreconditionError):
        bl.StepPolicy(dt_min=1e-3, dt_max=1e-6)
    with pytest.raises(PreconditionError):
        bl.StepPolicy(snapshot_times=(2.0,), t_horizon=1.0)
    with pytest.raises(PreconditionError):
        bl.StepPolicy(record_last=1)


def test_dynamic_sigma_must_be_positive_to_run():
    ps = make_problem(sigma=bl.SigmaSpec.dynamical(values=np.zeros(2)))
    grid = bl.build_grid(ps.domain, 11)
    with pytest.raises(PreconditionError):
        bl.run(ps, grid, bl.StepPolicy(t_horizon=0.01))


def test_discrete_mass_matches_dot_product():
    grid = bl.build_grid(bl.Domain.interval(0.0, 2.0), 21)
    u = bl.Field(grid, np.linspace(1.0, 3.0, 21))
    assert math.isclose(bl.discrete_mass(u), 4.0, rel_tol=1e-12)  # trapz of linear


def test_first_order_convergence_on_convection_problem():
    # upwinding is first order; observed rate between successive halvings
    # must be at least 0.8 on a smooth problem
    def solve(n):
        dom = bl.Domain.interval(0.0, 1.0)
        grid = bl.build_grid(dom, n)
        ps = bl.ProblemSpec(
            domain=dom,
            reaction=bl.ReactionSpec.power(2.0),
            convection=bl.ConvectionSpec.power(1.0, 1.0, 1),
            sigma=bl.SigmaSpec.neumann(),
            initial=bl.InitialDataSpec.gaussian_bump((0.4,), 1.0, 0.15),
        )
        rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=0.05, snapshot_times=(0.05,)))
        return rr.final.values

    ref = solve(401)
    errors = []
    for n in (51, 101, 201):
        coarse = solve(n)
        stride = 400 // (n - 1)
        errors.append(float(np.abs(coarse - ref[::stride]).max()))
    r1 = math.log2(errors[0] / errors[1])
    r2 = math.log2(errors[1] / errors[2])
    assert r1 >= 0.8 and r2 >= 0.8, (errors, r1, r2)


def test_run_record_carries_validation_report():
    ps = _ode_problem(bl.ReactionSpec.power(2.0), 1.0)
    grid = bl.build_grid(ps.domain, 11)
    rr = bl.run(ps, grid, bl.StepPolicy(t_horizon=0.01))
    assert rr.validation is not None
    assert rr.validation.hard_ok


def test_run_rejects_nonpositive_initial_everywhere():
    ps = make_problem(initial=bl.InitialDataSpec.constant(0.0))
    grid = bl.build_grid(ps.domain, 11)
    with pytest.raises(PreconditionError):
        bl.run(ps, grid, bl.StepPolicy(t_horizon=0.01))
