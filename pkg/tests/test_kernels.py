import math
import subprocess
import sys

import numpy as np
import pytest

import blowuplab as bl
from blowuplab import kernels
from blowuplab.errors import ConfigError

# zero/power kinds use only *, +, ** and give bit-identical backends;
# exp/log kinds go through numpy's vectorized exp/log, which may differ from
# the scalar libm calls in the compiled loops by a few ulps
ARITHMETIC_REACTIONS = [
    bl.ReactionSpec.zero(),
    bl.ReactionSpec.power(2.0),
    bl.ReactionSpec.power(3.5),
]
TRANSCENDENTAL_REACTIONS = [
    bl.ReactionSpec.exponential(1.0),
    bl.ReactionSpec.log_linear(),
]
ARITHMETIC_CONVECTIONS = [
    bl.ConvectionSpec.zero(1),
    bl.ConvectionSpec.power(0.8, 1.0, 1),
    bl.ConvectionSpec.power(-0.6, 2.0, 1),  # leftward transport
]
SIGMAS = [
    bl.SigmaSpec.dynamical(0.5),
    bl.SigmaSpec.neumann(),
    bl.SigmaSpec.dirichlet(),
]


def _problem_1d(rx, cv, sg):
    return bl.ProblemSpec(
        domain=bl.Domain.interval(-0.5, 1.5),
        reaction=rx,
        convection=cv,
        sigma=sg,
        initial=bl.InitialDataSpec.constant(1.0),
    )


def _random_state(grid, rng, with_zeros=False):
    vals = rng.uniform(0.05, 2.0, grid.n_nodes)
    if with_zeros:
        vals[:: 7] = 0.0
    return bl.Field(grid, vals)


def _both_backends(ps, grid, u, dt):
    try:
        bl.set_backend("numba")
        rhs_a, _ = bl.assemble_rhs(ps, grid, u)
        step_a = bl.advance(ps, grid, u, dt)
        bl.set_backend("numpy")
        rhs_b, _ = bl.assemble_rhs(ps, grid, u)
        step_b = bl.advance(ps, grid, u, dt)
    finally:
        bl.set_backend("numba")
    return rhs_a, step_a, rhs_b, step_b


@pytest.mark.parametrize("rx", ARITHMETIC_REACTIONS, ids=lambda r: r.kind + str(r.p or ""))
@pytest.mark.parametrize("cv", ARITHMETIC_CONVECTIONS, ids=lambda c: str(c.components[0].alpha))
@pytest.mark.parametrize("sg", SIGMAS, ids=lambda s: s.kind)
def test_backend_parity_bitwise_1d(rx, cv, sg, rng):
    ps = _problem_1d(rx, cv, sg)
    grid = bl.build_grid(ps.domain, 47)
    u = _random_state(grid, rng, with_zeros=True)
    rhs_a, step_a, rhs_b, step_b = _both_backends(ps, grid, u, 2.5e-5)
    assert np.array_equal(rhs_a.values, rhs_b.values)
    assert np.array_equal(step_a.values, step_b.values)


@pytest.mark.parametrize("rx", TRANSCENDENTAL_REACTIONS, ids=lambda r: r.kind)
@pytest.mark.parametrize("sg", SIGMAS, ids=lambda s: s.kind)
def test_backend_parity_transcendental_1d(rx, sg, rng):
    ps = _problem_1d(rx, bl.ConvectionSpec.exponential(0.3, 0.7, 1), sg)
    grid = bl.build_grid(ps.domain, 47)
    u = _random_state(grid, rng, with_zeros=True)
    rhs_a, step_a, rhs_b, step_b = _both_backends(ps, grid, u, 2.5e-5)
    np.testing.assert_allclose(rhs_a.values, rhs_b.values, rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(step_a.values, step_b.values, rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("sg", SIGMAS, ids=lambda s: s.kind)
def test_backend_parity_2d(sg, rng):
    ps = bl.ProblemSpec(
        domain=bl.Domain.rectangle(0.0, 1.0, 0.0, 2.0),
        reaction=bl.ReactionSpec.power(2.0),
        convection=bl.ConvectionSpec.power((0.5, -0.3), (1.0, 2.0), 2),
        sigma=sg,
        initial=bl.InitialDataSpec.constant(1.0),
    )
    grid = bl.build_grid(ps.domain, (13, 17))
    u = _random_state(grid, rng)
    try:
        bl.set_backend("numba")
        rhs_a, _ = bl.assemble_rhs(ps, grid, u)
        step_a = bl.advance(ps, grid, u, 1e-5)
        bl.set_backend("numpy")
        rhs_b, _ = bl.assemble_rhs(ps, grid, u)
        step_b = bl.advance(ps, grid, u, 1e-5)
    finally:
        bl.set_backend("numba")
    assert np.array_equal(rhs_a.values, rhs_b.values)
    assert np.array_equal(step_a.values, step_b.values)


def test_interior_rhs_matches_hand_stencil(rng):
    # independent reimplementation of Lap(u) - g(u) u_x + f(u) with upwinding
    ps = _problem_1d(
        bl.ReactionSpec.power(2.0),
        bl.ConvectionSpec.power(0.8, 1.0, 1),
        bl.SigmaSpec.neumann(),
    )
    grid = bl.build_grid(ps.domain, 21)
    h = grid.h[0]
    u = _random_state(grid, rng)
    rhs, _ = bl.assemble_rhs(ps, grid, u)
    v = u.values
    for i in range(1, 20):
        lap = (v[i - 1] - 2.0 * v[i] + v[i + 1]) / h**2
        g = 0.8 * v[i]
        du = (v[i] - v[i - 1]) / h if g > 0.0 else (v[i + 1] - v[i]) / h
        expected = lap - g * du + v[i] ** 2
        assert math.isclose(rhs.values[i], expected, rel_tol=1e-12, abs_tol=1e-12)


def test_upwind_switches_with_flow_sign(rng):
    # leftward g < 0 must use the forward difference
    ps = _problem_1d(
        bl.ReactionSpec.zero(),
        bl.ConvectionSpec.power(-1.0, 1.0, 1),
        bl.SigmaSpec.neumann(),
    )
    grid = bl.build_grid(ps.domain, 21)
    h = grid.h[0]
    u = _random_state(grid, rng)
    rhs, _ = bl.assemble_rhs(ps, grid, u)
    v = u.values
    for i in range(1, 20):
        lap = (v[i - 1] - 2.0 * v[i] + v[i + 1]) / h**2
        g = -v[i]
        du = (v[i + 1] - v[i]) / h  # g < 0: forward
        assert math.isclose(rhs.values[i], lap - g * du, rel_tol=1e-12, abs_tol=1e-12)


def test_neumann_reflection_at_boundary():
    # constant state: Laplacian and flux vanish identically, reaction remains
    ps = _problem_1d(
        bl.ReactionSpec.power(2.0), bl.ConvectionSpec.zero(1), bl.SigmaSpec.neumann()
    )
    grid = bl.build_grid(ps.domain, 21)
    u = bl.Field(grid, np.full(21, 1.5))
    rhs, _ = bl.assemble_rhs(ps, grid, u)
    assert np.allclose(rhs.values, 1.5**2, rtol=0, atol=1e-14)


def test_dirichlet_rows_are_frozen(rng):
    ps = _problem_1d(
        bl.ReactionSpec.power(2.0),
        bl.ConvectionSpec.power(0.5, 1.0, 1),
        bl.SigmaSpec.dirichlet(),
    )
    grid = bl.build_grid(ps.domain, 21)
    u = _random_state(grid, rng)
    rhs, _ = bl.assemble_rhs(ps, grid, u)
    assert rhs.values[0] == 0.0
    assert rhs.values[-1] == 0.0


def test_dynamic_boundary_rhs_is_one_sided_flux():
    # u = x on [0,1]: du/dnu = -1 at left, +1 at right; rhs = -(du/dnu)/sigma
    dom = bl.Domain.interval(0.0, 1.0)
    grid = bl.build_grid(dom, 21)
    ps = bl.ProblemSpec(
        domain=dom,
        reaction=bl.ReactionSpec.zero(),
        convection=bl.ConvectionSpec.zero(1),
        sigma=bl.SigmaSpec.dynamical(0.25),
        initial=bl.InitialDataSpec.constant(1.0),
    )
    u = bl.Field(grid, grid.axes[0].copy())
    rhs, _ = bl.assemble_rhs(ps, grid, u)
    # the 3-point one-sided stencil is exact on linear data
    assert math.isclose(rhs.values[0], 1.0 / 0.25, rel_tol=1e-12)
    assert math.isclose(rhs.values[-1], -1.0 / 0.25, rel_tol=1e-12)


def test_kernels_clamp_negative_states(rng):
    # fractional powers must treat u < 0 as 0, not emit NaN
    ps = _problem_1d(
        bl.ReactionSpec.power(2.5),
        bl.ConvectionSpec.power(1.0, 1.5, 1),
        bl.SigmaSpec.neumann(),
    )
    grid = bl.build_grid(ps.domain, 31)
    vals = rng.uniform(-1.0, 1.0, 31)
    u = bl.Field(grid, vals)
    for backend in ("numba", "numpy"):
        bl.set_backend(backend)
        rhs, _ = bl.assemble_rhs(ps, grid, u)
        assert np.all(np.isfinite(rhs.values)), backend
    bl.set_backend("numba")


def test_rk4_step_matches_quadrature_free_form(rng):
    # one explicit RK4 step of u' = f(u) for a spatially constant state with no
    # spatial coupling reduces to the scalar RK4 update
    ps = _problem_1d(
        bl.ReactionSpec.power(2.0), bl.ConvectionSpec.zero(1), bl.SigmaSpec.neumann()
    )
    grid = bl.build_grid(ps.domain, 11)
    u = bl.Field(grid, np.full(11, 1.2))
    dt = 1e-3
    out = bl.advance(ps, grid, u, dt)

    def f(z):
        return z * z

    z = 1.2
    k1 = f(z)
    k2 = f(z + 0.5 * dt * k1)
    k3 = f(z + 0.5 * dt * k2)
    k4 = f(z + dt * k3)
    z_next = z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    assert np.allclose(out.values, z_next, rtol=1e-14)


def test_set_backend_validation():
    with pytest.raises(ConfigError):
        bl.set_backend("fortran")
    assert set(bl.available_backends()) >= {"numpy"}
    bl.set_backend("numpy")
    assert bl.active_backend().name == "numpy"
    bl.set_backend("numba")
    assert bl.active_backend().name == "numba"


def test_env_flag_selects_backend_at_import():
    code = (
        "import blowuplab as bl; print(bl.active_backend().name)"
    )
    out = subprocess.run(
        [sys.executable, "-c", code],
        env={"PATH": "/usr/bin:/bin", "BLOWUPLAB_BACKEND": "numpy"},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"
