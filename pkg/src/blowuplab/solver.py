"""Method-of-lines integrator for the convection-reaction-diffusion problem.

Space: second-order centered Laplacian, first-order upwind convection (the
wind direction at a node is the sign of g_i(u) there). Time: classic RK4 with
the boundary relaxation law sigma d_t u = -d_nu u integrated in the same
stages, so interior and boundary stay consistent to the step order.

Step size is adaptive from freshly sampled state bounds each step:

    dt = min(cfl * h_min^2 / (2 dim),          diffusion
             cfl * h_min / max|g(u)|,          convection
             cfl * (2/3) h_min * min sigma,    boundary relaxation
             0.1 * (1 + sup u) / max f(u),     reaction growth
             dt_max)

and is then clamped to land exactly on requested snapshot times and on the
horizon. Only the physics value (before clamping) is compared against dt_min;
a run whose physics step collapses while sup u is still climbing is declared
blown up, otherwise stagnated.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import PreconditionError
from .grid import Field, Grid, normal_derivative
from .kernels import DIRICHLET, DYNAMIC, NEUMANN, active_backend
from .problem import (
    ProblemSpec,
    ValidationReport,
    convection_codes,
    eval_convection,
    eval_reaction,
    reaction_code,
    validate_problem,
)

_SIGMA_CODE = {"dynamical": DYNAMIC, "neumann": NEUMANN, "dirichlet": DIRICHLET}


@dataclass(frozen=True)
class StepPolicy:
    """Time-stepping and termination controls for run()."""

    t_horizon: float = 1.0
    cfl_safety: float = 0.8
    dt_min: float = 1e-18
    dt_max: float = 0.05
    blowup_threshold: float = 1e6
    snapshot_stride: int = 500
    snapshot_times: tuple = ()
    record_last: int = 50
    max_steps: int = 5_000_000
    workers: int = 1

    def __post_init__(self):
        if not (self.t_horizon > 0.0 and math.isfinite(self.t_horizon)):
            raise PreconditionError(f"t_horizon must be positive and finite, got {self.t_horizon}")
        if not (0.0 < self.cfl_safety <= 1.0):
            raise PreconditionError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not (0.0 < self.dt_min <= self.dt_max):
            raise PreconditionError("need 0 < dt_min <= dt_max")
        if self.blowup_threshold <= 0.0:
            raise PreconditionError("blowup_threshold must be positive")
        if self.snapshot_stride < 1 or self.max_steps < 1 or self.record_last < 2:
            raise PreconditionError("snapshot_stride, max_steps >= 1 and record_last >= 2 required")
        if self.workers < 1:
            raise PreconditionError("workers must be >= 1")
        times = tuple(sorted({float(s) for s in self.snapshot_times}))
        if times and (times[0] < 0.0 or times[-1] > self.t_horizon):
            raise PreconditionError("snapshot_times must lie within [0, t_horizon]")
        object.__setattr__(self, "snapshot_times", times)


@dataclass(frozen=True)
class Verdict:
    """Outcome of a run: blew_up, reached_horizon, or stagnated."""

    kind: str
    t_last: float
    sup_last: float
    detail: str = ""

    @property
    def blew_up(self) -> bool:
        return self.kind == "blew_up"

    @property
    def reached_horizon(self) -> bool:
        return self.kind == "reached_horizon"


@dataclass(frozen=True)
class RunRecord:
    """Sampled history of one run plus its verdict.

    times/sup_norm/min_value/dts/mass hold one row per retained sample: the
    initial state, every snapshot_stride-th step, forced snapshot times, and
    an unconditional tail of the final record_last steps (so blow-up fitting
    sees the approach at full resolution). dts[k] is the step that produced
    sample k (0 for the initial row). mass is None unless a mass weight
    vector was supplied to run().
    """

    problem: ProblemSpec
    grid: Grid
    policy: StepPolicy
    times: np.ndarray
    sup_norm: np.ndarray
    min_value: np.ndarray
    dts: np.ndarray
    mass: np.ndarray | None
    snapshots: tuple
    final: Field
    verdict: Verdict
    steps: int
    validation: ValidationReport = dc_field(repr=False, default=None)


class _BoundaryData:
    """Kernel-ready boundary encoding for one (grid, sigma) pair."""

    def __init__(self, grid: Grid, ps: ProblemSpec):
        code = _SIGMA_CODE[ps.sigma.kind]
        sig_values = None
        if code == DYNAMIC:
            sig_values = ps.sigma.boundary_values(grid)
            if np.any(sig_values <= 0.0):
                raise PreconditionError(
                    "dynamical boundary requires sigma > 0 at every boundary node"
                )
        if grid.dim == 1:
            self.bc_left = code
            self.bc_right = code
            self.sig_left = float(sig_values[0]) if sig_values is not None else 1.0
            self.sig_right = float(sig_values[1]) if sig_values is not None else 1.0
        else:
            bidx = grid.boundary_indices
            bc = np.zeros(grid.shape, dtype=np.int64)
            bc.flat[bidx] = code
            sig = np.ones(grid.shape)
            if sig_values is not None:
                sig.flat[bidx] = sig_values
            nu0 = np.zeros(grid.shape)
            nu1 = np.zeros(grid.shape)
            nu0.flat[bidx] = grid.boundary_normals[:, 0]
            nu1.flat[bidx] = grid.boundary_normals[:, 1]
            self.bc = bc
            self.sig = sig
            self.nu0 = nu0
            self.nu1 = nu1


class _Stepper:
    """Backend dispatch plus frozen kernel arguments for one problem/grid."""

    def __init__(self, ps: ProblemSpec, grid: Grid, backend=None):
        self.backend = backend if backend is not None else active_backend()
        self.grid = grid
        r_kind, r_p = reaction_code(ps.reaction)
        kinds, alphas, qs = convection_codes(ps.convection)
        bd = _BoundaryData(grid, ps)
        self.dynamic = _SIGMA_CODE[ps.sigma.kind] == DYNAMIC
        if grid.dim == 1:
            h = grid.h[0]
            self.args = (
                1.0 / h, 1.0 / (h * h), r_kind, r_p,
                int(kinds[0]), float(alphas[0]), float(qs[0]),
                bd.bc_left, bd.bc_right, bd.sig_left, bd.sig_right,
            )
            self._rhs = self.backend.rhs_1d
            self._step = self.backend.rk4_step_1d
        else:
            h0, h1 = grid.h
            self.args = (
                1.0 / h0, 1.0 / (h0 * h0), 1.0 / h1, 1.0 / (h1 * h1), r_kind, r_p,
                int(kinds[0]), float(alphas[0]), float(qs[0]),
                int(kinds[1]), float(alphas[1]), float(qs[1]),
                bd.bc, bd.sig, bd.nu0, bd.nu1,
            )
            self._rhs = self.backend.rhs_2d
            self._step = self.backend.rk4_step_2d

    def rhs(self, u: np.ndarray) -> np.ndarray:
        out = np.empty_like(u)
        self._rhs(u, *self.args, out)
        return out

    def step(self, u: np.ndarray, dt: float) -> np.ndarray:
        return self._step(u, dt, *self.args)


def assemble_rhs(ps: ProblemSpec, grid: Grid, state: Field):
    """Instantaneous d_t u of the discrete system at the given state.

    Returns (rhs, fluxes): rhs is a Field holding the scheme's time
    derivative at every node (boundary nodes carry their boundary law),
    fluxes is the one-sided normal derivative at each boundary node in
    grid.boundary_indices order.
    """
    stepper = _Stepper(ps, grid, backend=active_backend())
    u = state.values.reshape(grid.shape)
    rhs = stepper.rhs(u).ravel()
    fluxes = np.array(
        [normal_derivative(state, int(k)) for k in grid.boundary_indices]
    )
    return Field(grid, rhs), fluxes


def advance(ps: ProblemSpec, grid: Grid, state: Field, dt: float) -> Field:
    """One RK4 step of size dt from the given state."""
    if dt <= 0.0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    stepper = _Stepper(ps, grid)
    u = state.values.reshape(grid.shape)
    return Field(grid, stepper.step(u, dt).ravel())


def discrete_mass(state: Field) -> float:
    """Trapezoid-rule integral of the state over the domain."""
    return float(np.dot(state.grid.trapezoid_weights(), state.values))


def _state_bounds_caps(ps, sup, mn, h_min, dim, policy, sig_min, dynamic):
    """Physics step caps from endpoint evaluations of f and g.

    All nonlinearities here are monotone on [0, inf) and the kernels treat
    negative states as zero, so bounds over the state range follow from the
    two clamped endpoints.
    """
    lo = max(mn, 0.0)
    hi = max(sup, 0.0)
    dt = policy.cfl_safety * h_min * h_min / (2.0 * dim)
    f_hi = max(eval_reaction(ps.reaction, lo), eval_reaction(ps.reaction, hi), 0.0)
    if f_hi > 0.0:
        dt = min(dt, 0.1 * (1.0 + hi) / f_hi)
    if not ps.convection.is_zero:
        ga = np.abs(eval_convection(ps.convection, lo))
        gb = np.abs(eval_convection(ps.convection, hi))
        speed = float(max(ga.max(), gb.max()))
        if speed > 0.0:
            dt = min(dt, policy.cfl_safety * h_min / speed)
    if dynamic:
        dt = min(dt, policy.cfl_safety * (2.0 / 3.0) * h_min * sig_min)
    return min(dt, policy.dt_max)


def _increasing_tail(sups, k: int = 5) -> bool:
    tail = list(sups)[-k:]
    return all(b > a for a, b in zip(tail, tail[1:]))


def run(ps: ProblemSpec, grid: Grid, policy: StepPolicy,
        mass_weight: np.ndarray | None = None) -> RunRecord:
    """Integrate the problem until blow-up, the horizon, or stagnation.

    mass_weight, when given, must be a flat per-node weight vector; the dot
    product weight . u is recorded alongside each retained sample (used for
    both plain mass tracking and eigenfunction-weighted functionals).
    """
    report = validate_problem(ps, grid)
    if not report.hard_ok:
        failed = ", ".join(e.name for e in report.entries if e.hard and not e.passed)
        raise PreconditionError(f"hard hypothesis checks failed: {failed}")
    if mass_weight is not None:
        mass_weight = np.asarray(mass_weight, dtype=float)
        if mass_weight.shape != (grid.n_nodes,):
            raise PreconditionError(
                f"mass_weight must have shape ({grid.n_nodes},), got {mass_weight.shape}"
            )

    u0 = ps.initial.materialize(grid)
    if u0.sup >= policy.blowup_threshold:
        raise PreconditionError(
            f"initial sup {u0.sup} already at or above blowup_threshold {policy.blowup_threshold}"
        )

    stepper = _Stepper(ps, grid)
    sig_min = 1.0
    if stepper.dynamic:
        sig_min = float(ps.sigma.boundary_values(grid).min())
    h_min = float(min(grid.h))
    dim = grid.dim
    horizon = policy.t_horizon

    u = u0.values.reshape(grid.shape).copy()
    if ps.sigma.kind == "dirichlet":
        # the boundary condition is u = 0, not a frozen trace of the data
        u.ravel()[grid.boundary_indices] = 0.0
    t = 0.0
    steps = 0
    sup = float(u.max())
    mn = float(u.min())

    def sample(dt_used):
        m = float(np.dot(mass_weight, u.ravel())) if mass_weight is not None else math.nan
        return (t, sup, mn, dt_used, m)

    kept = [sample(0.0)]
    tail = deque(maxlen=policy.record_last)
    snapshots = []
    snap_iter = list(policy.snapshot_times)
    snap_pos = 0
    while snap_pos < len(snap_iter) and snap_iter[snap_pos] <= 1e-15:
        snapshots.append((0.0, Field(grid, u.ravel().copy())))
        snap_pos += 1

    verdict = None
    while verdict is None:
        physics_dt = _state_bounds_caps(ps, sup, mn, h_min, dim, policy, sig_min, stepper.dynamic)
        if not (physics_dt >= policy.dt_min) or not math.isfinite(physics_dt):
            # the tail already ends at the current state, so test it as-is;
            # an empty tail (collapse before the first step) cannot certify growth
            sups = [s[1] for s in tail]
            kind = "blew_up" if len(sups) >= 2 and _increasing_tail(sups) else "stagnated"
            verdict = Verdict(kind, t, sup, f"physics step {physics_dt:.3e} below dt_min")
            break

        dt = physics_dt
        forced_snap = False
        # same relative tolerance as the horizon verdict below, so a snapshot
        # requested at the horizon cannot be skipped by accumulated drift
        if snap_pos < len(snap_iter) and (
            t + dt >= snap_iter[snap_pos] - 1e-12 * max(1.0, snap_iter[snap_pos])
        ):
            dt = snap_iter[snap_pos] - t
            forced_snap = True
        elif t + dt >= horizon:
            dt = horizon - t

        u_new = stepper.step(u, dt)
        if not np.all(np.isfinite(u_new)):
            verdict = Verdict("blew_up", t, sup, "state left the finite range")
            break

        u = u_new
        t = t + dt
        steps += 1
        sup = float(u.max())
        mn = float(u.min())
        tail.append(sample(dt))

        if forced_snap:
            snapshots.append((snap_iter[snap_pos], Field(grid, u.ravel().copy())))
            snap_pos += 1
            kept.append(sample(dt))
        elif steps % policy.snapshot_stride == 0:
            kept.append(sample(dt))

        if sup >= policy.blowup_threshold and _increasing_tail([s[1] for s in tail]):
            verdict = Verdict("blew_up", t, sup, f"sup crossed {policy.blowup_threshold:g}")
        elif t >= horizon - 1e-12 * max(1.0, horizon):
            verdict = Verdict("reached_horizon", t, sup)
        elif steps >= policy.max_steps:
            verdict = Verdict("stagnated", t, sup, f"max_steps {policy.max_steps} reached")

    if verdict.kind == "reached_horizon":
        while snap_pos < len(snap_iter) and (
            snap_iter[snap_pos] <= t + 1e-12 * max(1.0, horizon)
        ):
            snapshots.append((snap_iter[snap_pos], Field(grid, u.ravel().copy())))
            snap_pos += 1

    kept_times = {row[0] for row in kept}
    for row in tail:
        if row[0] not in kept_times:
            kept.append(row)
            kept_times.add(row[0])
    kept.sort(key=lambda row: row[0])

    arr = np.array(kept, dtype=float)
    mass = None if mass_weight is None else arr[:, 4].copy()
    return RunRecord(
        problem=ps,
        grid=grid,
        policy=policy,
        times=arr[:, 0].copy(),
        sup_norm=arr[:, 1].copy(),
        min_value=arr[:, 2].copy(),
        dts=arr[:, 3].copy(),
        mass=mass,
        snapshots=tuple(snapshots),
        final=Field(grid, u.ravel().copy()),
        verdict=verdict,
        steps=steps,
        validation=report,
    )
