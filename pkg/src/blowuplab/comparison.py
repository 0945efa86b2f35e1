"""Closed-form comparison objects and their differential inequalities.

Three families: an exponential-in-one-direction upper solution
U = K exp(alpha x_j + eta(t)) whose interior and boundary residuals are
evaluated from analytic derivatives; a radial self-similar sub-solution
V = (1 - eps t)^{-1/(p-1)} W(|x - center| / (1 - eps t)^m) for the
transformed exponential-reaction problem; and the spatially homogeneous
ODE solution z' = f(z) with closed-form blow-up times.

Residual checks evaluate the closed forms exactly (no grid differencing);
they test the inequalities themselves, not the discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    InapplicableError,
    InequalityViolationError,
    PreconditionError,
)
from .grid import Field, Grid
from .kernels import _vf, _vg
from .problem import (
    ConvectionSpec,
    ProblemSpec,
    ReactionSpec,
    convection_codes,
    eval_convection,
    reaction_code,
)
from .solver import RunRecord


# ---------------------------------------------------------------------------
# spatially homogeneous ODE solution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OdeSolution:
    """Solution of z' = f(z), z(0) = z0 >= 0, with its blow-up time."""

    reaction: ReactionSpec
    z0: float
    t_blow: float

    def value(self, t: float) -> float:
        if t < 0.0:
            raise DomainError(f"t must be nonnegative, got {t}")
        if t >= self.t_blow:
            raise DomainError(f"t={t} is at or beyond the blow-up time {self.t_blow}")
        r = self.reaction
        if r.kind == "zero":
            return self.z0
        if r.kind == "power":
            if self.z0 == 0.0:
                return 0.0
            base = self.z0 ** (1.0 - r.p) - (r.p - 1.0) * t
            return base ** (-1.0 / (r.p - 1.0))
        if r.kind == "exponential":
            return -math.log(math.exp(-r.p * self.z0) - r.p * t) / r.p
        # log_linear: z(t) = exp(log(z0) e^t), global for every z0 >= 0
        if self.z0 == 0.0:
            return 0.0
        return math.exp(math.log(self.z0) * math.exp(t))


def ode_oracle(reaction: ReactionSpec, z0: float) -> OdeSolution:
    """Closed-form solution of z' = f(z) from constant initial data z0."""
    if z0 < 0.0 or not math.isfinite(z0):
        raise DomainError(f"z0 must be finite and nonnegative, got {z0}")
    if reaction.kind == "power":
        t_blow = math.inf if z0 == 0.0 else z0 ** (1.0 - reaction.p) / (reaction.p - 1.0)
    elif reaction.kind == "exponential":
        t_blow = math.exp(-reaction.p * z0) / reaction.p
    else:
        t_blow = math.inf
    return OdeSolution(reaction, float(z0), t_blow)


# ---------------------------------------------------------------------------
# upper solution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UpperSolution:
    """U(x, t) = K exp(alpha x_axis + eta_c t) attached to a problem."""

    problem: ProblemSpec
    k: float
    alpha: float
    axis: int
    eta_c: float
    delta: float
    sigma_inf: float
    sigma_sup: float

    def eta(self, t: float) -> float:
        return self.eta_c * t

    def value(self, grid: Grid, t: float) -> Field:
        x = grid.coords()[self.axis]
        return Field(grid, self.k * np.exp(self.alpha * x + self.eta_c * t))


def build_upper_solution(ps: ProblemSpec, grid: Grid, axis: int, c_conv: float,
                         value_range: tuple | None = None,
                         samples: int = 1000) -> UpperSolution:
    """Construct the exponential upper solution for a power-reaction problem.

    Requires a dynamical boundary with inf sigma > 0 and a convection whose
    axis component dominates c_conv * u^{p-1}; the domination is sampled on
    value_range (default: from sup u0 up to 1e6, the growing-solution range).
    With eta_c = c_conv / inf sigma + c_conv^2 the slope condition
    sigma >= alpha / eta' holds automatically for time-independent sigma.
    """
    if ps.sigma.kind != "dynamical":
        raise InapplicableError(
            f"upper solution needs a dynamical boundary with sigma > 0, got {ps.sigma.kind}"
        )
    s_lo, s_hi = ps.sigma.range_on(grid)
    if s_lo <= 0.0:
        raise InapplicableError(f"inf sigma = {s_lo} is not positive")
    if ps.reaction.kind != "power":
        raise InapplicableError(
            f"upper-solution recipe covers power reactions, got {ps.reaction.kind}"
        )
    if not 0 <= axis < grid.dim:
        raise DomainError(f"axis {axis} out of range for a {grid.dim}d grid")
    if c_conv <= 0.0:
        raise DomainError(f"c_conv must be positive, got {c_conv}")

    u0 = ps.initial.materialize(grid)
    if value_range is None:
        value_range = (max(float(u0.sup), 1e-6), 1e6)
    lo, hi = value_range
    if not 0.0 < lo < hi:
        raise DomainError(f"value_range must satisfy 0 < lo < hi, got {value_range}")
    p = ps.reaction.p
    for w in np.geomspace(lo, hi, samples):
        gj = float(eval_convection(ps.convection, float(w))[axis])
        if gj < c_conv * w ** (p - 1.0):
            raise InapplicableError(
                f"convection component {axis} fails g_j(w) >= c_conv w^(p-1) "
                f"at w = {w:.6g}: {gj:.6g} < {c_conv * w ** (p - 1.0):.6g}"
            )

    delta = s_lo / s_hi
    eta_c = c_conv / s_lo + c_conv * c_conv
    x = grid.coords()[axis]
    k = float(np.max(u0.values * np.exp(-c_conv * x)))
    k = max(k, np.finfo(float).tiny)
    return UpperSolution(ps, k, c_conv, axis, eta_c, delta, s_lo, s_hi)


@dataclass(frozen=True)
class UpperResidualReport:
    """Minima of the upper solution's interior and boundary residuals."""

    min_interior: float
    min_boundary: float
    scale: float
    times: tuple
    ok: bool


def residual_upper(us: UpperSolution, grid: Grid, t_samples,
                   tol: float = 1e-10) -> UpperResidualReport:
    """Evaluate d_t U - Lap U + g(U).grad U - f(U) and the boundary law.

    Uses the closed forms d_t U = eta_c U, Lap U = alpha^2 U, and
    grad U = alpha U e_axis, so the interior residual is
    (eta_c - alpha^2) U + alpha g_axis(U) U - f(U) at every node, and the
    boundary residual is (sigma eta_c + alpha nu_axis) U. Raises
    InequalityViolationError when either drops below -tol * scale.
    """
    ps = us.problem
    r_kind, r_p = reaction_code(ps.reaction)
    kinds, alphas, qs = convection_codes(ps.convection)
    sig = ps.sigma.boundary_values(grid)
    nu_j = grid.boundary_normals[:, us.axis]
    bidx = grid.boundary_indices

    t_samples = [float(t) for t in t_samples]
    if not t_samples:
        raise PreconditionError("need at least one time sample")
    min_int = math.inf
    min_bnd = math.inf
    scale = 0.0
    worst = (math.inf, t_samples[0], 0, "interior")
    for t in t_samples:
        u = us.value(grid, t).values
        scale = max(scale, float(u.max()))
        gj = _vg(int(kinds[us.axis]), float(alphas[us.axis]), float(qs[us.axis]), u)
        interior = (us.eta_c - us.alpha**2) * u + us.alpha * gj * u - _vf(r_kind, r_p, u)
        boundary = (sig * us.eta_c + us.alpha * nu_j) * u[bidx]
        i_int = int(interior.argmin())
        i_bnd = int(boundary.argmin())
        min_int = min(min_int, float(interior[i_int]))
        min_bnd = min(min_bnd, float(boundary[i_bnd]))
        if float(interior[i_int]) < worst[0]:
            worst = (float(interior[i_int]), t, i_int, "interior")
        if float(boundary[i_bnd]) < worst[0]:
            worst = (float(boundary[i_bnd]), t, int(bidx[i_bnd]), "boundary")
    ok = min_int >= -tol * scale and min_bnd >= -tol * scale
    if not ok:
        value, t_bad, node, side = worst
        raise InequalityViolationError(
            f"upper-solution {side} residual {value:.6g} below "
            f"-{tol:g} * {scale:.6g} at node {node} "
            f"(x = {grid.node_coord(node)}), t = {t_bad:g}"
        )
    return UpperResidualReport(min_int, min_bnd, scale, tuple(t_samples), ok)


# ---------------------------------------------------------------------------
# self-similar sub-solution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubSolutionSW:
    """Radial self-similar sub-solution parameters for the transformed problem.

    v = e^{gamma u} turns exponential reaction e^{pu} with |g(u)| <= c_g e^{qu}
    into d_t v >= Lap v - mu |grad v|^2 + kappa v^{(p+gamma)/gamma}; V below is
    the Souplet-Weissler profile for that inequality.
    """

    p: float
    q: float
    c_g: float
    gamma: float
    kappa: float
    mu: float
    m_ss: float
    a: float
    eps: float

    @property
    def beta(self) -> float:
        return 1.0 / (self.p - 1.0)

    @property
    def t_blow(self) -> float:
        return 1.0 / self.eps

    @property
    def support_radius0(self) -> float:
        # W(y) = 0 at y = sqrt(A(A+2)); support radius at time t is this * (1-eps t)^m
        return math.sqrt(self.a * (self.a + 2.0))

    @property
    def power(self) -> float:
        return (self.p + self.gamma) / self.gamma

    def profile(self, y):
        w = 1.0 + self.a / 2.0 - np.square(y) / (2.0 * self.a)
        return np.maximum(w, 0.0)

    def field_at(self, grid: Grid, t: float) -> Field:
        if t >= self.t_blow:
            raise DomainError(f"t={t} is at or beyond the blow-up time {self.t_blow}")
        s = 1.0 - self.eps * t
        center = grid.domain.center
        r2 = np.zeros(grid.n_nodes)
        for axis, x in enumerate(grid.coords()):
            r2 += np.square(x - center[axis])
        y = np.sqrt(r2) / s**self.m_ss
        return Field(grid, s**(-self.beta) * self.profile(y))


def build_subsolution_sw(p: float, q: float, c_g: float) -> SubSolutionSW:
    """Parameter recipe satisfying every constraint with a factor-2 margin.

    gamma: midpoint of (max(q, 1/2), p); kappa = gamma - 1/2;
    mu = (2 + c_g^2)/2; m_ss = half of min(1/2, (p-q)/(q(p-1)));
    a = 2/(m_ss (p-1)) (twice the lower bound); eps = kappa (p-1)/(2+a)
    (half the upper bound).
    """
    if p <= 1.0:
        raise InapplicableError(f"recipe needs p > 1, got p={p}")
    if not 0.0 <= q < p:
        raise DomainError(f"need 0 <= q < p, got q={q}, p={p}")
    if c_g < 0.0:
        raise DomainError(f"need c_g >= 0, got {c_g}")
    gamma = (max(q, 0.5) + p) / 2.0
    kappa = gamma - 0.5
    mu = (2.0 + c_g * c_g) / 2.0
    m_cap = 0.5 if q == 0.0 else min(0.5, (p - q) / (q * (p - 1.0)))
    m_ss = 0.5 * m_cap
    a = 2.0 / (m_ss * (p - 1.0))
    eps = kappa * (p - 1.0) / (2.0 + a)
    return SubSolutionSW(p, q, c_g, gamma, kappa, mu, m_ss, a, eps)


def exp_envelope_bound(convection: ConvectionSpec, q: float,
                       u_max: float = 50.0, samples: int = 2001) -> float:
    """Smallest sampled c_g with max_i |g_i(u)| <= c_g e^{qu} on [0, u_max]."""
    best = 0.0
    for u in np.linspace(0.0, u_max, samples):
        g_max = float(np.abs(eval_convection(convection, float(u))).max())
        best = max(best, g_max * math.exp(-q * u))
    return best


@dataclass(frozen=True)
class SubResidualReport:
    """Maximum of the sub-solution residual over the sampled support."""

    max_residual: float
    scale: float
    times: tuple
    n_evaluated: int
    ok: bool
    worst_node: int
    worst_time: float

    def check(self, tol: float = 1e-10):
        if not self.ok:
            raise InequalityViolationError(
                f"sub-solution residual {self.max_residual:.6g} exceeds "
                f"{tol:g} * {self.scale:.6g} at node {self.worst_node}, "
                f"t = {self.worst_time:g}"
            )
        return self


def residual_sub_sw(ss: SubSolutionSW, grid: Grid, t_samples,
                    tol: float = 1e-10) -> SubResidualReport:
    """Evaluate R = d_t V - Lap V + mu |grad V|^2 - kappa V^{(p+gamma)/gamma}.

    Closed forms on the support (V > 0), x measured from the domain center:
    with s = 1 - eps t, y = r/s^m, beta = 1/(p-1), W' = -y/a:

        d_t V   = eps s^{-beta-1} (beta W + m y W')
        Lap V   = -(N/a) s^{-beta-2m}
        |grad V|^2 = s^{-2beta-2m} y^2 / a^2

    V is a sub-solution when R <= 0; the report carries the measured maximum
    and check() raises when it exceeds tol * scale.
    """
    t_samples = [float(t) for t in t_samples]
    if not t_samples:
        raise PreconditionError("need at least one time sample")
    if max(t_samples) >= ss.t_blow:
        raise PreconditionError(
            f"t_samples must stay below the blow-up time {ss.t_blow:g}"
        )
    center = grid.domain.center
    ndim = grid.dim
    r2 = np.zeros(grid.n_nodes)
    for axis, x in enumerate(grid.coords()):
        r2 += np.square(x - center[axis])
    r = np.sqrt(r2)

    max_res = -math.inf
    scale = 0.0
    worst_node = -1
    worst_time = t_samples[0]
    n_eval = 0
    for t in t_samples:
        s = 1.0 - ss.eps * t
        y = r / s**ss.m_ss
        w = 1.0 + ss.a / 2.0 - np.square(y) / (2.0 * ss.a)
        inside = w > 0.0
        if not inside.any():
            continue
        yw = y[inside]
        ww = w[inside]
        n_eval += int(inside.sum())
        wp = -yw / ss.a
        v = s**(-ss.beta) * ww
        dt_v = ss.eps * s**(-ss.beta - 1.0) * (ss.beta * ww + ss.m_ss * yw * wp)
        lap_v = -(ndim / ss.a) * s**(-ss.beta - 2.0 * ss.m_ss) * np.ones_like(ww)
        grad2 = s**(-2.0 * ss.beta - 2.0 * ss.m_ss) * np.square(yw) / ss.a**2
        forcing = ss.kappa * v**ss.power
        res = dt_v - lap_v + ss.mu * grad2 - forcing
        scale = max(scale, float(forcing.max()))
        i = int(res.argmax())
        if res[i] > max_res:
            max_res = float(res[i])
            worst_node = int(np.flatnonzero(inside)[i])
            worst_time = t
    if n_eval == 0:
        raise PreconditionError("sub-solution support misses every grid node")
    ok = max_res <= tol * scale
    return SubResidualReport(max_res, scale, tuple(t_samples), n_eval, ok,
                             worst_node, worst_time)


# ---------------------------------------------------------------------------
# run-vs-run ordering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrderingReport:
    """Pointwise ordering of two runs over their matched snapshots."""

    times: tuple
    excess_ab: tuple  # per time: max over nodes of (a - b)
    excess_ba: tuple
    a_le_b: bool
    b_le_a: bool
    tol: float


def compare_runs(a: RunRecord, b: RunRecord, tol: float = 1e-4) -> OrderingReport:
    """Match snapshots by time and report the pointwise ordering.

    a <= b is declared when max(a - b) <= tol * max(sup norms) at every
    matched time (and symmetrically). Runs must share a grid and at least
    one snapshot time.
    """
    if a.grid != b.grid:
        raise DomainError("runs live on different grids")
    times = []
    pairs = []
    for ta, fa in a.snapshots:
        for tb, fb in b.snapshots:
            if abs(ta - tb) <= 1e-9 * max(1.0, abs(ta)):
                times.append(ta)
                pairs.append((fa, fb))
                break
    if not pairs:
        raise PreconditionError(
            "no matching snapshot times; request shared snapshot_times in both policies"
        )
    excess_ab = []
    excess_ba = []
    a_le_b = True
    b_le_a = True
    for (fa, fb) in pairs:
        diff = fa.values - fb.values
        scale = max(fa.sup, fb.sup, np.finfo(float).tiny)
        hi = float(diff.max())
        lo = float(diff.min())
        excess_ab.append(hi)
        excess_ba.append(-lo)
        if hi > tol * scale:
            a_le_b = False
        if -lo > tol * scale:
            b_le_a = False
    return OrderingReport(tuple(times), tuple(excess_ab), tuple(excess_ba),
                          a_le_b, b_le_a, tol)
