"""Problem data: reaction, convection, boundary law, initial data, validation.

A problem couples
    du/dt = lap(u) - g(u) . grad(u) + f(u)      in the domain,
    sigma * du/dt + dnu(u) = 0                  on the boundary,
where f is the reaction, g the (per-axis) convection, dnu the outward normal
derivative, and sigma >= 0 the boundary relaxation weight. sigma == 0 is the
Neumann law, and a separate Dirichlet mode pins the boundary to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .grid import Domain, Field, Grid

__all__ = [
    "ReactionSpec",
    "ConvectionComponent",
    "ConvectionSpec",
    "SigmaSpec",
    "InitialDataSpec",
    "ProblemSpec",
    "ValidationReport",
    "eval_reaction",
    "eval_convection",
    "eval_primitive",
    "validate_problem",
]

_REACTION_KINDS = ("zero", "power", "exponential", "log_linear")
_CONVECTION_KINDS = ("zero", "power", "exponential")


@dataclass(frozen=True)
class ReactionSpec:
    """Source term f(u). Kinds: zero, power u^p (p>1), exponential e^{pu}
    (p>0), log_linear u*log(u) with f(0)=0."""

    kind: str
    p: float | None = None

    def __post_init__(self):
        if self.kind not in _REACTION_KINDS:
            raise DomainError(f"unknown reaction kind '{self.kind}'")
        if self.kind == "power" and not (self.p is not None and self.p > 1.0):
            raise DomainError("power reaction needs p > 1")
        if self.kind == "exponential" and not (self.p is not None and self.p > 0.0):
            raise DomainError("exponential reaction needs p > 0")
        if self.kind in ("zero", "log_linear") and self.p is not None:
            raise DomainError(f"reaction kind '{self.kind}' takes no exponent")

    @staticmethod
    def power(p: float) -> "ReactionSpec":
        return ReactionSpec("power", float(p))

    @staticmethod
    def exponential(p: float) -> "ReactionSpec":
        return ReactionSpec("exponential", float(p))

    @staticmethod
    def log_linear() -> "ReactionSpec":
        return ReactionSpec("log_linear")

    @staticmethod
    def zero() -> "ReactionSpec":
        return ReactionSpec("zero")


@dataclass(frozen=True)
class ConvectionComponent:
    """One velocity component g_i(u): zero, power alpha*u^q (q>=0),
    or exponential alpha*e^{qu}."""

    kind: str
    alpha: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if self.kind not in _CONVECTION_KINDS:
            raise DomainError(f"unknown convection kind '{self.kind}'")
        if self.kind == "power" and self.q < 0.0:
            raise DomainError("power convection needs q >= 0")


@dataclass(frozen=True)
class ConvectionSpec:
    """Per-axis convection velocities; component count equals the dimension."""

    components: tuple[ConvectionComponent, ...]

    @staticmethod
    def zero(dim: int) -> "ConvectionSpec":
        return ConvectionSpec(tuple(ConvectionComponent("zero") for _ in range(dim)))

    @staticmethod
    def power(alpha, q, dim: int) -> "ConvectionSpec":
        alphas = _broadcast(alpha, dim)
        qs = _broadcast(q, dim)
        return ConvectionSpec(
            tuple(ConvectionComponent("power", a, b) for a, b in zip(alphas, qs))
        )

    @staticmethod
    def exponential(alpha, q, dim: int) -> "ConvectionSpec":
        alphas = _broadcast(alpha, dim)
        qs = _broadcast(q, dim)
        return ConvectionSpec(
            tuple(ConvectionComponent("exponential", a, b) for a, b in zip(alphas, qs))
        )

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def is_zero(self) -> bool:
        return all(c.kind == "zero" for c in self.components)


def _broadcast(value, dim: int) -> tuple[float, ...]:
    if np.isscalar(value):
        return (float(value),) * dim
    vals = tuple(float(v) for v in value)
    if len(vals) != dim:
        raise DomainError(f"expected {dim} components, got {len(vals)}")
    return vals


@dataclass(frozen=True)
class SigmaSpec:
    """Boundary law: dynamical (constant or per-node tabulated sigma),
    neumann (sigma == 0), or dirichlet (boundary pinned to zero)."""

    kind: str
    value: float | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("dynamical", "neumann", "dirichlet"):
            raise DomainError(f"unknown sigma kind '{self.kind}'")
        if self.kind == "dynamical" and self.value is None and self.values is None:
            raise DomainError("dynamical sigma needs a value or tabulated values")

    @staticmethod
    def dynamical(value=None, values=None) -> "SigmaSpec":
        if values is not None:
            return SigmaSpec("dynamical", None, tuple(float(v) for v in values))
        return SigmaSpec("dynamical", float(value))

    @staticmethod
    def neumann() -> "SigmaSpec":
        return SigmaSpec("neumann")

    @staticmethod
    def dirichlet() -> "SigmaSpec":
        return SigmaSpec("dirichlet")

    def boundary_values(self, grid: Grid) -> np.ndarray:
        """Sigma per boundary node, in grid boundary order."""
        nb = grid.n_boundary
        if self.kind != "dynamical":
            return np.zeros(nb)
        if self.values is not None:
            if len(self.values) != nb:
                raise DomainError(
                    f"tabulated sigma has {len(self.values)} entries "
                    f"for {nb} boundary nodes"
                )
            return np.asarray(self.values, dtype=np.float64)
        return np.full(nb, float(self.value))

    def range_on(self, grid: Grid) -> tuple[float, float]:
        vals = self.boundary_values(grid)
        return float(vals.min()), float(vals.max())


@dataclass(frozen=True)
class InitialDataSpec:
    """Initial state u0: constant, gaussian_bump, or tabulated nodal values."""

    kind: str
    value: float | None = None
    center: tuple[float, ...] | None = None
    amplitude: float | None = None
    width: float | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "gaussian_bump", "tabulated"):
            raise DomainError(f"unknown initial data kind '{self.kind}'")

    @staticmethod
    def constant(value: float) -> "InitialDataSpec":
        return InitialDataSpec("constant", value=float(value))

    @staticmethod
    def gaussian_bump(center, amplitude: float, width: float) -> "InitialDataSpec":
        if np.isscalar(center):
            center = (float(center),)
        else:
            center = tuple(float(c) for c in center)
        if width <= 0:
            raise DomainError("gaussian bump needs width > 0")
        return InitialDataSpec(
            "gaussian_bump", center=center, amplitude=float(amplitude), width=float(width)
        )

    @staticmethod
    def tabulated(values) -> "InitialDataSpec":
        return InitialDataSpec("tabulated", values=tuple(float(v) for v in values))

    def materialize(self, grid: Grid) -> Field:
        if self.kind == "constant":
            return Field.constant(grid, self.value)
        if self.kind == "gaussian_bump":
            if len(self.center) != grid.dim:
                raise DomainError("bump center rank must match grid dimension")
            coords = grid.coords()
            r2 = np.zeros(grid.n_nodes)
            for axis in range(grid.dim):
                r2 += (coords[axis] - self.center[axis]) ** 2
            return Field(grid, self.amplitude * np.exp(-r2 / (2.0 * self.width**2)))
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape[0] != grid.n_nodes:
            raise DomainError(
                f"tabulated initial data has {vals.shape[0]} values "
                f"for {grid.n_nodes} nodes"
            )
        return Field(grid, vals)


@dataclass(frozen=True)
class ProblemSpec:
    """Full problem statement on a domain."""

    domain: Domain
    reaction: ReactionSpec
    convection: ConvectionSpec
    sigma: SigmaSpec
    initial: InitialDataSpec

    def __post_init__(self):
        if self.convection.dim != self.domain.dim:
            raise DomainError(
                f"convection has {self.convection.dim} components "
                f"for a {self.domain.dim}D domain"
            )


# -- pointwise evaluation ---------------------------------------------------

def _exp(x: float) -> float:
    # exp saturating to inf rather than raising OverflowError near blow-up
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def eval_reaction(reaction: ReactionSpec, u: float) -> float:
    """f(u) for a scalar state. Fractional powers of negative states and
    log of negative states are domain errors, never NaNs."""
    if reaction.kind == "zero":
        return 0.0
    if reaction.kind == "power":
        p = reaction.p
        if u < 0.0 and p != round(p):
            raise DomainError(f"u^{p} undefined for u = {u} < 0")
        return float(u) ** p if u != 0.0 else 0.0
    if reaction.kind == "exponential":
        return _exp(reaction.p * u)
    if u < 0.0:
        raise DomainError(f"u*log(u) undefined for u = {u} < 0")
    return 0.0 if u == 0.0 else u * math.log(u)


def eval_convection(convection: ConvectionSpec, u: float) -> np.ndarray:
    """g(u) as a vector, one entry per axis."""
    out = np.zeros(convection.dim)
    for i, c in enumerate(convection.components):
        if c.kind == "zero":
            continue
        if c.kind == "power":
            if c.q == 0.0:
                out[i] = c.alpha
            else:
                if u < 0.0 and c.q != round(c.q):
                    raise DomainError(f"u^{c.q} undefined for u = {u} < 0")
                out[i] = c.alpha * (float(u) ** c.q) if u != 0.0 else 0.0
        else:
            out[i] = c.alpha * _exp(c.q * u)
    return out


def eval_primitive(convection: ConvectionSpec, u: float) -> np.ndarray:
    """G(u) with G_i(0) = 0 and G_i' = g_i, one entry per axis."""
    out = np.zeros(convection.dim)
    for i, c in enumerate(convection.components):
        if c.kind == "zero":
            continue
        if c.kind == "power":
            r = c.q + 1.0
            if u < 0.0 and r != round(r):
                raise DomainError(f"u^{r} undefined for u = {u} < 0")
            out[i] = c.alpha * (float(u) ** r) / r if u != 0.0 else 0.0
        else:
            if c.q == 0.0:
                out[i] = c.alpha * u
            else:
                out[i] = c.alpha * (_exp(c.q * u) - 1.0) / c.q
    return out


# -- hypothesis validation ----------------------------------------------------

@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    hard: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple[HypothesisCheck, ...]

    @property
    def hard_ok(self) -> bool:
        return all(e.passed for e in self.entries if e.hard)

    @property
    def flags(self) -> tuple[HypothesisCheck, ...]:
        return tuple(e for e in self.entries if not e.passed)

    def entry(self, name: str) -> HypothesisCheck:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


def validate_problem(ps: ProblemSpec, grid: Grid | None = None) -> ValidationReport:
    """Check the structural hypotheses of the problem.

    Hard checks (a run refuses to start when they fail): sigma >= 0 on the
    boundary, u0 >= 0 and u0 not identically zero. Soft flags: f > 0 on the
    positive axis (log_linear is negative on (0,1), flagged when min u0 < 1;
    zero reaction is flagged), and nonnegativity of the initial right-hand
    side lap(u0) - g(u0).grad(u0) + f(u0), which drives monotone growth.
    The discrete checks need a grid; they are skipped when grid is None.
    """
    entries = []

    if ps.sigma.kind == "dynamical":
        if ps.sigma.values is not None:
            smin = min(ps.sigma.values)
        else:
            smin = ps.sigma.value
        ok = smin >= 0.0
        entries.append(
            HypothesisCheck("sigma_nonnegative", ok, True, f"min sigma = {smin}")
        )
    else:
        entries.append(
            HypothesisCheck("sigma_nonnegative", True, True, ps.sigma.kind)
        )

    u0 = ps.initial.materialize(grid) if grid is not None else None
    if u0 is not None:
        nonneg = u0.min >= 0.0
        # u0 == 0 is a fixed point only when f(0) = 0; a source term with
        # f(0) > 0 (exponential reaction) drives the zero state, so triviality
        # is harmless there
        nontrivial = u0.sup > 0.0 or eval_reaction(ps.reaction, 0.0) > 0.0
        entries.append(
            HypothesisCheck(
                "initial_nonnegative_nontrivial",
                nonneg and nontrivial,
                True,
                f"min u0 = {u0.min}, max u0 = {u0.sup}",
            )
        )

    if ps.reaction.kind == "zero":
        entries.append(
            HypothesisCheck(
                "reaction_positive", False, False, "zero reaction: f vanishes on (0, inf)"
            )
        )
    elif ps.reaction.kind == "log_linear":
        low = u0 is not None and u0.min < 1.0
        entries.append(
            HypothesisCheck(
                "reaction_positive",
                not low,
                False,
                "u*log(u) < 0 on (0,1)" + (" and min u0 < 1" if low else ""),
            )
        )
    else:
        entries.append(HypothesisCheck("reaction_positive", True, False, ps.reaction.kind))

    if u0 is not None and ps.initial.kind in ("constant", "gaussian_bump"):
        from .solver import assemble_rhs  # local import avoids a module cycle

        rhs, _ = assemble_rhs(ps, grid, u0)
        interior = np.delete(rhs.values, grid.boundary_indices)
        scale = max(1.0, float(np.abs(interior).max()))
        ok = float(interior.min()) >= -1e-8 * scale
        entries.append(
            HypothesisCheck(
                "initial_rhs_nonnegative",
                ok,
                False,
                f"min interior rhs(u0) = {interior.min():.3e}",
            )
        )

    return ValidationReport(tuple(entries))


# -- kernel encoding ----------------------------------------------------------

_REACTION_CODE = {"zero": 0, "power": 1, "exponential": 2, "log_linear": 3}
_CONVECTION_CODE = {"zero": 0, "power": 1, "exponential": 2}


def reaction_code(reaction: ReactionSpec) -> tuple[int, float]:
    return _REACTION_CODE[reaction.kind], float(reaction.p or 0.0)


def convection_codes(convection: ConvectionSpec):
    kinds = np.array([_CONVECTION_CODE[c.kind] for c in convection.components], dtype=np.int64)
    alphas = np.array([c.alpha for c in convection.components])
    qs = np.array([c.q for c in convection.components])
    return kinds, alphas, qs
