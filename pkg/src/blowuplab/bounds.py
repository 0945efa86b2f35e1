"""Eigenfunction-method blow-up certificates and blow-up-rate diagnostics.

The certificate side evaluates, for reaction u^p and convection dominated by
alpha * omega^q (1 < q < p), the constant

    C = (p-1)|Omega| (4 lam / (p-q))^{1/(p-1)}
        + (4q/(p-q))^{q/(p-q)} alpha^m Int |grad phi|^m,    m = p/(p-q),

the admissibility threshold (2 |Omega|^{p-1} C)^{1/p} for the weighted mass
M(0) = Int u0 phi^m, and the blow-up-time upper bound

    T_tilde = 2 M(0) / ((p-1) (|Omega|^{1-p} M(0)^p - 2 C)).

The Young-split intermediates C1..C4, eps1, eps2 are reported alongside;
C3 + C4 = C holds exactly, with C4 = 1/(m eps2^m) and eps1 chosen so that
C3 = (p-1)/(p eps1^{p/(p-1)}).

The rate side extrapolates a blow-up time from recorded sup-norm series,
fits the divergence exponent against the -1/(p-1) prediction, and checks the
pointwise lower bound sup u >= ((p-1)(T-t))^{-1/(p-1)}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DomainError,
    FitError,
    HypothesisError,
    InapplicableError,
    PreconditionError,
)
from .grid import Field
from .problem import ConvectionSpec, ProblemSpec, ReactionSpec, eval_primitive
from .solver import RunRecord
from .spectral import EigenPair, grad_phi_m_integral

DEFAULT_OMEGA_MAX = 1e7  # ten times the default sup-norm blow-up threshold
GATE_SAMPLES = 1000


def check_domination(convection: ConvectionSpec, q: float, alpha: float,
                     omega_max: float = DEFAULT_OMEGA_MAX,
                     samples: int = GATE_SAMPLES):
    """Sample the domination condition G_i(w) <= alpha w^q on (0, omega_max].

    Returns (ok, worst_omega, worst_ratio) where ratio = max_i G_i(w)/(alpha w^q).
    A sampled check over log-spaced points, not a proof.
    """
    if omega_max <= 0.0:
        raise DomainError(f"omega_max must be positive, got {omega_max}")
    omegas = np.geomspace(omega_max * 1e-9, omega_max, samples)
    worst_ratio = 0.0
    worst_omega = omegas[0]
    for w in omegas:
        g_max = float(np.abs(eval_primitive(convection, float(w))).max())
        ratio = g_max / (alpha * w**q)
        if ratio > worst_ratio:
            worst_ratio = ratio
            worst_omega = float(w)
    return worst_ratio <= 1.0, worst_omega, worst_ratio


def select_alpha(convection: ConvectionSpec, q: float,
                 omega_max: float = DEFAULT_OMEGA_MAX,
                 samples: int = GATE_SAMPLES) -> float:
    """Smallest alpha for which the sampled domination check passes."""
    if convection.is_zero:
        return 1.0
    omegas = np.geomspace(omega_max * 1e-9, omega_max, samples)
    best = 0.0
    for w in omegas:
        g_max = float(np.abs(eval_primitive(convection, float(w))).max())
        best = max(best, g_max / w**q)
    if best == 0.0 or not math.isfinite(best):
        raise HypothesisError(
            f"no finite alpha dominates this convection up to omega_max={omega_max:g}"
        )
    return best


@dataclass(frozen=True)
class BoundsInput:
    """Exponents and eigen data feeding the blow-up certificate.

    Constructing one via from_problem() enforces the domination condition on
    the problem's convection; direct construction only validates the exponent
    ordering 1 < q < p and alpha > 0.
    """

    p: float
    q: float
    alpha: float
    eigen: EigenPair
    omega_measure: float

    def __post_init__(self):
        if not self.p > 1.0:
            raise DomainError(f"need p > 1, got p={self.p}")
        if not 1.0 < self.q < self.p:
            raise DomainError(f"need 1 < q < p, got q={self.q}, p={self.p}")
        if not self.alpha > 0.0:
            raise DomainError(f"need alpha > 0, got {self.alpha}")
        if not self.omega_measure > 0.0:
            raise DomainError(f"need |Omega| > 0, got {self.omega_measure}")

    @property
    def m(self) -> float:
        return self.p / (self.p - self.q)

    @classmethod
    def from_problem(cls, ps: ProblemSpec, eigen: EigenPair, q: float,
                     alpha: float | None = None,
                     omega_max: float = DEFAULT_OMEGA_MAX) -> "BoundsInput":
        if ps.reaction.kind != "power":
            raise InapplicableError(
                f"the certificate needs a power reaction, got {ps.reaction.kind}"
            )
        if alpha is None:
            alpha = select_alpha(ps.convection, q, omega_max)
        ok, worst_omega, worst_ratio = check_domination(ps.convection, q, alpha, omega_max)
        if not ok:
            raise HypothesisError(
                f"domination check failed: G(w)/(alpha w^q) = {worst_ratio:.6g} > 1 "
                f"at w = {worst_omega:.6g} (alpha={alpha:g}, q={q:g}, "
                f"omega_max={omega_max:g})"
            )
        return cls(ps.reaction.p, q, alpha, eigen,
                   eigen.phi.grid.domain.measure)


@dataclass(frozen=True)
class BoundsReport:
    """Certificate constants, threshold, and (once completed) M0 and T_tilde."""

    p: float
    q: float
    alpha: float
    m: float
    lam: float
    omega_measure: float
    grad_integral: float
    c1: float
    c2: float
    c3: float
    c4: float
    eps1: float
    eps2: float
    c_total: float
    threshold: float
    m0: float | None = None
    condition_met: bool | None = None
    t_tilde: float | None = None


def mass_functional(u: Field, ep: EigenPair, m: float) -> float:
    """Trapezoid quadrature of u * phi^m over the domain."""
    if u.grid != ep.phi.grid:
        raise DomainError("field and eigenfunction live on different grids")
    w = u.grid.trapezoid_weights()
    return float(np.dot(w, u.values * ep.phi.values**m))


def blowup_constant(bi: BoundsInput, method: str = "auto") -> BoundsReport:
    """Evaluate C, its Young-split intermediates, and the mass threshold."""
    p, q, alpha, m = bi.p, bi.q, bi.alpha, bi.m
    lam = bi.eigen.lam
    vol = bi.omega_measure
    grad_int = grad_phi_m_integral(bi.eigen, m, method=method)

    # both split terms come from their closed forms; recovering c3 as
    # C - 1/(m eps2^m) cancels catastrophically once the gradient term
    # dominates (q near p drives m and the c4 term to huge magnitudes)
    c3 = (p - 1.0) * vol * (4.0 * lam / (p - q)) ** (1.0 / (p - 1.0))
    c4 = (4.0 * q / (p - q)) ** (q / (p - q)) * alpha**m * grad_int
    c_total = c3 + c4

    c1 = m * lam * vol ** ((p - 1.0) / p)
    c2 = m * alpha * grad_int ** (1.0 / m)
    eps2 = p ** (q / p) / ((4.0 * q) ** (q / p) * c2)  # 1/(m eps2^m) == c4
    eps1 = ((p - 1.0) / (p * c3)) ** ((p - 1.0) / p)

    threshold = (2.0 * vol ** (p - 1.0) * c_total) ** (1.0 / p)
    return BoundsReport(
        p=p, q=q, alpha=alpha, m=m, lam=lam, omega_measure=vol,
        grad_integral=grad_int, c1=c1, c2=c2, c3=c3, c4=c4,
        eps1=eps1, eps2=eps2, c_total=c_total, threshold=threshold,
    )


def check_condition_and_bound(br: BoundsReport, u0: Field, ep: EigenPair) -> BoundsReport:
    """Complete a report with M0, the strict threshold comparison, and T_tilde."""
    m0 = float(mass_functional(u0, ep, br.m))
    met = bool(m0 > br.threshold)
    t_tilde = None
    if met:
        gap = br.omega_measure ** (1.0 - br.p) * m0**br.p - 2.0 * br.c_total
        if gap > 0.0:
            t_tilde = 2.0 * m0 / ((br.p - 1.0) * gap)
    return replace(br, m0=m0, condition_met=met, t_tilde=t_tilde)


@dataclass(frozen=True)
class BlowupEstimate:
    """Extrapolated blow-up time and rate diagnostics from a recorded run."""

    t_est: float
    fit_window: tuple
    exponent: float
    exponent_stderr: float
    lower_bound_ok: bool
    n_samples: int


def _terminal_window(rr: RunRecord, minimum: int = 10):
    times = np.asarray(rr.times, dtype=np.float64)
    sups = np.asarray(rr.sup_norm, dtype=np.float64)
    n = len(times)
    take = min(50, n)
    if take < minimum:
        raise PreconditionError(
            f"need at least {minimum} terminal samples, record has {take}"
        )
    return times[n - take:], sups[n - take:]


def estimate_blowup_time(rr: RunRecord, reaction: ReactionSpec) -> float:
    """Extrapolate the blow-up time from the terminal sup-norm samples.

    Power reaction: sup^{1-p} decays linearly to zero at T, so T is the root
    of a least-squares line through (t, sup^{1-p}). Exponential reaction:
    the same with e^{-p sup}.
    """
    if not rr.verdict.blew_up:
        raise PreconditionError(f"record verdict is {rr.verdict.kind}, not blew_up")
    t, sup = _terminal_window(rr)
    if reaction.kind == "power":
        y = sup ** (1.0 - reaction.p)
    elif reaction.kind == "exponential":
        y = np.exp(-reaction.p * sup)
    else:
        raise InapplicableError(
            f"no finite-time extrapolation model for reaction {reaction.kind}"
        )
    # samples whose transform has collapsed to the floating-point floor sit
    # at (or numerically past) the asymptote and carry no line information
    keep = y >= 1e-12 * float(y.max())
    t, y = t[keep], y[keep]
    if len(t) < 2:
        raise FitError("terminal samples carry no decay signal")
    slope, intercept = np.polyfit(t, y, 1)
    if not slope < 0.0:
        raise FitError("terminal samples do not decay toward blow-up")
    t_est = -intercept / slope
    if not t_est > t[-1]:
        raise FitError(f"extrapolated time {t_est} does not exceed last sample {t[-1]}")
    return float(t_est)


def _rate_window(times, sups, t_est, minimum: int = 10):
    """Terminal window for rate diagnostics against the extrapolated time.

    t_est carries an absolute error comparable to its closest recorded
    approach, so samples within one decade of that gap have unreliable
    (t_est - t) and are dropped first (kept only if fewer than `minimum`
    would remain). The window is then the last two decades of (t_est - t)
    among what remains, widened to `minimum` and capped at 50 samples.
    """
    gaps = t_est - times
    reliable = gaps >= 10.0 * gaps[-1]
    if int(reliable.sum()) >= minimum:
        times, sups, gaps = times[reliable], sups[reliable], gaps[reliable]
    in_span = int(np.sum(gaps <= 100.0 * gaps[-1]))
    take = min(len(times), 50, max(in_span, minimum))
    return times[len(times) - take:], sups[len(times) - take:]


def fit_rate_exponent(rr: RunRecord, t_est: float):
    """Slope and stderr of log sup vs log(T_est - t) on the terminal window.

    Window: per _rate_window, the last 50 reliable samples or the last
    decade of (T_est - t), whichever holds more.
    """
    if not rr.verdict.blew_up:
        raise PreconditionError(f"record verdict is {rr.verdict.kind}, not blew_up")
    times = np.asarray(rr.times, dtype=np.float64)
    sups = np.asarray(rr.sup_norm, dtype=np.float64)
    if not t_est > times[-1]:
        raise PreconditionError("t_est must exceed the last recorded time")
    t, s = _rate_window(times, sups, t_est)
    take = len(t)
    if take < 10:
        raise PreconditionError(f"need at least 10 samples in the fit window, got {take}")
    if np.any(s <= 0.0):
        raise FitError("sup-norm samples must be positive for a log fit")
    x = np.log(t_est - t)
    y = np.log(s)
    if float(np.ptp(x)) == 0.0 or float(np.ptp(y)) == 0.0:
        raise FitError("degenerate fit window: no variation in the samples")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = max(take - 2, 1)
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(float(np.sum(resid**2)) / dof / sxx)
    return float(slope), float(stderr)


def check_lower_rate(rr: RunRecord, t_est: float, p: float, tol: float = 0.05) -> bool:
    """Check sup(t) (T_est-t)^{1/(p-1)} >= (p-1)^{-1/(p-1)} (1-tol) on the tail."""
    if not rr.verdict.blew_up:
        raise PreconditionError(f"record verdict is {rr.verdict.kind}, not blew_up")
    t, sup = _terminal_window(rr)
    if not t_est > t[-1]:
        raise PreconditionError("t_est must exceed the last recorded time")
    t, sup = _rate_window(t, sup, t_est)
    bound = (p - 1.0) ** (-1.0 / (p - 1.0)) * (1.0 - tol)
    lhs = sup * (t_est - t) ** (1.0 / (p - 1.0))
    return bool(np.all(lhs >= bound))


def analyze_blowup(rr: RunRecord) -> BlowupEstimate:
    """Bundle time extrapolation, exponent fit, and lower-rate check."""
    reaction = rr.problem.reaction
    t_est = estimate_blowup_time(rr, reaction)
    exponent, stderr = fit_rate_exponent(rr, t_est)
    if reaction.kind == "power":
        lower_ok = check_lower_rate(rr, t_est, reaction.p)
    else:
        lower_ok = True
    times = np.asarray(rr.times, dtype=np.float64)
    sups = np.asarray(rr.sup_norm, dtype=np.float64)
    w_t, _ = _rate_window(times, sups, t_est)
    take = len(w_t)
    window = (float(w_t[0]), float(w_t[-1]))
    return BlowupEstimate(
        t_est=t_est,
        fit_window=window,
        exponent=exponent,
        exponent_stderr=stderr,
        lower_bound_ok=lower_ok,
        n_samples=take,
    )
