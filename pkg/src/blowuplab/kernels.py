"""Hot numerical kernels: PDE right-hand sides and RK4 steps, 1D and 2D.

Two interchangeable backends live here. The numba backend compiles explicit
node loops with @njit(cache=True); the numpy backend is a vectorized twin
written with the same per-node arithmetic (same operations, same order).
Power kinds with a small integral exponent evaluate by repeated multiply in
the identical order on both backends (pow dominates the compiled loop cost
otherwise), so zero and power kinds produce bit-identical states;
exponential, logarithmic, and fractional-power kinds may differ by a few
ulps because numpy's vectorized transcendentals are not the scalar libm
routines the compiled loops call. Selection is by the BLOWUPLAB_BACKEND environment
variable ("numba", "numpy", or "auto") or set_backend(); auto prefers numba
when it imports.

Boundary codes: 0 interior, 1 dynamical (sigma d_t u = -d_nu u),
2 Neumann (ghost mirror), 3 Dirichlet (pinned to zero). Nonlinearities
clamp states <= 0 to zero so roundoff-negative values never produce NaNs;
true negative states cannot arise for the positive problems handled here.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

from .errors import ConfigError

INTERIOR, DYNAMIC, NEUMANN, DIRICHLET = 0, 1, 2, 3

_ENV_FLAG = "BLOWUPLAB_BACKEND"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------

def _pow_fast(u, p):
    # repeated multiply for small integral exponents, left to right; the
    # compiled twin uses the same order, making power kinds bit-identical
    ip = int(p)
    if p == ip and 1 <= ip <= 16:
        v = u
        for _ in range(ip - 1):
            v = v * u
        return v
    return u**p


def _sf(kind, p, u):
    # scalar reaction, clamped at zero states
    if kind == 0:
        return 0.0
    if kind == 1:
        if u <= 0.0:
            return 0.0
        return _pow_fast(u, p)
    if kind == 2:
        return np.exp(p * u)
    if u <= 0.0:
        return 0.0
    return u * np.log(u)


def _sg(kind, alpha, q, u):
    # scalar convection component
    if kind == 0:
        return 0.0
    if kind == 1:
        if q == 0.0:
            return alpha
        if u <= 0.0:
            return 0.0
        return alpha * _pow_fast(u, q)
    return alpha * np.exp(q * u)


def _vf(kind, p, u):
    if kind == 0:
        return np.zeros_like(u)
    if kind == 1:
        out = np.zeros_like(u)
        m = u > 0.0
        if m.any():
            out[m] = _pow_fast(u[m], p)
        return out
    if kind == 2:
        with np.errstate(over="ignore"):
            return np.exp(p * u)
    out = np.zeros_like(u)
    m = u > 0.0
    if m.any():
        um = u[m]
        out[m] = um * np.log(um)
    return out


def _vg(kind, alpha, q, u):
    if kind == 0:
        return np.zeros_like(u)
    if kind == 1:
        if q == 0.0:
            return np.full_like(u, alpha)
        out = np.zeros_like(u)
        m = u > 0.0
        if m.any():
            out[m] = alpha * _pow_fast(u[m], q)
        return out
    with np.errstate(over="ignore"):
        return alpha * np.exp(q * u)


def np_rhs_1d(u, inv_h, inv_h2, r_kind, r_p, c_kind, c_alpha, c_q,
              bc_left, bc_right, sig_left, sig_right, out):
    n = u.shape[0]
    fv = _vf(r_kind, r_p, u)
    gv = _vg(c_kind, c_alpha, c_q, u)
    ui = u[1:-1]
    lap = (u[:-2] - 2.0 * ui + u[2:]) * inv_h2
    with np.errstate(invalid="ignore"):
        du = np.where(gv[1:-1] > 0.0, (ui - u[:-2]) * inv_h, (u[2:] - ui) * inv_h)
    out[1:-1] = lap - gv[1:-1] * du + fv[1:-1]

    if bc_left == DIRICHLET:
        out[0] = 0.0
    elif bc_left == NEUMANN:
        um = u[1]
        up = u[1]
        lap0 = (um - 2.0 * u[0] + up) * inv_h2
        g0 = _sg(c_kind, c_alpha, c_q, u[0])
        du0 = (u[0] - um) * inv_h if g0 > 0.0 else (up - u[0]) * inv_h
        out[0] = lap0 - g0 * du0 + _sf(r_kind, r_p, u[0])
    else:
        dnu = (3.0 * u[0] - 4.0 * u[1] + u[2]) * (0.5 * inv_h)
        out[0] = -dnu / sig_left

    if bc_right == DIRICHLET:
        out[n - 1] = 0.0
    elif bc_right == NEUMANN:
        um = u[n - 2]
        up = u[n - 2]
        lapn = (um - 2.0 * u[n - 1] + up) * inv_h2
        gn = _sg(c_kind, c_alpha, c_q, u[n - 1])
        dun = (u[n - 1] - um) * inv_h if gn > 0.0 else (up - u[n - 1]) * inv_h
        out[n - 1] = lapn - gn * dun + _sf(r_kind, r_p, u[n - 1])
    else:
        dnu = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) * (0.5 * inv_h)
        out[n - 1] = -dnu / sig_right
    return out


def np_rk4_step_1d(u, dt, inv_h, inv_h2, r_kind, r_p, c_kind, c_alpha, c_q,
                   bc_left, bc_right, sig_left, sig_right):
    k1 = np.empty_like(u)
    k2 = np.empty_like(u)
    k3 = np.empty_like(u)
    k4 = np.empty_like(u)
    args = (inv_h, inv_h2, r_kind, r_p, c_kind, c_alpha, c_q,
            bc_left, bc_right, sig_left, sig_right)
    half = 0.5 * dt
    np_rhs_1d(u, *args, k1)
    np_rhs_1d(u + half * k1, *args, k2)
    np_rhs_1d(u + half * k2, *args, k3)
    np_rhs_1d(u + dt * k3, *args, k4)
    sixth = dt / 6.0
    return u + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def np_rhs_2d(u, inv_h0, inv_h0sq, inv_h1, inv_h1sq, r_kind, r_p,
              ck0, ca0, cq0, ck1, ca1, cq1, bc, sig, nu0, nu1, out):
    n1, n2 = u.shape
    pad = np.empty((n1 + 2, n2 + 2))
    pad[1:-1, 1:-1] = u
    pad[0, 1:-1] = u[1, :]
    pad[-1, 1:-1] = u[-2, :]
    pad[1:-1, 0] = u[:, 1]
    pad[1:-1, -1] = u[:, -2]
    xm = pad[:-2, 1:-1]
    xp = pad[2:, 1:-1]
    ym = pad[1:-1, :-2]
    yp = pad[1:-1, 2:]

    fv = _vf(r_kind, r_p, u)
    g0 = _vg(ck0, ca0, cq0, u)
    g1 = _vg(ck1, ca1, cq1, u)
    lap = (xm - 2.0 * u + xp) * inv_h0sq + (ym - 2.0 * u + yp) * inv_h1sq
    with np.errstate(invalid="ignore"):
        du0 = np.where(g0 > 0.0, (u - xm) * inv_h0, (xp - u) * inv_h0)
        du1 = np.where(g1 > 0.0, (u - ym) * inv_h1, (yp - u) * inv_h1)
    out[:, :] = lap - g0 * du0 - g1 * du1 + fv

    # dynamical nodes: one-sided normal derivative, then the relaxation law
    dyn = bc == DYNAMIC
    if dyn.any():
        dx = np.zeros_like(u)
        dx[0, :] = (-3.0 * u[0, :] + 4.0 * u[1, :] - u[2, :]) * (0.5 * inv_h0)
        dx[-1, :] = (3.0 * u[-1, :] - 4.0 * u[-2, :] + u[-3, :]) * (0.5 * inv_h0)
        dy = np.zeros_like(u)
        dy[:, 0] = (-3.0 * u[:, 0] + 4.0 * u[:, 1] - u[:, 2]) * (0.5 * inv_h1)
        dy[:, -1] = (3.0 * u[:, -1] - 4.0 * u[:, -2] + u[:, -3]) * (0.5 * inv_h1)
        dnu = nu0 * dx + nu1 * dy
        out[dyn] = (-dnu / sig)[dyn]
    out[bc == DIRICHLET] = 0.0
    return out


def np_rk4_step_2d(u, dt, inv_h0, inv_h0sq, inv_h1, inv_h1sq, r_kind, r_p,
                   ck0, ca0, cq0, ck1, ca1, cq1, bc, sig, nu0, nu1):
    k1 = np.empty_like(u)
    k2 = np.empty_like(u)
    k3 = np.empty_like(u)
    k4 = np.empty_like(u)
    args = (inv_h0, inv_h0sq, inv_h1, inv_h1sq, r_kind, r_p,
            ck0, ca0, cq0, ck1, ca1, cq1, bc, sig, nu0, nu1)
    half = 0.5 * dt
    np_rhs_2d(u, *args, k1)
    np_rhs_2d(u + half * k1, *args, k2)
    np_rhs_2d(u + half * k2, *args, k3)
    np_rhs_2d(u + dt * k3, *args, k4)
    sixth = dt / 6.0
    return u + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


NUMPY_BACKEND = SimpleNamespace(
    name="numpy",
    rhs_1d=np_rhs_1d,
    rk4_step_1d=np_rk4_step_1d,
    rhs_2d=np_rhs_2d,
    rk4_step_2d=np_rk4_step_2d,
)


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

NUMBA_BACKEND = None

if HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _nb_pow(u, p):
        # same multiply order as the numpy twin for small integral exponents
        ip = int(p)
        if p == ip and 1 <= ip <= 16:
            r = u
            for _ in range(ip - 1):
                r = r * u
            return r
        return u**p

    @njit(cache=True, inline="always")
    def _nb_f(kind, p, u):
        if kind == 0:
            return 0.0
        if kind == 1:
            if u <= 0.0:
                return 0.0
            return _nb_pow(u, p)
        if kind == 2:
            return np.exp(p * u)
        if u <= 0.0:
            return 0.0
        return u * np.log(u)

    @njit(cache=True, inline="always")
    def _nb_g(kind, alpha, q, u):
        if kind == 0:
            return 0.0
        if kind == 1:
            if q == 0.0:
                return alpha
            if u <= 0.0:
                return 0.0
            return alpha * _nb_pow(u, q)
        return alpha * np.exp(q * u)

    @njit(cache=True)
    def nb_rhs_1d(u, inv_h, inv_h2, r_kind, r_p, c_kind, c_alpha, c_q,
                  bc_left, bc_right, sig_left, sig_right, out):
        n = u.shape[0]
        for i in range(1, n - 1):
            ui = u[i]
            lap = (u[i - 1] - 2.0 * ui + u[i + 1]) * inv_h2
            gv = _nb_g(c_kind, c_alpha, c_q, ui)
            if gv > 0.0:
                du = (ui - u[i - 1]) * inv_h
            else:
                du = (u[i + 1] - ui) * inv_h
            out[i] = lap - gv * du + _nb_f(r_kind, r_p, ui)

        if bc_left == 3:
            out[0] = 0.0
        elif bc_left == 2:
            um = u[1]
            up = u[1]
            lap0 = (um - 2.0 * u[0] + up) * inv_h2
            g0 = _nb_g(c_kind, c_alpha, c_q, u[0])
            if g0 > 0.0:
                du0 = (u[0] - um) * inv_h
            else:
                du0 = (up - u[0]) * inv_h
            out[0] = lap0 - g0 * du0 + _nb_f(r_kind, r_p, u[0])
        else:
            dnu = (3.0 * u[0] - 4.0 * u[1] + u[2]) * (0.5 * inv_h)
            out[0] = -dnu / sig_left

        if bc_right == 3:
            out[n - 1] = 0.0
        elif bc_right == 2:
            um = u[n - 2]
            up = u[n - 2]
            lapn = (um - 2.0 * u[n - 1] + up) * inv_h2
            gn = _nb_g(c_kind, c_alpha, c_q, u[n - 1])
            if gn > 0.0:
                dun = (u[n - 1] - um) * inv_h
            else:
                dun = (up - u[n - 1]) * inv_h
            out[n - 1] = lapn - gn * dun + _nb_f(r_kind, r_p, u[n - 1])
        else:
            dnu = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) * (0.5 * inv_h)
            out[n - 1] = -dnu / sig_right
        return out

    @njit(cache=True)
    def nb_rk4_step_1d(u, dt, inv_h, inv_h2, r_kind, r_p, c_kind, c_alpha, c_q,
                       bc_left, bc_right, sig_left, sig_right):
        n = u.shape[0]
        k1 = np.empty(n)
        k2 = np.empty(n)
        k3 = np.empty(n)
        k4 = np.empty(n)
        tmp = np.empty(n)
        half = 0.5 * dt
        nb_rhs_1d(u, inv_h, inv_h2, r_kind, r_p, c_kind, c_alpha, c_q,
                  bc_left, bc_right, sig_left, sig_right, k1)
        for i in range(n):
            tmp[i] = u[i] + half * k1[i]
        nb_rhs_1d(tmp, inv_h, inv_h2, r_kind, r_p, c_kind, c_alpha, c_q,
                  bc_left, bc_right, sig_left, sig_right, k2)
        for i in range(n):
            tmp[i] = u[i] + half * k2[i]
        nb_rhs_1d(tmp, inv_h, inv_h2, r_kind, r_p, c_kind, c_alpha, c_q,
                  bc_left, bc_right, sig_left, sig_right, k3)
        for i in range(n):
            tmp[i] = u[i] + dt * k3[i]
        nb_rhs_1d(tmp, inv_h, inv_h2, r_kind, r_p, c_kind, c_alpha, c_q,
                  bc_left, bc_right, sig_left, sig_right, k4)
        out = np.empty(n)
        sixth = dt / 6.0
        for i in range(n):
            out[i] = u[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        return out

    @njit(cache=True)
    def nb_rhs_2d(u, inv_h0, inv_h0sq, inv_h1, inv_h1sq, r_kind, r_p,
                  ck0, ca0, cq0, ck1, ca1, cq1, bc, sig, nu0, nu1, out):
        n1, n2 = u.shape
        for i in range(n1):
            for j in range(n2):
                code = bc[i, j]
                uij = u[i, j]
                if code == 3:
                    out[i, j] = 0.0
                elif code == 1:
                    dnu = 0.0
                    nx = nu0[i, j]
                    if nx < 0.0:
                        dnu += nx * ((-3.0 * uij + 4.0 * u[i + 1, j] - u[i + 2, j]) * (0.5 * inv_h0))
                    elif nx > 0.0:
                        dnu += nx * ((3.0 * uij - 4.0 * u[i - 1, j] + u[i - 2, j]) * (0.5 * inv_h0))
                    ny = nu1[i, j]
                    if ny < 0.0:
                        dnu += ny * ((-3.0 * uij + 4.0 * u[i, j + 1] - u[i, j + 2]) * (0.5 * inv_h1))
                    elif ny > 0.0:
                        dnu += ny * ((3.0 * uij - 4.0 * u[i, j - 1] + u[i, j - 2]) * (0.5 * inv_h1))
                    out[i, j] = -dnu / sig[i, j]
                else:
                    xm = u[i - 1, j] if i > 0 else u[i + 1, j]
                    xp = u[i + 1, j] if i < n1 - 1 else u[i - 1, j]
                    ym = u[i, j - 1] if j > 0 else u[i, j + 1]
                    yp = u[i, j + 1] if j < n2 - 1 else u[i, j - 1]
                    lap = (xm - 2.0 * uij + xp) * inv_h0sq + (ym - 2.0 * uij + yp) * inv_h1sq
                    g0 = _nb_g(ck0, ca0, cq0, uij)
                    if g0 > 0.0:
                        du0 = (uij - xm) * inv_h0
                    else:
                        du0 = (xp - uij) * inv_h0
                    g1 = _nb_g(ck1, ca1, cq1, uij)
                    if g1 > 0.0:
                        du1 = (uij - ym) * inv_h1
                    else:
                        du1 = (yp - uij) * inv_h1
                    out[i, j] = lap - g0 * du0 - g1 * du1 + _nb_f(r_kind, r_p, uij)
        return out

    @njit(cache=True)
    def nb_rk4_step_2d(u, dt, inv_h0, inv_h0sq, inv_h1, inv_h1sq, r_kind, r_p,
                       ck0, ca0, cq0, ck1, ca1, cq1, bc, sig, nu0, nu1):
        n1, n2 = u.shape
        k1 = np.empty((n1, n2))
        k2 = np.empty((n1, n2))
        k3 = np.empty((n1, n2))
        k4 = np.empty((n1, n2))
        tmp = np.empty((n1, n2))
        half = 0.5 * dt
        nb_rhs_2d(u, inv_h0, inv_h0sq, inv_h1, inv_h1sq, r_kind, r_p,
                  ck0, ca0, cq0, ck1, ca1, cq1, bc, sig, nu0, nu1, k1)
        for i in range(n1):
            for j in range(n2):
                tmp[i, j] = u[i, j] + half * k1[i, j]
        nb_rhs_2d(tmp, inv_h0, inv_h0sq, inv_h1, inv_h1sq, r_kind, r_p,
                  ck0, ca0, cq0, ck1, ca1, cq1, bc, sig, nu0, nu1, k2)
        for i in range(n1):
            for j in range(n2):
                tmp[i, j] = u[i, j] + half * k2[i, j]
        nb_rhs_2d(tmp, inv_h0, inv_h0sq, inv_h1, inv_h1sq, r_kind, r_p,
                  ck0, ca0, cq0, ck1, ca1, cq1, bc, sig, nu0, nu1, k3)
        for i in range(n1):
            for j in range(n2):
                tmp[i, j] = u[i, j] + dt * k3[i, j]
        nb_rhs_2d(tmp, inv_h0, inv_h0sq, inv_h1, inv_h1sq, r_kind, r_p,
                  ck0, ca0, cq0, ck1, ca1, cq1, bc, sig, nu0, nu1, k4)
        out = np.empty((n1, n2))
        sixth = dt / 6.0
        for i in range(n1):
            for j in range(n2):
                out[i, j] = u[i, j] + sixth * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
        return out

    NUMBA_BACKEND = SimpleNamespace(
        name="numba",
        rhs_1d=nb_rhs_1d,
        rk4_step_1d=nb_rk4_step_1d,
        rhs_2d=nb_rhs_2d,
        rk4_step_2d=nb_rk4_step_2d,
    )


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

def available_backends() -> dict:
    out = {"numpy": NUMPY_BACKEND}
    if NUMBA_BACKEND is not None:
        out["numba"] = NUMBA_BACKEND
    return out


def _pick(name: str):
    if name == "numpy":
        return NUMPY_BACKEND
    if name == "numba":
        if NUMBA_BACKEND is None:
            raise ConfigError("numba backend requested but numba is not importable")
        return NUMBA_BACKEND
    if name in ("", "auto"):
        return NUMBA_BACKEND if NUMBA_BACKEND is not None else NUMPY_BACKEND
    raise ConfigError(f"unknown backend '{name}' (choose numba, numpy, or auto)")


try:
    _active = _pick(os.environ.get(_ENV_FLAG, "auto"))
except ConfigError:
    # a bad env value must not break imports; auto never raises
    _active = _pick("auto")


def active_backend():
    return _active


def set_backend(name: str):
    """Switch the kernel backend ("numba" or "numpy"); returns the backend."""
    global _active
    _active = _pick(name)
    return _active
