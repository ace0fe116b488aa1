"""Error field, backstepping transform, energies and decay fits."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve

from .kernel import AugmentedSystem, KernelTables, phi_and_prime
from .linsys import LyapunovPair, LyapunovWeights
from .quadrature import trapezoid_weights
from .steady import SteadyState, c_eq


def error_field(c, l, c_c, ss: SteadyState):
    """Return ``(u, X)`` with ``u = c - c_eq`` on the grid and ``X = [c_c - c_inf, l - l_s]``."""
    c = np.asarray(c, dtype=float)
    sigma = np.linspace(0.0, 1.0, len(c))
    u = c - c_eq(ss, sigma * l)
    X = np.array([c_c - ss.c_inf, l - ss.l_s])
    return u, X


def grid_derivative(f, l):
    """Spatial derivative on the uniform grid over ``[0, l]``.

    Centered differences inside, second-order one-sided stencils at the ends.
    """
    f = np.asarray(f, dtype=float)
    hx = l / (len(f) - 1)
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2 * hx)
    d[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * hx)
    d[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * hx)
    return d


@dataclass(frozen=True)
class TargetField:
    w: np.ndarray
    w_x: np.ndarray
    w0: float
    wx0: float
    wx_l: float
    bc0_residual: float
    bcl_residual: float


def forward_transform(u, X, l, tables: KernelTables, u_x=None, rule="simpson") -> TargetField:
    """Backstepping transform ``w = u - int_x^l k u dy - phi(x - l)^T X``.

    ``w_x`` is obtained by differentiating the transform, which needs
    ``u_x``; by default it comes from :func:`grid_derivative`, and callers
    with a Neumann input may overwrite ``u_x[0]`` with the applied value. The
    Robin residual ``|w_x(0) - gamma w(0)|`` is then exactly the mismatch
    between the applied input and the control law evaluated on ``(u, X)``.
    """
    u = np.asarray(u, dtype=float)
    X = np.asarray(X, dtype=float)
    if len(u) != tables.n:
        raise ValueError(f"u has {len(u)} samples but the kernel grid has {tables.n}")
    if u_x is None:
        u_x = grid_derivative(u, l)
    # phi(x_i - l) is table row n-1-i
    phi_rev = tables.phi[::-1]
    dphi_rev = tables.phi_prime[::-1]
    w = u - tables.operator("k", rule) @ u - phi_rev @ X
    w_x = u_x + tables.k_sep[0] * u - tables.operator("kx", rule) @ u - dphi_rev @ X
    return TargetField(
        w=w,
        w_x=w_x,
        w0=float(w[0]),
        wx0=float(w_x[0]),
        wx_l=float(w_x[-1]),
        bc0_residual=float(abs(w_x[0] - tables.gamma * w[0])),
        bcl_residual=float(abs(w[-1])),
    )


def inverse_transform(w, X, l, tables: KernelTables, rule="simpson", zero_kernels=False):
    """Inverse map ``u = w + int_x^l q w dy + phi_tilde(x - l)^T X``."""
    w = np.asarray(w, dtype=float)
    if zero_kernels:
        return w.copy()
    return w + tables.operator("q", rule) @ w + tables.Ytilde[::-1, :2] @ np.asarray(X, dtype=float)


def round_trip(u, X, l, tables: KernelTables, rule="simpson", zero_kernels=False):
    """``max|inverse(forward(u)) - u| / max|u|``."""
    u = np.asarray(u, dtype=float)
    w = forward_transform(u, X, l, tables, rule=rule).w
    u_rec = inverse_transform(w, X, l, tables, rule=rule, zero_kernels=zero_kernels)
    scale = np.abs(u).max()
    if scale == 0:
        return float(np.abs(u_rec).max())
    return float(np.abs(u_rec - u).max() / scale)


def discrete_inverse(w, X, l, tables: KernelTables, rule="simpson"):
    """Invert the discretized forward transform by a direct linear solve.

    The quadrature turns the forward transform into ``w = (I - V) u - Phi X``
    with ``V`` (nearly) upper triangular, which is solved exactly. This
    serves as an oracle that is independent of the inverse kernels.
    """
    M = np.eye(tables.n) - tables.operator("k", rule)
    rhs = np.asarray(w, dtype=float) + tables.phi[::-1] @ np.asarray(X, dtype=float)
    return solve(M, rhs)


def h1_norm(u, u_x, X, l):
    """``||u||^2 + ||u_x||^2 + X^T X`` with trapezoid integrals over ``[0, l]``."""
    u = np.asarray(u, dtype=float)
    u_x = np.asarray(u_x, dtype=float)
    hx = l / (len(u) - 1)
    wts = trapezoid_weights(len(u) - 1) * hx
    X = np.asarray(X, dtype=float)
    return float(wts @ u ** 2 + wts @ u_x ** 2 + X @ X)


@dataclass(frozen=True)
class EnergyReport:
    V1: float
    V2: float
    V3: float
    V: float
    Z: Optional[float] = None


def lyapunov_value(target: TargetField, X, l, lp: LyapunovPair, weights: LyapunovWeights, gamma, Z=None) -> EnergyReport:
    """Target-system Lyapunov function ``d1 V1 + V2 + (gamma/2) w(0)^2 + d2 V3``."""
    hx = l / (len(target.w) - 1)
    wts = trapezoid_weights(len(target.w) - 1) * hx
    V1 = 0.5 * float(wts @ target.w ** 2)
    V2 = 0.5 * float(wts @ target.w_x ** 2)
    X = np.asarray(X, dtype=float)
    V3 = float(X @ lp.P @ X)
    V = weights.d1 * V1 + V2 + 0.5 * gamma * target.w0 ** 2 + weights.d2 * V3
    return EnergyReport(V1, V2, V3, V, Z)


@dataclass(frozen=True)
class DecayFit:
    kappa: float
    c: float
    r2: float
    c_envelope: float
    window: tuple


def decay_fit(t, Z, window=None) -> DecayFit:
    """Least-squares fit of ``log Z = log(c Z(0)) - kappa t`` over ``window``.

    ``c`` is the fitted prefactor relative to ``Z(0)`` (the first sample of
    the series). ``c_envelope`` is the smallest ``c`` for which
    ``Z(t) <= c Z(0) exp(-kappa t)`` holds at every sample in the window.
    """
    t = np.asarray(t, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if window is None:
        window = (0.2 * t[-1], 0.8 * t[-1])
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < 2:
        raise ValueError(f"fewer than two samples in window {window}")
    if np.any(Z[sel] <= 0):
        raise ValueError("Z must be positive on the fit window")
    if Z[0] <= 0:
        raise ValueError("Z(0) must be positive")
    ts, ys = t[sel], np.log(Z[sel])
    slope, intercept = np.polyfit(ts, ys, 1)
    fit = intercept + slope * ts
    ss_res = float(np.sum((ys - fit) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    kappa = -slope
    c = np.exp(intercept) / Z[0]
    c_env = float(np.max(Z[sel] * np.exp(kappa * ts)) / Z[0])
    return DecayFit(float(kappa), float(c), float(r2), c_env, tuple(window))


def f_term(x, X, l, aug: AugmentedSystem):
    """Moving-boundary term ``(phi'(x - l)^T - k(x, l) C^T) X``."""
    if not 0 <= x <= l:
        raise ValueError(f"x = {x!r} outside [0, l = {l!r}]")
    phi, dphi = phi_and_prime(aug, x - l)
    k_xl = -(phi @ aug.B) / aug.D
    return float((dphi - k_xl * aug.C) @ np.asarray(X, dtype=float))


def inequality_checks(target: TargetField, l, l_bar, gamma):
    """Slack of the Poincaré and Agmon-type bounds for a sampled target field.

    Returns a dict of ``rhs - lhs`` values; all are non-negative when the
    inequalities hold. ``w_xx`` is taken by finite differences of ``w_x``.
    """
    n = len(target.w)
    hx = l / (n - 1)
    wts = trapezoid_weights(n - 1) * hx
    w_xx = grid_derivative(target.w_x, l)
    nw = wts @ target.w ** 2
    nwx = wts @ target.w_x ** 2
    nwxx = wts @ w_xx ** 2
    return {
        "poincare_w": 4 * l_bar ** 2 * nwx - nw,
        "poincare_wx": 2 * l_bar * gamma ** 2 * target.w0 ** 2 + 4 * l_bar ** 2 * nwxx - nwx,
        "agmon": 2 * gamma ** 2 * target.w0 ** 2 + 4 * l_bar * nwxx - target.wx_l ** 2,
    }
