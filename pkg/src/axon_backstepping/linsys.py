"""Linearized error system, feedback gain checks and the Lyapunov pair."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import BioParams, ControlParams


class NotHurwitz(ValueError):
    """The closed-loop ODE matrix ``A + B K^T`` has an eigenvalue with Re >= 0."""

    def __init__(self, eigenvalues, k1_bound, k1, k2):
        self.eigenvalues = eigenvalues
        msg = (
            f"A + B K^T is not Hurwitz: eigenvalues {eigenvalues}; "
            f"need k1 > a_tilde/beta = {k1_bound:.6g} (have {k1!r}) and k2 > 0 (have {k2!r})"
        )
        super().__init__(msg)


class LinearizationMismatch(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    K: np.ndarray
    a_tilde: float
    beta: float

    @property
    def closed_loop(self):
        return self.A + np.outer(self.B, self.K)

    @property
    def eigenvalues(self):
        return np.linalg.eigvals(self.closed_loop)


def derived_scalars(bio: BioParams):
    """Return ``(a_tilde, beta)`` from linearizing the cone equation at c_c = c_inf."""
    a_tilde = ((bio.a - bio.g * bio.l_c) - (bio.r_g * bio.c_inf + bio.rtilde_g * bio.l_c)) / bio.l_c
    beta = bio.D / bio.l_c
    return a_tilde, beta


def cone_rhs(bio: BioParams, c_c, c_x):
    """Right-hand side of the growth-cone equation divided by ``l_c``."""
    reaction = (bio.r_g * c_c + bio.rtilde_g * bio.l_c) * (c_c - bio.c_inf)
    return ((bio.a - bio.g * bio.l_c) * c_c - bio.D * c_x - reaction) / bio.l_c


def check_linearization(bio: BioParams, rtol=1e-6):
    """Compare ``(a_tilde, -beta)`` with a centered finite-difference Jacobian.

    The Jacobian is taken with respect to ``(c_c, c_x)`` at the equilibrium
    ``c_c = c_inf``, ``c_x = (a - g l_c) c_inf / D``. Returns the Jacobian;
    raises ``LinearizationMismatch`` if either entry is off by more than
    ``rtol``.
    """
    a_tilde, beta = derived_scalars(bio)
    c0 = bio.c_inf
    cx0 = (bio.a - bio.g * bio.l_c) * bio.c_inf / bio.D
    hc = 1e-6 * c0
    hx = 1e-6 * max(abs(cx0), c0 / bio.l_c)
    d_cc = (cone_rhs(bio, c0 + hc, cx0) - cone_rhs(bio, c0 - hc, cx0)) / (2 * hc)
    d_cx = (cone_rhs(bio, c0, cx0 + hx) - cone_rhs(bio, c0, cx0 - hx)) / (2 * hx)
    for name, fd, exact in (("a_tilde", d_cc, a_tilde), ("-beta", d_cx, -beta)):
        if abs(fd - exact) > rtol * abs(exact):
            raise LinearizationMismatch(
                f"{name}: derived {exact!r} disagrees with finite-difference Jacobian {fd!r}"
            )
    return np.array([d_cc, d_cx])


def build_linear_system(bio: BioParams, ctrl: ControlParams, *, check_hurwitz=True) -> LinearSystem:
    check_linearization(bio)
    a_tilde, beta = derived_scalars(bio)
    A = np.array([[a_tilde, 0.0], [bio.r_g, 0.0]])
    B = np.array([-beta, 0.0])
    C = np.array([1.0, -(bio.a - bio.g * bio.l_c) * bio.c_inf / bio.D])
    K = np.array([ctrl.k1, ctrl.k2], dtype=float)
    ls = LinearSystem(A, B, C, K, a_tilde, beta)
    if check_hurwitz:
        eig = ls.eigenvalues
        if not np.all(eig.real < 0):
            raise NotHurwitz(eig, a_tilde / beta, ctrl.k1, ctrl.k2)
    return ls


def is_hurwitz(bio: BioParams, ctrl: ControlParams) -> bool:
    ls = build_linear_system(bio, ctrl, check_hurwitz=False)
    return bool(np.all(ls.eigenvalues.real < 0))


def fallback_gains(bio: BioParams, k1=1.0):
    """Gains used when the configured ones fail the eigenvalue test.

    ``k1`` defaults to 1; ``k2`` places a double closed-loop pole at
    ``(a_tilde - beta k1) / 2``, i.e. ``k2 = (a_tilde - beta k1)^2 / (4 beta r_g)``.
    """
    a_tilde, beta = derived_scalars(bio)
    trace = a_tilde - beta * k1
    if trace >= 0:
        raise ValueError(f"k1 = {k1!r} violates k1 > a_tilde/beta = {a_tilde / beta!r}")
    return float(k1), float(trace ** 2 / (4.0 * beta * bio.r_g))


def hurwitz_or_fallback(bio: BioParams, ctrl: ControlParams):
    """Return ``(ctrl, used_fallback)`` with gains guaranteed Hurwitz."""
    if is_hurwitz(bio, ctrl):
        return ctrl, False
    k1, k2 = fallback_gains(bio)
    return replace(ctrl, k1=k1, k2=k2), True


@dataclass(frozen=True)
class LyapunovPair:
    P: np.ndarray
    Q: np.ndarray
    lambda_min_P: float
    lambda_max_P: float
    lambda_min_Q: float

    def residual(self, M):
        R = M.T @ self.P + self.P @ M + self.Q
        return float(np.linalg.norm(R) / np.linalg.norm(self.Q))


def solve_lyapunov_matrix(M, Q):
    """Solve ``M^T P + P M = -Q`` for symmetric 2x2 ``P``.

    With ``P = [[p, q], [q, r]]`` the equation is three linear equations in
    ``(p, q, r)``.
    """
    M = np.asarray(M, dtype=float)
    Q = np.asarray(Q, dtype=float)
    (m11, m12), (m21, m22) = M
    lhs = np.array([
        [2 * m11, 2 * m21, 0.0],
        [m12, m11 + m22, m21],
        [0.0, 2 * m12, 2 * m22],
    ])
    rhs = -np.array([Q[0, 0], 0.5 * (Q[0, 1] + Q[1, 0]), Q[1, 1]])
    p, q, r = np.linalg.solve(lhs, rhs)
    return np.array([[p, q], [q, r]])


def _check_spd(name, S):
    if not np.allclose(S, S.T, rtol=1e-12, atol=0.0):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(S).min() <= 0:
        raise ValueError(f"{name} must be positive definite")


def solve_lyapunov(ls: LinearSystem, Q=None) -> LyapunovPair:
    """Lyapunov pair for the closed-loop ODE matrix (``Q`` defaults to identity)."""
    Q = np.eye(2) if Q is None else np.asarray(Q, dtype=float)
    _check_spd("Q", Q)
    M = ls.closed_loop
    eig = np.linalg.eigvals(M)
    if not np.all(eig.real < 0):
        raise NotHurwitz(eig, ls.a_tilde / ls.beta, ls.K[0], ls.K[1])
    return lyapunov_pair(M, Q)


def lyapunov_pair(M, Q):
    P = solve_lyapunov_matrix(M, Q)
    eP = np.linalg.eigvalsh(P)
    if eP.min() <= 0:
        raise ValueError(f"Lyapunov solution is not positive definite: eigenvalues {eP}")
    return LyapunovPair(P, Q, float(eP.min()), float(eP.max()), float(np.linalg.eigvalsh(Q).min()))


@dataclass(frozen=True)
class LyapunovWeights:
    d1: float
    d2: float
    alpha: float
    v_bar: float
    l_bar: float


def lyapunov_weights(bio: BioParams, ctrl: ControlParams, lp: LyapunovPair, l_bar) -> LyapunovWeights:
    """Weights ``d1, d2``, decay rate ``alpha`` and speed bound ``v_bar``.

    ``d1`` is the larger of ``2 a^2 / D^2`` and 1; ``d2`` is the largest value
    allowed by the two upper bounds (the advection bound is dropped when
    ``a == 0``).
    """
    D, a, g = bio.D, bio.a, bio.g
    B = np.array([-derived_scalars(bio)[1], 0.0])
    BtP_sq = float(np.sum((B @ lp.P) ** 2))
    d1 = max(2 * a ** 2 / D ** 2, 1.0)
    bounds = [D * lp.lambda_min_Q / (64 * l_bar * BtP_sq)]
    if a > 0:
        bounds.append(g * D * lp.lambda_min_Q / (16 * a * BtP_sq))
    d2 = min(bounds)
    alpha = min(
        2 * g + D / (4 * l_bar),
        (4 * g + d1 * D) / 2,
        lp.lambda_min_Q / (2 * lp.lambda_max_P),
        d2 * (2 * d1 * D + g) / 4,
    )
    v_bar = min(g / (4 * ctrl.gamma), D / (8 * l_bar))
    return LyapunovWeights(d1, d2, alpha, v_bar, float(l_bar))
