"""Closed-form steady state of the tubulin profile for a set-point length."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import BioParams


@dataclass(frozen=True)
class SteadyState:
    lambda_plus: float
    lambda_minus: float
    K_plus: float
    K_minus: float
    l_s: float
    q_s_star: float
    c_inf: float


def build_steady_state(bio: BioParams, l_s: float) -> SteadyState:
    if not l_s > 0:
        raise ValueError(f"l_s = {l_s!r} violates l_s > 0")
    # one shared root keeps lambda+ + lambda- = a/D and K+ + K- = 1 to rounding
    root = math.sqrt(bio.a ** 2 + 4.0 * bio.D * bio.g)
    lam_p = (bio.a + root) / (2.0 * bio.D)
    lam_m = (bio.a - root) / (2.0 * bio.D)
    half_gap = (bio.a - 2.0 * bio.g * bio.l_c) / (2.0 * root)
    K_p = 0.5 + half_gap
    K_m = 0.5 - half_gap
    q_star = -bio.c_inf * (K_p * lam_p * math.exp(-lam_p * l_s) + K_m * lam_m * math.exp(-lam_m * l_s))
    return SteadyState(lam_p, lam_m, K_p, K_m, l_s, q_star, bio.c_inf)


def _modes(ss, x):
    x = np.asarray(x, dtype=float)
    ep = ss.K_plus * np.exp(ss.lambda_plus * (x - ss.l_s))
    em = ss.K_minus * np.exp(ss.lambda_minus * (x - ss.l_s))
    return ep, em


def c_eq(ss: SteadyState, x):
    ep, em = _modes(ss, x)
    return ss.c_inf * (ep + em)


def c_eq_prime(ss: SteadyState, x):
    ep, em = _modes(ss, x)
    return ss.c_inf * (ss.lambda_plus * ep + ss.lambda_minus * em)


def c_eq_second(ss: SteadyState, x):
    ep, em = _modes(ss, x)
    return ss.c_inf * (ss.lambda_plus ** 2 * ep + ss.lambda_minus ** 2 * em)


def steady_residual(ss: SteadyState, bio: BioParams, n_check: int) -> float:
    """Normalized residual of the steady equations on ``n_check`` points of [0, l_s].

    Sums the worst interior residual ``|D c'' - a c' - g c|`` and the cone
    balance ``|(a - g l_c) c_inf - D c'(l_s)|``, both divided by ``g c_inf``.
    """
    if n_check < 2:
        raise ValueError(f"n_check = {n_check} violates n_check >= 2")
    x = np.linspace(0.0, ss.l_s, n_check)
    pde = bio.D * c_eq_second(ss, x) - bio.a * c_eq_prime(ss, x) - bio.g * c_eq(ss, x)
    cone = (bio.a - bio.g * bio.l_c) * bio.c_inf - bio.D * c_eq_prime(ss, ss.l_s)
    scale = bio.g * bio.c_inf
    return float(np.max(np.abs(pde)) / scale + abs(cone) / scale)
