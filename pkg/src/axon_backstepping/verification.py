"""Manufactured-solution convergence and the invariant report behind ``verify``."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .config import BioParams, ControlParams
from .diagnostics import discrete_inverse, f_term, forward_transform, round_trip
from .expm import mat_exp
from .kernel import build_tables, kernel_residuals
from .simulator import SchemeParams, SimState, build_plant, step
from .steady import c_eq_prime, steady_residual

# nondimensional parameters for the manufactured problem; only D, a, g matter
MMS_BIO = BioParams(D=0.1, a=0.05, g=1.0, r_g=1.0, rtilde_g=0.0, l_c=1.0, c_inf=1.0)


def mms_exact(sigma, t, bio=MMS_BIO, l=1.0):
    return np.exp(-bio.g * t) * np.cos(np.pi * sigma)


def mms_source(bio=MMS_BIO):
    """Source making ``exp(-g t) cos(pi x / l)`` solve the frozen-length field equation."""
    def source(sigma, t, l):
        decay = np.exp(-bio.g * t)
        k = np.pi / l
        return decay * (bio.D * k ** 2 * np.cos(np.pi * sigma) - bio.a * k * np.sin(np.pi * sigma))
    return source


def mms_error(n_grid, dt, t_final, theta, bio=MMS_BIO, l=1.0):
    """Max nodal error at ``t_final`` for the manufactured problem (zero soma flux, Dirichlet tip)."""
    sigma = np.linspace(0.0, 1.0, n_grid)
    state = SimState(0.0, l, mms_exact(sigma, 0.0, bio, l))
    scheme = SchemeParams(theta, n_grid, dt)
    src = mms_source(bio)
    tip = lambda t: float(mms_exact(1.0, t, bio, l))
    for k in range(int(round(t_final / dt))):
        state = step(state, bio, 0.0, scheme, source=src, right_dirichlet=tip, frozen_length=True, step_index=k)
    return float(np.abs(state.c - mms_exact(sigma, state.t, bio, l)).max())


def observed_orders(errors, ratio=2.0):
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(ratio)


def spatial_study(levels=(21, 41, 81), dt=1e-4, t_final=0.2):
    errs = [mms_error(n, dt, t_final, 0.5) for n in levels]
    return errs, observed_orders(errs)


def temporal_study(steps=(0.1, 0.05, 0.025), n_grid=801, t_final=1.0):
    errs = [mms_error(n_grid, dt, t_final, 0.5) for dt in steps]
    return errs, observed_orders(errs)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float
    passed: bool
    seconds: float = 0.0

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: {self.value:.3e} (limit {self.limit:.1e}, {self.seconds:.2f} s)"


def _check(name, fn, limit, below=True):
    t0 = time.perf_counter()
    value = float(fn())
    ok = value < limit if below else value > limit
    return Check(name, value, limit, bool(ok), time.perf_counter() - t0)


def compatible_state(rng, tables, C, l, n):
    """Random smooth ``(u, X)`` with ``u(l) = C^T X``."""
    X = rng.normal(size=2) * np.array([1e-3, 1e-7])
    x = np.linspace(0.0, l, n)
    modes = rng.normal(size=4)
    u = sum(m * np.cos((j + 1) * np.pi * x / l + j) for j, m in enumerate(modes)) * 1e-3
    u += C @ X - u[-1]
    return u, X


def verify_suite(bio: BioParams = None, ctrl: ControlParams = None, l_s=12e-6, n=201, seed=0):
    """Run the structural invariants and return a list of :class:`Check`."""
    bio = bio or BioParams()
    ctrl = ctrl or ControlParams()
    plant = build_plant(bio, ctrl, l_s)
    ss, aug, ls = plant.ss, plant.aug, plant.ls
    checks = [
        _check("steady residual", lambda: steady_residual(ss, bio, 101), 1e-10),
        _check("K+ + K- - 1", lambda: abs(ss.K_plus + ss.K_minus - 1.0), 1e-12),
        _check(
            "cone balance at l_s (relative)",
            lambda: abs(bio.D * c_eq_prime(ss, l_s) - (bio.a - bio.g * bio.l_c) * bio.c_inf)
            / abs((bio.a - bio.g * bio.l_c) * bio.c_inf),
            1e-12,
        ),
        _check("closed-loop max Re(eig)", lambda: ls.eigenvalues.real.max(), 0.0),
        _check("Lyapunov residual", lambda: plant.lp.residual(ls.closed_loop), 1e-10),
    ]
    res = kernel_residuals(aug, ls, l_s, n)
    for k, v in res.as_dict().items():
        checks.append(Check(f"kernel {k}", v, 1e-8, v < 1e-8))

    def semigroup():
        x, y = 0.37 * l_s, 0.61 * l_s
        lhs = mat_exp(aug.N1 * (x + y))
        return np.abs(lhs - mat_exp(aug.N1 * x) @ mat_exp(aug.N1 * y)).max() / np.abs(lhs).max()

    checks.append(_check("semigroup", semigroup, 1e-11))
    rng = np.random.default_rng(seed)
    tables = build_tables(aug, l_s, n, ctrl.gamma)

    def transforms():
        worst_bcl = worst_rt = worst_tri = 0.0
        for _ in range(20):
            u, X = compatible_state(rng, tables, aug.C, l_s, n)
            tf = forward_transform(u, X, l_s, tables, rule=plant.ctrl.quadrature)
            scale = np.abs(u).max()
            worst_bcl = max(worst_bcl, tf.bcl_residual / scale)
            worst_rt = max(worst_rt, round_trip(u, X, l_s, tables, plant.ctrl.quadrature))
            u_tri = discrete_inverse(tf.w, X, l_s, tables, plant.ctrl.quadrature)
            worst_tri = max(worst_tri, np.abs(u_tri - u).max() / scale)
        return worst_bcl, worst_rt, worst_tri

    t0 = time.perf_counter()
    bcl, rt, tri = transforms()
    dt_s = time.perf_counter() - t0
    checks += [
        Check("w(l) / max|u|", bcl, 1e-8, bcl < 1e-8, dt_s),
        Check("round trip", rt, 1e-6, rt < 1e-6, dt_s),
        Check("discrete inverse oracle", tri, 1e-10, tri < 1e-10, dt_s),
    ]

    def f_identity():
        worst = 0.0
        for _ in range(5):
            X = rng.normal(size=2)
            worst = max(worst, abs(f_term(l_s, X, l_s, aug) - ls.K @ X) / np.abs(ls.K * X).max())
        return worst

    checks.append(_check("F(l, X) - K^T X", f_identity, 1e-9))
    w = plant.weights
    checks.append(Check("min(d1, d2, alpha)", min(w.d1, w.d2, w.alpha), 0.0, min(w.d1, w.d2, w.alpha) > 0))
    return plant, checks
