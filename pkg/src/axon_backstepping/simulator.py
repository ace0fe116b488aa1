"""Moving-boundary plant on a front-fixed grid, closed through the controller.

The field is carried on ``sigma = x / l`` in ``[0, 1]``. Interior rows use
central differences and a theta-scheme; the soma row uses a ghost node for
the Neumann flux; the last row is the cone equation, solved implicitly in
the same banded system (its diffusive coupling ``D / (h l)`` is far too stiff
for explicit stepping at micrometre lengths).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .config import BioParams, ControlParams, RunRecord, ScenarioConfig, validate_control
from .controller import Controller
from .diagnostics import error_field, forward_transform, grid_derivative, h1_norm, lyapunov_value
from .kernel import AugmentedSystem, build_augmented, build_tables
from .linsys import (
    LinearSystem,
    LyapunovPair,
    LyapunovWeights,
    build_linear_system,
    hurwitz_or_fallback,
    lyapunov_weights,
    solve_lyapunov,
)
from .quadrature import rule_weights
from .steady import SteadyState, build_steady_state, c_eq


class SimulationFault(RuntimeError):
    def __init__(self, step, quantity, value):
        self.step = step
        self.quantity = quantity
        self.value = value
        super().__init__(f"step {step}: {quantity} = {value!r}")


@dataclass(frozen=True)
class SimState:
    t: float
    l: float
    c: np.ndarray
    ldot: float = 0.0

    @property
    def c_c(self):
        return float(self.c[-1])

    @property
    def sigma(self):
        return np.linspace(0.0, 1.0, len(self.c))


@dataclass(frozen=True)
class SchemeParams:
    theta: float = 1.0
    n_grid: int = 201
    dt: float = 1e-3

    @property
    def h(self):
        return 1.0 / (self.n_grid - 1)

    def check_stability(self, D, l0):
        """Reject sub-half-implicit schemes whose explicit part violates the parabolic CFL bound."""
        mu = self.dt * D / (l0 * self.h) ** 2
        if self.theta < 0.5 and mu > 0.5:
            raise ValueError(
                f"theta = {self.theta} with dt D / (l0 h)^2 = {mu:.3g} > 0.5 is unstable; use theta >= 0.5"
            )
        return mu


def _interior_coeffs(l, ldot, sigma, h, D, a, g):
    kappa = D / l ** 2
    v = (sigma * ldot - a) / l
    lower = kappa / h ** 2 - v / (2 * h)
    diag = np.full(len(sigma), -2 * kappa / h ** 2 - g)
    upper = kappa / h ** 2 + v / (2 * h)
    return kappa, v, lower, diag, upper


def _apply_operator(c, lower, diag, upper, kappa, h, g):
    """Explicit spatial operator on interior rows and the ghost-node soma row (without the flux term)."""
    Lc = np.zeros_like(c)
    Lc[1:-1] = lower[1:-1] * c[:-2] + diag[1:-1] * c[1:-1] + upper[1:-1] * c[2:]
    Lc[0] = 2 * kappa * (c[1] - c[0]) / h ** 2 - g * c[0]
    return Lc


def cone_balance(bio: BioParams, c, l, h):
    """Right-hand side ``l_c dc_c/dt`` of the cone equation with a one-sided slope."""
    cc = c[-1]
    slope = (3 * c[-1] - 4 * c[-2] + c[-3]) / (2 * h)
    reaction = (bio.r_g * cc + bio.rtilde_g * bio.l_c) * (cc - bio.c_inf)
    return (bio.a - bio.g * bio.l_c) * cc - (bio.D / l) * slope - reaction


def step(
    state: SimState,
    bio: BioParams,
    q_s,
    scheme: SchemeParams,
    *,
    source: Optional[Callable] = None,
    right_dirichlet: Optional[Callable] = None,
    frozen_length=False,
    step_index=0,
) -> SimState:
    """Advance one time step.

    ``source(sigma, t, l)`` adds a volumetric term to the field equation
    (theta-weighted between the two time levels). ``right_dirichlet(t)``
    replaces the cone equation by ``c(1) = value`` at the new time level.
    With ``frozen_length`` the length and growth rate are held fixed.
    """
    c = state.c
    if not np.all(np.isfinite(c)):
        bad = int(np.flatnonzero(~np.isfinite(c))[0])
        raise SimulationFault(step_index, f"c[{bad}]", float(c[bad]))
    n = len(c)
    h = 1.0 / (n - 1)
    dt, th = scheme.dt, scheme.theta
    D, a, g = bio.D, bio.a, bio.g
    l = state.l
    sigma = np.linspace(0.0, 1.0, n)
    ldot = 0.0 if frozen_length else bio.r_g * (c[-1] - bio.c_inf)

    kappa, v, lower, diag, upper = _interior_coeffs(l, ldot, sigma, h, D, a, g)
    Lc = _apply_operator(c, lower, diag, upper, kappa, h, g)

    # banded (2 lower, 1 upper): ab[1 + i - j, j] = M[i, j]
    ab = np.zeros((4, n))
    ab[1] = 1.0 / dt - th * diag
    ab[0, 2:] = -th * upper[1:-1]
    ab[0, 1] = -th * 2 * kappa / h ** 2
    ab[2, :-1] = -th * lower[1:]
    rhs = c / dt + (1 - th) * Lc
    rhs[0] += (2 * kappa * l / h - v[0] * l) * q_s

    if source is not None:
        t_new = state.t + dt
        rhs[:-1] += ((1 - th) * source(sigma, state.t, l) + th * source(sigma, t_new, l))[:-1]

    if right_dirichlet is not None:
        ab[1, -1] = 1.0
        ab[2, -2] = 0.0
        ab[3, -3] = 0.0
        rhs[-1] = right_dirichlet(state.t + dt)
    else:
        cc = c[-1]
        s = D / (2 * h * l)
        dR = bio.r_g * (2 * cc - bio.c_inf) + bio.rtilde_g * bio.l_c
        ab[1, -1] = bio.l_c / dt - th * ((a - g * bio.l_c) - 3 * s - dR)
        ab[2, -2] = -th * 4 * s
        ab[3, -3] = th * s
        # Newton linearization of the reaction about the old cone value
        rhs[-1] = (
            bio.l_c * cc / dt
            + (1 - th) * cone_balance(bio, c, l, h)
            + th * (bio.r_g * cc * cc + bio.rtilde_g * bio.l_c * bio.c_inf)
        )

    c_new = solve_banded((2, 1), ab, rhs, check_finite=False)
    if not np.all(np.isfinite(c_new)):
        bad = int(np.flatnonzero(~np.isfinite(c_new))[0])
        raise SimulationFault(step_index, f"c[{bad}]", float(c_new[bad]))
    l_new = l + dt * ldot
    if not (np.isfinite(l_new) and l_new > 0):
        raise SimulationFault(step_index, "l", float(l_new))
    return SimState(state.t + dt, l_new, c_new, ldot)


@dataclass(frozen=True)
class Plant:
    """Everything derived from the parameters once per run."""

    bio: BioParams
    ctrl: ControlParams
    ss: SteadyState
    ls: LinearSystem
    aug: AugmentedSystem
    lp: LyapunovPair
    weights: LyapunovWeights
    used_fallback: bool


def build_plant(bio: BioParams, ctrl: ControlParams, l_s, l_0=None, convention="derived") -> Plant:
    """Validate the design and assemble steady state, linear system, kernels and weights.

    Non-Hurwitz gains are replaced by :func:`linsys.fallback_gains`;
    ``used_fallback`` records whether that happened.
    """
    validate_control(bio, ctrl)
    ctrl_eff, used = hurwitz_or_fallback(bio, ctrl)
    ss = build_steady_state(bio, l_s)
    ls = build_linear_system(bio, ctrl_eff)
    aug = build_augmented(bio, ls, convention)
    lp = solve_lyapunov(ls)
    l_ref = max(l_s, l_0 if l_0 is not None else l_s)
    weights = lyapunov_weights(bio, ctrl_eff, lp, ctrl_eff.l_bar_factor * l_ref)
    return Plant(bio, ctrl_eff, ss, ls, aug, lp, weights, used)


@dataclass(frozen=True)
class Snapshot:
    t: float
    sigma: np.ndarray
    x: np.ndarray
    c: np.ndarray
    u: np.ndarray
    w: np.ndarray


@dataclass
class RunResult:
    records: List[RunRecord] = field(default_factory=list)
    snapshots: List[Snapshot] = field(default_factory=list)
    final: Optional[SimState] = None
    fault: Optional[SimulationFault] = None
    steps: int = 0


def initial_state(scen: ScenarioConfig, bio: BioParams) -> SimState:
    sigma = np.linspace(0.0, 1.0, scen.n_grid)
    return SimState(0.0, scen.l_0, scen.initial_profile(bio.c_inf, sigma))


def _flux(plant: Plant, controller: Optional[Controller], u, X, l):
    mode = plant.ctrl.mode
    if mode == "closed_loop":
        return controller(u, X, l)
    if mode == "zero_input":
        return 0.0, plant.ss.q_s_star
    q = plant.ctrl.q_open if plant.ctrl.q_open is not None else plant.ss.q_s_star
    return plant.ss.q_s_star - q, q


def _diagnose(plant, controller, state, u, X, U_applied, q_s):
    """Record for the state at the start of a step.

    ``U_applied`` is the input that produced this state; the soma slope of
    ``u`` is taken from it, so ``bc_residual`` measures how far the explicit
    loop closure lags the control law.
    """
    tables = controller.tables_for(state.l)
    u_x = grid_derivative(u, state.l)
    u_x[0] = U_applied
    tf = forward_transform(u, X, state.l, tables, u_x=u_x, rule=plant.ctrl.quadrature)
    Z = h1_norm(u, u_x, X, state.l)
    en = lyapunov_value(tf, X, state.l, plant.lp, plant.weights, plant.ctrl.gamma, Z)
    rec = RunRecord(
        t=float(state.t), l=float(state.l), c_c=state.c_c, q_s=float(q_s), U=float(plant.ss.q_s_star - q_s),
        Z=Z, V=en.V, w0=tf.w0, wx_l=tf.wx_l, bc_residual=tf.bc0_residual,
    )
    return rec, tf


def run(
    plant: Plant,
    scen: ScenarioConfig,
    init: Optional[SimState] = None,
    *,
    n_steps=None,
    progress: Optional[Callable] = None,
    raise_on_fault=False,
) -> RunResult:
    """Simulate ``n_steps`` (default ``scen.n_steps``) steps from ``init``.

    A record is kept every ``scen.record_every`` steps plus the final state,
    and a profile snapshot every ``scen.snapshot_every`` steps. On a fault the
    partial result is returned with ``fault`` set unless ``raise_on_fault``.
    """
    bio = plant.bio
    scheme = SchemeParams(scen.theta, scen.n_grid, scen.dt)
    state = init if init is not None else initial_state(scen, bio)
    if len(state.c) != scen.n_grid:
        raise ValueError(f"initial state has {len(state.c)} nodes, scenario wants {scen.n_grid}")
    scheme.check_stability(bio.D, min(state.l, scen.l_0))
    controller = Controller(plant.aug, plant.ss, plant.ctrl.gamma, scen.n_grid, plant.ctrl.quadrature)
    n_steps = scen.n_steps if n_steps is None else int(n_steps)
    out = RunResult()

    u, X = error_field(state.c, state.l, state.c_c, plant.ss)
    U_prev, q_prev = _flux(plant, controller, u, X, state.l)
    for k in range(n_steps + 1):
        u, X = error_field(state.c, state.l, state.c_c, plant.ss)
        try:
            U, q_s = _flux(plant, controller, u, X, state.l)
        except Exception as exc:
            fault = SimulationFault(k, "control input", str(exc))
            if raise_on_fault:
                raise fault from exc
            out.fault = fault
            break
        last = k == n_steps
        snap = k % scen.snapshot_every == 0 or last
        if k % scen.record_every == 0 or last or snap:
            rec, tf = _diagnose(plant, controller, state, u, X, U_prev, q_s)
            out.records.append(rec)
            if snap:
                sigma = state.sigma
                out.snapshots.append(Snapshot(state.t, sigma, sigma * state.l, state.c.copy(), u, tf.w))
        if last:
            break
        try:
            state = step(state, bio, q_s, scheme, step_index=k)
        except SimulationFault as fault:
            if raise_on_fault:
                raise
            out.fault = fault
            break
        U_prev = U
        out.steps = k + 1
        if progress is not None:
            progress(k + 1, state)
    out.final = state
    return out


def discrete_equilibrium(plant: Plant, n_grid, rule=None, bracket=1e-3) -> SimState:
    """Fixed point of the closed-loop discrete scheme.

    At rest ``c_c = c_inf``. For a trial length the soma and interior rows,
    with the dense control-law row folded into the soma flux, form a linear
    system for the remaining nodes; the length is then chosen so that the
    discrete cone balance vanishes.
    """
    bio, ss = plant.bio, plant.ss
    rule = plant.ctrl.quadrature if rule is None else rule
    n = n_grid
    h = 1.0 / (n - 1)
    sigma = np.linspace(0.0, 1.0, n)
    W = rule_weights(n - 1, rule)
    beta = -float(plant.aug.C @ plant.aug.B)

    def profile(l):
        tables = build_tables(plant.aug, l, n, plant.ctrl.gamma)
        kappa, v, lower, diag, upper = _interior_coeffs(l, 0.0, sigma, h, bio.D, bio.a, bio.g)
        ce = c_eq(ss, sigma * l)
        X = np.array([0.0, l - ss.l_s])
        # U = alpha . c + U_const
        alpha = -(l * h / bio.D) * W * (tables.p @ plant.aug.B)
        alpha[0] += plant.ctrl.gamma - beta / bio.D
        U_const = -alpha @ ce + tables.p[-1] @ X
        b = 2 * kappa * l / h - v[0] * l
        M = np.zeros((n - 1, n - 1))
        rhs = np.zeros(n - 1)
        # soma row: 2 kappa (c1 - c0)/h^2 - g c0 + b (q* - U) = 0
        M[0, 0] = -2 * kappa / h ** 2 - bio.g
        M[0, 1] += 2 * kappa / h ** 2
        M[0] -= b * alpha[:-1]
        rhs[0] = -b * (ss.q_s_star - U_const - alpha[-1] * bio.c_inf)
        for i in range(1, n - 1):
            M[i, i - 1] = lower[i]
            M[i, i] = diag[i]
            if i + 1 < n - 1:
                M[i, i + 1] = upper[i]
            else:
                rhs[i] = -upper[i] * bio.c_inf
        return np.append(np.linalg.solve(M, rhs), bio.c_inf)

    def balance(l):
        return cone_balance(bio, profile(l), l, h)

    lo, hi = ss.l_s * (1 - bracket), ss.l_s * (1 + bracket)
    l_eq = brentq(balance, lo, hi, xtol=1e-14 * ss.l_s, rtol=1e-15)
    return SimState(0.0, l_eq, profile(l_eq), 0.0)


def scenario_for(scen: ScenarioConfig, **changes) -> ScenarioConfig:
    return replace(scen, **changes)
