"""Explicit backstepping boundary feedback for the soma flux."""
from __future__ import annotations

import numpy as np

from .kernel import AugmentedSystem, KernelTables, build_tables
from .quadrature import rule_weights
from .steady import SteadyState


class ControllerFault(RuntimeError):
    pass


def control_U(u, X, l, tables: KernelTables, rule="simpson"):
    """Error input ``U = (gamma - beta/D) u(0) - (1/D) int p B u dx + p(l) X``.

    ``u`` is sampled on the ``tables`` grid over ``[0, l]``; the integral uses
    the composite ``rule`` with Jacobian ``l``.
    """
    u = np.asarray(u, dtype=float)
    X = np.asarray(X, dtype=float)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(X)) and np.isfinite(l)):
        raise ControllerFault(
            f"non-finite controller input: max|u|={np.nanmax(np.abs(u))!r}, X={X}, l={l!r}"
        )
    if len(u) != tables.n:
        raise ControllerFault(f"u has {len(u)} samples but the kernel grid has {tables.n}")
    aug = tables.aug
    beta_over_D = -float(aug.C @ aug.B) / aug.D
    pB = tables.p @ aug.B
    integral = l * tables.h * (rule_weights(tables.n - 1, rule) @ (pB * u))
    return float((tables.gamma - beta_over_D) * u[0] - integral / aug.D + tables.p[-1] @ X)


def applied_flux(U, ss: SteadyState):
    """Soma flux ``q_s = q_s* - U``; the plant then sees ``c_x(0) = -q_s``."""
    if not np.isfinite(U):
        raise ControllerFault(f"non-finite control input U={U!r}")
    return ss.q_s_star - U


class Controller:
    """Boundary controller with a length-keyed kernel-table cache.

    Tables are rebuilt whenever the length has moved by more than
    ``refresh_tol`` (relative) since the last build.
    """

    def __init__(self, aug: AugmentedSystem, ss: SteadyState, gamma, n, rule="simpson", refresh_tol=1e-6):
        self.aug = aug
        self.ss = ss
        self.gamma = float(gamma)
        self.n = int(n)
        self.rule = rule
        self.refresh_tol = refresh_tol
        self.tables = None
        self.last_U = 0.0
        self.refreshes = 0

    @property
    def beta(self):
        return -float(self.aug.C @ self.aug.B)

    @property
    def p_at_l(self):
        return self.tables.p[-1]

    def tables_for(self, l):
        t = self.tables
        if t is None or abs(l - t.l) > self.refresh_tol * t.l:
            self.tables = build_tables(self.aug, l, self.n, self.gamma)
            self.refreshes += 1
        return self.tables

    def __call__(self, u, X, l):
        """Return ``(U, q_s)`` for the current error state."""
        U = control_U(u, X, l, self.tables_for(l), self.rule)
        self.last_U = U
        return U, applied_flux(U, self.ss)
