"""Backstepping gain kernels in closed form.

The forward kernel ``phi`` and its derivative are carried together as the
row vector ``Y(s) = [phi(s)^T, phi'(s)^T]``, which solves ``Y' = Y N1`` and
is therefore ``Y(s) = Y0 exp(N1 s)``. The plant kernel is then
``k(x, y) = -phi(x - y)^T B / D`` and the feedback weight is
``p(x) = phi'(-x)^T - gamma phi(-x)^T``. The inverse transform has the same
structure with ``N2`` and ``Ytilde0 = [C^T, K^T]``.

Two companion-matrix conventions are available. ``"derived"`` (default) is
the one that maps the linearized plant onto the target system; it has
``(a I - B C^T)/D`` in the lower-right block of ``N1`` and
``D phi~'' = a phi~' + phi~ (g I + A + B K^T)`` for the inverse. ``"printed"``
keeps the signs as typeset in the source derivation; it fails the target
system and round-trip checks and exists only so that the discrepancy stays
testable.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .config import BioParams
from .expm import mat_exp, matrix_powers
from .linsys import LinearSystem
from .quadrature import offset_index, volterra_weights

CONVENTIONS = ("derived", "printed")


@dataclass(frozen=True)
class AugmentedSystem:
    N1: np.ndarray
    Y0: np.ndarray
    N2: np.ndarray
    Ytilde0: np.ndarray
    D: float
    a: float
    g: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    K: np.ndarray
    convention: str = "derived"


def build_augmented(bio: BioParams, ls: LinearSystem, convention="derived") -> AugmentedSystem:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    D, a, g = bio.D, bio.a, bio.g
    I = np.eye(2)
    BC = np.outer(ls.B, ls.C)
    BK = np.outer(ls.B, ls.K)
    CtB = float(ls.C @ ls.B)
    Z = np.zeros((2, 2))

    if convention == "derived":
        lower_right = (a * I - BC) / D
        inv_top = (g * I + ls.A + BK) / D
        inv_lower = a * I / D
    else:
        lower_right = (BC + a * I) / D
        inv_top = -(g * I + ls.A + BK).T / D
        inv_lower = -a * I / D
    N1 = np.block([[Z, (g * I + ls.A + (a / D) * BC) / D], [I, lower_right]])
    N2 = np.block([[Z, inv_top], [I, inv_lower]])
    Y0 = np.concatenate([ls.C, ls.K - CtB * ls.C / D])
    Ytilde0 = np.concatenate([ls.C, ls.K])
    return AugmentedSystem(N1, Y0, N2, Ytilde0, D, a, g, ls.A, ls.B, ls.C, ls.K, convention)


def phi_and_prime(aug: AugmentedSystem, x):
    Y = aug.Y0 @ mat_exp(aug.N1 * x)
    return Y[:2], Y[2:]


def phi_tilde_and_prime(aug: AugmentedSystem, x):
    Y = aug.Ytilde0 @ mat_exp(aug.N2 * x)
    return Y[:2], Y[2:]


def k_of(aug: AugmentedSystem, x, y):
    """Forward kernel ``k(x, y)``; zero outside the Volterra domain ``x <= y``."""
    if x > y:
        return 0.0
    phi, _ = phi_and_prime(aug, x - y)
    return float(-(phi @ aug.B) / aug.D)


def q_of(aug: AugmentedSystem, x, y):
    """Inverse kernel ``q(x, y)``; zero outside ``x <= y``."""
    if x > y:
        return 0.0
    phi_t, _ = phi_tilde_and_prime(aug, x - y)
    return float(-(phi_t @ aug.B) / aug.D)


def p_of(aug: AugmentedSystem, gamma, x):
    if x < 0:
        raise ValueError(f"p(x) is defined for x >= 0, got {x!r}")
    phi, dphi = phi_and_prime(aug, -x)
    return dphi - gamma * phi


def _propagate(Y0, N, step, n):
    E = mat_exp(N * step)
    powers = matrix_powers(E, n)
    return np.einsum("j,mjk->mk", Y0, powers), E


@dataclass(frozen=True, eq=False)
class KernelTables:
    """Kernel values on a uniform grid of ``n`` nodes over ``[0, l]``.

    Row ``m`` of ``Y`` is ``Y(-m l h)`` with ``h = 1/(n-1)``, so it serves both
    as ``phi`` at the separation ``x - y = -m l h`` and, through ``p``, as the
    feedback weight at node ``x_m = m l h``.
    """

    aug: AugmentedSystem
    l: float
    n: int
    gamma: float
    Y: np.ndarray
    step_propagator: np.ndarray

    @property
    def h(self):
        return 1.0 / (self.n - 1)

    @property
    def nodes(self):
        return np.linspace(0.0, self.l, self.n)

    @property
    def phi(self):
        return self.Y[:, :2]

    @property
    def phi_prime(self):
        return self.Y[:, 2:]

    @cached_property
    def p(self):
        return self.phi_prime - self.gamma * self.phi

    @cached_property
    def k_sep(self):
        """``k(x, x + m l h)`` for m = 0..n-1."""
        return -(self.phi @ self.aug.B) / self.aug.D

    @cached_property
    def kx_sep(self):
        """``k_x(x, x + m l h)``."""
        return -(self.phi_prime @ self.aug.B) / self.aug.D

    @cached_property
    def Ytilde(self):
        return _propagate(self.aug.Ytilde0, self.aug.N2, -self.l * self.h, self.n)[0]

    @cached_property
    def q_sep(self):
        return -(self.Ytilde[:, :2] @ self.aug.B) / self.aug.D

    @cached_property
    def behind(self):
        """Kernels continued one node past the diagonal, at separation ``x - y = l h``."""
        Y = self.aug.Y0 @ mat_exp(self.aug.N1 * (self.l * self.h))
        Yt = self.aug.Ytilde0 @ mat_exp(self.aug.N2 * (self.l * self.h))
        B, D = self.aug.B, self.aug.D
        return {"k": -(Y[:2] @ B) / D, "kx": -(Y[2:] @ B) / D, "q": -(Yt[:2] @ B) / D}

    def operator(self, which, rule="simpson"):
        """Matrix ``V`` with ``(V f)_i ~ int_{x_i}^{l} kern(x_i, y) f(y) dy``.

        ``which`` selects the kernel: ``"k"``, ``"kx"`` (its x-derivative) or
        ``"q"`` (the inverse kernel). Under ``"simpson"`` the single-interval
        row uses the three-point end rule ``(-1, 8, 5)/12``, which reaches one
        node behind the diagonal through the kernel's analytic continuation;
        the matrix is then upper triangular except for that one entry.
        """
        cache = self.__dict__.setdefault("_operators", {})
        key = (which, rule)
        if key not in cache:
            values = {"k": self.k_sep, "kx": self.kx_sep, "q": self.q_sep}[which]
            W = volterra_weights(self.n, rule)
            V = (self.l * self.h) * W * values[offset_index(self.n)]
            if rule == "simpson" and self.n >= 3:
                i = self.n - 2
                V[i, i - 1:] = (self.l * self.h) * np.array(
                    [-self.behind[which], 8 * values[0], 5 * values[1]]
                ) / 12
            V.setflags(write=False)
            cache[key] = V
        return cache[key]


def build_tables(aug: AugmentedSystem, l, n, gamma) -> KernelTables:
    if n < 2:
        raise ValueError(f"need at least two nodes, got {n}")
    if not l > 0:
        raise ValueError(f"l = {l!r} violates l > 0")
    h = 1.0 / (n - 1)
    Y, E = _propagate(aug.Y0, aug.N1, -l * h, n)
    return KernelTables(aug, float(l), int(n), float(gamma), Y, E)


def inverse_kernels(aug: AugmentedSystem, l, n):
    """Inverse kernel tables ``(phi_tilde, phi_tilde', q)`` at separations ``-m l h``."""
    h = 1.0 / (n - 1)
    Yt, _ = _propagate(aug.Ytilde0, aug.N2, -l * h, n)
    q = -(Yt[:, :2] @ aug.B) / aug.D
    return Yt[:, :2], Yt[:, 2:], q


@dataclass(frozen=True)
class KernelResiduals:
    pde: float
    diagonal: float
    boundary_trace: float
    phi_ode: float
    initial_values: float
    inverse_ode: float

    def as_dict(self):
        return dict(self.__dict__)

    def worst(self):
        return max(self.__dict__.values())


def _fd_derivative(fn, x, delta):
    """Fourth-order centered difference of a vector-valued function."""
    return (fn(x - 2 * delta) - 8 * fn(x - delta) + 8 * fn(x + delta) - fn(x + 2 * delta)) / (12 * delta)


def _second_derivative_from_slot(N, Y0, s):
    """Derivative of the ``phi'`` slot at ``s`` by finite differences of direct exponentials."""
    # step from the spectral radius: the infinity norm can exceed the actual
    # variation rate by orders of magnitude when K is large
    delta = 1e-3 / np.abs(np.linalg.eigvals(N)).max()
    return _fd_derivative(lambda z: (Y0 @ mat_exp(N * z))[2:], s, delta)


def kernel_residuals(aug: AugmentedSystem, ls: LinearSystem, l, n) -> KernelResiduals:
    """Normalized residuals of every kernel condition on ``n`` samples.

    * ``pde``: ``k_xx - k_yy - (a/D)(k_x + k_y)`` with analytic derivatives.
    * ``diagonal``: ``k_x(x, x) + k_y(x, x)``.
    * ``boundary_trace``: ``k(x, l) + phi(x - l)^T B / D``.
    * ``phi_ode``: the second-order ODE for ``phi`` with ``k(x, l)`` and
      ``k_y(x, l)`` substituted, using a finite-difference ``phi''``.
    * ``initial_values``: ``phi(0) = C`` and ``phi'(0) = k(l, l) C + K``.
    * ``inverse_ode``: the ODE for the inverse kernel ``phi_tilde``.

    Each is divided by the magnitude of the largest term it contains.
    """
    if n < 5:
        raise ValueError(f"n = {n} violates n >= 5")
    D, a, g = aug.D, aug.a, aug.g
    I = np.eye(2)
    B, C, K, A = ls.B, ls.C, ls.K, ls.A
    xs = np.linspace(0.0, l, n)
    seps = xs - l  # x - y for y = l, and generally the kernel argument range [-l, 0]

    def tiny(scale):
        return scale if scale > 0 else 1.0

    # pde and diagonal, analytic derivatives of k = -phi(x-y)^T B / D
    res_pde = res_diag = 0.0
    scale_pde = scale_diag = 0.0
    for s in seps:
        Y = aug.Y0 @ mat_exp(aug.N1 * s)
        dY = Y @ aug.N1
        k_x = -(Y[2:] @ B) / D
        k_y = (Y[2:] @ B) / D
        k_xx = -(dY[2:] @ B) / D
        k_yy = -(dY[2:] @ B) / D
        res_pde = max(res_pde, abs(k_xx - k_yy - (a / D) * (k_x + k_y)))
        scale_pde = max(scale_pde, abs(k_xx) + abs(k_yy) + (a / D) * (abs(k_x) + abs(k_y)))
        res_diag = max(res_diag, abs(k_x + k_y))
        scale_diag = max(scale_diag, abs(k_x) + abs(k_y))

    res_trace = scale_trace = 0.0
    for x in xs:
        phi, _ = phi_and_prime(aug, x - l)
        k = k_of(aug, x, l)
        res_trace = max(res_trace, abs(k + phi @ B / D))
        scale_trace = max(scale_trace, abs(k), abs(phi @ B / D))

    res_ode = scale_ode = 0.0
    for x in xs:
        s = x - l
        phi, dphi = phi_and_prime(aug, s)
        ddphi = _second_derivative_from_slot(aug.N1, aug.Y0, s)
        k = k_of(aug, x, l)
        k_y = (dphi @ B) / D
        terms = [D * ddphi, -a * dphi, -phi @ (g * I + A), D * k_y * C, a * k * C]
        r = np.abs(sum(terms)).max()
        res_ode = max(res_ode, r)
        scale_ode = max(scale_ode, max(np.abs(t).max() for t in terms))

    phi0, dphi0 = phi_and_prime(aug, 0.0)
    k_ll = k_of(aug, l, l)
    target = k_ll * C + K
    res_init = max(
        np.abs(phi0 - C).max() / np.abs(C).max(),
        np.abs(dphi0 - target).max() / np.abs(target).max(),
    )

    res_inv = scale_inv = 0.0
    M = g * I + A + np.outer(B, K)
    for s in seps:
        pt, dpt = phi_tilde_and_prime(aug, s)
        ddpt = _second_derivative_from_slot(aug.N2, aug.Ytilde0, s)
        terms = [D * ddpt, -a * dpt, -pt @ M]
        res_inv = max(res_inv, np.abs(sum(terms)).max())
        scale_inv = max(scale_inv, max(np.abs(t).max() for t in terms))

    return KernelResiduals(
        pde=res_pde / tiny(scale_pde),
        diagonal=res_diag / tiny(scale_diag),
        boundary_trace=res_trace / tiny(scale_trace),
        phi_ode=res_ode / tiny(scale_ode),
        initial_values=float(res_init),
        inverse_ode=res_inv / tiny(scale_inv),
    )
