"""Composite quadrature weights on uniform grids.

Weights are returned in units of the grid spacing, so an integral over
``m`` intervals of width ``h`` is ``h * weights @ f``.
"""
import numpy as np

RULES = ("trapezoid", "simpson")


def trapezoid_weights(m):
    w = np.ones(m + 1)
    if m == 0:
        return np.zeros(1)
    w[0] = w[-1] = 0.5
    return w


def simpson_weights(m):
    """Composite Simpson weights for ``m`` intervals.

    Odd ``m >= 3`` closes with a Simpson 3/8 panel on the last three
    intervals; ``m == 1`` falls back to the trapezoid rule.
    """
    if m < 2:
        return trapezoid_weights(m)
    w = np.zeros(m + 1)
    n_simpson = m if m % 2 == 0 else m - 3
    if n_simpson > 0:
        w[0:n_simpson + 1:2] += 2.0 / 3.0
        w[1:n_simpson:2] += 4.0 / 3.0
        w[0] -= 1.0 / 3.0
        w[n_simpson] -= 1.0 / 3.0
    if m % 2 == 1:
        w[m - 3:m + 1] += np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
    return w


def rule_weights(m, rule="simpson"):
    if rule == "simpson":
        return simpson_weights(m)
    if rule == "trapezoid":
        return trapezoid_weights(m)
    raise ValueError(f"unknown quadrature rule {rule!r}; expected one of {RULES}")


def integrate(f, h, rule="simpson"):
    f = np.asarray(f, dtype=float)
    return h * rule_weights(len(f) - 1, rule) @ f


_VOLTERRA_CACHE = {}


def volterra_weights(n, rule="simpson"):
    """Upper-triangular weight matrix for integrals from node ``i`` to the end.

    Row ``i`` holds the weights of the ``n - 1 - i`` interval rule on nodes
    ``i..n-1``. The result is cached and must not be mutated.
    """
    key = (n, rule)
    W = _VOLTERRA_CACHE.get(key)
    if W is None:
        W = np.zeros((n, n))
        for i in range(n):
            W[i, i:] = rule_weights(n - 1 - i, rule)
        W.setflags(write=False)
        _VOLTERRA_CACHE[key] = W
    return W


_OFFSET_CACHE = {}


def offset_index(n):
    """Matrix of ``j - i`` clipped at zero; used to build Toeplitz kernels."""
    idx = _OFFSET_CACHE.get(n)
    if idx is None:
        i, j = np.indices((n, n))
        idx = np.clip(j - i, 0, None)
        idx.setflags(write=False)
        _OFFSET_CACHE[n] = idx
    return idx
