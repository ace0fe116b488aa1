"""Matrix exponential by scaling and squaring with a diagonal Padé approximant."""
import math

import numpy as np

PADE_ORDER = 6
# ||M|| is scaled below this before the approximant; [6/6] Padé error is then
# under 1e-16 in exact arithmetic.
SCALE_THRESHOLD = 0.5


def _pade_coefficients(q):
    return [
        math.factorial(2 * q - k) * math.factorial(q)
        / (math.factorial(2 * q) * math.factorial(k) * math.factorial(q - k))
        for k in range(q + 1)
    ]


_COEFFS = _pade_coefficients(PADE_ORDER)


def mat_exp(M):
    """Return ``exp(M)`` for a square matrix.

    The input is divided by ``2**s`` until its infinity norm is at most 0.5,
    the [6/6] Padé approximant is evaluated, and the result is squared ``s``
    times.

    Raises
    ------
    ValueError
        If ``M`` is not square or has non-finite entries.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"mat_exp expects a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("mat_exp input has non-finite entries")
    n = M.shape[0]
    norm = np.linalg.norm(M, np.inf)
    s = 0
    if norm > SCALE_THRESHOLD:
        s = max(0, int(math.ceil(math.log2(norm / SCALE_THRESHOLD))))
    A = M / (2.0 ** s)

    ident = np.eye(n)
    power = ident
    num = _COEFFS[0] * ident
    den = _COEFFS[0] * ident
    for k in range(1, PADE_ORDER + 1):
        power = power @ A
        term = _COEFFS[k] * power
        num = num + term
        den = den + term if k % 2 == 0 else den - term
    E = np.linalg.solve(den, num)
    for _ in range(s):
        E = E @ E
    return E


def matrix_powers(E, count):
    """Stack ``[E**0, E**1, ..., E**(count-1)]`` using batched doubling."""
    n = E.shape[0]
    out = np.empty((count, n, n))
    out[0] = np.eye(n)
    filled = 1
    block = E
    while filled < count:
        take = min(filled, count - filled)
        out[filled:filled + take] = out[:take] @ block
        filled += take
        block = block @ block
    return out
