import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from axon_backstepping.expm import mat_exp, matrix_powers
from axon_backstepping.quadrature import (
    integrate,
    offset_index,
    rule_weights,
    simpson_weights,
    trapezoid_weights,
    volterra_weights,
)


def taylor_exp(M, terms=60):
    """Plain Taylor series with scaling and squaring; independent of the Pade path."""
    s = max(0, int(math.ceil(math.log2(max(np.abs(M).sum(axis=1).max(), 1e-300)))) + 4)
    A = M / 2 ** s
    E = np.eye(len(M))
    term = np.eye(len(M))
    for k in range(1, terms):
        term = term @ A / k
        E = E + term
    for _ in range(s):
        E = E @ E
    return E


def test_mat_exp_zero_and_diagonal():
    assert np.array_equal(mat_exp(np.zeros((3, 3))), np.eye(3))
    d = np.array([-3.0, 0.5, 2.0])
    assert np.allclose(mat_exp(np.diag(d)), np.diag(np.exp(d)), rtol=1e-14, atol=0)


def test_mat_exp_rotation():
    th = 0.7
    E = mat_exp(np.array([[0.0, -th], [th, 0.0]]))
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    assert np.abs(E - R).max() < 1e-15


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-3, 3)))
def test_mat_exp_matches_taylor_oracle(M):
    ref = taylor_exp(M)
    assert np.abs(mat_exp(M) - ref).max() <= 1e-12 * max(1.0, np.abs(ref).max())


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-2, 2)), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_mat_exp_semigroup(M, x, y):
    lhs = mat_exp(M * (x + y))
    rhs = mat_exp(M * x) @ mat_exp(M * y)
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(lhs).max()


def test_mat_exp_rejects_bad_input():
    with pytest.raises(ValueError):
        mat_exp(np.ones((2, 3)))
    with pytest.raises(ValueError):
        mat_exp(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_matrix_powers():
    E = np.array([[1.0, 0.1], [0.0, 0.9]])
    P = matrix_powers(E, 7)
    for m in range(7):
        assert np.allclose(P[m], np.linalg.matrix_power(E, m), rtol=1e-14, atol=1e-16)


@pytest.mark.parametrize("m", range(1, 12))
def test_simpson_exact_on_cubics(m):
    x = np.linspace(0.0, 1.0, m + 1)
    f = 1 + 2 * x - 3 * x ** 2 + 4 * x ** 3
    exact = 1 + 1 - 1 + 1
    err = abs(integrate(f, 1.0 / m, "simpson") - exact)
    # one interval falls back to the trapezoid rule
    assert err < (0.6 if m == 1 else 1e-13)


def test_trapezoid_weights():
    assert np.array_equal(trapezoid_weights(3), [0.5, 1, 1, 0.5])
    assert np.array_equal(trapezoid_weights(0), [0.0])


@pytest.mark.parametrize("rule", ["simpson", "trapezoid"])
def test_weights_sum_to_length(rule):
    for m in range(0, 15):
        assert abs(rule_weights(m, rule).sum() - m) < 1e-13


def test_rule_weights_rejects_unknown():
    with pytest.raises(ValueError):
        rule_weights(4, "gauss")


def test_simpson_order():
    errs = []
    for m in (16, 32, 64):
        x = np.linspace(0.0, 1.0, m + 1)
        errs.append(abs(integrate(np.exp(3 * x), 1.0 / m) - (math.exp(3) - 1) / 3))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 3.9)


def test_volterra_weights_rows():
    W = volterra_weights(7, "simpson")
    for i in range(7):
        assert np.array_equal(W[i, i:], simpson_weights(6 - i))
        assert np.all(W[i, :i] == 0)
    with pytest.raises(ValueError):
        W[0, 0] = 1.0


def test_offset_index():
    idx = offset_index(4)
    assert idx[0, 3] == 3 and idx[2, 3] == 1 and idx[3, 0] == 0
