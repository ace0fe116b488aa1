import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from axon_backstepping.config import BioParams
from axon_backstepping.steady import build_steady_state, c_eq, c_eq_prime, c_eq_second, steady_residual


def test_table_values(bio):
    ss = build_steady_state(bio, 12e-6)
    # roots of D lam^2 - a lam - g = 0 computed independently
    roots = np.sort(np.roots([bio.D, -bio.a, -bio.g]))
    assert np.allclose([ss.lambda_minus, ss.lambda_plus], roots, rtol=1e-12)
    assert ss.K_plus + ss.K_minus == 1.0
    assert abs(c_eq(ss, 12e-6) - bio.c_inf) < 1e-15 * bio.c_inf
    assert abs(bio.D * c_eq_prime(ss, 12e-6) - (bio.a - bio.g * bio.l_c) * bio.c_inf) < 1e-12 * abs(
        (bio.a - bio.g * bio.l_c) * bio.c_inf)
    assert ss.q_s_star == pytest.approx(-c_eq_prime(ss, 0.0), rel=1e-14)
    assert steady_residual(ss, bio, 101) < 1e-10


def test_derivatives_against_finite_differences(bio):
    ss = build_steady_state(bio, 12e-6)
    x, h = 5e-6, 2e-6
    fd1 = (c_eq(ss, x + h) - c_eq(ss, x - h)) / (2 * h)
    fd2 = (c_eq_prime(ss, x + h) - c_eq_prime(ss, x - h)) / (2 * h)
    assert fd1 == pytest.approx(c_eq_prime(ss, x), rel=1e-7)
    assert fd2 == pytest.approx(c_eq_second(ss, x), rel=1e-6)


def test_no_advection_symmetry():
    bio = BioParams(a=0.0)
    ss = build_steady_state(bio, 12e-6)
    assert ss.lambda_plus == -ss.lambda_minus


def test_bad_inputs(bio):
    with pytest.raises(ValueError):
        build_steady_state(bio, 0.0)
    with pytest.raises(ValueError):
        steady_residual(build_steady_state(bio, 1e-5), bio, 1)


log_around = lambda v: st.floats(np.log10(v) - 1.5, np.log10(v) + 1.5).map(lambda e: 10.0 ** e)


@settings(max_examples=60, deadline=None)
@given(log_around(1e-5), log_around(1e-8), log_around(5e-7), log_around(4e-6), log_around(12e-6))
def test_residual_property(D, a, g, l_c, l_s):
    bio = BioParams(D=D, a=a, g=g, l_c=l_c)
    ss = build_steady_state(bio, l_s)
    assert steady_residual(ss, bio, 101) < 1e-10
    assert abs(ss.K_plus + ss.K_minus - 1) < 1e-15
