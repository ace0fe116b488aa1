import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad_vec

from axon_backstepping.config import BioParams, ControlParams
from axon_backstepping.expm import mat_exp
from axon_backstepping.linsys import (
    NotHurwitz,
    build_linear_system,
    check_linearization,
    derived_scalars,
    fallback_gains,
    hurwitz_or_fallback,
    is_hurwitz,
    lyapunov_pair,
    lyapunov_weights,
    solve_lyapunov,
)


def test_scalars(bio):
    a_tilde, beta = derived_scalars(bio)
    assert beta == pytest.approx(2.5, rel=1e-15)
    # recomputed by hand from the parameter table
    assert a_tilde == pytest.approx((1e-8 - 2e-12 - (1.783e-5 * 0.0119 + 0.053 * 4e-6)) / 4e-6, rel=1e-14)
    jac = check_linearization(bio)
    assert jac == pytest.approx([a_tilde, -beta], rel=1e-6)


def test_matrices(bio):
    ls = build_linear_system(bio, ControlParams(k1=1.0, k2=1.0))
    assert ls.B @ ls.C == pytest.approx(-ls.beta)
    assert ls.A[1, 0] == bio.r_g and ls.A[0, 1] == ls.A[1, 1] == 0


def test_table_gains_are_not_hurwitz(bio):
    # k1 must exceed a_tilde / beta, which is about -0.041
    assert not is_hurwitz(bio, ControlParams())
    with pytest.raises(NotHurwitz, match="k1 > a_tilde/beta"):
        build_linear_system(bio, ControlParams())


def test_fallback(bio):
    ctrl, used = hurwitz_or_fallback(bio, ControlParams())
    assert used and ctrl.k1 == 1.0 and ctrl.k2 > 0
    ls = build_linear_system(bio, ctrl)
    eig = ls.eigenvalues
    assert np.all(eig.real < 0)
    assert np.allclose(eig, eig[0], rtol=1e-6)  # double pole
    same, used = hurwitz_or_fallback(bio, ctrl)
    assert same is ctrl and not used
    with pytest.raises(ValueError):
        fallback_gains(bio, k1=-1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.04, 10.0), st.floats(1e-3, 1e8))
def test_gain_condition_property(k1, k2):
    a_tilde, beta = derived_scalars(BioParams())
    ok = is_hurwitz(BioParams(), ControlParams(k1=k1, k2=k2))
    assert ok == (k1 > a_tilde / beta)


def lyapunov_oracle(M, Q):
    """P = int_0^inf exp(M^T t) Q exp(M t) dt by adaptive quadrature."""
    rate = -np.linalg.eigvals(M).real.max()
    f = lambda t: mat_exp(M.T * t) @ Q @ mat_exp(M * t)
    return quad_vec(f, 0.0, 60.0 / rate, epsabs=0, epsrel=1e-12)[0]


def scaled_gap(P, R):
    """Entrywise difference on the scale ``sqrt(P_ii P_jj)``; P spans ten decades here."""
    d = np.sqrt(np.abs(np.diag(P)))
    return (np.abs(P - R) / np.outer(d, d)).max()


def test_lyapunov_against_quadrature(plant):
    M = plant.ls.closed_loop
    P = plant.lp.P
    assert scaled_gap(P, lyapunov_oracle(M, np.eye(2))) < 1e-8
    assert plant.lp.residual(M) < 1e-10
    assert np.allclose(P, P.T)


def test_lyapunov_custom_q():
    M = np.array([[-1.0, 2.0], [0.0, -3.0]])
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    lp = lyapunov_pair(M, Q)
    assert scaled_gap(lp.P, lyapunov_oracle(M, Q)) < 1e-9
    assert lp.lambda_min_Q == pytest.approx(np.linalg.eigvalsh(Q).min())


def test_lyapunov_rejects(bio):
    ls = build_linear_system(bio, ControlParams(), check_hurwitz=False)
    with pytest.raises(NotHurwitz):
        solve_lyapunov(ls)
    ok = build_linear_system(bio, ControlParams(k1=1.0, k2=1.0))
    with pytest.raises(ValueError, match="symmetric"):
        solve_lyapunov(ok, np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="positive definite"):
        solve_lyapunov(ok, -np.eye(2))


def test_weights(plant, bio):
    w = plant.weights
    assert w.d1 == 1.0  # 2 a^2 / D^2 is tiny at the table values
    assert w.d2 > 0 and w.alpha > 0 and w.v_bar > 0
    assert w.v_bar == pytest.approx(min(bio.g / (4 * 1e4), bio.D / (8 * w.l_bar)))
    strong = lyapunov_weights(BioParams(a=1e-4), plant.ctrl, plant.lp, w.l_bar)
    assert strong.d1 == pytest.approx(2 * 1e-8 / 1e-10)
