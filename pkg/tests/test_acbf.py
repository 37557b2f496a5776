import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptive_safety.acbf import (AdaptiveBarrier, PlainBarrier, acbf_condition_margin,
                                  acbf_qp_filter, composite_h, filter_from_psi,
                                  gain_satisfies_bound, gamma_lower_bound, lambda_cbf,
                                  linear_alpha, plain_cbf_filter, psi_terms, tau_cbf)
from adaptive_safety.aclf import AdaptiveLyapunov, quadratic_rate, tau_clf
from adaptive_safety.dynamics import AffineModel
from adaptive_safety.errors import ConfigurationError, InfeasibleError, UnsafeInitialConditionError
from adaptive_safety.qp import QPProblem, solve_qp
from adaptive_safety.scenarios.acc import ACCConfig, acc_barrier, acc_system
from adaptive_safety.scenarios.counterexample import (CounterexampleConfig, counterexample_barrier,
                                                      counterexample_system, run_counterexample)


def scalar_barrier(gamma=26.0, c=5.0):
    return counterexample_barrier(CounterexampleConfig(gamma=gamma, c=c))


def test_barrier_validation():
    with pytest.raises(ConfigurationError):
        AdaptiveBarrier(None, None, None, np.array([[0.0]]))
    with pytest.raises(ConfigurationError):
        AdaptiveBarrier(None, None, None, np.eye(1), c=-1.0)
    with pytest.raises(ConfigurationError):
        linear_alpha(-2.0)


def test_lambda_cbf_examples():
    B = scalar_barrier()
    assert lambda_cbf(B, np.array([0.3]), np.array([0.7])) == pytest.approx([0.7])
    B2 = AdaptiveBarrier(lambda x, th: 1.0, lambda x, th: np.zeros(1),
                         lambda x, th: np.array([3.0]), np.array([[2.0]]))
    assert lambda_cbf(B2, np.zeros(1), np.array([1.0])) == pytest.approx([-5.0])


def test_acc_barrier_is_parameter_free():
    B = acc_barrier(ACCConfig())
    th = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(lambda_cbf(B, np.array([20.0, 40.0]), th), th)


def test_margin_examples():
    sys = counterexample_system()
    B = scalar_barrier()
    assert acbf_condition_margin(sys.model, B, np.array([0.5]), np.array([1.0]), [-1.0]) == 0.0

    cfg = ACCConfig()
    model = acc_system(cfg).model
    Ba = acc_barrier(cfg)
    x = np.array([10.0, 50.0])  # headway 32, on the plateau
    for u in (-5000.0, 0.0, 3000.0):
        assert acbf_condition_margin(model, Ba, x, np.ones(3), [u]) == 0.0


def test_gamma_lower_bound_examples():
    B = scalar_barrier()
    assert gamma_lower_bound(B, np.array([0.2]), np.array([0.0])) == pytest.approx(25.0 / 1.92)
    assert gamma_lower_bound(B, np.array([0.2]), np.array([0.0])) == pytest.approx(13.0208333, abs=1e-7)
    assert gamma_lower_bound(scalar_barrier(c=0.0), np.array([0.2]), np.zeros(1)) == 0.0
    with pytest.raises(UnsafeInitialConditionError):
        gamma_lower_bound(B, np.array([1.0]), np.zeros(1))
    assert gain_satisfies_bound(scalar_barrier(14.0), np.array([0.2]), np.zeros(1))
    assert not gain_satisfies_bound(scalar_barrier(13.0), np.array([0.2]), np.zeros(1))


def test_acc_gain_bound_uses_plateau_value():
    cfg = ACCConfig(x0=(18.0, 150.0), c=46.0, alpha_plateau=10.0)
    assert cfg.gain_bound == pytest.approx(46.0 ** 2 / 200.0)


def test_composite_h_examples():
    B = scalar_barrier()
    x = np.array([0.2])
    assert composite_h(B, x, np.array([0.4]), np.array([0.4])) == pytest.approx(0.96)
    assert composite_h(B, x, np.array([0.0]), np.array([1.0])) == pytest.approx(0.96 - 1.0 / 52.0)
    assert composite_h(B, x, np.array([0.0]), np.array([1.0])) == pytest.approx(0.940769, abs=1e-6)
    gamma = 25.0 / (2 * 0.96)
    Bb = scalar_barrier(gamma=gamma)
    assert composite_h(Bb, x, np.array([0.0]), np.array([5.0])) == pytest.approx(0.0, abs=1e-12)


def test_tau_cbf_examples():
    sys = counterexample_system()
    B = scalar_barrier()
    for x in (-0.7, 0.0, 0.3):
        assert tau_cbf(sys.model, B, np.array([x]), np.zeros(1)) == pytest.approx([2.0 * x])
    cfg = ACCConfig()
    assert np.all(tau_cbf(acc_system(cfg).model, acc_barrier(cfg), np.array([10.0, 50.0]),
                          np.ones(3)) == 0.0)


def test_tau_sign_symmetry():
    # the same gradient closure used as dV/dx and dh/dx gives opposite update directions
    grad = lambda x, th: np.array([2.0 * x[0] - x[1], np.sin(x[0])])
    model = AffineModel(2, 1, 2, lambda x: np.zeros(2),
                        lambda x: np.array([[x[0], 1.0], [x[1] ** 2, -x[0]]]),
                        lambda x: np.array([[1.0], [0.0]]))
    L = AdaptiveLyapunov(None, grad, None, quadratic_rate(1.0), np.eye(2))
    B = AdaptiveBarrier(None, grad, None, np.eye(2))
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.normal(size=2)
        assert tau_cbf(model, B, x, np.zeros(2)) == pytest.approx(-tau_clf(model, L, x, np.zeros(2)))


def test_filter_examples():
    assert np.array_equal(filter_from_psi(1.0, np.array([2.0]), np.array([0.5])), [0.5])
    u = filter_from_psi(-2.0, np.array([1.0]), np.array([0.0]))
    assert u == pytest.approx([2.0])
    with pytest.raises(InfeasibleError):
        filter_from_psi(-1.0, np.zeros(2), np.zeros(2))


def test_filter_with_input_bounds():
    sys = counterexample_system()
    B = scalar_barrier()
    x, th = np.array([0.9]), np.array([0.0])
    # psi0 = -1.8 * 0 = 0, psi1 = -1.8: u <= 0 keeps h_dot >= 0
    u = acbf_qp_filter(sys.model, B, x, th, [2.0], input_bounds=(-1.0, 1.0))
    assert u == pytest.approx([0.0], abs=1e-12)
    u = acbf_qp_filter(sys.model, B, np.array([0.9]), np.array([1.0]), [0.0], input_bounds=(-3.0, 3.0))
    assert u == pytest.approx([-1.0])
    with pytest.raises(InfeasibleError):
        acbf_qp_filter(sys.model, B, np.array([0.9]), np.array([5.0]), [0.0], input_bounds=(-1.0, 1.0))


@settings(max_examples=200, deadline=None)
@given(psi0=st.floats(-10, 10), psi1=st.lists(st.floats(-5, 5), min_size=1, max_size=4),
       shift=st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_filter_kkt(psi0, psi1, shift):
    psi1 = np.array(psi1)
    u_des = np.array(shift[:psi1.size])
    if np.linalg.norm(psi1) < 1e-3:
        return
    u = filter_from_psi(psi0, psi1, u_des)
    scale = 1 + abs(psi0) + np.abs(psi1) @ np.abs(u_des)
    if psi0 + psi1 @ u_des >= 0:
        assert np.array_equal(u, u_des)
    else:
        assert abs(psi0 + psi1 @ u) <= 1e-10 * scale
    m = psi1.size
    sol = solve_qp(QPProblem(np.eye(m), -u_des, -psi1[None, :], np.array([psi0])))
    assert u == pytest.approx(sol.z, abs=1e-8)


def test_plain_cbf_filter_examples():
    model = AffineModel(1, 1, 1, lambda x: np.array([-0.5]), lambda x: np.zeros((1, 1)),
                        lambda x: np.ones((1, 1)))
    for h, expected in ((1.0, 0.0), (0.2, 0.3)):
        PB = PlainBarrier(lambda x, h=h: h, lambda x: np.ones(1), linear_alpha(1.0))
        assert plain_cbf_filter(model, np.zeros(1), PB, np.zeros(1), [0.0]) == pytest.approx([expected])


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-0.99, 0.99), th_hat=st.floats(-5, 5), th_star=st.floats(-5, 5),
       gamma=st.floats(0.1, 50))
def test_sandwich(x, th_hat, th_star, gamma):
    B = scalar_barrier(gamma=gamma)
    xs = np.array([x])
    assert B.h(xs) >= composite_h(B, xs, np.array([th_hat]), np.array([th_star]))


def test_composite_barrier_nondecreasing_in_strict_mode():
    cfg = CounterexampleConfig(mode="strict-acbf", gamma=14.0, theta_tilde0=5.0, horizon=5.0)
    traj, report = run_counterexample(cfg)
    h = traj.diagnostics["composite_h"]
    assert np.diff(h).min() >= -1e-6 * cfg.dt
    assert report.min_h_a >= 0.0
    assert np.min(traj.diagnostics["acbf_margin"]) >= -1e-9
