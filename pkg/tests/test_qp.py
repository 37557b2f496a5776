import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from adaptive_safety.acbf import psi_terms
from adaptive_safety.errors import ConfigurationError
from adaptive_safety.qp import QPProblem, QPSolver, kkt_residuals, solve_qp
from adaptive_safety.scenarios.acc import ACCConfig, acc_barrier, acc_system, speed_lyapunov
from adaptive_safety.unified import (ROW_CBF, ROW_CLF, build_unified_qp, split_solution,
                                     unified_qp_from_rows)

from systems import brute_force_qp, dual_projected_gradient, random_feasible_qp


def test_problem_validation():
    with pytest.raises(ConfigurationError):
        QPProblem(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ConfigurationError):
        QPProblem(-np.eye(2), np.zeros(2), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ConfigurationError):
        QPProblem(np.eye(2), np.zeros(3), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ConfigurationError):
        QPProblem(np.eye(2), np.zeros(2), np.zeros((2, 2)), np.zeros(1))


def test_unconstrained_minimum():
    sol = solve_qp(QPProblem(np.eye(3), np.zeros(3), np.zeros((0, 3)), np.zeros(0)))
    assert sol.ok and np.array_equal(sol.z, np.zeros(3))


def test_single_active_constraint():
    sol = solve_qp(QPProblem([[1.0]], [0.0], [[-1.0]], [-2.0]))
    assert sol.ok
    assert sol.z == pytest.approx([2.0])
    assert sol.multipliers == pytest.approx([2.0])
    assert sol.active_set == [0]


def test_matches_brute_force_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(300):
        H, q, A, b = random_feasible_qp(rng)
        p = QPProblem(H, q, A, b)
        sol = solve_qp(p)
        ref = brute_force_qp(H, q, A, b)
        assert sol.ok
        assert sol.objective == pytest.approx(ref[0], abs=1e-8)
        stat, comp, viol, mu_min = kkt_residuals(p, sol)
        assert stat <= 1e-8 and comp <= 1e-9 and viol <= 1e-9 and mu_min >= 0


def test_matches_dual_projected_gradient():
    rng = np.random.default_rng(5)
    for _ in range(100):
        H, q, A, b = random_feasible_qp(rng)
        sol = solve_qp(QPProblem(H, q, A, b))
        if A.shape[0] == 0:
            assert sol.z == pytest.approx(np.linalg.solve(H, -q))
            continue
        ref, _ = dual_projected_gradient(H, q, A, b)
        assert sol.objective == pytest.approx(ref, abs=1e-6)


def test_infeasible_with_certificate():
    # z <= -1 and z >= 1
    p = QPProblem([[1.0]], [0.0], [[1.0], [-1.0], [0.5]], [-1.0, -1.0, 10.0])
    sol = solve_qp(p)
    assert sol.status == "infeasible"
    assert set(sol.certificate) == {0, 1}


def test_zero_row_with_negative_bound_is_infeasible():
    sol = solve_qp(QPProblem(np.eye(2), np.zeros(2), np.zeros((1, 2)), [-1.0]))
    assert sol.status == "infeasible" and sol.certificate == [0]
    sol = solve_qp(QPProblem(np.eye(2), np.ones(2), np.zeros((1, 2)), [0.0]))
    assert sol.ok and sol.z == pytest.approx([-1.0, -1.0])


def test_singular_hessian_linear_program():
    # min z0 + z1 over the box [-1, 2]^2 with zero curvature
    A = np.vstack((np.eye(2), -np.eye(2)))
    b = np.array([2.0, 2.0, 1.0, 1.0])
    sol = solve_qp(QPProblem(np.zeros((2, 2)), np.ones(2), A, b))
    assert sol.ok and sol.z == pytest.approx([-1.0, -1.0])
    # curvature in one coordinate only
    sol = solve_qp(QPProblem(np.diag([1.0, 0.0]), np.array([-3.0, 1.0]), A, b))
    assert sol.ok and sol.z == pytest.approx([2.0, -1.0])


def test_unbounded_is_degenerate():
    sol = solve_qp(QPProblem(np.zeros((1, 1)), [1.0], np.zeros((0, 1)), np.zeros(0)))
    assert sol.status == "degenerate"


def test_iteration_cap():
    rng = np.random.default_rng(2)
    H, q, A, b = random_feasible_qp(rng, d_max=4, k_max=8)
    sol = solve_qp(QPProblem(H, q, A, b), max_iter=0)
    assert sol.status in ("degenerate", "optimal")


def test_warm_start_agrees_with_cold_start():
    rng = np.random.default_rng(8)
    solver = QPSolver()
    H, q, A, b = random_feasible_qp(rng, d_max=3, k_max=6)
    for _ in range(50):
        q = q + 0.05 * rng.normal(size=q.size)
        p = QPProblem(H, q, A, b)
        warm = solver.solve(p)
        cold = solve_qp(p)
        assert warm.ok and warm.objective == pytest.approx(cold.objective, abs=1e-10)


def test_degenerate_ties_are_deterministic():
    # three constraints active at the same vertex
    A = np.array([[-1.0, 0.0], [0.0, -1.0], [-1.0, -1.0]])
    b = np.array([-1.0, -1.0, -2.0])
    a = solve_qp(QPProblem(np.eye(2), np.zeros(2), A, b))
    c = solve_qp(QPProblem(np.eye(2), np.zeros(2), A, b))
    assert a.ok and a.z == pytest.approx([1.0, 1.0])
    assert a.active_set == c.active_set


@settings(max_examples=60, deadline=None)
@given(M=arrays(float, (3, 3), elements=st.floats(-2, 2)),
       q=arrays(float, 3, elements=st.floats(-3, 3)),
       A=arrays(float, (5, 3), elements=st.floats(-2, 2)),
       slack=arrays(float, 5, elements=st.floats(0.01, 2)))
def test_kkt_property(M, q, A, slack):
    H = M @ M.T + 0.05 * np.eye(3)
    b = A @ np.ones(3) + slack
    p = QPProblem(H, q, A, b)
    sol = solve_qp(p)
    assert sol.ok
    stat, comp, viol, mu_min = kkt_residuals(p, sol)
    scale = 1 + np.abs(q).max() + np.abs(H).max()
    assert stat <= 1e-8 * scale
    assert comp <= 1e-9 * scale
    assert viol <= 1e-9
    assert mu_min >= 0


# --- unified aCLF / aCBF QP -------------------------------------------------------

def test_unified_layout():
    p = unified_qp_from_rows(2.0, [1.0], 0.5, [3.0], u_max=10.0, c_V=7.0, c_p=9.0)
    assert p.H.shape == (3, 3) and p.A.shape == (6, 3)
    assert p.q == pytest.approx([0.0, 7.0, 9.0])
    assert p.A[ROW_CLF] == pytest.approx([1.0, -1.0, 0.0]) and p.b[ROW_CLF] == -2.0
    assert p.A[ROW_CBF] == pytest.approx([-3.0, 0.0, 0.0]) and p.b[ROW_CBF] == 0.5


def test_vacuous_barrier_row_matches_bounded_clf_qp():
    # with psi = 0 the barrier row reads 0 >= 0
    full = solve_qp(unified_qp_from_rows(3.0, [1.0], 0.0, [0.0], u_max=2.0))
    clf_only = solve_qp(QPProblem(np.diag([1.0, 0.0, 0.0]), [0.0, 1e2, 1e4],
                                  [[1.0, -1.0, 0.0], [1.0, 0.0, -1.0], [-1.0, 0.0, -1.0],
                                   [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]],
                                  [-3.0, 2.0, 2.0, 0.0, 0.0]))
    assert full.ok and clf_only.ok
    assert full.z == pytest.approx(clf_only.z, abs=1e-10)
    u, dV, dp = split_solution(full.z, 1)
    # relaxing the decrease condition (c_V = 1e2) is cheaper than the input bound (c_p = 1e4)
    assert u == pytest.approx([-2.0]) and dV == pytest.approx(1.0) and dp == pytest.approx(0.0)


def test_large_cV_removes_relaxation():
    sol = solve_qp(unified_qp_from_rows(3.0, [1.0], 10.0, [1.0], u_max=100.0, c_V=1e8))
    assert sol.ok and split_solution(sol.z, 1)[1] == pytest.approx(0.0, abs=1e-9)


def test_relaxation_monotone_in_cV():
    rng = np.random.default_rng(4)
    for _ in range(20):
        phi0, psi0 = rng.uniform(0, 5), rng.uniform(-1, 5)
        phi1, psi1 = rng.normal(size=2), rng.normal(size=2)
        prev = np.inf
        for cV in (0.01, 0.1, 1.0, 10.0, 100.0, 1e3):
            sol = solve_qp(unified_qp_from_rows(phi0, phi1, psi0, psi1, 3.0, c_V=cV))
            assert sol.ok
            dV = split_solution(sol.z, 2)[1]
            assert dV <= prev + 1e-9
            prev = dV


def test_barrier_row_is_hard():
    rng = np.random.default_rng(6)
    for _ in range(200):
        m = int(rng.integers(1, 3))
        psi1 = rng.normal(size=m)
        psi0 = rng.uniform(-5, 5)
        sol = solve_qp(unified_qp_from_rows(rng.uniform(-5, 5), rng.normal(size=m), psi0, psi1,
                                            u_max=rng.uniform(0.1, 2)))
        assert sol.ok
        u = split_solution(sol.z, m)[0]
        assert psi0 + psi1 @ u >= -1e-9


def test_acc_step_against_enumeration():
    cfg = ACCConfig(x0=(22.0, 60.0), v_d=13.0)
    model = acc_system(cfg).model
    L, B = speed_lyapunov(cfg), acc_barrier(cfg)
    th = np.array(cfg.f_hat0)
    for x in ([22.0, 45.0], [22.0, 60.0], [15.0, 30.0], [28.0, 55.0]):
        x = np.array(x)
        p = build_unified_qp(model, L, B, x, th, th, cfg.input_limit, J_weights=cfg.weights)
        sol = solve_qp(p)
        ref = brute_force_qp(p.H, p.q, p.A, p.b)
        assert sol.ok
        # the enumeration is feasible only to 1e-9 and the slack weights amplify that by |q|
        assert sol.objective == pytest.approx(ref[0], rel=1e-9, abs=1e-9 * np.abs(p.q).max())
        assert sol.z == pytest.approx(ref[1], rel=1e-9, abs=1e-8)
        psi0, psi1 = psi_terms(model, B, x, th)
        assert psi0 + psi1 @ sol.z[:1] >= -1e-9


def test_callable_slack_weights():
    cfg = ACCConfig()
    model = acc_system(cfg).model
    p = build_unified_qp(model, speed_lyapunov(cfg), acc_barrier(cfg), np.array([20.0, 60.0]),
                         np.zeros(3), np.zeros(3), 1000.0, c_V=lambda x: x[0], c_p=lambda x: 2 * x[0])
    assert p.q[1:] == pytest.approx([20.0, 40.0])
