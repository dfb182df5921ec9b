"""MPC construction and QP solver tests."""

from itertools import combinations

import numpy as np
import pytest

from lcc.geometry import Polytope
from lcc.planner import (
    InfeasibleError,
    MpcConfig,
    PlannerError,
    QpProblem,
    TransitionTask,
    build_mpc,
    mpc_step,
    solve_qp,
)


def small_cfg(N=8):
    return MpcConfig(N=N, T=0.5, dv_max=0.05, v_max=0.2)


def centered_task(n=0, x_f=None):
    term = Polytope.box([-0.2, -0.2, -0.15, -0.15], [0.2, 0.2, 0.15, 0.15])
    union = Polytope.box([-0.6, -0.6], [0.6, 0.6])
    return TransitionTask("a", "b", union, term, n=n, x_f=x_f)


# -- QP solver ---------------------------------------------------------------


def test_qp_1d_bound():
    sol = solve_qp(QpProblem(H=2 * np.eye(1), g=np.zeros(1), G=np.array([[-1.0]]), h=np.array([-1.0])))
    assert sol.status == "optimal"
    assert sol.u_star[0] == pytest.approx(1.0, abs=1e-9)


def test_qp_unconstrained():
    H = np.diag([2.0, 4.0])
    g = np.array([-2.0, -4.0])
    sol = solve_qp(QpProblem(H=H, g=g, G=np.zeros((0, 2)), h=np.zeros(0)))
    assert sol.status == "optimal"
    assert np.allclose(sol.u_star, [1.0, 1.0], atol=1e-9)


def test_qp_infeasible():
    prob = QpProblem(
        H=np.eye(1), g=np.zeros(1), G=np.array([[1.0], [-1.0]]), h=np.array([0.0, -1.0])
    )
    assert solve_qp(prob).status == "infeasible"


def qp_oracle(H, g, G, h):
    """Brute-force active-set enumeration: solve every equality-constrained
    subproblem and keep the best KKT-consistent candidate."""
    n = H.shape[0]
    best = None
    for r in range(G.shape[0] + 1):
        for W in combinations(range(G.shape[0]), r):
            GW = G[list(W)]
            K = np.block([[H, GW.T], [GW, np.zeros((r, r))]]) if r else H
            rhs = np.concatenate([-g, h[list(W)]]) if r else -g
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            z, lam = sol[:n], sol[n:]
            if np.all(G @ z <= h + 1e-8) and np.all(lam >= -1e-8):
                obj = 0.5 * z @ H @ z + g @ z
                if best is None or obj < best[0]:
                    best = (obj, z)
    return best


def test_qp_matches_enumeration_oracle():
    rng = np.random.default_rng(61)
    solved = 0
    for _ in range(60):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, 8))
        A = rng.normal(size=(n, n))
        H = A @ A.T + n * np.eye(n)
        g = rng.normal(size=n)
        G = rng.normal(size=(m, n))
        h = rng.normal(size=m) + 1.0
        sol = solve_qp(QpProblem(H, g, G, h))
        best = qp_oracle(H, g, G, h)
        if best is None:
            assert sol.status != "optimal"
            continue
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(best[0], abs=1e-6)
        assert np.allclose(sol.u_star, best[1], atol=1e-6)
        solved += 1
    assert solved >= 40


def test_qp_kkt_residuals():
    rng = np.random.default_rng(62)
    for _ in range(20):
        n, m = 5, 8
        A = rng.normal(size=(n, n))
        H = A @ A.T + np.eye(n)
        g = rng.normal(size=n)
        G = rng.normal(size=(m, n))
        h = rng.normal(size=m) + 0.5
        sol = solve_qp(QpProblem(H, g, G, h))
        if sol.status != "optimal":
            continue
        z = sol.u_star
        assert np.all(G @ z <= h + 1e-6)
        # stationarity: gradient in the cone of active constraint normals
        act = np.where(G @ z >= h - 1e-7)[0]
        grad = H @ z + g
        if len(act) == 0:
            assert np.abs(grad).max() < 1e-6
        else:
            lam, res, *_ = np.linalg.lstsq(G[act].T, -grad, rcond=None)
            assert np.abs(G[act].T @ lam + grad).max() < 1e-6


# -- MPC ----------------------------------------------------------------------


def test_build_mpc_stationary_zero_cost():
    cfg = small_cfg()
    task = centered_task(n=cfg.N, x_f=np.zeros(4))
    step = mpc_step(np.zeros(4), task, cfg)
    assert np.allclose(step.u0, 0.0, atol=1e-9)
    assert step.objective == pytest.approx(0.0, abs=1e-9)
    # invariance: plan stays in the terminal set
    for k in range(cfg.N + 1):
        assert task.terminal_inv.contains(step.plan[k], tol=1e-7)


def test_build_mpc_infeasible_union():
    cfg = small_cfg()
    empty_union = Polytope([[1.0, 0.0], [-1.0, 0.0]], [0.0, -1.0])
    task = TransitionTask("a", "b", empty_union, centered_task().terminal_inv, n=0)
    prob = build_mpc(np.zeros(4), task, cfg)
    assert solve_qp(prob).status == "infeasible"


def test_build_mpc_objective_matches_rollout_oracle():
    cfg = small_cfg()
    task = centered_task(n=2, x_f=np.array([0.05, -0.02, 0.0, 0.0]))
    rng = np.random.default_rng(63)
    x0 = np.array([0.05, 0.05, 0.02, -0.01])
    prob = build_mpc(x0, task, cfg)
    dyn = cfg.dynamics
    for _ in range(5):
        z = rng.uniform(-cfg.dv_max, cfg.dv_max, size=2 * cfg.N)
        u = z.reshape(cfg.N, 2)
        xs = [x0]
        for k in range(cfg.N):
            xs.append(dyn.A @ xs[-1] + dyn.B @ u[k])
        x_f = task.x_f
        direct = sum(
            (xs[k] - x_f) @ cfg.Q @ (xs[k] - x_f) + u[k] @ cfg.R @ u[k]
            for k in range(cfg.N)
        ) + (xs[cfg.N] - x_f) @ cfg.Q_f @ (xs[cfg.N] - x_f)
        quad = 0.5 * z @ prob.H @ z + prob.g @ z + prob.const
        assert quad == pytest.approx(direct, rel=1e-9, abs=1e-9)
        # constraint values: every plan state satisfies rows iff G z <= h rowwise
        viol_direct = max(
            (task.union_poly.A @ xs[k][:2] - task.union_poly.b).max()
            for k in range(0, cfg.N - task.n)
        )
        lhs = prob.G @ z - prob.h
        assert (viol_direct <= 1e-12) == bool((lhs[: (cfg.N - task.n) * task.union_poly.nrows] <= 1e-12).all())


def test_counter_validation():
    cfg = small_cfg()
    task = centered_task(n=cfg.N + 1)
    with pytest.raises(PlannerError, match="counter"):
        build_mpc(np.zeros(4), task, cfg)


def test_mpc_transition_and_recursive_feasibility():
    cfg = MpcConfig(N=30, T=0.5, dv_max=0.03, v_max=0.15)
    term = Polytope.box([0.8, -0.2, -0.12, -0.12], [1.2, 0.2, 0.12, 0.12])
    union = Polytope.box([-0.4, -0.4], [1.4, 0.4])
    task = TransitionTask("a", "b", union, term, n=0, x_f=np.array([1.0, 0.0, 0.0, 0.0]))
    x = np.zeros(4)
    dyn = cfg.dynamics
    entered = None
    for k in range(cfg.N):
        step = mpc_step(x, task, cfg)  # raises on infeasibility
        # replanning feasibility: the shifted tail satisfies the next call's program
        x_next = dyn.A @ x + dyn.B @ step.u0
        assert np.allclose(x_next, step.plan[1], atol=1e-12)
        x, task = x_next, step.task
        if term.contains(x, tol=1e-9) and entered is None:
            entered = k + 1
            break
    assert entered is not None and entered <= cfg.N


def test_mpc_plan_boxes_asserted():
    cfg = small_cfg()
    task = centered_task(n=0, x_f=np.zeros(4))
    step = mpc_step(np.array([0.1, 0.1, 0.0, 0.0]), task, cfg)
    assert np.abs(step.inputs).max() <= cfg.dv_max + 1e-9
    assert np.abs(step.plan[:, 2:]).max() <= cfg.v_max + 1e-9
