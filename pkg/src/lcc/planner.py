"""Middle-layer MPC: condensed quadratic program steering the discrete
double integrator between control-invariant sets.

States are eliminated through the exact dynamics so the decision vector is
the input sequence alone; the solver is a dense primal active-set method
with a phase-1 LP for the start point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .geometry import LinearDynamics, Polytope, chebyshev_center

__all__ = [
    "PlannerError",
    "InfeasibleError",
    "MpcConfig",
    "TransitionTask",
    "QpProblem",
    "QpSolution",
    "build_mpc",
    "solve_qp",
    "mpc_step",
    "MpcStep",
]

_FEAS_TOL = 1e-7
_KKT_TOL = 1e-9


class PlannerError(RuntimeError):
    pass


class InfeasibleError(PlannerError):
    """The MPC program is infeasible, contradicting recursive feasibility."""


@dataclass(frozen=True)
class MpcConfig:
    """Horizon, step, cost weights, and box bounds of the transition MPC."""

    N: int = 30
    T: float = 0.5
    Q: np.ndarray = field(default_factory=lambda: np.diag([1.0, 1.0, 0.1, 0.1]))
    Q_f: np.ndarray = field(default_factory=lambda: 10.0 * np.diag([1.0, 1.0, 0.1, 0.1]))
    R: np.ndarray = field(default_factory=lambda: np.eye(2))
    dv_max: float = 0.03
    v_max: float = 0.15

    def __post_init__(self):
        if self.N < 1:
            raise PlannerError("horizon N must be >= 1")
        for name in ("Q", "Q_f"):
            M = np.asarray(getattr(self, name), dtype=float)
            if M.shape != (4, 4) or not np.allclose(M, M.T) or np.any(np.linalg.eigvalsh(M) < -1e-12):
                raise PlannerError(f"{name} must be 4x4 symmetric PSD")
            object.__setattr__(self, name, M)
        R = np.asarray(self.R, dtype=float)
        if R.shape != (2, 2) or not np.allclose(R, R.T) or np.any(np.linalg.eigvalsh(R) <= 0):
            raise PlannerError("R must be 2x2 symmetric PD")
        object.__setattr__(self, "R", R)
        if not (self.dv_max > 0 and self.v_max > 0 and self.T > 0):
            raise PlannerError("dv_max, v_max, T must be positive")

    @property
    def dynamics(self) -> LinearDynamics:
        return LinearDynamics.double_integrator(self.T)


@dataclass(frozen=True)
class TransitionTask:
    """One commanded cell transition with its constraint sets and counter."""

    from_cell: object
    to_cell: object
    union_poly: Polytope  # shrunk union, position rows over (px, py)
    terminal_inv: Polytope  # C of the target cell, rows over the 4D state
    n: int = 0
    x_f: np.ndarray | None = None

    def target(self, cfg: MpcConfig) -> np.ndarray:
        if self.x_f is not None:
            return np.asarray(self.x_f, dtype=float)
        center, _ = chebyshev_center(self.terminal_inv)
        return center

    def advanced(self) -> "TransitionTask":
        return TransitionTask(
            self.from_cell, self.to_cell, self.union_poly, self.terminal_inv,
            n=self.n + 1, x_f=self.x_f,
        )


@dataclass(frozen=True)
class QpProblem:
    """min 0.5 z'Hz + g'z + const  s.t.  G z <= h."""

    H: np.ndarray
    g: np.ndarray
    G: np.ndarray
    h: np.ndarray
    const: float = 0.0


@dataclass(frozen=True)
class QpSolution:
    u_star: np.ndarray | None
    objective: float
    status: str  # optimal | infeasible | maxiter


def _prediction_matrices(dyn: LinearDynamics, N: int):
    """Phi (stack of A^k) and Gamma with x[k] = A^k x0 + sum A^{k-1-j} B u[j]."""
    n, m = dyn.A.shape[0], dyn.B.shape[1]
    Phi = np.zeros(((N + 1) * n, n))
    Gam = np.zeros(((N + 1) * n, N * m))
    Ak = np.eye(n)
    Phi[:n] = Ak
    powers = [Ak]
    for k in range(1, N + 1):
        Ak = dyn.A @ Ak
        Phi[k * n:(k + 1) * n] = Ak
        powers.append(Ak)
    for k in range(1, N + 1):
        for j in range(k):
            Gam[k * n:(k + 1) * n, j * m:(j + 1) * m] = powers[k - 1 - j] @ dyn.B
    return Phi, Gam


def build_mpc(x0, task: TransitionTask, cfg: MpcConfig) -> QpProblem:
    """Condensed transition MPC.

    Constraints: union polytope on x[k] for k = 0..N-1-n, terminal set on
    x[k] for k = N-n..N, the input box, and the velocity box on every step.
    Rows that involve only the (constant) current state become constant
    rows; a violated constant row makes the program infeasible.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != 4 or not np.all(np.isfinite(x0)):
        raise PlannerError("x0 must be a finite 4-vector")
    if task.n > cfg.N:
        raise PlannerError(f"counter n={task.n} exceeds horizon N={cfg.N} (pipeline bug)")
    N = cfg.N
    dyn = cfg.dynamics
    Phi, Gam = _prediction_matrices(dyn, N)
    n = 4

    Qbar = np.zeros(((N + 1) * n, (N + 1) * n))
    for k in range(N):
        Qbar[k * n:(k + 1) * n, k * n:(k + 1) * n] = cfg.Q
    Qbar[N * n:, N * n:] = cfg.Q_f
    Rbar = np.kron(np.eye(N), cfg.R)

    x_f = task.target(cfg)
    xf_stack = np.tile(x_f, N + 1)
    d0 = Phi @ x0 - xf_stack
    H = 2.0 * (Gam.T @ Qbar @ Gam + Rbar)
    H = 0.5 * (H + H.T)
    g = 2.0 * Gam.T @ Qbar @ d0
    const = float(d0 @ Qbar @ d0)

    G_rows, h_rows = [], []

    def add_state_rows(A_rows: np.ndarray, b_rows: np.ndarray, k: int):
        # A_rows may be over (px, py) only or over the full 4D state.
        if A_rows.shape[1] == 2:
            A_full = np.hstack([A_rows, np.zeros((A_rows.shape[0], 2))])
        elif A_rows.shape[1] == 4:
            A_full = A_rows
        else:
            raise PlannerError("state constraint rows must be 2D or 4D")
        sel = slice(k * n, (k + 1) * n)
        G_rows.append(A_full @ Gam[sel])
        h_rows.append(b_rows - A_full @ Phi[sel] @ x0)

    for k in range(0, N - task.n):
        add_state_rows(task.union_poly.A, task.union_poly.b, k)
    for k in range(max(0, N - task.n), N + 1):
        add_state_rows(task.terminal_inv.A, task.terminal_inv.b, k)
    vel_rows = np.hstack([np.zeros((4, 2)), np.vstack([np.eye(2), -np.eye(2)])])
    vel_rhs = cfg.v_max * np.ones(4)
    for k in range(0, N + 1):
        add_state_rows(vel_rows, vel_rhs, k)
    m = 2
    eyeU = np.eye(N * m)
    G_rows.append(eyeU)
    h_rows.append(cfg.dv_max * np.ones(N * m))
    G_rows.append(-eyeU)
    h_rows.append(cfg.dv_max * np.ones(N * m))

    G = np.vstack(G_rows)
    h = np.concatenate(h_rows)
    return QpProblem(H=H, g=g, G=G, h=h, const=const)


def _phase1_point(G: np.ndarray, h: np.ndarray):
    """A feasible point of {G z <= h}, or None."""
    nz = G.shape[1]
    res = linprog(
        np.zeros(nz), A_ub=G, b_ub=h, bounds=[(None, None)] * nz, method="highs"
    )
    if res.status != 0:
        return None
    return res.x


def solve_qp(prob: QpProblem, max_iter: int = 2000) -> QpSolution:
    """Dense primal active-set solver (nullspace form) for a strictly convex QP.

    Starts from a phase-1 LP point with an empty working set, adds one
    blocking constraint per step and drops the most negative multiplier at
    stationary points.  Terminates at a KKT point; deterministic for fixed
    inputs.
    """
    H, g = prob.H, prob.g
    G, h = np.atleast_2d(prob.G), np.asarray(prob.h, dtype=float).ravel()
    nz = H.shape[0]
    if G.size == 0:
        G = G.reshape(0, nz)

    # Constant rows (zero gradient) decide feasibility directly.
    row_norm = np.abs(G).max(axis=1) if G.shape[0] else np.zeros(0)
    const_rows = row_norm <= 1e-12
    if np.any(h[const_rows] < -_FEAS_TOL):
        return QpSolution(None, np.inf, "infeasible")
    keep = ~const_rows
    G, h = G[keep], h[keep]
    m = G.shape[0]

    z = _phase1_point(G, h) if m else np.zeros(nz)
    if z is None:
        return QpSolution(None, np.inf, "infeasible")

    W: list[int] = []

    def direction():
        """Step to the minimizer on the current working face."""
        grad = H @ z + g
        if not W:
            return np.linalg.solve(H, -grad)
        GW = G[W]
        # Nullspace of GW via SVD.
        _, s, vt = np.linalg.svd(GW, full_matrices=True)
        rank = int(np.sum(s > 1e-11 * max(1.0, s[0] if s.size else 0.0)))
        Z = vt[rank:].T
        if Z.shape[1] == 0:
            return np.zeros(nz)
        red = Z.T @ H @ Z
        v = np.linalg.solve(red, -(Z.T @ grad))
        return Z @ v

    for _ in range(max_iter):
        p = direction()
        if np.abs(p).max() <= 1e-11:
            grad = H @ z + g
            if not W:
                obj = float(0.5 * z @ H @ z + g @ z + prob.const)
                return QpSolution(z.copy(), obj, "optimal")
            lam, *_ = np.linalg.lstsq(G[W].T, -grad, rcond=None)
            if np.all(lam >= -1e-8):
                obj = float(0.5 * z @ H @ z + g @ z + prob.const)
                return QpSolution(z.copy(), obj, "optimal")
            W.pop(int(np.argmin(lam)))
            continue
        alpha = 1.0
        blocker = -1
        Gp = G @ p if m else np.zeros(0)
        slack = h - G @ z if m else np.zeros(0)
        for i in range(m):
            if i in W or Gp[i] <= 1e-12:
                continue
            ai = max(slack[i], 0.0) / Gp[i]
            if ai < alpha - 1e-12:
                alpha = ai
                blocker = i
        z = z + alpha * p
        if blocker >= 0:
            W.append(blocker)
    return QpSolution(None, np.inf, "maxiter")


@dataclass(frozen=True)
class MpcStep:
    u0: np.ndarray
    plan: np.ndarray  # (N+1, 4) predicted states
    inputs: np.ndarray  # (N, 2) planned inputs
    task: TransitionTask  # with the incremented counter
    objective: float


def mpc_step(x, task: TransitionTask, cfg: MpcConfig, check_tol: float = 1e-6) -> MpcStep:
    """Solve the transition MPC at x, roll the plan out, and advance the counter.

    Raises InfeasibleError on a failed solve; asserts the plan satisfies its
    boxes and polytopes row-wise within check_tol.
    """
    x = np.asarray(x, dtype=float).ravel()
    prob = build_mpc(x, task, cfg)
    sol = solve_qp(prob)
    if sol.status != "optimal":
        raise InfeasibleError(
            f"MPC {task.from_cell}->{task.to_cell} (n={task.n}) status {sol.status} at x={x.tolist()}"
        )
    N = cfg.N
    u = sol.u_star.reshape(N, 2)
    dyn = cfg.dynamics
    plan = np.zeros((N + 1, 4))
    plan[0] = x
    for k in range(N):
        plan[k + 1] = dyn.A @ plan[k] + dyn.B @ u[k]
    _assert_plan(plan, u, task, cfg, check_tol)
    next_task = TransitionTask(
        task.from_cell, task.to_cell, task.union_poly, task.terminal_inv,
        n=min(task.n + 1, cfg.N), x_f=task.x_f,
    )
    return MpcStep(u0=u[0].copy(), plan=plan, inputs=u, task=next_task, objective=sol.objective)


def _assert_plan(plan, u, task: TransitionTask, cfg: MpcConfig, tol: float):
    N = cfg.N
    if np.abs(u).max() > cfg.dv_max + tol:
        raise PlannerError(f"planned input violates the box by {np.abs(u).max() - cfg.dv_max:.2e}")
    if np.abs(plan[:, 2:]).max() > cfg.v_max + tol:
        raise PlannerError("planned velocity violates the box")
    for k in range(0, N - task.n):
        viol = (task.union_poly.A @ plan[k, :2] - task.union_poly.b).max()
        if viol > tol:
            raise PlannerError(f"plan step {k} violates the union polytope by {viol:.2e}")
    for k in range(max(0, N - task.n), N + 1):
        viol = (task.terminal_inv.A @ plan[k] - task.terminal_inv.b).max()
        if viol > tol:
            raise PlannerError(f"plan step {k} violates the terminal set by {viol:.2e}")
