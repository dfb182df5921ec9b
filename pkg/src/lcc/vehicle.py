"""Differential-drive vehicle layer.

Nonlinear unicycle dynamics with torque inputs, classical RK4 stepping,
quartic-Bezier reference interpolation between planner states, and the
backstepping feedback-linearizing tracking controller with its Lyapunov
certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

__all__ = [
    "VehicleError",
    "SpeedGuardError",
    "VehicleParams",
    "VehicleState",
    "RefSignal",
    "CtleSolution",
    "dynamics",
    "rk4_step",
    "reference_pieces",
    "bezier_ref",
    "ctle_solve",
    "fbl_control",
    "fbl_control_full",
    "lyapunov_value",
]


class VehicleError(ValueError):
    pass


class SpeedGuardError(VehicleError):
    """Speed fell below the singularity guard."""


def _pd_check(M: np.ndarray, name: str):
    M = np.asarray(M, dtype=float)
    if M.shape != (2, 2) or not np.allclose(M, M.T):
        raise VehicleError(f"{name} must be a symmetric 2x2 matrix")
    if np.any(np.linalg.eigvalsh(M) <= 0):
        raise VehicleError(f"{name} must be positive definite")
    return M


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants, backstepping gains, and the speed guard.

    delta_v is the torque-difference gain (the paper's second input-map
    constant, renamed so it cannot clash with the tracking bound delta).
    """

    m_c: float = 1.0
    d: float = 0.1
    I1: float = 1.0
    I2: float = 0.5
    gamma: float = 1.0
    delta_v: float = 1.0
    sigma: float = 2.0
    K_p: np.ndarray = field(default_factory=lambda: 4.0 * np.eye(2))
    K_d: np.ndarray = field(default_factory=lambda: 4.0 * np.eye(2))
    v_min: float = 0.05

    def __post_init__(self):
        for name in ("I1", "I2", "gamma", "delta_v", "sigma", "v_min"):
            if not getattr(self, name) > 0:
                raise VehicleError(f"{name} must be positive")
        object.__setattr__(self, "K_p", _pd_check(self.K_p, "K_p"))
        object.__setattr__(self, "K_d", _pd_check(self.K_d, "K_d"))


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    theta: float
    v: float
    omega: float

    def __post_init__(self):
        if not all(map(math.isfinite, (self.x, self.y, self.theta, self.v, self.omega))):
            raise VehicleError("non-finite vehicle state")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, self.v, self.omega])

    @classmethod
    def from_array(cls, arr) -> "VehicleState":
        return cls(*map(float, arr))


@dataclass(frozen=True)
class RefSignal:
    """Reference position and its first three time derivatives."""

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray


def dynamics(s: VehicleState, tau: tuple, p: VehicleParams) -> np.ndarray:
    """Right-hand side (xdot, ydot, thetadot, vdot, omegadot) of the unicycle."""
    tau_r, tau_l = tau
    a = (p.m_c * p.d / p.I1) * s.omega ** 2 + p.gamma * (tau_r + tau_l)
    alpha = -(p.m_c * p.d / p.I2) * s.v * s.omega + p.delta_v * (tau_r - tau_l)
    return np.array(
        [s.v * math.cos(s.theta), s.v * math.sin(s.theta), s.omega, a, alpha]
    )


def rk4_step(s: VehicleState, tau: tuple, dt: float, p: VehicleParams) -> VehicleState:
    """Classical 4-stage Runge-Kutta step with the torques held constant."""
    if not dt > 0:
        raise VehicleError(f"dt must be positive, got {dt}")
    z = s.as_array()
    f = lambda arr: dynamics(VehicleState.from_array(arr), tau, p)
    k1 = f(z)
    k2 = f(z + 0.5 * dt * k1)
    k3 = f(z + 0.5 * dt * k2)
    k4 = f(z + dt * k3)
    out = z + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise VehicleError("integration fault: non-finite state")
    return VehicleState.from_array(out)


# -- reference interpolation -------------------------------------------------
#
# Between consecutive planner states the position reference is the linear
# interpolant (slope = the segment's velocity); around each interior knot a
# quartic Bezier window of width alpha*T blends the two segments with C^2
# junctions.  Control points sit on the adjacent segments at local offsets
# {-w, -w/2, 0, w/2, w}, which makes the deviation from the linear
# interpolant vanish when the velocity does not change and otherwise peak at
# the knot with value (3/32)*alpha*T*|dv| per coordinate.  Endpoint
# half-windows fall back to the linear interpolant.


def reference_pieces(
    positions: np.ndarray,
    velocities: np.ndarray,
    alpha: float,
    T: float,
    t0: float = 0.0,
) -> np.ndarray:
    """Piecewise-quartic description of the reference over [t0, t0 + K*T].

    Returns rows [t_lo, t_hi, cx0..cx4, cy0..cy4] with the polynomial in the
    normalized local time xi = (t - t_lo) / (t_hi - t_lo).
    """
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    vel = np.atleast_2d(np.asarray(velocities, dtype=float))
    if pos.shape != vel.shape or pos.shape[1] != 2 or pos.shape[0] < 2:
        raise VehicleError("need >= 2 planner states of matching shape (K, 2)")
    if not (0.0 <= alpha <= 1.0):
        raise VehicleError(f"alpha must lie in [0, 1], got {alpha}")
    if not T > 0:
        raise VehicleError("T must be positive")
    K = pos.shape[0] - 1
    w = 0.5 * alpha * T
    rows = []

    def linear_piece(t_lo, t_hi, p0, v):
        # p(xi) = p0 + v * (t_hi - t_lo) * xi
        width = t_hi - t_lo
        cx = [p0[0], v[0] * width, 0.0, 0.0, 0.0]
        cy = [p0[1], v[1] * width, 0.0, 0.0, 0.0]
        rows.append([t_lo, t_hi] + cx + cy)

    def bezier_piece(t_lo, t_hi, ctrl):
        # Bernstein -> power basis for a quartic, per coordinate.
        b = np.asarray(ctrl, dtype=float)  # (5, 2)
        conv = np.array(
            [
                [1, 0, 0, 0, 0],
                [-4, 4, 0, 0, 0],
                [6, -12, 6, 0, 0],
                [-4, 12, -12, 4, 0],
                [1, -4, 6, -4, 1],
            ],
            dtype=float,
        )
        coef = conv @ b  # (5, 2) power-basis coefficients in xi
        rows.append([t_lo, t_hi] + list(coef[:, 0]) + list(coef[:, 1]))

    for k in range(K + 1):
        t_knot = t0 + k * T
        if 0 < k < K and w > 0:
            corner = pos[k]
            v_in, v_out = vel[k - 1], vel[k]
            ctrl = np.array(
                [
                    corner - v_in * w,
                    corner - 0.5 * v_in * w,
                    corner,
                    corner + 0.5 * v_out * w,
                    corner + v_out * w,
                ]
            )
            bezier_piece(t_knot - w, t_knot + w, ctrl)
        if k < K:
            # Linear part of segment k: clipped by this knot's window (k >= 1)
            # and by the next knot's window (k <= K-2).
            seg_lo = t_knot + (w if k > 0 else 0.0)
            seg_hi = t_knot + T - (w if k <= K - 2 else 0.0)
            if seg_hi > seg_lo + 1e-12:
                p_at = pos[k] + vel[k] * (seg_lo - t_knot)
                linear_piece(seg_lo, seg_hi, p_at, vel[k])
    rows.sort(key=lambda r: r[0])
    return np.asarray(rows, dtype=float)


def eval_pieces(pieces: np.ndarray, t: float) -> RefSignal:
    """Evaluate the piecewise reference and its first three derivatives."""
    lo, hi = pieces[0, 0], pieces[-1, 1]
    if t < lo - 1e-9 or t > hi + 1e-9:
        raise VehicleError(f"time {t} outside the reference horizon [{lo}, {hi}]")
    idx = np.searchsorted(pieces[:, 1], t, side="right")
    idx = min(idx, len(pieces) - 1)
    row = pieces[idx]
    if t < row[0] - 1e-9:
        row = pieces[max(idx - 1, 0)]
    width = row[1] - row[0]
    xi = (t - row[0]) / width
    cx, cy = row[2:7], row[7:12]
    out = []
    for c in (cx, cy):
        p = c[0] + xi * (c[1] + xi * (c[2] + xi * (c[3] + xi * c[4])))
        d1 = c[1] + xi * (2 * c[2] + xi * (3 * c[3] + xi * 4 * c[4]))
        d2 = 2 * c[2] + xi * (6 * c[3] + xi * 12 * c[4])
        d3 = 6 * c[3] + xi * 24 * c[4]
        out.append((p, d1 / width, d2 / width ** 2, d3 / width ** 3))
    (px, vx, ax, jx), (py, vy, ay, jy) = out
    return RefSignal(
        value=np.array([px, py]),
        d1=np.array([vx, vy]),
        d2=np.array([ax, ay]),
        d3=np.array([jx, jy]),
    )


def bezier_ref(points, alpha: float, T: float, t: float) -> RefSignal:
    """Reference signal at time t from a sequence of planner states.

    ``points`` holds rows (px, py, vx, vy); the horizon is [0, (len-1)*T].
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 4:
        raise VehicleError("planner states must be rows (px, py, vx, vy)")
    pieces = reference_pieces(pts[:, :2], pts[:, 2:], alpha, T)
    return eval_pieces(pieces, t)


# -- backstepping feedback linearization -------------------------------------


@dataclass(frozen=True)
class CtleSolution:
    """P solving A^T P + P A = -I for A = [[0, I], [-K_p, -K_d]], and the
    decay rate min(1/lambda_max(P), sigma)."""

    P: np.ndarray
    lam: float


def ctle_solve(K_p, K_d, sigma: float) -> CtleSolution:
    K_p = _pd_check(K_p, "K_p")
    K_d = _pd_check(K_d, "K_d")
    if not sigma > 0:
        raise VehicleError("sigma must be positive")
    A = np.block([[np.zeros((2, 2)), np.eye(2)], [-K_p, -K_d]])
    if np.any(np.real(np.linalg.eigvals(A)) >= 0):
        raise VehicleError("error dynamics matrix is not Hurwitz")
    P = solve_continuous_lyapunov(A.T, -np.eye(4))
    P = 0.5 * (P + P.T)
    residual = np.abs(A.T @ P + P @ A + np.eye(4)).max()
    if residual > 1e-9:
        raise VehicleError(f"CTLE residual {residual:.2e} exceeds 1e-9")
    lam_max = float(np.linalg.eigvalsh(P).max())
    return CtleSolution(P=P, lam=min(1.0 / lam_max, sigma))


def fbl_control_full(s: VehicleState, ref: RefSignal, sol: CtleSolution, p: VehicleParams):
    """Torques plus the internals needed by monitors: (tau, omega_d, e, edot)."""
    if abs(s.v) < p.v_min:
        raise SpeedGuardError(f"|v| = {abs(s.v):.4f} below guard {p.v_min}")
    c, si = math.cos(s.theta), math.sin(s.theta)
    e = np.array([s.x, s.y]) - ref.value
    edot = s.v * np.array([c, si]) - ref.d1
    edd_des = ref.d2 - p.K_p @ e - p.K_d @ edot
    a_d = c * edd_des[0] + si * edd_des[1]
    omega_d = (-si * edd_des[0] + c * edd_des[1]) / s.v
    eddot = a_d * np.array([c, si]) + s.v * s.omega * np.array([-si, c]) - ref.d2
    edd_des_dot = ref.d3 - p.K_p @ edot - p.K_d @ eddot
    omega_d_dot = (
        (a_d / s.v ** 2 * si - s.omega / s.v * c) * edd_des[0]
        + (-a_d / s.v ** 2 * c - s.omega / s.v * si) * edd_des[1]
        + (-si * edd_des_dot[0] + c * edd_des_dot[1]) / s.v
    )
    z = np.concatenate([e, edot])
    coupling = 2.0 * z @ sol.P @ np.array([0.0, 0.0, -s.v * si, s.v * c])
    alpha_d = -0.5 * p.sigma * (s.omega - omega_d) + omega_d_dot - coupling
    # Invert the input map of the dynamics so the commanded (a, alpha) are met
    # exactly.
    a_drift = (p.m_c * p.d / p.I1) * s.omega ** 2
    alpha_drift = -(p.m_c * p.d / p.I2) * s.v * s.omega
    rhs_a = a_d - a_drift
    rhs_al = alpha_d - alpha_drift
    inv = 1.0 / (2.0 * p.gamma * p.delta_v)
    tau_r = inv * (p.delta_v * rhs_a + p.gamma * rhs_al)
    tau_l = inv * (p.delta_v * rhs_a - p.gamma * rhs_al)
    return (tau_r, tau_l), omega_d, e, edot


def fbl_control(s: VehicleState, ref: RefSignal, sol: CtleSolution, p: VehicleParams) -> tuple:
    """Backstepping feedback-linearizing torques (tau_R, tau_L)."""
    tau, _, _, _ = fbl_control_full(s, ref, sol, p)
    return tau


def lyapunov_value(e, edot, omega: float, omega_d: float, sol: CtleSolution) -> float:
    """V = (e, edot)^T P (e, edot) + (omega - omega_d)^2 / 2."""
    z = np.concatenate([np.asarray(e, dtype=float).ravel(), np.asarray(edot, dtype=float).ravel()])
    return float(z @ sol.P @ z + 0.5 * (omega - omega_d) ** 2)
