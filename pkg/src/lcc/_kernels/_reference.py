"""Pure-Python tracking kernel.

One control period of the closed loop: classical RK4 on the vehicle ODE with
the backstepping controller evaluated at every stage time and stage state
against the piecewise-polynomial reference.

The reference piece is selected once per step (at the step midpoint) so each
RK4 step integrates a smooth vector field; the reference's third derivative
jumps at piece boundaries, and those boundaries land on step edges for the
default alpha = 1 grid.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["simulate_period"]


def _locate(pieces: np.ndarray, t: float) -> int:
    idx = int(np.searchsorted(pieces[:, 1], t, side="right"))
    if idx >= len(pieces):
        idx = len(pieces) - 1
    return idx


def _eval_row(row: np.ndarray, t: float):
    """(px, py, vx, vy, ax, ay, jx, jy) of one polynomial piece at time t."""
    width = row[1] - row[0]
    xi = (t - row[0]) / width
    out = []
    for base in (2, 7):
        c0, c1, c2, c3, c4 = row[base:base + 5]
        p = c0 + xi * (c1 + xi * (c2 + xi * (c3 + xi * c4)))
        d1 = (c1 + xi * (2 * c2 + xi * (3 * c3 + xi * 4 * c4))) / width
        d2 = (2 * c2 + xi * (6 * c3 + xi * 12 * c4)) / width ** 2
        d3 = (6 * c3 + xi * 24 * c4) / width ** 3
        out.append((p, d1, d2, d3))
    (px, vx, ax, jx), (py, vy, ay, jy) = out
    return px, py, vx, vy, ax, ay, jx, jy


def _control(state, ref, P: np.ndarray, Kp: np.ndarray, Kd: np.ndarray, par: tuple):
    """Torques + (omega_d, ex, ey, edx, edy); raises on the speed guard."""
    m_c, d, I1, I2, gamma, delta_v, sigma, v_min = par
    x, y, th, v, om = state
    if abs(v) < v_min:
        raise FloatingPointError(f"speed guard: |v|={abs(v):.4f} < {v_min}")
    px, py, vx, vy, ax, ay, jx, jy = ref
    c, s = math.cos(th), math.sin(th)
    ex, ey = x - px, y - py
    edx, edy = v * c - vx, v * s - vy
    # desired error acceleration
    ddx = ax - (Kp[0, 0] * ex + Kp[0, 1] * ey) - (Kd[0, 0] * edx + Kd[0, 1] * edy)
    ddy = ay - (Kp[1, 0] * ex + Kp[1, 1] * ey) - (Kd[1, 0] * edx + Kd[1, 1] * edy)
    a_d = c * ddx + s * ddy
    omega_d = (-s * ddx + c * ddy) / v
    # actual error acceleration under the commanded linear acceleration
    eddx = a_d * c - v * om * s - ax
    eddy = a_d * s + v * om * c - ay
    dddx = jx - (Kp[0, 0] * edx + Kp[0, 1] * edy) - (Kd[0, 0] * eddx + Kd[0, 1] * eddy)
    dddy = jy - (Kp[1, 0] * edx + Kp[1, 1] * edy) - (Kd[1, 0] * eddx + Kd[1, 1] * eddy)
    omega_d_dot = (
        (a_d / v ** 2 * s - om / v * c) * ddx
        + (-a_d / v ** 2 * c - om / v * s) * ddy
        + (-s * dddx + c * dddy) / v
    )
    zw = (
        (P[0, 2] * ex + P[1, 2] * ey + P[2, 2] * edx + P[3, 2] * edy) * (-v * s)
        + (P[0, 3] * ex + P[1, 3] * ey + P[2, 3] * edx + P[3, 3] * edy) * (v * c)
    )
    alpha_d = -0.5 * sigma * (om - omega_d) + omega_d_dot - 2.0 * zw
    rhs_a = a_d - (m_c * d / I1) * om * om
    rhs_al = alpha_d + (m_c * d / I2) * v * om
    inv = 1.0 / (2.0 * gamma * delta_v)
    tau_r = inv * (delta_v * rhs_a + gamma * rhs_al)
    tau_l = inv * (delta_v * rhs_a - gamma * rhs_al)
    return tau_r, tau_l, omega_d, ex, ey, edx, edy


def _deriv(state, t, row, P, Kp, Kd, par):
    tau_r, tau_l, *_ = _control(state, _eval_row(row, t), P, Kp, Kd, par)
    m_c, d, I1, I2, gamma, delta_v, _, _ = par
    x, y, th, v, om = state
    a = (m_c * d / I1) * om * om + gamma * (tau_r + tau_l)
    alpha = -(m_c * d / I2) * v * om + delta_v * (tau_r - tau_l)
    return (
        v * math.cos(th),
        v * math.sin(th),
        om,
        a,
        alpha,
    )


def simulate_period(
    state0: np.ndarray,
    t0: float,
    dt: float,
    n_steps: int,
    pieces: np.ndarray,
    P: np.ndarray,
    Kp: np.ndarray,
    Kd: np.ndarray,
    params: tuple,
):
    """Integrate the closed loop over n_steps of size dt from t0.

    Returns (states, taus, refs, errs, V): states is (n_steps+1, 5); taus,
    refs (reference positions), errs (Euclidean tracking error) and V (the
    Lyapunov certificate value) are sampled at the step start times plus one
    closing row at the final state.
    """
    pieces = np.asarray(pieces, dtype=float)
    P = np.asarray(P, dtype=float)
    Kp = np.asarray(Kp, dtype=float)
    Kd = np.asarray(Kd, dtype=float)
    states = np.empty((n_steps + 1, 5))
    taus = np.empty((n_steps + 1, 2))
    refs = np.empty((n_steps + 1, 2))
    errs = np.empty(n_steps + 1)
    vvals = np.empty(n_steps + 1)
    state = tuple(float(v) for v in state0)

    def record(i, t, st, row):
        ref = _eval_row(row, t)
        tau_r, tau_l, omega_d, ex, ey, edx, edy = _control(st, ref, P, Kp, Kd, par=params)
        states[i] = st
        taus[i] = (tau_r, tau_l)
        refs[i] = (ref[0], ref[1])
        errs[i] = math.hypot(ex, ey)
        z = np.array([ex, ey, edx, edy])
        vvals[i] = float(z @ P @ z + 0.5 * (st[4] - omega_d) ** 2)

    for i in range(n_steps):
        t = t0 + i * dt
        row = pieces[_locate(pieces, t + 0.5 * dt)]
        record(i, t, state, row)
        k1 = _deriv(state, t, row, P, Kp, Kd, params)
        s2 = tuple(state[j] + 0.5 * dt * k1[j] for j in range(5))
        k2 = _deriv(s2, t + 0.5 * dt, row, P, Kp, Kd, params)
        s3 = tuple(state[j] + 0.5 * dt * k2[j] for j in range(5))
        k3 = _deriv(s3, t + 0.5 * dt, row, P, Kp, Kd, params)
        s4 = tuple(state[j] + dt * k3[j] for j in range(5))
        k4 = _deriv(s4, t + dt, row, P, Kp, Kd, params)
        state = tuple(
            state[j] + (dt / 6.0) * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j])
            for j in range(5)
        )
        if not all(map(math.isfinite, state)):
            raise FloatingPointError("integration fault: non-finite state")
    t_end = t0 + n_steps * dt
    row = pieces[_locate(pieces, t_end - 0.5 * dt)]
    record(n_steps, t_end, state, row)
    return states, taus, refs, errs, vvals
