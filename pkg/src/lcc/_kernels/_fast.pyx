# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tracking kernel; mirrors _reference.simulate_period."""

from libc.math cimport cos, sin, hypot, isfinite

import numpy as np


cdef struct Ref:
    double px, py, vx, vy, ax, ay, jx, jy


cdef struct Ctl:
    double tau_r, tau_l, omega_d, ex, ey, edx, edy


cdef int _locate(double[:, ::1] pieces, double t) nogil:
    cdef int lo = 0, hi = pieces.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if pieces[mid, 1] <= t:
            lo = mid + 1
        else:
            hi = mid
    if lo >= pieces.shape[0]:
        lo = pieces.shape[0] - 1
    return lo


cdef Ref _eval_row(double[:, ::1] pieces, int idx, double t) nogil:
    cdef Ref r
    cdef double width = pieces[idx, 1] - pieces[idx, 0]
    cdef double xi = (t - pieces[idx, 0]) / width
    cdef double c0, c1, c2, c3, c4
    c0 = pieces[idx, 2]; c1 = pieces[idx, 3]; c2 = pieces[idx, 4]
    c3 = pieces[idx, 5]; c4 = pieces[idx, 6]
    r.px = c0 + xi * (c1 + xi * (c2 + xi * (c3 + xi * c4)))
    r.vx = (c1 + xi * (2 * c2 + xi * (3 * c3 + xi * 4 * c4))) / width
    r.ax = (2 * c2 + xi * (6 * c3 + xi * 12 * c4)) / (width * width)
    r.jx = (6 * c3 + xi * 24 * c4) / (width * width * width)
    c0 = pieces[idx, 7]; c1 = pieces[idx, 8]; c2 = pieces[idx, 9]
    c3 = pieces[idx, 10]; c4 = pieces[idx, 11]
    r.py = c0 + xi * (c1 + xi * (c2 + xi * (c3 + xi * c4)))
    r.vy = (c1 + xi * (2 * c2 + xi * (3 * c3 + xi * 4 * c4))) / width
    r.ay = (2 * c2 + xi * (6 * c3 + xi * 12 * c4)) / (width * width)
    r.jy = (6 * c3 + xi * 24 * c4) / (width * width * width)
    return r


cdef int _control(double* st, Ref ref, double[:, ::1] P, double[:, ::1] Kp,
                  double[:, ::1] Kd, double* par, Ctl* out) nogil:
    cdef double m_c = par[0], d = par[1], I1 = par[2], I2 = par[3]
    cdef double gamma = par[4], delta_v = par[5], sigma = par[6], v_min = par[7]
    cdef double x = st[0], y = st[1], th = st[2], v = st[3], om = st[4]
    if v < v_min and -v < v_min:
        return 1
    cdef double c = cos(th), s = sin(th)
    cdef double ex = x - ref.px, ey = y - ref.py
    cdef double edx = v * c - ref.vx, edy = v * s - ref.vy
    cdef double ddx = ref.ax - (Kp[0, 0] * ex + Kp[0, 1] * ey) - (Kd[0, 0] * edx + Kd[0, 1] * edy)
    cdef double ddy = ref.ay - (Kp[1, 0] * ex + Kp[1, 1] * ey) - (Kd[1, 0] * edx + Kd[1, 1] * edy)
    cdef double a_d = c * ddx + s * ddy
    cdef double omega_d = (-s * ddx + c * ddy) / v
    cdef double eddx = a_d * c - v * om * s - ref.ax
    cdef double eddy = a_d * s + v * om * c - ref.ay
    cdef double dddx = ref.jx - (Kp[0, 0] * edx + Kp[0, 1] * edy) - (Kd[0, 0] * eddx + Kd[0, 1] * eddy)
    cdef double dddy = ref.jy - (Kp[1, 0] * edx + Kp[1, 1] * edy) - (Kd[1, 0] * eddx + Kd[1, 1] * eddy)
    cdef double omega_d_dot = (
        (a_d / (v * v) * s - om / v * c) * ddx
        + (-a_d / (v * v) * c - om / v * s) * ddy
        + (-s * dddx + c * dddy) / v
    )
    cdef double zw = (
        (P[0, 2] * ex + P[1, 2] * ey + P[2, 2] * edx + P[3, 2] * edy) * (-v * s)
        + (P[0, 3] * ex + P[1, 3] * ey + P[2, 3] * edx + P[3, 3] * edy) * (v * c)
    )
    cdef double alpha_d = -0.5 * sigma * (om - omega_d) + omega_d_dot - 2.0 * zw
    cdef double rhs_a = a_d - (m_c * d / I1) * om * om
    cdef double rhs_al = alpha_d + (m_c * d / I2) * v * om
    cdef double inv = 1.0 / (2.0 * gamma * delta_v)
    out.tau_r = inv * (delta_v * rhs_a + gamma * rhs_al)
    out.tau_l = inv * (delta_v * rhs_a - gamma * rhs_al)
    out.omega_d = omega_d
    out.ex = ex
    out.ey = ey
    out.edx = edx
    out.edy = edy
    return 0


cdef int _deriv(double* st, double t, double[:, ::1] pieces, int idx,
                double[:, ::1] P, double[:, ::1] Kp, double[:, ::1] Kd,
                double* par, double* out) nogil:
    cdef Ctl ctl
    cdef Ref ref = _eval_row(pieces, idx, t)
    if _control(st, ref, P, Kp, Kd, par, &ctl):
        return 1
    cdef double m_c = par[0], d = par[1], I1 = par[2], I2 = par[3]
    cdef double gamma = par[4], delta_v = par[5]
    cdef double v = st[3], om = st[4]
    out[0] = v * cos(st[2])
    out[1] = v * sin(st[2])
    out[2] = om
    out[3] = (m_c * d / I1) * om * om + gamma * (ctl.tau_r + ctl.tau_l)
    out[4] = -(m_c * d / I2) * v * om + delta_v * (ctl.tau_r - ctl.tau_l)
    return 0


def simulate_period(state0, double t0, double dt, int n_steps, pieces_in,
                    P_in, Kp_in, Kd_in, params):
    """Compiled twin of the reference kernel; same signature and outputs."""
    cdef double[:, ::1] pieces = np.ascontiguousarray(pieces_in, dtype=np.float64)
    cdef double[:, ::1] P = np.ascontiguousarray(P_in, dtype=np.float64)
    cdef double[:, ::1] Kp = np.ascontiguousarray(Kp_in, dtype=np.float64)
    cdef double[:, ::1] Kd = np.ascontiguousarray(Kd_in, dtype=np.float64)
    cdef double par[8]
    cdef int i, j
    for i in range(8):
        par[i] = float(params[i])

    states_arr = np.empty((n_steps + 1, 5))
    taus_arr = np.empty((n_steps + 1, 2))
    refs_arr = np.empty((n_steps + 1, 2))
    errs_arr = np.empty(n_steps + 1)
    v_arr = np.empty(n_steps + 1)
    cdef double[:, ::1] states = states_arr
    cdef double[:, ::1] taus = taus_arr
    cdef double[:, ::1] refs = refs_arr
    cdef double[::1] errs = errs_arr
    cdef double[::1] vvals = v_arr

    cdef double st[5]
    cdef double s2[5]
    cdef double s3[5]
    cdef double s4[5]
    cdef double k1[5]
    cdef double k2[5]
    cdef double k3[5]
    cdef double k4[5]
    for j in range(5):
        st[j] = float(state0[j])

    cdef double t
    cdef int idx, fail = 0
    cdef Ctl ctl
    cdef Ref ref
    cdef double z0, z1, z2, z3

    with nogil:
        for i in range(n_steps):
            t = t0 + i * dt
            idx = _locate(pieces, t + 0.5 * dt)
            ref = _eval_row(pieces, idx, t)
            if _control(st, ref, P, Kp, Kd, par, &ctl):
                fail = 1
                break
            for j in range(5):
                states[i, j] = st[j]
            taus[i, 0] = ctl.tau_r
            taus[i, 1] = ctl.tau_l
            refs[i, 0] = ref.px
            refs[i, 1] = ref.py
            errs[i] = hypot(ctl.ex, ctl.ey)
            z0 = ctl.ex; z1 = ctl.ey; z2 = ctl.edx; z3 = ctl.edy
            vvals[i] = (
                z0 * (P[0, 0] * z0 + P[0, 1] * z1 + P[0, 2] * z2 + P[0, 3] * z3)
                + z1 * (P[1, 0] * z0 + P[1, 1] * z1 + P[1, 2] * z2 + P[1, 3] * z3)
                + z2 * (P[2, 0] * z0 + P[2, 1] * z1 + P[2, 2] * z2 + P[2, 3] * z3)
                + z3 * (P[3, 0] * z0 + P[3, 1] * z1 + P[3, 2] * z2 + P[3, 3] * z3)
                + 0.5 * (st[4] - ctl.omega_d) * (st[4] - ctl.omega_d)
            )
            if _deriv(st, t, pieces, idx, P, Kp, Kd, par, k1):
                fail = 1
                break
            for j in range(5):
                s2[j] = st[j] + 0.5 * dt * k1[j]
            if _deriv(s2, t + 0.5 * dt, pieces, idx, P, Kp, Kd, par, k2):
                fail = 1
                break
            for j in range(5):
                s3[j] = st[j] + 0.5 * dt * k2[j]
            if _deriv(s3, t + 0.5 * dt, pieces, idx, P, Kp, Kd, par, k3):
                fail = 1
                break
            for j in range(5):
                s4[j] = st[j] + dt * k3[j]
            if _deriv(s4, t + dt, pieces, idx, P, Kp, Kd, par, k4):
                fail = 1
                break
            for j in range(5):
                st[j] = st[j] + (dt / 6.0) * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j])
            for j in range(5):
                if not isfinite(st[j]):
                    fail = 2
                    break
            if fail:
                break
    if fail == 2:
        raise FloatingPointError("integration fault: non-finite state")
    if fail:
        raise FloatingPointError(
            f"speed guard: |v| fell below the minimum during step {i}"
        )
    t = t0 + n_steps * dt
    idx = _locate(pieces, t - 0.5 * dt)
    ref = _eval_row(pieces, idx, t)
    if _control(st, ref, P, Kp, Kd, par, &ctl):
        raise FloatingPointError("speed guard at the closing sample")
    for j in range(5):
        states[n_steps, j] = st[j]
    taus[n_steps, 0] = ctl.tau_r
    taus[n_steps, 1] = ctl.tau_l
    refs[n_steps, 0] = ref.px
    refs[n_steps, 1] = ref.py
    errs[n_steps] = hypot(ctl.ex, ctl.ey)
    z0 = ctl.ex; z1 = ctl.ey; z2 = ctl.edx; z3 = ctl.edy
    v_arr[n_steps] = (
        z0 * (P[0, 0] * z0 + P[0, 1] * z1 + P[0, 2] * z2 + P[0, 3] * z3)
        + z1 * (P[1, 0] * z0 + P[1, 1] * z1 + P[1, 2] * z2 + P[1, 3] * z3)
        + z2 * (P[2, 0] * z0 + P[2, 1] * z1 + P[2, 2] * z2 + P[2, 3] * z3)
        + z3 * (P[3, 0] * z0 + P[3, 1] * z1 + P[3, 2] * z2 + P[3, 3] * z3)
        + 0.5 * (st[4] - ctl.omega_d) * (st[4] - ctl.omega_d)
    )
    return states_arr, taus_arr, refs_arr, errs_arr, v_arr
