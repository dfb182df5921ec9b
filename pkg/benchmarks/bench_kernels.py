"""Benchmark: compiled tracking kernel vs the pure-Python reference.

Runs the same closed-loop workload (an S-curve reference over many control
periods) through both implementations and reports per-step timings.

    python3 benchmarks/bench_kernels.py [--periods 40] [--dt 0.005]
"""

import argparse
import math
import time

import numpy as np

from lcc import _kernels
from lcc.vehicle import VehicleParams, ctle_solve, reference_pieces


def build_workload(periods: int, T: float):
    rng = np.random.default_rng(0)
    vels = [np.array([0.1, 0.0])]
    for _ in range(periods):
        while True:
            cand = vels[-1] + rng.uniform(-0.03, 0.03, size=2)
            if np.linalg.norm(cand) >= 0.08:
                break
        vels.append(cand)
    pos = [np.zeros(2)]
    for v in vels[:-1]:
        pos.append(pos[-1] + T * v)
    pieces = reference_pieces(np.array(pos), np.array(vels), 1.0, T, 0.0)
    start = np.array([0.0, 0.0, math.atan2(vels[0][1], vels[0][0]), 0.1, 0.0])
    return pieces, start


def run(impl, periods, T, dt, pieces, start, P, Kp, Kd, par):
    m = int(round(T / dt))
    veh = start
    t0 = time.perf_counter()
    for k in range(periods):
        states, *_ = impl(veh, k * T, dt, m, pieces, P, Kp, Kd, par)
        veh = states[-1]
    elapsed = time.perf_counter() - t0
    return elapsed, periods * m, veh


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--periods", type=int, default=40)
    ap.add_argument("--dt", type=float, default=0.005)
    args = ap.parse_args()

    T = 0.5
    p = VehicleParams()
    sol = ctle_solve(p.K_p, p.K_d, p.sigma)
    par = (p.m_c, p.d, p.I1, p.I2, p.gamma, p.delta_v, p.sigma, p.v_min)
    pieces, start = build_workload(args.periods, T)

    t_py, steps, veh_py = run(
        _kernels.simulate_period_py, args.periods, T, args.dt, pieces, start, sol.P, p.K_p, p.K_d, par
    )
    print(f"pure python : {t_py:8.3f} s  ({steps / t_py:10.0f} steps/s)")

    if _kernels.IMPLEMENTATION == "cython":
        t_c, steps, veh_c = run(
            _kernels.simulate_period, args.periods, T, args.dt, pieces, start, sol.P, p.K_p, p.K_d, par
        )
        print(f"cython      : {t_c:8.3f} s  ({steps / t_c:10.0f} steps/s)")
        print(f"speedup     : {t_py / t_c:8.1f}x")
        print(f"final-state agreement: {np.abs(veh_py - veh_c).max():.3e}")
    else:
        print("cython      : unavailable (pure-Python fallback selected)")


if __name__ == "__main__":
    main()
