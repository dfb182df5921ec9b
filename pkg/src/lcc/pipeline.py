"""Scenario orchestration.

Loads a scenario config, runs offline synthesis (invariant sets, reachable
sets, FSM restriction, plan), executes the closed three-layer loop (FSM
commands, MPC planning at period T, continuous tracking at dt), evaluates
the signal-property monitors P1/P2/P3 and the relation monitors M1/M2, and
emits the trace, the set tables, and the composed-contract report.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import _kernels, contracts, geometry, signals
from .geometry import LinearDynamics, Polytope
from .gts import Gts
from .logic import BuchiAutomaton, LassoPlan, LassoWord, SynthesisError, eval_lasso, parse_ltl
from .planner import InfeasibleError, MpcConfig, TransitionTask, mpc_step
from .vehicle import VehicleParams, ctle_solve, reference_pieces

__all__ = [
    "PipelineError",
    "Scenario",
    "load_scenario",
    "default_scenario_path",
    "SynthesisResult",
    "synthesize",
    "Trace",
    "RunReport",
    "RunResult",
    "run",
    "monitor_P1",
    "monitor_P2",
    "monitor_P3",
    "monitor_M1",
    "monitor_M2",
    "sets_to_json",
    "report_to_json",
]

BOUNDED_TRACKING = "P1"
BOUNDED_EVENT_GAPS = "P2"
LTL_SATISFIED = "P3"
VEHICLE_MODEL_CLAIM = "M1"
PLANNER_MODEL_CLAIM = "M2"
GROUND_TRUTH = "S1"

_P1_NUM_TOL = 1e-6


class PipelineError(RuntimeError):
    pass


# -- scenario ----------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    partition: signals.Partition
    labels: dict
    ltl_text: str
    buchi: BuchiAutomaton
    planner: MpcConfig
    vehicle: VehicleParams
    delta: float
    epsilon: float
    alpha: float
    dt: float
    loop_iterations: int
    eventifier_l: int
    max_periods: int
    initial_position: np.ndarray
    initial_velocity: np.ndarray
    tol_m1: float
    raw: dict = field(repr=False)

    @property
    def phi(self):
        return parse_ltl(self.ltl_text)

    def config_hash(self) -> str:
        """Hash of the synthesis-relevant configuration only, so run-length
        or vehicle overrides still hit the cached set tables."""
        relevant = {
            "partition": self.raw.get("partition"),
            "ltl": self.raw.get("ltl"),
            "buchi": self.raw.get("buchi"),
            "planner": {
                k: v
                for k, v in (self.raw.get("planner") or {}).items()
                if k in ("N", "T", "dv_max", "v_max")
            },
            "delta": self.delta,
            "alpha": self.alpha,
            "initial_position": list(map(float, self.initial_position)),
        }
        return hashlib.sha256(
            json.dumps(relevant, sort_keys=True, default=str).encode()
        ).hexdigest()[:16]


def default_scenario_path() -> Path:
    return Path(resources.files("lcc").joinpath("data/ring3x3.yaml"))


def _deep_set(d: dict, dotted: str, value):
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        if k not in cur or not isinstance(cur[k], dict):
            cur[k] = {}
        cur = cur[k]
    cur[keys[-1]] = value


def _parse_override_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_scenario(path, overrides: dict | None = None, seed: int | None = None) -> Scenario:
    """Load and validate a scenario file, applying dotted-key overrides."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    for key, value in (overrides or {}).items():
        _deep_set(raw, key, value if not isinstance(value, str) else _parse_override_value(value))
    if seed is not None:
        raw["seed"] = int(seed)
    return _scenario_from_dict(raw)


def _scenario_from_dict(raw: dict) -> Scenario:
    cells = []
    reps = []
    labels = {}
    for cell in raw["partition"]["cells"]:
        poly = Polytope(np.asarray(cell["A"], dtype=float), np.asarray(cell["b"], dtype=float))
        cells.append((cell["symbol"], poly))
        reps.append(np.asarray(cell["representative"], dtype=float))
        if cell.get("label"):
            labels[cell["symbol"]] = frozenset([cell["label"]])
        else:
            labels[cell["symbol"]] = frozenset()
    partition = signals.Partition(cells, np.asarray(reps))
    _validate_interior_disjoint(partition)

    b = raw["buchi"]
    buchi = BuchiAutomaton(
        states=b["states"],
        initial=b["initial"],
        transitions=[(t["from"], [frozenset(s) for s in t["subsets"]], t["to"]) for t in b["transitions"]],
        accepting=b["accepting"],
        ap=b["ap"],
    )

    pl = raw["planner"]
    planner = MpcConfig(
        N=int(pl.get("N", 30)),
        T=float(pl["T"]),
        Q=np.asarray(pl["Q"], dtype=float) if "Q" in pl else np.diag([1.0, 1.0, 0.1, 0.1]),
        Q_f=np.asarray(pl["Q_f"], dtype=float) if "Q_f" in pl else 10.0 * np.diag([1.0, 1.0, 0.1, 0.1]),
        R=np.asarray(pl["R"], dtype=float) if "R" in pl else np.eye(2),
        dv_max=float(pl["dv_max"]),
        v_max=float(pl["v_max"]),
    )

    vh = raw.get("vehicle", {})
    vehicle = VehicleParams(
        m_c=float(vh.get("m_c", 1.0)),
        d=float(vh.get("d", 0.1)),
        I1=float(vh.get("I1", 1.0)),
        I2=float(vh.get("I2", 0.5)),
        gamma=float(vh.get("gamma", 1.0)),
        delta_v=float(vh.get("delta_v", 1.0)),
        sigma=float(vh.get("sigma", 2.0)),
        K_p=np.asarray(vh["K_p"], dtype=float) if "K_p" in vh else 4.0 * np.eye(2),
        K_d=np.asarray(vh["K_d"], dtype=float) if "K_d" in vh else 4.0 * np.eye(2),
        v_min=float(vh.get("v_min", 0.05)),
    )

    rn = raw.get("run", {})
    alpha = float(rn.get("alpha", 1.0))
    sampler = raw.get("sampler", {}) or {}
    delta = sampler.get("delta")
    if delta is None:
        delta = (3.0 / 32.0) * alpha * planner.T * planner.dv_max
    delta = float(delta)
    epsilon = sampler.get("epsilon")
    epsilon = delta if epsilon is None else float(epsilon)

    dt = float(rn.get("dt", planner.T / 100.0))
    steps = planner.T / dt
    if abs(steps - round(steps)) > 1e-9 or int(round(steps)) % 2 != 0:
        raise PipelineError("dt must divide T with an even number of steps per period")

    ev_l = rn.get("eventifier_l")
    ev_l = planner.N if ev_l is None else int(ev_l)

    tol = raw.get("tolerances", {}) or {}

    return Scenario(
        name=str(raw.get("name", "scenario")),
        seed=int(raw.get("seed", 0)),
        partition=partition,
        labels=labels,
        ltl_text=raw["ltl"],
        buchi=buchi,
        planner=planner,
        vehicle=vehicle,
        delta=delta,
        epsilon=epsilon,
        alpha=alpha,
        dt=dt,
        loop_iterations=int(rn.get("loop_iterations", 3)),
        eventifier_l=ev_l,
        max_periods=int(rn.get("max_periods", 2000)),
        initial_position=np.asarray(rn["initial_position"], dtype=float),
        initial_velocity=np.asarray(rn["initial_velocity"], dtype=float),
        tol_m1=float(tol.get("m1", 1e-3)),
        raw=raw,
    )


def _validate_interior_disjoint(partition: signals.Partition):
    cells = partition.cells
    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            inter = geometry.intersect(cells[i][1], cells[j][1])
            if not geometry.lp_feasible(inter):
                continue
            _, radius = geometry.chebyshev_center(inter)
            if radius > 1e-7:
                raise PipelineError(
                    f"cells {cells[i][0]!r} and {cells[j][0]!r} overlap (interior radius {radius:.2e})"
                )


# -- offline synthesis -------------------------------------------------------


@dataclass
class SynthesisResult:
    fsm: Gts
    plan: LassoPlan
    invariant_sets: dict  # symbol -> Polytope (4D)
    reach_sets: dict  # (from, to) -> Polytope (4D)
    unions: dict  # (from, to) -> Polytope (2D, shrunk)
    edges: list
    tasks: dict  # (from, to) -> TransitionTask template (n=0)
    delta: float
    config_hash: str


def _lift_position(poly2: Polytope) -> Polytope:
    A = np.hstack([poly2.A, np.zeros((poly2.nrows, 2))])
    return Polytope(A, poly2.b)


def _velocity_box(v_max: float) -> Polytope:
    A = np.hstack([np.zeros((4, 2)), np.vstack([np.eye(2), -np.eye(2)])])
    return Polytope(A, v_max * np.ones(4))


def _facet_adjacent(P: Polytope, Q: Polytope, tol: float = 1e-7) -> bool:
    """Closures share a full facet segment (not merely a corner point)."""
    inter = geometry.intersect(P, Q)
    if not geometry.lp_feasible(inter):
        return False
    pts = geometry.vertices_2d(inter)
    if pts.shape[0] < 2:
        return False
    span = max(
        np.linalg.norm(pts[a] - pts[b]) for a in range(len(pts)) for b in range(a + 1, len(pts))
    )
    return span > tol


def synthesize(sc: Scenario, progress: bool = False) -> SynthesisResult:
    """Offline synthesis: invariant sets, reachability-restricted FSM, plan."""
    dyn = sc.planner.dynamics
    U = Polytope.box([-sc.planner.dv_max] * 2, [sc.planner.dv_max] * 2)
    velbox = _velocity_box(sc.planner.v_max)
    symbols = [sym for sym, _ in sc.partition.cells]

    invariant_sets = {}
    for sym, cell in sc.partition.cells:
        shrunk = geometry.minkowski_shrink(cell, sc.delta)
        seed = geometry.intersect(_lift_position(shrunk), velbox)
        invariant_sets[sym] = geometry.max_control_invariant(seed, dyn, U)
        if progress:
            print(f"  C[{sym}]: {invariant_sets[sym].nrows} rows")

    pairs = []
    for i, (si, pi) in enumerate(sc.partition.cells):
        for j, (sj, pj) in enumerate(sc.partition.cells):
            if i != j and _facet_adjacent(pi, pj):
                pairs.append((si, sj))

    reach_sets, unions, edges, tasks = {}, {}, [], {}
    for (si, sj) in pairs:
        union = geometry.convex_union_2d(sc.partition.cell(si), sc.partition.cell(sj))
        shrunk = geometry.minkowski_shrink(union, sc.delta)
        constraint = geometry.intersect(_lift_position(shrunk), velbox)
        R = geometry.backward_reachable(invariant_sets[sj], sc.planner.N, constraint, dyn, U)
        reach_sets[(si, sj)] = R
        unions[(si, sj)] = shrunk
        if geometry.subset(invariant_sets[si], R):
            edges.append((si, sj))
            center2, _ = geometry.chebyshev_center(sc.partition.cell(sj))
            tasks[(si, sj)] = TransitionTask(
                si, sj, shrunk, invariant_sets[sj], n=0,
                x_f=np.concatenate([center2, np.zeros(2)]),
            )
        if progress:
            print(f"  edge {si}->{sj}: {'ok' if (si, sj) in edges else 'infeasible'}")

    start_cell = sc.partition.locate(sc.initial_position)
    if not edges:
        raise SynthesisError("no feasible FSM transitions (empty edge set)")
    fsm = Gts(
        states=symbols,
        initial={start_cell},
        inputs=set(edges),
        transitions={(a, (a, b), b) for (a, b) in edges},
        output_map={(a, (a, b), b): (a, b) for (a, b) in edges},
    )
    plan = _synthesize_plan(sc, fsm)
    word = plan.word(sc.labels)
    if not eval_lasso(sc.phi, word):
        raise SynthesisError("synthesized plan fails the LTL certificate")
    return SynthesisResult(
        fsm=fsm,
        plan=plan,
        invariant_sets=invariant_sets,
        reach_sets=reach_sets,
        unions=unions,
        edges=edges,
        tasks=tasks,
        delta=sc.delta,
        config_hash=sc.config_hash(),
    )


def _synthesize_plan(sc: Scenario, fsm: Gts) -> LassoPlan:
    from .logic import synthesize_policy

    return synthesize_policy(fsm, sc.buchi, sc.labels)


# -- trace -------------------------------------------------------------------

TRACE_COLUMNS = [
    "t", "x", "y", "theta", "v", "omega", "tau_r", "tau_l", "x_d", "y_d",
    "tracking_error", "V", "px", "py", "pvx", "pvy", "cell", "event",
    "task_from", "task_to", "mpc_n",
]


@dataclass
class Trace:
    """Dense closed-loop record plus per-period planner data.

    Dense arrays have one row per dt step (shared period boundaries appear
    once); per-period arrays have one entry per control period boundary.
    """

    dt: float
    T: float
    dense: np.ndarray  # (R, 12): t..V columns
    period_state: np.ndarray  # (K+1, 4) integrator states at boundaries
    period_cell: list  # K+1 symbols
    events: list  # (period index, entered symbol)
    commands: list  # per period: (task_from, task_to, n)

    @property
    def steps_per_period(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def periods(self) -> int:
        return len(self.period_state) - 1

    def to_csv(self, path):
        m = self.steps_per_period
        K = self.periods
        event_map = {k: c for (k, c) in self.events}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for r in range(self.dense.shape[0]):
                k = min(r // m, K)
                boundary = r % m == 0
                row = ["%.17g" % v for v in self.dense[r]]
                row += ["%.17g" % v for v in self.period_state[k]]
                row.append(str(self.period_cell[k]))
                row.append(str(event_map.get(k, "")) if boundary else "")
                tf, tt, n = self.commands[min(k, K - 1)] if self.commands else ("", "", 0)
                row += [str(tf), str(tt), str(n)]
                w.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "Trace":
        rows = []
        with open(path) as fh:
            reader = csv.DictReader(fh)
            for rec in reader:
                rows.append(rec)
        dense = np.array(
            [[float(rec[c]) for c in TRACE_COLUMNS[:12]] for rec in rows]
        )
        dt = float(dense[1, 0] - dense[0, 0])
        # Steps per period: the command columns change at every boundary.
        key0 = (rows[0]["task_from"], rows[0]["task_to"], rows[0]["mpc_n"])
        m = 1
        while m < len(rows) and (rows[m]["task_from"], rows[m]["task_to"], rows[m]["mpc_n"]) == key0:
            m += 1
        if m == len(rows):
            m = len(rows) - 1
        K = (len(rows) - 1) // m
        period_state = np.zeros((K + 1, 4))
        period_cell = []
        commands = []
        for k in range(K + 1):
            r = k * m
            period_state[k] = [float(rows[r][c]) for c in ("px", "py", "pvx", "pvy")]
            period_cell.append(rows[r]["cell"])
            if k < K:
                commands.append((rows[r]["task_from"], rows[r]["task_to"], int(rows[r]["mpc_n"])))
        events = []
        for k in range(K + 1):
            rec = rows[k * m]
            if rec["event"]:
                events.append((k, rec["event"]))
        return cls(dt=dt, T=dt * m, dense=dense, period_state=period_state,
                   period_cell=period_cell, events=events, commands=commands)


# -- monitors ----------------------------------------------------------------


def monitor_P1(dense_positions: np.ndarray, dt: float, T: float, delta: float) -> dict:
    """Dense-grid tracking property: the path stays within delta (plus a
    1e-6 numerical allowance) of the linear interpolation of its own samples.
    """
    m = int(round(T / dt))
    K = (dense_positions.shape[0] - 1) // m
    if K < 1:
        return {"ok": True, "first_violation_t": None, "max_deviation": 0.0, "delta": delta}
    trace = signals.DenseTrace(dense_positions[: K * m + 1], dt)
    sampled = signals.sample(trace, T)
    interp = signals.interpolate_linear(sampled, T, dt)
    dev = np.abs(trace.values - interp.values).max(axis=1)
    worst = int(np.argmax(dev))
    ok = bool(dev[worst] <= delta + _P1_NUM_TOL)
    return {
        "ok": ok,
        "first_violation_t": None if ok else float(np.argmax(dev > delta + _P1_NUM_TOL) * dt),
        "max_deviation": float(dev[worst]),
        "delta": delta,
    }


def monitor_P2(cell_word: list, N: int) -> dict:
    """Symbol changes of the quantized middle-layer word at most N steps apart."""
    word = signals.SymbolWord(cell_word)
    ok = signals.inverse_eventify_contains(word, signals.eventify(word), N)
    changes = [k for k in range(1, len(cell_word)) if cell_word[k] != cell_word[k - 1]]
    gaps = []
    prev = 0
    for c in changes:
        gaps.append(c - prev)
        prev = c
    first_violation = None
    if not ok:
        pos = 0
        for k in range(len(cell_word)):
            if k + N > len(cell_word) - 1:
                break
            if all(cell_word[k + r] == cell_word[k] for r in range(1, N + 1)):
                first_violation = k
                break
    return {
        "ok": bool(ok),
        "first_violation_index": first_violation,
        "max_gap": max(gaps) if gaps else 0,
        "bound": N,
    }


def monitor_P3(event_symbols: list, labels: dict, plan: LassoPlan, phi) -> dict:
    """Executed event word matches the plan and its lasso satisfies the formula."""
    for k, sym in enumerate(event_symbols):
        if sym != plan.cell_at(k):
            return {
                "ok": False,
                "status": "false",
                "mismatch_index": k,
                "expected": plan.cell_at(k),
                "got": sym,
            }
    loop_len = len(plan.loop)
    completed = (len(event_symbols) - 1 - plan.loop_start) // loop_len if len(event_symbols) > plan.loop_start else 0
    if completed < 1:
        return {"ok": False, "status": "inconclusive-prefix", "events_seen": len(event_symbols)}
    word = plan.word(labels)
    ok = eval_lasso(phi, word)
    return {"ok": bool(ok), "status": "true" if ok else "false", "loops_seen": completed}


def monitor_M1(
    dense_states: np.ndarray,
    period_state: np.ndarray,
    dt: float,
    T: float,
    tol: float,
) -> dict:
    """Vehicle matches the integrator segment midpoints at half-sample times.

    At t = (k-1)T + T/2 the interpolated reference equals the linear midpoint
    of integrator segment (k-1, k); exact tracking puts the vehicle there in
    position and velocity.
    """
    m = int(round(T / dt))
    half = m // 2
    worst_pos = worst_vel = 0.0
    first_violation = None
    K = period_state.shape[0] - 1
    for k in range(1, K + 1):
        r = (k - 1) * m + half
        if r >= dense_states.shape[0]:
            break
        x, y, theta, v, _ = dense_states[r]
        pos = np.array([x, y])
        vel = v * np.array([math.cos(theta), math.sin(theta)])
        pred_pos = period_state[k - 1, :2] + 0.5 * T * period_state[k - 1, 2:]
        pred_vel = period_state[k - 1, 2:]
        dp = float(np.abs(pos - pred_pos).max())
        dv = float(np.abs(vel - pred_vel).max())
        worst_pos, worst_vel = max(worst_pos, dp), max(worst_vel, dv)
        if (dp > tol or dv > tol) and first_violation is None:
            first_violation = (k - 1) * T + 0.5 * T
    ok = first_violation is None
    return {
        "ok": ok,
        "first_violation_t": first_violation,
        "max_position_mismatch": worst_pos,
        "max_velocity_mismatch": worst_vel,
        "tol": tol,
    }


def monitor_M2(period_state: np.ndarray, events: list, invariant_sets: dict) -> dict:
    """At every event the integrator state lies in the entered cell's
    control invariant set."""
    first_violation = None
    for (k, sym) in events:
        if k == 0:
            continue
        if not invariant_sets[sym].contains(period_state[k], tol=1e-7):
            first_violation = k
            break
    return {"ok": first_violation is None, "first_violation_index": first_violation, "events": len(events)}


# -- run ---------------------------------------------------------------------


@dataclass
class RunReport:
    monitors: dict
    composed: dict
    stats: dict

    @property
    def ok(self) -> bool:
        return bool(self.composed.get("ok"))


@dataclass
class RunResult:
    trace: Trace
    report: RunReport
    synthesis: SynthesisResult


def _case_study_layers() -> list:
    return [
        contracts.LayerContract(
            model_below=GROUND_TRUTH, prop_above=BOUNDED_EVENT_GAPS,
            model_here=VEHICLE_MODEL_CLAIM, prop_here=BOUNDED_TRACKING,
        ),
        contracts.LayerContract(
            model_below=VEHICLE_MODEL_CLAIM, prop_above=LTL_SATISFIED,
            model_here=PLANNER_MODEL_CLAIM, prop_here=BOUNDED_EVENT_GAPS,
        ),
        contracts.LayerContract(
            model_below=PLANNER_MODEL_CLAIM, prop_above=contracts.TOP,
            model_here=contracts.TOP, prop_here=LTL_SATISFIED,
        ),
    ]


def run(sc: Scenario, synthesis: SynthesisResult | None = None, progress: bool = False) -> RunResult:
    """Execute the closed three-layer loop and evaluate all monitors."""
    t_start = time.time()
    synth = synthesis if synthesis is not None else synthesize(sc, progress=progress)
    plan = synth.plan
    dyn = sc.planner.dynamics
    m = int(round(sc.planner.T / sc.dt))
    T = sc.planner.T

    start_cell = sc.partition.locate(sc.initial_position)
    if plan.cells[0] != start_cell:
        raise PipelineError(f"plan starts at {plan.cells[0]!r} but the vehicle starts in {start_cell!r}")
    x2 = np.concatenate([sc.initial_position, sc.initial_velocity])
    if not synth.invariant_sets[start_cell].contains(x2, tol=1e-7):
        raise PipelineError("initial integrator state outside the start cell's invariant set")
    speed = float(np.linalg.norm(sc.initial_velocity))
    if speed < sc.vehicle.v_min:
        raise PipelineError(f"initial speed {speed:.3f} below the guard {sc.vehicle.v_min}")
    heading = math.atan2(sc.initial_velocity[1], sc.initial_velocity[0])
    veh = np.array([sc.initial_position[0], sc.initial_position[1], heading, speed, 0.0])

    sol = ctle_solve(sc.vehicle.K_p, sc.vehicle.K_d, sc.vehicle.sigma)
    kparams = (
        sc.vehicle.m_c, sc.vehicle.d, sc.vehicle.I1, sc.vehicle.I2,
        sc.vehicle.gamma, sc.vehicle.delta_v, sc.vehicle.sigma, sc.vehicle.v_min,
    )

    dense_rows = []
    closing_row = None
    period_state = [x2.copy()]
    period_cell = [start_cell]
    events = []
    commands = []
    mpc_stats = {"solves": 0, "infeasible": 0, "max_plan_violation": 0.0}

    t_index = 0  # completed transitions
    task = synth.tasks[plan.command_at(0)]
    loop_len = len(plan.loop)
    loops_done = 0
    prev_x2 = None
    k = 0
    failure = None

    while loops_done < sc.loop_iterations and k < sc.max_periods:
        try:
            step = mpc_step(x2, task, sc.planner)
        except InfeasibleError as exc:
            mpc_stats["infeasible"] += 1
            failure = f"MPC infeasible at period {k}: {exc}"
            break
        mpc_stats["solves"] += 1
        next_x2 = step.plan[1]
        next2_x2 = step.plan[2] if sc.planner.N >= 2 else dyn.A @ next_x2

        if prev_x2 is None:
            knots = np.vstack([x2, next_x2, next2_x2])
            t0_pieces = k * T
        else:
            knots = np.vstack([prev_x2, x2, next_x2, next2_x2])
            t0_pieces = (k - 1) * T
        pieces = reference_pieces(knots[:, :2], knots[:, 2:], sc.alpha, T, t0=t0_pieces)
        try:
            states, taus, refs, errs, vvals = _kernels.simulate_period(
                veh, k * T, sc.dt, m, pieces, sol.P, sc.vehicle.K_p, sc.vehicle.K_d, kparams
            )
        except FloatingPointError as exc:
            failure = f"vehicle integration fault at period {k}: {exc}"
            break
        block = np.column_stack([
            k * T + sc.dt * np.arange(m),
            states[:m], taus[:m], refs[:m], errs[:m], vvals[:m],
        ])
        dense_rows.append(block)
        closing_row = np.column_stack([
            np.array([(k + 1) * T]),
            states[m:], taus[m:], refs[m:], errs[m:], vvals[m:],
        ])
        veh = states[-1].copy()

        commands.append((task.from_cell, task.to_cell, task.n))
        prev_x2 = x2
        x2 = next_x2.copy()
        period_state.append(x2.copy())
        cell_now = sc.partition.locate(x2[:2])
        period_cell.append(cell_now)
        k += 1

        if cell_now != period_cell[-2]:
            events.append((k, cell_now))
        if synth.invariant_sets[task.to_cell].contains(x2, tol=1e-9):
            t_index += 1
            if t_index - plan.loop_start >= loop_len and (t_index - plan.loop_start) % loop_len == 0:
                loops_done = (t_index - plan.loop_start) // loop_len
            task = synth.tasks[plan.command_at(t_index)]
        else:
            task = step.task

    if k >= sc.max_periods and loops_done < sc.loop_iterations and failure is None:
        failure = f"run cap reached at {k} periods with {loops_done} loops"
    if not dense_rows:
        raise PipelineError(failure or "run produced no full period")

    dense_rows.append(closing_row)
    dense = np.vstack(dense_rows)
    trace = Trace(
        dt=sc.dt, T=T, dense=dense,
        period_state=np.asarray(period_state),
        period_cell=period_cell,
        events=events,
        commands=commands,
    )
    report = evaluate_monitors(sc, synth, trace, mpc_stats, failure, time.time() - t_start, sol.lam)
    return RunResult(trace=trace, report=report, synthesis=synth)


def evaluate_monitors(
    sc: Scenario,
    synth: SynthesisResult,
    trace: Trace,
    mpc_stats: dict,
    failure: str | None,
    runtime_s: float,
    lam: float,
) -> RunReport:
    dense = trace.dense
    positions = dense[:, 1:3]
    states = dense[:, 1:6]
    p1 = monitor_P1(positions, trace.dt, trace.T, sc.delta)
    p2 = monitor_P2(trace.period_cell, sc.eventifier_l)
    event_symbols = [trace.period_cell[0]] + [sym for (_, sym) in trace.events]
    p3 = monitor_P3(event_symbols, sc.labels, synth.plan, sc.phi)
    m1 = monitor_M1(states, trace.period_state, trace.dt, trace.T, sc.tol_m1)
    m2 = monitor_M2(trace.period_state, trace.events, synth.invariant_sets)
    feas = {
        "ok": mpc_stats["infeasible"] == 0 and failure is None,
        **mpc_stats,
        "failure": failure,
    }
    monitors = {
        BOUNDED_TRACKING: p1,
        BOUNDED_EVENT_GAPS: p2,
        LTL_SATISFIED: p3,
        VEHICLE_MODEL_CLAIM: m1,
        PLANNER_MODEL_CLAIM: m2,
        "mpc_feasibility": feas,
    }
    layered = contracts.compose_layers(_case_study_layers())
    atom_verdicts = {
        VEHICLE_MODEL_CLAIM: m1["ok"],
        PLANNER_MODEL_CLAIM: m2["ok"],
        BOUNDED_TRACKING: p1["ok"],
        BOUNDED_EVENT_GAPS: p2["ok"],
        LTL_SATISFIED: p3["ok"],
        contracts.TOP: True,
    }
    failing = [a for a in layered["guarantee_atoms"] if not atom_verdicts.get(a, False)]
    counterexample = None
    if failing:
        a = failing[0]
        mon = monitors.get(a, {})
        stamp = mon.get("first_violation_t", mon.get("first_violation_index"))
        counterexample = f"{a}@{stamp}"
    composed = {
        "ok": not failing and feas["ok"],
        "guarantee_atoms": layered["guarantee_atoms"],
        "assumption_atoms": layered["assumption_atoms"],
        "atom_verdicts": {k: bool(v) for k, v in atom_verdicts.items() if k != contracts.TOP},
        "counterexample": counterexample,
    }
    gaps = p2["max_gap"]
    speeds = dense[:, 4]
    stats = {
        "max_tracking_error": float(dense[:, 10].max()),
        "max_inter_event_gap": int(gaps),
        "loop_count": p3.get("loops_seen", 0),
        "periods": trace.periods,
        "events": len(trace.events),
        "min_speed": float(np.abs(speeds).min()),
        "lambda": float(lam),
        "runtime_s": float(runtime_s),
        "delta": float(sc.delta),
    }
    return RunReport(monitors=monitors, composed=composed, stats=stats)


# -- artifact serialization ---------------------------------------------------


def sets_to_json(sc: Scenario, synth: SynthesisResult) -> dict:
    return {
        "config_hash": synth.config_hash,
        "delta": synth.delta,
        "cells": [
            {
                "symbol": sym,
                "A": poly.A.tolist(),
                "b": poly.b.tolist(),
                "representative": sc.partition.representative(sym).tolist(),
                "label": sorted(sc.labels.get(sym, ())),
            }
            for sym, poly in sc.partition.cells
        ],
        "invariant_sets": {s: p.to_dict() for s, p in synth.invariant_sets.items()},
        "reach_sets": {f"{a}->{b}": p.to_dict() for (a, b), p in synth.reach_sets.items()},
        "unions": {f"{a}->{b}": p.to_dict() for (a, b), p in synth.unions.items()},
        "edges": [[a, b] for (a, b) in synth.edges],
        "plan": {"cells": list(synth.plan.cells), "loop_start": synth.plan.loop_start},
    }


def synthesis_from_json(sc: Scenario, data: dict) -> SynthesisResult | None:
    """Rebuild a SynthesisResult from a sets.json payload when the hash matches."""
    if data.get("config_hash") != sc.config_hash():
        return None
    invariant_sets = {s: Polytope.from_dict(d) for s, d in data["invariant_sets"].items()}
    reach_sets = {}
    for key, d in data["reach_sets"].items():
        a, b = key.split("->")
        reach_sets[(a, b)] = Polytope.from_dict(d)
    unions = {}
    for key, d in data["unions"].items():
        a, b = key.split("->")
        unions[(a, b)] = Polytope.from_dict(d)
    edges = [tuple(e) for e in data["edges"]]
    tasks = {}
    for (a, b) in edges:
        center2, _ = geometry.chebyshev_center(sc.partition.cell(b))
        tasks[(a, b)] = TransitionTask(
            a, b, unions[(a, b)], invariant_sets[b], n=0,
            x_f=np.concatenate([center2, np.zeros(2)]),
        )
    start_cell = sc.partition.locate(sc.initial_position)
    fsm = Gts(
        states=[s for s, _ in sc.partition.cells],
        initial={start_cell},
        inputs=set(edges),
        transitions={(a, (a, b), b) for (a, b) in edges},
        output_map={(a, (a, b), b): (a, b) for (a, b) in edges},
    )
    plan = LassoPlan(tuple(data["plan"]["cells"]), int(data["plan"]["loop_start"]))
    return SynthesisResult(
        fsm=fsm, plan=plan, invariant_sets=invariant_sets, reach_sets=reach_sets,
        unions=unions, edges=edges, tasks=tasks, delta=float(data["delta"]),
        config_hash=data["config_hash"],
    )


def report_to_json(report: RunReport) -> dict:
    def clean(obj):
        if isinstance(obj, dict):
            return {str(k): clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        return obj

    return clean({"monitors": report.monitors, "composed": report.composed, "stats": report.stats})
