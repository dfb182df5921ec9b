#!/usr/bin/env python3
"""Batch figure generation from a run's trace.csv and sets.json.

Three figure kinds:
  environment  cells colored by label, FSM plan arrows, MPC waypoints, path
  tracking     tracking-error time series with the delta bound
  lyapunov     Lyapunov certificate time series

Reads only the documented artifact schemas; exits nonzero with a message on
a schema violation.  Rendering is deterministic (fixed canvas, fixed colors,
no timestamps embedded in PNG output).

    python3 plots.py --trace trace.csv --sets sets.json --kind environment --out fig.png
"""

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import FancyArrowPatch, Polygon as MplPolygon

KINDS = ("environment", "tracking", "lyapunov")

# Fixed color mapping per proposition.
LABEL_COLORS = {
    "base": "#4878cf",      # blue
    "gather": "#6acc65",    # green
    "recharge": "#f2c14e",  # yellow
    "danger": "#d65f5f",    # red
}
UNLABELED = "#ececec"

TRACE_COLUMNS = [
    "t", "x", "y", "theta", "v", "omega", "tau_r", "tau_l", "x_d", "y_d",
    "tracking_error", "V", "px", "py", "pvx", "pvy", "cell", "event",
    "task_from", "task_to", "mpc_n",
]

FIGSIZE = (6.4, 6.4)
DPI = 130


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class PlotJob:
    trace: Path
    sets: Path
    out: Path
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        for path in (self.trace, self.sets):
            if not Path(path).exists():
                raise SchemaError(f"input file {path} does not exist")


def load_trace(path) -> dict:
    with open(path) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c for c in TRACE_COLUMNS if c not in reader.fieldnames]:
            missing = [] if reader.fieldnames is None else [
                c for c in TRACE_COLUMNS if c not in reader.fieldnames
            ]
            raise SchemaError(f"trace.csv missing columns: {missing or 'all'}")
        rows = list(reader)
    if not rows:
        return {"t": np.zeros(0), "xy": np.zeros((0, 2)), "err": np.zeros(0),
                "V": np.zeros(0), "pxy": np.zeros((0, 2)), "events": []}
    try:
        t = np.array([float(r["t"]) for r in rows])
        xy = np.array([[float(r["x"]), float(r["y"])] for r in rows])
        err = np.array([float(r["tracking_error"]) for r in rows])
        vval = np.array([float(r["V"]) for r in rows])
        pxy = np.array([[float(r["px"]), float(r["py"])] for r in rows])
    except (ValueError, KeyError) as exc:
        raise SchemaError(f"trace.csv has a malformed row: {exc}") from exc
    events = [(float(r["t"]), r["event"]) for r in rows if r["event"]]
    return {"t": t, "xy": xy, "err": err, "V": vval, "pxy": pxy, "events": events}


def load_sets(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"sets.json is not valid JSON: {exc}") from exc
    for key in ("cells", "plan", "delta"):
        if key not in data:
            raise SchemaError(f"sets.json missing key {key!r}")
    for cell in data["cells"]:
        for key in ("symbol", "A", "b", "representative"):
            if key not in cell:
                raise SchemaError(f"sets.json cell missing key {key!r}")
    if "cells" not in data["plan"] or "loop_start" not in data["plan"]:
        raise SchemaError("sets.json plan must carry 'cells' and 'loop_start'")
    return data


def polygon_vertices(A, b) -> np.ndarray:
    """Vertices of a bounded 2D polytope {A x <= b}, counterclockwise."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    pts = []
    m = A.shape[0]
    for i in range(m):
        for j in range(i + 1, m):
            M = A[[i, j]]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            v = np.linalg.solve(M, b[[i, j]])
            if np.all(A @ v <= b + 1e-7):
                pts.append(v)
    if len(pts) < 3:
        raise SchemaError("cell polytope has fewer than 3 vertices")
    pts = np.unique(np.round(np.asarray(pts), 9), axis=0)
    center = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0]))
    return pts[order]


def _waypoints(pxy: np.ndarray) -> np.ndarray:
    """Unique consecutive integrator positions (one dot per period)."""
    if pxy.shape[0] == 0:
        return pxy
    keep = [0]
    for i in range(1, pxy.shape[0]):
        if not np.array_equal(pxy[i], pxy[keep[-1]]):
            keep.append(i)
    return pxy[keep]


def render(job: PlotJob) -> dict:
    """Render the requested figure; returns layer counts and plotted stats."""
    trace = load_trace(job.trace)
    sets = load_sets(job.sets)
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    info = {"kind": job.kind}

    if job.kind == "environment":
        reps = {}
        for cell in sets["cells"]:
            verts = polygon_vertices(cell["A"], cell["b"])
            labels = cell.get("label") or []
            color = LABEL_COLORS.get(labels[0], UNLABELED) if labels else UNLABELED
            ax.add_patch(MplPolygon(verts, closed=True, facecolor=color,
                                    edgecolor="black", linewidth=0.8, zorder=1))
            rep = np.asarray(cell["representative"], dtype=float)
            reps[cell["symbol"]] = rep
            ax.text(*rep, cell["symbol"], ha="center", va="center",
                    fontsize=7, color="0.25", zorder=2)
        plan = sets["plan"]["cells"]
        arrows = 0
        if len(plan) >= 2:
            loop_start = int(sets["plan"]["loop_start"])
            hops = list(zip(plan, plan[1:])) + [(plan[-1], plan[loop_start])]
            for a, b in hops:
                if a not in reps or b not in reps:
                    raise SchemaError(f"plan references unknown cell {a!r} or {b!r}")
                arrow = FancyArrowPatch(
                    reps[a], reps[b], arrowstyle="-|>", mutation_scale=14,
                    color="#2b4ea8", shrinkA=12, shrinkB=12, linewidth=1.4, zorder=4,
                )
                ax.add_patch(arrow)
                arrows += 1
        wp = _waypoints(trace["pxy"])
        if wp.shape[0]:
            ax.plot(wp[:, 0], wp[:, 1], ".", color="#333333", markersize=3.5,
                    zorder=5, label="plan waypoints")
        if trace["xy"].shape[0]:
            ax.plot(trace["xy"][:, 0], trace["xy"][:, 1], "-", color="#111111",
                    linewidth=1.0, zorder=6, label="vehicle path")
        ax.set_aspect("equal")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_title("environment, plan, and executed path")
        info["layers"] = {
            "cells": len(sets["cells"]),
            "arrows": arrows,
            "waypoints": int(wp.shape[0]),
            "path_points": int(trace["xy"].shape[0]),
        }
        ax.margins(0.08)

    elif job.kind == "tracking":
        if trace["t"].shape[0] == 0:
            raise SchemaError("tracking figure needs a nonempty trace")
        ax.plot(trace["t"], trace["err"], "-", color="#2b4ea8", linewidth=0.9,
                label="tracking error")
        ax.axhline(float(sets["delta"]), color="#d65f5f", linewidth=1.0,
                   linestyle="--", label="delta bound")
        ax.set_xlabel("t [s]")
        ax.set_ylabel("position error [m]")
        ax.set_yscale("log")
        ax.set_title("tracking error")
        ax.legend(loc="upper right", fontsize=8)
        info["max_tracking_error"] = float(trace["err"].max())

    else:  # lyapunov
        if trace["t"].shape[0] == 0:
            raise SchemaError("lyapunov figure needs a nonempty trace")
        positive = np.maximum(trace["V"], 1e-30)
        ax.plot(trace["t"], positive, "-", color="#2b4ea8", linewidth=0.9, label="V")
        ax.set_xlabel("t [s]")
        ax.set_ylabel("V")
        ax.set_yscale("log")
        ax.set_title("Lyapunov certificate value")
        ax.legend(loc="upper right", fontsize=8)
        info["max_V"] = float(trace["V"].max())

    fig.savefig(job.out, dpi=DPI, metadata={"Software": "plots"})
    plt.close(fig)
    return info


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trace", required=True)
    ap.add_argument("--sets", required=True)
    ap.add_argument("--kind", required=True, choices=KINDS)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    try:
        job = PlotJob(Path(args.trace), Path(args.sets), Path(args.out), args.kind)
        info = render(job)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(info))
    return 0


if __name__ == "__main__":
    sys.exit(main())
