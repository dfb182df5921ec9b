"""Tests for the batch plotting tool."""

import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import plots

FIXTURES = Path(__file__).parent / "fixtures"


def rect(x0, y0, x1, y1):
    return {
        "A": [[1, 0], [-1, 0], [0, 1], [0, -1]],
        "b": [x1, -x0, y1, -y0],
    }


def synthetic_artifacts(tmp_path, rows=120):
    """Small schema-conforming trace.csv and sets.json."""
    cells = []
    labels = {"c00": "base", "c10": "recharge", "c11": "gather"}
    for (sx, sy), sym in [((0, 0), "c00"), ((1, 0), "c10"), ((1, 1), "c11"), ((0, 1), "c01")]:
        cell = {"symbol": sym, "representative": [sx + 0.5, sy + 0.5],
                "label": [labels[sym]] if sym in labels else []}
        cell.update(rect(sx, sy, sx + 1, sy + 1))
        cells.append(cell)
    sets = {
        "config_hash": "x" * 16,
        "delta": 1e-3,
        "cells": cells,
        "invariant_sets": {},
        "reach_sets": {},
        "unions": {},
        "edges": [["c00", "c10"], ["c10", "c11"], ["c11", "c01"], ["c01", "c00"]],
        "plan": {"cells": ["c00", "c10", "c11", "c01"], "loop_start": 0},
    }
    sets_path = tmp_path / "sets.json"
    sets_path.write_text(json.dumps(sets))

    trace_path = tmp_path / "trace.csv"
    m = 10
    with open(trace_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(plots.TRACE_COLUMNS)
        for r in range(rows):
            t = 0.01 * r
            x = 0.5 + 0.3 * np.sin(0.2 * t)
            y = 0.5 + 0.3 * np.cos(0.2 * t)
            k = r // m
            row = [t, x, y, 0.0, 0.1, 0.0, 0.0, 0.0, x, y,
                   1e-5 * (1 + np.sin(r / 7.0) ** 2), 1e-8 * (r + 1)]
            row += [0.5 + 0.05 * k, 0.5, 0.05, 0.0, "c00",
                    "c10" if (r % m == 0 and k == 3) else "",
                    "c00", "c10", str(k)]
            w.writerow(["%.17g" % v if isinstance(v, float) else v for v in row])
    return trace_path, sets_path


def test_environment_layers(tmp_path):
    trace, sets = synthetic_artifacts(tmp_path)
    out = tmp_path / "env.png"
    info = plots.render(plots.PlotJob(trace, sets, out, "environment"))
    assert out.exists() and out.stat().st_size > 0
    assert info["layers"]["cells"] == 4
    assert info["layers"]["arrows"] == 4
    assert info["layers"]["waypoints"] >= 2
    assert info["layers"]["path_points"] > 0


def test_environment_empty_trace(tmp_path):
    trace, sets = synthetic_artifacts(tmp_path, rows=0)
    # wipe the trace body, keeping the header
    trace.write_text(",".join(plots.TRACE_COLUMNS) + "\n")
    out = tmp_path / "env.png"
    info = plots.render(plots.PlotJob(trace, sets, out, "environment"))
    assert out.exists()
    assert info["layers"]["cells"] == 4
    assert info["layers"]["path_points"] == 0


def test_tracking_and_lyapunov(tmp_path):
    trace, sets = synthetic_artifacts(tmp_path)
    info = plots.render(plots.PlotJob(trace, sets, tmp_path / "t.png", "tracking"))
    rows = list(csv.DictReader(open(trace)))
    expected = max(float(r["tracking_error"]) for r in rows)
    assert info["max_tracking_error"] == expected
    info2 = plots.render(plots.PlotJob(trace, sets, tmp_path / "v.png", "lyapunov"))
    assert info2["max_V"] == max(float(r["V"]) for r in rows)


def test_render_deterministic_bytes(tmp_path):
    trace, sets = synthetic_artifacts(tmp_path)
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    plots.render(plots.PlotJob(trace, sets, a, "environment"))
    plots.render(plots.PlotJob(trace, sets, b, "environment"))
    assert a.read_bytes() == b.read_bytes()


def test_schema_violations(tmp_path):
    trace, sets = synthetic_artifacts(tmp_path)
    # missing column
    bad = tmp_path / "bad.csv"
    rows = open(trace).read().splitlines()
    header = rows[0].split(",")
    header.remove("tracking_error")
    bad.write_text("\n".join([",".join(header)] + rows[1:]))
    rc = plots.main(["--trace", str(bad), "--sets", str(sets), "--kind", "tracking",
                     "--out", str(tmp_path / "x.png")])
    assert rc == 2
    # malformed sets
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps({"cells": []}))
    rc = plots.main(["--trace", str(trace), "--sets", str(broken), "--kind", "environment",
                     "--out", str(tmp_path / "x.png")])
    assert rc == 2
    # unknown kind is rejected by argparse
    with pytest.raises(SystemExit):
        plots.main(["--trace", str(trace), "--sets", str(sets), "--kind", "zzz",
                    "--out", str(tmp_path / "x.png")])


@pytest.fixture(scope="session")
def real_artifacts(tmp_path_factory):
    """Artifacts produced through the primary package's CLI."""
    if shutil.which("lcc") is None:
        pytest.skip("primary lcc CLI not installed")
    out = tmp_path_factory.mktemp("run")
    fixture_sets = FIXTURES / "sets.json"
    if fixture_sets.exists():
        shutil.copy(fixture_sets, out / "sets.json")
    proc = subprocess.run(
        ["lcc", "run", "default", "--out", str(out),
         "--override", "run.loop_iterations=1"],
        capture_output=True,
        text=True,
        timeout=900,
    )
    assert proc.returncode == 0, proc.stderr + proc.stdout
    return out


def test_acceptance_real_artifacts(real_artifacts, tmp_path):
    """[SECONDARY] renders all kinds from emitted artifacts with zero schema
    errors; the tracking figure's maximum equals the report stat exactly."""
    trace = real_artifacts / "trace.csv"
    sets = real_artifacts / "sets.json"
    for kind in plots.KINDS:
        rc = plots.main(["--trace", str(trace), "--sets", str(sets),
                         "--kind", kind, "--out", str(tmp_path / f"{kind}.png")])
        assert rc == 0, kind
        assert (tmp_path / f"{kind}.png").stat().st_size > 0
    info = plots.render(plots.PlotJob(trace, sets, tmp_path / "t2.png", "tracking"))
    report = json.loads((real_artifacts / "report.json").read_text())
    assert info["max_tracking_error"] == report["stats"]["max_tracking_error"]
    print("[acceptance] plots render all kinds; tracking max equals report stat: PASS")
