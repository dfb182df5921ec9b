"""Command-line front door.

Subcommands: run (synthesize + execute + monitors), synth (offline synthesis
only), invariant-sets (compute and cache the set tables), check-relations
(simulation checking between two serialized systems).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .gts import Gts
from .logic import SynthesisError
from .relations import SymbolTransducer, holds_alt_fsim, holds_fsim, largest_alt_fsim, largest_fsim


def _add_common(sub):
    sub.add_argument("scenario", help="scenario YAML file, or 'default'")
    sub.add_argument("--out", default="out", help="output directory (default: ./out)")
    sub.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sub.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted-path config override, e.g. planner.N=10 (repeatable)",
    )


def _scenario_from_args(args) -> pipeline.Scenario:
    path = pipeline.default_scenario_path() if args.scenario == "default" else Path(args.scenario)
    overrides = {}
    for item in args.override:
        key, _, value = item.partition("=")
        if not _ or not key:
            raise SystemExit(f"bad override {item!r}; expected KEY=VALUE")
        overrides[key] = value
    return pipeline.load_scenario(path, overrides=overrides, seed=args.seed)


def _load_or_synthesize(sc, out: Path, progress=True):
    sets_path = out / "sets.json"
    if sets_path.exists():
        try:
            cached = pipeline.synthesis_from_json(sc, json.loads(sets_path.read_text()))
        except Exception:
            cached = None
        if cached is not None:
            print(f"loaded cached sets from {sets_path}")
            return cached
    synth = pipeline.synthesize(sc, progress=progress)
    out.mkdir(parents=True, exist_ok=True)
    sets_path.write_text(json.dumps(pipeline.sets_to_json(sc, synth), indent=1))
    print(f"wrote {sets_path}")
    return synth


def cmd_run(args) -> int:
    sc = _scenario_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        synth = _load_or_synthesize(sc, out)
        result = pipeline.run(sc, synthesis=synth)
    except (SynthesisError, pipeline.PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result.trace.to_csv(out / "trace.csv")
    (out / "report.json").write_text(json.dumps(pipeline.report_to_json(result.report), indent=1))
    print(f"wrote {out / 'trace.csv'} and {out / 'report.json'}")
    for name, mon in result.report.monitors.items():
        print(f"  {name}: {'ok' if mon['ok'] else 'VIOLATED'}")
    print(f"composed contract: {'ok' if result.report.ok else 'VIOLATED'}")
    return 0 if result.report.ok else 1


def cmd_synth(args) -> int:
    sc = _scenario_from_args(args)
    out = Path(args.out)
    try:
        synth = _load_or_synthesize(sc, out)
    except (SynthesisError, pipeline.PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"edges: {len(synth.edges)}")
    print(f"plan: {' -> '.join(map(str, synth.plan.cells))} (loop from {synth.plan.loop_start})")
    return 0


def cmd_invariant_sets(args) -> int:
    return cmd_synth(args)


def _gts_from_json(path) -> Gts:
    data = json.loads(Path(path).read_text())
    transitions = [tuple(t[:3]) for t in data["transitions"]]
    output_map = {tuple(t[:3]): t[3] for t in data["transitions"]}
    return Gts(
        states=data["states"],
        initial=data["initial"],
        inputs=data["inputs"],
        transitions=transitions,
        output_map=output_map,
        outputs=data.get("outputs"),
    )


def _transducer_from_json(path) -> SymbolTransducer:
    data = json.loads(Path(path).read_text())
    return SymbolTransducer(
        fwd_u=data["fwd_u"],
        fwd_y=data["fwd_y"],
        inv_u={k: set(v) for k, v in data["inv_u"].items()},
        inv_y={k: set(v) for k, v in data["inv_y"].items()},
    )


def cmd_check_relations(args) -> int:
    S_a = _gts_from_json(args.system_a)
    S_b = _gts_from_json(args.system_b)
    F = _transducer_from_json(args.transducer)
    if args.kind == "sim":
        rel = largest_fsim(S_a, S_b, F)
        holds = holds_fsim(S_a, S_b, F)
    else:
        rel = largest_alt_fsim(S_a, S_b, F)
        holds = holds_alt_fsim(S_a, S_b, F)
    print(f"largest {args.kind} relation ({len(rel)} pairs):")
    for (xa, xb) in sorted(rel.pairs, key=repr):
        print(f"  {xa!r} ~ {xb!r}")
    print(f"relation {'holds' if holds else 'does not hold'} from the initial states")
    return 0 if holds else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="lcc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="synthesize, execute the closed loop, evaluate monitors")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_synth = sub.add_parser("synth", help="offline synthesis only")
    _add_common(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    p_inv = sub.add_parser("invariant-sets", help="compute and cache the set tables")
    _add_common(p_inv)
    p_inv.set_defaults(func=cmd_invariant_sets)

    p_rel = sub.add_parser("check-relations", help="check a simulation relation between two systems")
    p_rel.add_argument("system_a")
    p_rel.add_argument("system_b")
    p_rel.add_argument("transducer")
    p_rel.add_argument("--kind", choices=["sim", "alt"], default="sim")
    p_rel.set_defaults(func=cmd_check_relations)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
