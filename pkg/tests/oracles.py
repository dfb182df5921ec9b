"""Shared test oracles and random-instance generators.

The relation oracle enumerates every candidate relation and checks the step
conditions directly; it shares only data accessors with the library, not the
fixpoint logic.
"""

from itertools import product

import numpy as np

from lcc.gts import Gts
from lcc.relations import Interconnection, SymbolTransducer, TransducerMaps


def random_gts(rng, max_states=3, max_inputs=2, max_outputs=2, p_edge=0.5,
               state_prefix="s", inputs=None, outputs=None) -> Gts:
    n = int(rng.integers(1, max_states + 1))
    states = [f"{state_prefix}{i}" for i in range(n)]
    if inputs is None:
        inputs = [f"u{i}" for i in range(int(rng.integers(1, max_inputs + 1)))]
    if outputs is None:
        outputs = [f"y{i}" for i in range(int(rng.integers(1, max_outputs + 1)))]
    quads = []
    for x in states:
        for u in inputs:
            for x2 in states:
                if rng.random() < p_edge:
                    y = outputs[int(rng.integers(len(outputs)))]
                    quads.append((x, u, y, x2))
    k = int(rng.integers(1, n + 1))
    initial = list(rng.choice(states, size=k, replace=False))
    return Gts.from_quads(states, initial, inputs, quads, outputs=outputs)


def random_proper_transducer(rng, inputs_a, outputs_a, max_b=2) -> SymbolTransducer:
    """Random transducer with proper inverses (forward maps are surjective)."""

    def one_side(symbols_a, prefix):
        symbols_a = sorted(symbols_a)
        nb = int(rng.integers(1, min(max_b, len(symbols_a)) + 1))
        symbols_b = [f"{prefix}{i}" for i in range(nb)]
        # Surjective forward map: hit every target at least once.
        fwd = {}
        shuffled = list(symbols_a)
        rng.shuffle(shuffled)
        for i, a in enumerate(shuffled):
            fwd[a] = symbols_b[i] if i < nb else symbols_b[int(rng.integers(nb))]
        inv = {b: {a for a in symbols_a if fwd[a] == b} for b in symbols_b}
        # Optional extras keep properness (preimages stay included).
        for b in symbols_b:
            for a in symbols_a:
                if rng.random() < 0.25:
                    inv[b].add(a)
        return fwd, inv

    fwd_u, inv_u = one_side(inputs_a, "U")
    fwd_y, inv_y = one_side(outputs_a, "Y")
    return SymbolTransducer(fwd_u, fwd_y, inv_u, inv_y)


def oracle_pair_ok(S_a: Gts, S_b: Gts, maps: TransducerMaps, rel: set, xa, xb,
                   alternating: bool) -> bool:
    """Direct transcription of the step condition for one related pair."""
    for ua in sorted(S_a.enabled(xa), key=repr):
        ok_for_ua = False
        for ub in maps.fwd_u(ua):
            if ub not in S_b.enabled(xb):
                continue
            a_quads = S_a.quads_from(xa, ua)
            b_quads = S_b.quads_from(xb, ub)
            if alternating:
                cond = all(
                    any(
                        (ta[3], tb[3]) in rel and maps.output_ok(ta[2], tb[2])
                        for ta in a_quads
                    )
                    for tb in b_quads
                )
            else:
                cond = all(
                    any(
                        (ta[3], tb[3]) in rel and maps.output_ok(ta[2], tb[2])
                        for tb in b_quads
                    )
                    for ta in a_quads
                )
            if cond:
                ok_for_ua = True
                break
        if not ok_for_ua:
            return False
    return True


def oracle_largest(S_a: Gts, S_b: Gts, maps: TransducerMaps, alternating: bool) -> frozenset:
    """Union of all relations closed under the step condition, by enumeration."""
    pairs = sorted(product(S_a.states, S_b.states), key=repr)
    best: set = set()
    for bits in range(2 ** len(pairs)):
        rel = {pairs[i] for i in range(len(pairs)) if (bits >> i) & 1}
        if all(oracle_pair_ok(S_a, S_b, maps, rel, xa, xb, alternating) for (xa, xb) in rel):
            best |= rel
    return frozenset(best)


def pair_lift(F: SymbolTransducer, inputs_c, outputs_c, outputs_b) -> SymbolTransducer:
    """Lift F to composite alphabets: identity on the exogenous inputs,
    F on the first output component."""
    fwd_u = {uc: uc for uc in inputs_c}
    inv_u = {uc: {uc} for uc in inputs_c}
    fwd_y = {}
    inv_y = {}
    for yb in outputs_b:
        for yc in outputs_c:
            inv_y[(yb, yc)] = {(ya, yc) for ya in F.inv_y[yb]}
    for ya in F.fwd_y:
        for yc in outputs_c:
            fwd_y[(ya, yc)] = (F.fwd_y[ya], yc)
    return SymbolTransducer(fwd_u, fwd_y, inv_u, inv_y)


def cascade_interconnection() -> Interconnection:
    return Interconnection.cascade()
