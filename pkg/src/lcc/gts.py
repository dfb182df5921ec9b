"""Finite generalized labeled transition systems.

Mealy-style: states, initial states, inputs, a transition relation, and an
output attached to every transition.  Internally transitions are stored as
(state, input, output, successor) quadruples so that transductions and
compositions that assign several outputs to one (x, u, x') triple stay
representable; the public constructor takes the triple + output-map form.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

__all__ = ["GtsError", "ResourceError", "Gts", "Behaviour", "post", "enabled", "classify", "behaviours_up_to"]


class GtsError(ValueError):
    """Ill-formed system or query."""


class ResourceError(RuntimeError):
    """Enumeration guard tripped."""


@dataclass(frozen=True)
class Behaviour:
    """A finite behaviour: equal-length input and output words."""

    input_word: tuple
    output_word: tuple

    def __post_init__(self):
        if len(self.input_word) != len(self.output_word):
            raise GtsError("behaviour words must have equal length")

    def __len__(self) -> int:
        return len(self.input_word)


class Gts:
    """Finite GLTS (X, X0, U, ->, Y, H)."""

    __slots__ = ("states", "initial", "inputs", "outputs", "quads", "_post", "_enabled")

    def __init__(self, states, initial, inputs, transitions, output_map, outputs=None):
        """Build from transition triples plus a total output map on them."""
        quads = []
        transitions = set(tuple(t) for t in transitions)
        for t in transitions:
            if t not in output_map:
                raise GtsError(f"output map is not total: missing {t}")
            quads.append((t[0], t[1], output_map[t], t[2]))
        extra = set(output_map) - transitions
        if extra:
            raise GtsError(f"output map defined on non-transitions: {sorted(map(str, extra))[:3]}")
        self._init_from_quads(states, initial, inputs, quads, outputs)

    @classmethod
    def from_quads(cls, states, initial, inputs, quads, outputs=None) -> "Gts":
        """Build from (state, input, output, successor) quadruples."""
        obj = cls.__new__(cls)
        obj._init_from_quads(states, initial, inputs, quads, outputs)
        return obj

    def _init_from_quads(self, states, initial, inputs, quads, outputs):
        states = frozenset(states)
        initial = frozenset(initial)
        inputs = frozenset(inputs)
        quads = frozenset((x, u, y, x2) for (x, u, y, x2) in quads)
        if not initial <= states:
            raise GtsError("initial states must be a subset of states")
        for (x, u, y, x2) in quads:
            if x not in states or x2 not in states:
                raise GtsError(f"transition endpoint outside state set: {(x, u, x2)}")
            if u not in inputs:
                raise GtsError(f"transition input outside input set: {(x, u, x2)}")
        if outputs is None:
            outputs = frozenset(y for (_, _, y, _) in quads)
        else:
            outputs = frozenset(outputs)
            missing = {y for (_, _, y, _) in quads} - outputs
            if missing:
                raise GtsError(f"transition outputs outside output set: {sorted(map(str, missing))[:3]}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "quads", quads)
        post_map: dict = {}
        enabled_map: dict = {x: set() for x in states}
        for (x, u, y, x2) in quads:
            post_map.setdefault((x, u), set()).add(x2)
            enabled_map[x].add(u)
        object.__setattr__(self, "_post", {k: frozenset(v) for k, v in post_map.items()})
        object.__setattr__(self, "_enabled", {k: frozenset(v) for k, v in enabled_map.items()})

    # -- queries ----------------------------------------------------------

    @property
    def transitions(self) -> frozenset:
        """Transition triples (x, u, x')."""
        return frozenset((x, u, x2) for (x, u, _, x2) in self.quads)

    @property
    def output_map(self) -> dict:
        """Triple -> output; raises when a triple carries several outputs."""
        out: dict = {}
        for (x, u, y, x2) in self.quads:
            key = (x, u, x2)
            if key in out and out[key] != y:
                raise GtsError(f"transition {key} carries multiple outputs")
            out[key] = y
        return out

    def post(self, x, u) -> frozenset:
        if x not in self.states:
            raise GtsError(f"unknown state {x!r}")
        if u not in self.inputs:
            raise GtsError(f"unknown input {u!r}")
        return self._post.get((x, u), frozenset())

    def enabled(self, x) -> frozenset:
        if x not in self.states:
            raise GtsError(f"unknown state {x!r}")
        return self._enabled[x]

    def quads_from(self, x, u):
        return [(a, b, c, d) for (a, b, c, d) in self.quads if a == x and b == u]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Gts)
            and self.states == other.states
            and self.initial == other.initial
            and self.inputs == other.inputs
            and self.quads == other.quads
        )

    def __hash__(self):
        return hash((self.states, self.initial, self.inputs, self.quads))

    def __repr__(self) -> str:
        return (
            f"Gts(|X|={len(self.states)}, |X0|={len(self.initial)}, "
            f"|U|={len(self.inputs)}, |->|={len(self.quads)})"
        )


def post(S: Gts, x, u) -> frozenset:
    """Set of u-successors of x."""
    return S.post(x, u)


def enabled(S: Gts, x) -> frozenset:
    """Inputs u with a nonempty successor set at x."""
    return S.enabled(x)


def classify(S: Gts) -> dict:
    """{deterministic, blocking, open} per the standard definitions."""
    deterministic = all(
        len(S.post(x, u)) == 1 for x in S.states for u in S.enabled(x)
    )
    blocking = any(len(S.enabled(x)) == 0 for x in S.states)
    return {"deterministic": deterministic, "blocking": blocking, "open": len(S.inputs) > 1}


def behaviours_up_to(S: Gts, k: int, cap: int = 64) -> set:
    """All behaviours of length at most k, witnessed from an initial state.

    Guarded by |X|*|U| <= cap to keep enumeration tractable.
    """
    if k < 0:
        raise GtsError(f"depth must be nonnegative, got {k}")
    if len(S.states) * max(1, len(S.inputs)) > cap:
        raise ResourceError(
            f"behaviour enumeration guard: |X|*|U| = {len(S.states) * len(S.inputs)} > cap {cap}"
        )
    found: set = set()
    if S.initial:
        found.add(Behaviour((), ()))
    frontier = {(x, (), ()) for x in S.initial}
    for _ in range(k):
        nxt = set()
        for (x, uw, yw) in frontier:
            for (a, u, y, x2) in S.quads:
                if a != x:
                    continue
                beh = Behaviour(uw + (u,), yw + (y,))
                found.add(beh)
                nxt.add((x2, beh.input_word, beh.output_word))
        frontier = nxt
    return found
