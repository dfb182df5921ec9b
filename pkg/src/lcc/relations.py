"""(Alternating) simulation checking across alphabets, transduced systems,
and open sequential feedback composition.

The checkers compute greatest relations by iterated pair removal on finite
systems.  Symbol transducers carry a forward map and a set-valued proper
inverse; the checkers accept any object providing candidate forward images
and inverse output images, which is what the sandwich-chain constructions in
the underlying theory need when a set-alphabet system faces an atom-alphabet
one.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from .gts import Gts, GtsError

__all__ = [
    "RelationError",
    "SetSymbol",
    "SymbolTransducer",
    "TransducerMaps",
    "Relation",
    "Interconnection",
    "identity_maps",
    "iota_maps",
    "back_maps",
    "compose_transducers",
    "largest_fsim",
    "holds_fsim",
    "largest_alt_fsim",
    "holds_alt_fsim",
    "transduce",
    "inverse_transduce",
    "ff_inverse",
    "chain_back_maps",
    "ff_chain_back_maps",
    "compose_open",
]


class RelationError(ValueError):
    """Ill-formed transducer or interconnection."""


@dataclass(frozen=True)
class SetSymbol:
    """A fresh atomic symbol carrying a finite set payload."""

    members: frozenset

    def __init__(self, members):
        object.__setattr__(self, "members", frozenset(members))

    def __repr__(self) -> str:
        inner = ",".join(sorted(map(repr, self.members)))
        return "{" + inner + "}"


def _member_set(y) -> frozenset:
    return y.members if isinstance(y, SetSymbol) else frozenset([y])


def output_matches(y_a, allowed: frozenset) -> bool:
    """y_a related to an inverse image: membership for atoms, elementwise for sets."""
    if isinstance(y_a, SetSymbol):
        return y_a.members <= allowed
    return y_a in allowed


@dataclass(frozen=True)
class SymbolTransducer:
    """Total forward symbol maps with total nonempty set-valued inverses.

    Properness is validated at construction: u in inv_u(fwd_u(u)) for every
    input symbol and u_b in fwd_u(inv_u(u_b)) for every target symbol, and
    likewise on outputs.
    """

    fwd_u: dict
    fwd_y: dict
    inv_u: dict
    inv_y: dict

    def __init__(self, fwd_u, fwd_y, inv_u, inv_y):
        fwd_u = dict(fwd_u)
        fwd_y = dict(fwd_y)
        inv_u = {k: frozenset(v) for k, v in dict(inv_u).items()}
        inv_y = {k: frozenset(v) for k, v in dict(inv_y).items()}
        _check_proper(fwd_u, inv_u, "input")
        _check_proper(fwd_y, inv_y, "output")
        object.__setattr__(self, "fwd_u", fwd_u)
        object.__setattr__(self, "fwd_y", fwd_y)
        object.__setattr__(self, "inv_u", inv_u)
        object.__setattr__(self, "inv_y", inv_y)

    def as_maps(self) -> "TransducerMaps":
        return _inv_image_maps(
            lambda u: frozenset([self.fwd_u[u]]), lambda y: self.inv_y[y]
        )


def _check_proper(fwd: dict, inv: dict, kind: str):
    for k, v in inv.items():
        if not v:
            raise RelationError(f"{kind} inverse of {k!r} is empty")
    for u, ub in fwd.items():
        if ub not in inv:
            raise RelationError(f"{kind} inverse not total: missing {ub!r}")
        if u not in inv[ub]:
            raise RelationError(f"properness violated: {u!r} not in inv(fwd({u!r}))")
    for ub, back in inv.items():
        if not any(fwd.get(u) == ub for u in back):
            raise RelationError(f"properness violated: {ub!r} not in fwd(inv({ub!r}))")


@dataclass(frozen=True)
class TransducerMaps:
    """Checker-facing view of a transducer.

    fwd_u(u_lhs) yields the candidate inputs of the right-hand system (the
    explicit existential in the step condition ranges over them); output_ok
    decides the output compatibility of matched transitions.  A
    SymbolTransducer produces the singleton candidate set and the inverse-
    image membership test, recovering the definitions exactly.
    """

    fwd_u: object
    output_ok: object


def _inv_image_maps(fwd_u, inv_y) -> TransducerMaps:
    return TransducerMaps(
        fwd_u=fwd_u,
        output_ok=lambda y_lhs, y_rhs: output_matches(y_lhs, inv_y(y_rhs)),
    )


def identity_maps() -> TransducerMaps:
    """Identity transducer; the inverse image of a set symbol is its payload."""
    return _inv_image_maps(lambda u: frozenset([u]), lambda y: _member_set(y))


def iota_maps() -> TransducerMaps:
    """Canonical embedding of an atom-alphabet system into singleton set symbols."""
    return _inv_image_maps(
        lambda u: frozenset([SetSymbol([u])]), lambda y: _member_set(y)
    )


def back_maps(F: "SymbolTransducer") -> TransducerMaps:
    """Maps for relations from the abstract side back to the concrete side.

    The step condition's forward map is the set-valued inverse (candidates =
    inv_u of the abstract input); outputs match when the concrete output lies
    in the inverse image of the abstract one.
    """
    return TransducerMaps(
        fwd_u=lambda u: F.inv_u[u],
        output_ok=lambda y_lhs, y_rhs: output_matches(y_rhs, F.inv_y[y_lhs]),
    )


def compose_transducers(F_ab: SymbolTransducer, F_bc: SymbolTransducer) -> SymbolTransducer:
    """Composite transducer a->c: forward maps compose, inverses compose set-wise."""
    fwd_u = {u: F_bc.fwd_u[F_ab.fwd_u[u]] for u in F_ab.fwd_u}
    fwd_y = {y: F_bc.fwd_y[F_ab.fwd_y[y]] for y in F_ab.fwd_y}
    inv_u = {
        c: frozenset(a for b in F_bc.inv_u[c] for a in F_ab.inv_u[b]) for c in F_bc.inv_u
    }
    inv_y = {
        c: frozenset(a for b in F_bc.inv_y[c] for a in F_ab.inv_y[b]) for c in F_bc.inv_y
    }
    return SymbolTransducer(fwd_u, fwd_y, inv_u, inv_y)


@dataclass(frozen=True)
class Relation:
    """A relation between the state sets of two systems."""

    pairs: frozenset

    def __init__(self, pairs):
        object.__setattr__(self, "pairs", frozenset(tuple(p) for p in pairs))

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def __le__(self, other: "Relation") -> bool:
        return self.pairs <= other.pairs


def _resolve_maps(F) -> TransducerMaps:
    if isinstance(F, TransducerMaps):
        return F
    if isinstance(F, SymbolTransducer):
        return F.as_maps()
    raise RelationError(f"not a transducer: {F!r}")


def _pair_ok_sim(S_a: Gts, S_b: Gts, maps: TransducerMaps, rel: set, xa, xb) -> bool:
    for ua in S_a.enabled(xa):
        candidates = [ub for ub in maps.fwd_u(ua) if ub in S_b.enabled(xb)]
        if not any(
            all(
                any(
                    (ta[3], tb[3]) in rel and maps.output_ok(ta[2], tb[2])
                    for tb in S_b.quads_from(xb, ub)
                )
                for ta in S_a.quads_from(xa, ua)
            )
            for ub in candidates
        ):
            return False
    return True


def _pair_ok_alt(S_a: Gts, S_b: Gts, maps: TransducerMaps, rel: set, xa, xb) -> bool:
    for ua in S_a.enabled(xa):
        candidates = [ub for ub in maps.fwd_u(ua) if ub in S_b.enabled(xb)]
        if not any(
            all(
                any(
                    (ta[3], tb[3]) in rel and maps.output_ok(ta[2], tb[2])
                    for ta in S_a.quads_from(xa, ua)
                )
                for tb in S_b.quads_from(xb, ub)
            )
            for ub in candidates
        ):
            return False
    return True


def _largest(S_a: Gts, S_b: Gts, F, pair_ok) -> Relation:
    maps = _resolve_maps(F)
    rel = set(product(sorted(S_a.states, key=repr), sorted(S_b.states, key=repr)))
    changed = True
    while changed:
        changed = False
        for pair in sorted(rel, key=repr):
            if not pair_ok(S_a, S_b, maps, rel, *pair):
                rel.discard(pair)
                changed = True
    return Relation(rel)


def largest_fsim(S_a: Gts, S_b: Gts, F) -> Relation:
    """Greatest relation satisfying the transducer-simulation step condition."""
    return _largest(S_a, S_b, F, _pair_ok_sim)


def largest_alt_fsim(S_a: Gts, S_b: Gts, F) -> Relation:
    """Greatest relation satisfying the alternating step condition."""
    return _largest(S_a, S_b, F, _pair_ok_alt)


def _holds(S_a: Gts, S_b: Gts, rel: Relation) -> bool:
    return all(any((xa, xb) in rel for xb in S_b.initial) for xa in S_a.initial)


def holds_fsim(S_a: Gts, S_b: Gts, F) -> bool:
    """True iff every initial state of S_a is related to some initial of S_b."""
    return _holds(S_a, S_b, largest_fsim(S_a, S_b, F))


def holds_alt_fsim(S_a: Gts, S_b: Gts, F) -> bool:
    return _holds(S_a, S_b, largest_alt_fsim(S_a, S_b, F))


# -- transduced systems ----------------------------------------------------


def transduce(S: Gts, F: SymbolTransducer) -> Gts:
    """Forward-transduced system.

    Inputs are the image of fwd_u; (x, u_f, x') is a transition iff some
    witness u in inv_u(u_f) has (x, u, x'); outputs map through fwd_y.
    """
    inputs = frozenset(F.fwd_u[u] for u in S.inputs)
    outputs = frozenset(F.fwd_y[y] for y in S.outputs)
    quads = []
    for u_f in inputs:
        for u in F.inv_u[u_f]:
            if u not in S.inputs:
                continue
            for (x, uu, y, x2) in S.quads:
                if uu == u:
                    quads.append((x, u_f, F.fwd_y[y], x2))
    return Gts.from_quads(S.states, S.initial, inputs, quads, outputs=outputs)


def inverse_transduce(S: Gts, F: SymbolTransducer) -> Gts:
    """Inverse-transduced system over singleton set-inputs.

    Transition (x, {u_f}, x') exists iff (x, fwd_u(u_f), x') does; outputs
    become the set symbols inv_y(H(.)).
    """
    domain = sorted(F.fwd_u, key=repr)
    inputs = frozenset(SetSymbol([u]) for u in domain)
    outputs = frozenset(SetSymbol(F.inv_y[y]) for y in S.outputs if y in F.inv_y)
    quads = []
    for u_f in domain:
        target = F.fwd_u[u_f]
        if target not in S.inputs:
            continue
        sym = SetSymbol([u_f])
        for (x, uu, y, x2) in S.quads:
            if uu == target:
                quads.append((x, sym, SetSymbol(F.inv_y[y]), x2))
    return Gts.from_quads(S.states, S.initial, inputs, quads, outputs=outputs)


def ff_inverse(S: Gts, F: SymbolTransducer) -> Gts:
    """Forward-of-inverse transduction F∘F⁻¹(S).

    The outer forward step uses the canonical lifted inverse of F over the
    singleton alphabet: a transition on the atom u_b exists for every witness
    u in inv_u(u_b) whose singleton set-input carries one.  Outputs are the
    enlarged image sets fwd_y(inv_y(H(.))).
    """
    inv = inverse_transduce(S, F)
    inputs = frozenset(F.fwd_u[u] for u in F.fwd_u)
    outputs = frozenset(
        SetSymbol(F.fwd_y[v] for v in F.inv_y[y]) for y in S.outputs if y in F.inv_y
    )
    quads = []
    for u_b in inputs:
        for u in F.inv_u[u_b]:
            sym = SetSymbol([u])
            for (x, s, yset, x2) in inv.quads:
                if s == sym:
                    quads.append(
                        (x, u_b, SetSymbol(F.fwd_y[y] for y in yset.members), x2)
                    )
    return Gts.from_quads(S.states, S.initial, inputs, quads, outputs=outputs)


def chain_back_maps(F: SymbolTransducer) -> TransducerMaps:
    """Representative maps for the alternating side of F⁻¹∘F(S) vs S.

    A singleton set-input {u} may stand for any sibling in inv_u(fwd_u(u));
    allowed left outputs of y_b are inv_y(fwd_y(y_b)).
    """

    def fwd(u):
        (m,) = tuple(u.members) if isinstance(u, SetSymbol) else (u,)
        return F.inv_u[F.fwd_u[m]]

    def out_ok(y_lhs, y_rhs):
        return output_matches(y_lhs, frozenset(F.inv_y[F.fwd_y[y_rhs]]))

    return TransducerMaps(fwd_u=fwd, output_ok=out_ok)


def ff_chain_back_maps(F: SymbolTransducer) -> TransducerMaps:
    """Representative maps for the alternating side of F∘F⁻¹(S) vs S."""

    def fwd(u_b):
        return frozenset(F.fwd_u[u] for u in F.inv_u[u_b])

    def out_ok(y_lhs, y_rhs):
        return output_matches(y_lhs, frozenset(F.fwd_y[v] for v in F.inv_y[y_rhs]))

    return TransducerMaps(fwd_u=fwd, output_ok=out_ok)


# -- open sequential feedback composition -----------------------------------


@dataclass(frozen=True)
class Interconnection:
    """Interconnection maps of the open sequential feedback composition.

    f_i1 : Y1 x Y2 -> U1 feeds the plant from the stored output and the
    controller output; f_i2 : Y1 x Uc -> U2 feeds the controller from the
    stored output and the exogenous input; f_o : Y1 x Y2 -> Yc.
    """

    f_i1: object
    f_i2: object
    f_o: object

    @classmethod
    def closed_feedback(cls) -> "Interconnection":
        """Classical feedback: u1 = y2, u2 = y1, output the pair."""
        return cls(
            f_i1=lambda y1, y2: y2,
            f_i2=lambda y1, uc: y1,
            f_o=lambda y1, y2: (y1, y2),
        )

    @classmethod
    def cascade(cls) -> "Interconnection":
        """Sequential composition: u1 = y2, u2 = uc, output y1."""
        return cls(
            f_i1=lambda y1, y2: y2,
            f_i2=lambda y1, uc: uc,
            f_o=lambda y1, y2: y1,
        )


def compose_open(S1: Gts, S2: Gts, F: Interconnection, inputs_c) -> Gts:
    """Open sequential feedback composition S1 ||_F S2.

    States are (x1, x2, y1-store); a composite transition on exogenous uc
    requires component transitions with u1 = f_i1(y1, H2(t2)) and
    u2 = f_i2(y1, uc); the new store is H1(t1) and the output f_o(H1(t1),
    H2(t2)).  Initial states carry every possible stored output.
    """
    inputs_c = frozenset(inputs_c)
    y1_values = sorted(S1.outputs, key=repr)
    states = frozenset(
        (x1, x2, y1) for x1 in S1.states for x2 in S2.states for y1 in y1_values
    )
    initial = frozenset(
        (x1, x2, y1) for x1 in S1.initial for x2 in S2.initial for y1 in y1_values
    )
    quads = []
    for (x1, x2, y1) in states:
        for uc in inputs_c:
            try:
                u2 = F.f_i2(y1, uc)
            except KeyError:
                continue
            if u2 not in S2.inputs:
                continue
            for t2 in S2.quads_from(x2, u2):
                y2 = t2[2]
                try:
                    u1 = F.f_i1(y1, y2)
                except KeyError:
                    continue
                if u1 not in S1.inputs:
                    continue
                for t1 in S1.quads_from(x1, u1):
                    y1_next = t1[2]
                    quads.append(
                        ((x1, x2, y1), uc, F.f_o(y1_next, y2), (t1[3], t2[3], y1_next))
                    )
    return Gts.from_quads(states, initial, inputs_c, quads)
