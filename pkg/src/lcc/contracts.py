"""Assume/guarantee contract algebra over finite behaviour universes.

Assertions are extensional subsets of a shared finite universe; saturation,
composition, and consistency follow the standard A/G calculus.  Layered
contracts instantiate the per-layer template (assume the model claim of the
layer below and the signal property of the layer above, guarantee this
layer's model claim and signal property) and compose by a left fold.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import chain, combinations

__all__ = [
    "ContractError",
    "TOP",
    "Assertion",
    "AgContract",
    "LayerContract",
    "saturate",
    "compose",
    "consistency",
    "compose_layers",
    "refines",
    "implementations",
]

TOP = "top"


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class Assertion:
    """A subset of a finite behaviour universe."""

    universe: frozenset
    members: frozenset

    def __init__(self, universe, members):
        universe = frozenset(universe)
        members = frozenset(members)
        if not members <= universe:
            raise ContractError("assertion members must lie in the universe")
        object.__setattr__(self, "universe", universe)
        object.__setattr__(self, "members", members)

    def complement(self) -> "Assertion":
        return Assertion(self.universe, self.universe - self.members)

    def union(self, other: "Assertion") -> "Assertion":
        self._check(other)
        return Assertion(self.universe, self.members | other.members)

    def intersect(self, other: "Assertion") -> "Assertion":
        self._check(other)
        return Assertion(self.universe, self.members & other.members)

    def _check(self, other: "Assertion"):
        if self.universe != other.universe:
            raise ContractError("assertions live in different universes")

    def __bool__(self) -> bool:
        return bool(self.members)


@dataclass(frozen=True)
class AgContract:
    """Pair (A, G) of assertions over one universe."""

    assumptions: Assertion
    guarantees: Assertion

    def __post_init__(self):
        if self.assumptions.universe != self.guarantees.universe:
            raise ContractError("A and G must share a universe")

    @property
    def universe(self) -> frozenset:
        return self.assumptions.universe

    def is_saturated(self) -> bool:
        return self.assumptions.complement().members <= self.guarantees.members


def saturate(C: AgContract) -> AgContract:
    """Equivalent saturated contract: G' = G or not A."""
    return AgContract(C.assumptions, C.guarantees.union(C.assumptions.complement()))


def compose(C1: AgContract, C2: AgContract) -> AgContract:
    """Composition of saturated contracts: (A1 and A2 or not(G1 and G2), G1 and G2)."""
    if C1.universe != C2.universe:
        raise ContractError("contracts live in different universes")
    C1, C2 = saturate(C1), saturate(C2)
    G = C1.guarantees.intersect(C2.guarantees)
    A = C1.assumptions.intersect(C2.assumptions).union(G.complement())
    return AgContract(A, G)


def consistency(C: AgContract) -> dict:
    """{consistent, compatible} of a saturated contract."""
    C = saturate(C)
    return {"consistent": bool(C.guarantees), "compatible": bool(C.assumptions)}


def implementations(C: AgContract) -> frozenset:
    """All M subseteq universe with A ∩ M subseteq G (extensional check)."""
    C_sat = saturate(C)
    universe = sorted(C.universe, key=repr)
    a, g = C.assumptions.members, C_sat.guarantees.members
    out = []
    for r in range(len(universe) + 1):
        for comb in combinations(universe, r):
            m = frozenset(comb)
            if (a & m) <= g:
                out.append(m)
    return frozenset(out)


def refines(C1: AgContract, C2: AgContract) -> bool:
    """C1 refines C2: weaker assumptions, stronger guarantees (saturated)."""
    if C1.universe != C2.universe:
        raise ContractError("contracts live in different universes")
    C1, C2 = saturate(C1), saturate(C2)
    return (
        C2.assumptions.members <= C1.assumptions.members
        and C1.guarantees.members <= C2.guarantees.members
    )


@dataclass(frozen=True)
class LayerContract:
    """Per-layer template: assume (M_below and P_above), guarantee (M_here and P_here).

    Atoms are names; TOP marks the trivially-true atom (top layer's model
    claim and the highest property).
    """

    model_below: str
    prop_above: str
    model_here: str
    prop_here: str


def _worlds(atoms: tuple) -> frozenset:
    out = []
    for r in range(len(atoms) + 1):
        for comb in combinations(atoms, r):
            out.append(frozenset(comb))
    return frozenset(out)


def _holds(world: frozenset, atom: str) -> bool:
    return atom == TOP or atom in world


def compose_layers(layers: list[LayerContract]) -> dict:
    """Fold the per-layer contracts into the system-wide contract.

    Returns the folded AgContract over the atom-world universe, the pretty
    assumption/guarantee atom lists (ground-truth model claim; all model
    claims and properties), and the bottom-up controller-composition recipe.
    Raises on a mis-chained stack, naming the offending layer.
    """
    if not layers:
        raise ContractError("empty layer chain")
    for i, (lo, hi) in enumerate(zip(layers, layers[1:])):
        if lo.model_here != hi.model_below:
            raise ContractError(
                f"layer {i + 1}: model_below {hi.model_below!r} != layer {i}'s model_here {lo.model_here!r}"
            )
        if lo.prop_above != hi.prop_here:
            raise ContractError(
                f"layer {i}: prop_above {lo.prop_above!r} != layer {i + 1}'s prop_here {hi.prop_here!r}"
            )
    if layers[-1].model_here != TOP:
        raise ContractError(f"layer {len(layers) - 1}: top layer must have model_here = TOP")
    if layers[-1].prop_above != TOP:
        raise ContractError(f"layer {len(layers) - 1}: top layer must have prop_above = TOP")

    atoms = []
    for lc in layers:
        for a in (lc.model_below, lc.prop_above, lc.model_here, lc.prop_here):
            if a != TOP and a not in atoms:
                atoms.append(a)
    universe = _worlds(tuple(atoms))

    def assertion(*required) -> Assertion:
        req = [a for a in required if a != TOP]
        return Assertion(universe, frozenset(w for w in universe if all(_holds(w, a) for a in req)))

    per_layer = [
        AgContract(
            assertion(lc.model_below, lc.prop_above),
            assertion(lc.model_here, lc.prop_here),
        )
        for lc in layers
    ]
    composed = saturate(per_layer[0])
    for C in per_layer[1:]:
        composed = compose(composed, C)

    guarantee_atoms = [lc.model_here for lc in layers] + [lc.prop_here for lc in layers]
    recipe = [
        {
            "layer": i,
            "model": lc.model_here,
            "property": lc.prop_here,
            "assumes": [lc.model_below, lc.prop_above],
        }
        for i, lc in enumerate(layers)
    ]
    return {
        "contract": composed,
        "assumption_atoms": [layers[0].model_below],
        "guarantee_atoms": guarantee_atoms,
        "recipe": recipe,
        "universe_atoms": atoms,
    }
