"""A/G contract algebra tests."""

import numpy as np
import pytest

from lcc.contracts import (
    TOP,
    AgContract,
    Assertion,
    ContractError,
    LayerContract,
    compose,
    compose_layers,
    consistency,
    implementations,
    refines,
    saturate,
)
from lcc.gts import Gts, behaviours_up_to
from lcc.relations import (
    Interconnection,
    SymbolTransducer,
    back_maps,
    compose_open,
    holds_alt_fsim,
    holds_fsim,
    transduce,
)


def rand_contract(rng, universe):
    pick = lambda: frozenset(x for x in universe if rng.random() < 0.5)
    return AgContract(Assertion(universe, pick()), Assertion(universe, pick()))


UNIVERSE = frozenset(range(6))


def test_saturate_edges():
    full = Assertion(UNIVERSE, UNIVERSE)
    empty = Assertion(UNIVERSE, frozenset())
    g = Assertion(UNIVERSE, frozenset({1, 2}))
    assert saturate(AgContract(full, g)).guarantees.members == g.members
    assert saturate(AgContract(empty, g)).guarantees.members == UNIVERSE


def test_saturate_idempotent_and_preserves_implementations():
    rng = np.random.default_rng(41)
    for _ in range(100):
        C = rand_contract(rng, UNIVERSE)
        S = saturate(C)
        assert saturate(S).guarantees.members == S.guarantees.members
        assert S.is_saturated()
        assert implementations(C) == implementations(S)


def test_compose_formula_and_commutativity():
    rng = np.random.default_rng(42)
    for _ in range(100):
        C1 = saturate(rand_contract(rng, UNIVERSE))
        C2 = saturate(rand_contract(rng, UNIVERSE))
        C12 = compose(C1, C2)
        C21 = compose(C2, C1)
        assert C12.assumptions.members == C21.assumptions.members
        assert C12.guarantees.members == C21.guarantees.members
        # explicit set formula
        g = C1.guarantees.members & C2.guarantees.members
        a = (C1.assumptions.members & C2.assumptions.members) | (UNIVERSE - g)
        assert C12.guarantees.members == g
        assert C12.assumptions.members == a


def test_compose_associative_on_explicit_sets():
    rng = np.random.default_rng(43)
    for _ in range(100):
        cs = [saturate(rand_contract(rng, UNIVERSE)) for _ in range(3)]
        left = compose(compose(cs[0], cs[1]), cs[2])
        right = compose(cs[0], compose(cs[1], cs[2]))
        assert left.assumptions.members == right.assumptions.members
        assert left.guarantees.members == right.guarantees.members


def test_compose_self():
    rng = np.random.default_rng(44)
    C = saturate(rand_contract(rng, UNIVERSE))
    CC = compose(C, C)
    assert CC.guarantees.members == C.guarantees.members
    assert CC.assumptions.members == C.assumptions.members | (UNIVERSE - C.guarantees.members)


def test_consistency():
    g_empty = AgContract(Assertion(UNIVERSE, UNIVERSE), Assertion(UNIVERSE, frozenset()))
    assert consistency(g_empty) == {"consistent": False, "compatible": True}
    a_empty = AgContract(Assertion(UNIVERSE, frozenset()), Assertion(UNIVERSE, frozenset({1})))
    assert consistency(a_empty)["compatible"] is False
    generic = AgContract(
        Assertion(UNIVERSE, frozenset({0, 1})), Assertion(UNIVERSE, frozenset({1, 2}))
    )
    assert consistency(generic) == {"consistent": True, "compatible": True}


def test_compose_monotone_in_refinement():
    rng = np.random.default_rng(45)
    for _ in range(60):
        C = saturate(rand_contract(rng, UNIVERSE))
        D = saturate(rand_contract(rng, UNIVERSE))
        # refine D: stronger guarantees, weaker assumptions
        D_ref = AgContract(
            Assertion(UNIVERSE, D.assumptions.members | {0}),
            Assertion(UNIVERSE, D.guarantees.members - {5}),
        )
        D_ref = saturate(D_ref)
        if not refines(D_ref, D):
            continue
        comp = compose(C, D)
        comp_ref = compose(C, D_ref)
        assert comp_ref.guarantees.members <= comp.guarantees.members
        assert comp_ref.assumptions.members >= comp.assumptions.members


def case_study_chain():
    return [
        LayerContract("S1", "P2", "M1", "P1"),
        LayerContract("M1", "P3", "M2", "P2"),
        LayerContract("M2", TOP, TOP, "P3"),
    ]


def test_compose_layers_case_study():
    out = compose_layers(case_study_chain())
    assert out["guarantee_atoms"] == ["M1", "M2", TOP, "P1", "P2", "P3"]
    assert out["assumption_atoms"] == ["S1"]
    # equals the left fold of compose over the saturated per-layer contracts
    contract = out["contract"]
    assert contract.is_saturated()
    # every world satisfying all guarantee atoms is in G
    atoms = out["universe_atoms"]
    full = frozenset(a for a in atoms)
    assert full in contract.guarantees.members


def test_compose_layers_single_layer():
    out = compose_layers([LayerContract("S1", TOP, TOP, "P1")])
    assert out["guarantee_atoms"] == [TOP, "P1"]
    assert out["assumption_atoms"] == ["S1"]


def test_compose_layers_mischained():
    bad = case_study_chain()
    bad[1] = LayerContract("M9", "P3", "M2", "P2")
    with pytest.raises(ContractError, match="layer 1"):
        compose_layers(bad)
    bad2 = case_study_chain()
    bad2[0] = LayerContract("S1", "P9", "M1", "P1")
    with pytest.raises(ContractError, match="layer 0"):
        compose_layers(bad2)


def test_theorem_conclusion_on_finite_toy():
    """Two-layer toy: the abstraction sandwich checked by the relation
    machinery transfers the abstract controller's guarantee to the composite.
    """
    # Concrete system S1: two rooms, noisy inputs mapped onto one abstract move
    S1 = Gts(
        states={"l", "r"},
        initial={"l"},
        inputs={"go_a", "go_b", "hold"},
        transitions={
            ("l", "go_a", "r"), ("l", "go_b", "r"), ("r", "go_a", "l"),
            ("r", "go_b", "l"), ("l", "hold", "l"), ("r", "hold", "r"),
        },
        output_map={
            ("l", "go_a", "r"): "at_r", ("l", "go_b", "r"): "at_r",
            ("r", "go_a", "l"): "at_l", ("r", "go_b", "l"): "at_l",
            ("l", "hold", "l"): "at_l", ("r", "hold", "r"): "at_r",
        },
    )
    F = SymbolTransducer(
        fwd_u={"go_a": "move", "go_b": "move", "hold": "stay"},
        fwd_y={"at_l": "L", "at_r": "R"},
        inv_u={"move": {"go_a", "go_b"}, "stay": {"hold"}},
        inv_y={"L": {"at_l"}, "R": {"at_r"}},
    )
    S2 = transduce(S1, F)
    # abstraction sandwich (the M template)
    assert holds_fsim(S1, S2, F)
    assert holds_alt_fsim(S2, S1, back_maps(F))
    # abstract controller: always command move
    ctrl = Gts(
        states={"c"},
        initial={"c"},
        inputs={"tick"},
        transitions={("c", "tick", "c")},
        output_map={("c", "tick", "c"): "move"},
    )
    Fint = Interconnection.cascade()
    abstract_cl = compose_open(S2, ctrl, Fint, inputs_c={"tick"})
    concrete_cl = compose_open(transduce(S1, F), ctrl, Fint, inputs_c={"tick"})
    # guarantee of the abstract closed loop: it alternates rooms; transferring
    # through the composition, the concrete closed loop's behaviours are a
    # subset of the abstract ones
    b_abs = {b for b in behaviours_up_to(abstract_cl, 4)}
    b_con = {b for b in behaviours_up_to(concrete_cl, 4)}
    assert b_con <= b_abs
    assert all(
        all(y in ("L", "R") for y in b.output_word) for b in b_con
    )
