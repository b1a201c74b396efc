import pytest

from relpolicy import fol
from relpolicy.domain import parse_formula_text
from relpolicy.errors import NotApplicableError, UnboundError
from relpolicy.fixtures import load_domain, load_instance
from relpolicy.fol import TRUE, CaseStatement, Var
from relpolicy.ground import (
    GroundAction,
    State,
    applicable,
    applicable_det_actions,
    check_partition,
    enumerate_states,
    holds,
    transition,
    witness_tuples,
    witnesses,
)

from conftest import instance


def goal_guard(inst):
    return inst.domain.reward.branches[0][0]


def on_table(inst):
    return State.of(("On", (o, "table")) for o in inst.objects if o != "table")


def test_goal_guard_at_goal(bw3):
    goal = State.of([("On", ("A", "B")), ("On", ("B", "table")), ("On", ("C", "table"))])
    assert goal in bw3.states
    assert holds(goal, bw3, goal_guard(bw3))
    assert not holds(on_table(bw3), bw3, goal_guard(bw3))


def test_true_holds_everywhere(bw3):
    assert all(holds(e, bw3, TRUE) for e in bw3.states)


def test_unbound_variable(bw3):
    f = fol.FluentAtom("On", (Var("x"), Var("y")))
    with pytest.raises(UnboundError):
        holds(bw3.states[0], bw3, f, {Var("x"): "A"})


def test_logistics_row_guard(lg2):
    d = lg2.domain
    f = parse_formula_text(
        "(and (Box b) (Truck t) (Tin t c) (On b t) (not (= c Syd)))", d, variables=("b", "t", "c")
    )
    e = State.of([("On", ("B1", "T1")), ("Tin", ("T1", "C1")), ("Tin", ("T2", "Syd")), ("Bin", ("B2", "C1"))])
    assert e in lg2.states
    assert holds(e, lg2, f, {Var("b"): "B1", Var("t"): "T1", Var("c"): "C1"})
    assert not holds(e, lg2, f, {Var("b"): "B2", Var("t"): "T1", Var("c"): "C1"})


def test_witnesses_of_sentence(bw3):
    assert list(witnesses(bw3.states[0], bw3, TRUE, ())) == [{}]
    assert witness_tuples(bw3.states[0], bw3, fol.FALSE, ()) == []


def test_witnesses_are_sorted_and_sound(lg2):
    d = lg2.domain
    f = parse_formula_text("(and (Box b) (Truck t) (On b t) (Tin t Syd))", d, variables=("b", "t"))
    params = (Var("b"), Var("t"))
    nonempty = 0
    for e in lg2.states:
        ws = witness_tuples(e, lg2, f, params)
        assert ws == sorted(ws)
        brute = [
            (b, t) for b in lg2.objects for t in lg2.objects if holds(e, lg2, f, {params[0]: b, params[1]: t})
        ]
        assert ws == brute
        nonempty += bool(ws)
    assert nonempty > 0


def test_move_to_self_never_applicable(bw3):
    a = GroundAction("moveS", ("A", "A"))
    assert not any(applicable(e, bw3, a) for e in bw3.states)


def test_move_clear_block_to_table(bw3):
    e = State.of([("On", ("A", "B")), ("On", ("B", "table")), ("On", ("C", "table"))])
    assert applicable(e, bw3, GroundAction("moveS", ("A", "table")))
    assert not applicable(e, bw3, GroundAction("moveS", ("B", "table")))
    after = transition(e, bw3, GroundAction("moveS", ("A", "table")))
    assert ("On", ("A", "table")) in after
    assert ("On", ("A", "B")) not in after


def test_load_needs_empty_truck(lg2):
    e = State.of([("On", ("B2", "T1")), ("Bin", ("B1", "C1")), ("Tin", ("T1", "C1")), ("Tin", ("T2", "Syd"))])
    assert e in lg2.states
    assert not applicable(e, lg2, GroundAction("loadS", ("B1", "T1")))


def test_not_applicable(bw3):
    e = bw3.states[0]
    with pytest.raises(NotApplicableError):
        transition(e, bw3, GroundAction("moveS", ("A", "A")))


def test_failed_move_is_identity():
    inst = load_instance("bw-rain", 3)
    for e in inst.enumerate():
        for a in applicable_det_actions(e, inst):
            if a.symbol == "moveF":
                assert transition(e, inst, a) == e


def test_rain_is_invariant():
    from relpolicy.domain import parse_instance
    from relpolicy.fixtures import _read
    from relpolicy.ground import Instance

    d = load_domain("bw-rain")
    inst = Instance(d, parse_instance(_read("bw3-rain.inst"), d))
    states = inst.enumerate()
    assert len(states) == 13
    assert all(("Rain", ()) in e for e in states)


def test_transition_deterministic(lg2):
    e = lg2.states[0]
    for a in applicable_det_actions(e, lg2):
        lg2._trans_cache.clear()
        first = transition(e, lg2, a)
        lg2._trans_cache.clear()
        assert transition(e, lg2, a) == first


def test_statics_untouched(lg2):
    statics = set(lg2.domain.statics)
    for e in lg2.states[:10]:
        for a in applicable_det_actions(e, lg2):
            assert all(p not in statics for p, _ in transition(e, lg2, a).facts)


def test_state_counts_small():
    assert len(instance("bw-all", 3).states) == 13
    assert len(instance("bw-all", 4).states) == 73
    assert len(instance("lg-ex", 2).states) == 56


def test_enumeration_order_starts_at_seed(bw3):
    assert bw3.states[0] == bw3.seed


@pytest.mark.parametrize("name,size", [("bw-all", 3), ("bw-all", 4), ("lg-ex", 2)])
def test_closure_is_seed_independent(name, size):
    inst = instance(name, size)
    other = inst.states[len(inst.states) // 2]
    assert set(enumerate_states(inst, other)) == set(inst.states)


def test_reward_partition(bw3):
    assert check_partition(bw3, bw3.states, bw3.domain.reward) == []


def test_double_cover():
    inst = instance("bw-all", 3)
    c = CaseStatement(((TRUE, 1.0), (TRUE, 0.0)))
    bad = check_partition(inst, inst.states, c)
    assert len(bad) == len(inst.states)
    assert all(v.satisfied == (0, 1) for v in bad)


def test_prob_partition():
    inst = load_instance("bw-rain", 3)
    states = inst.enumerate()
    d = inst.domain.stoch_actions["move"]
    for _, case in d.prob:
        assert check_partition(inst, states, case) == []


def test_explosion_cap():
    from relpolicy.errors import ExplosionError

    inst = load_instance("bw-all", 4)
    with pytest.raises(ExplosionError):
        enumerate_states(inst, inst.seed, cap=10)
