import itertools

import pytest

from relpolicy import fol
from relpolicy.domain import parse_formula_text
from relpolicy.fixtures import load_domain
from relpolicy.fol import TRUE, ActionTerm, Const, FluentAtom, StaticAtom, Var
from relpolicy.ground import GroundAction, State, applicable, holds, transition
from relpolicy.regress import HypothesisSpace, generate, parse_hypotheses, regress_open, repr_

from conftest import instance
from oracles import regression_violations

x, y, b1, b2 = Var("x"), Var("y"), Var("b1"), Var("b2")


def test_repr_rain():
    d = load_domain("bw-rain")
    rain = FluentAtom("Rain", ())
    assert repr_(rain, ActionTerm("moveS", (x, y)), d.ssas) == rain


def test_repr_static_atom_unchanged():
    d = load_domain("bw-rain")
    g = StaticAtom("OnG", (b1, b2))
    assert repr_(g, ActionTerm("moveS", (x, y)), d.ssas) == g


def test_repr_on(bw3):
    d = bw3.domain
    got = repr_(FluentAtom("On", (b1, b2)), ActionTerm("moveS", (x, y)), d.ssas)
    expected = parse_formula_text(
        "(or (and (= x b1) (= y b2)) (and (On b1 b2) (implies (not (= y b2)) (not (= x b1)))))",
        d,
        variables=("x", "y", "b1", "b2"),
    )
    for e in bw3.states:
        for vals in itertools.product(bw3.objects, repeat=4):
            b = dict(zip((x, y, b1, b2), vals))
            assert holds(e, bw3, got, b) == holds(e, bw3, expected, b)


def test_repr_missing_ssa():
    from dataclasses import replace

    from relpolicy.errors import NoSSAError

    d = load_domain("bw-rain")
    d2 = replace(d, ssas={"On": d.ssas["On"]})
    with pytest.raises(NoSSAError):
        repr_(FluentAtom("Rain", ()), ActionTerm("moveS", (x, y)), d2.ssas)


def test_regress_true_gives_poss():
    d = load_domain("bw-rain")
    for act in d.det_actions.values():
        params, body = regress_open(TRUE, act, d)
        assert params == act.params
        assert fol.canonicalize(body) == fol.canonicalize(fol.simplify(act.poss))


def test_regress_rain_through_failed_move():
    d = load_domain("bw-rain")
    act = d.det_actions["moveF"]
    _, body = regress_open(FluentAtom("Rain", ()), act, d)
    want = fol.simplify(fol.And((act.poss, FluentAtom("Rain", ()))))
    assert fol.canonicalize(body) == fol.canonicalize(want)


def test_failed_move_regression_of_goal_is_poss_and_goal():
    d = load_domain("bw-rain")
    goal = d.reward.branches[0][0]
    act = d.det_actions["moveF"]
    _, body = regress_open(goal, act, d)
    want = fol.simplify(fol.And((act.poss, goal)))
    assert fol.canonicalize(body) == fol.canonicalize(want)


def test_layer0_is_reward_guards():
    d = load_domain("bw-rain")
    space = generate(d, 0)
    assert space.layer_sizes() == [2]
    assert [h.closed for h in space.hyps] == list(d.reward.guards)
    assert all(h.det_action is None and h.params == () for h in space.hyps)


def test_expand_bw_all_depth1():
    space = generate(load_domain("bw-all"), 1)
    assert space.layer_sizes() == [2, 2]
    assert all(h.det_action == "moveS" and h.stoch_action == "move" for h in space.hyps[2:])


def test_expand_bw_rain_depth1():
    space = generate(load_domain("bw-rain"), 1)
    assert 1 <= space.layer_sizes()[1] <= 4


def test_expand_from_false_parent():
    d = load_domain("bw-all")
    space = HypothesisSpace(d)
    h = space._add(0, None, None, (), fol.FALSE, None, 0.0)
    assert space.expand([h.id], 1) == []
    assert space.discarded_false == 1


def test_logistics_unload_hypothesis():
    inst = instance("lg-ex", 2)
    space = generate(inst.domain, 1)
    unload = [h for h in space.hyps if h.depth == 1 and h.stoch_action == "unload" and h.parent == 0]
    assert len(unload) == 1
    h = unload[0]
    b, t = h.params
    # every satisfying binding has the box on the truck and the truck in Sydney
    for e in inst.states:
        for vals in itertools.product(inst.objects, repeat=2):
            bind = dict(zip((b, t), vals))
            if holds(e, inst, h.body, bind) and not holds(e, inst, space[0].closed):
                assert ("On", vals) in e and ("Tin", (vals[1], "Syd")) in e


def test_generate_monotone():
    d = load_domain("lg-ex")
    small, big = generate(d, 2), generate(d, 3)
    n = sum(small.layer_sizes())
    assert [h.closed for h in big.hyps[:n]] == [h.closed for h in small.hyps]
    assert big.layer_sizes()[:3] == small.layer_sizes()


@pytest.mark.parametrize("name", ["bw-rain", "lg-ex", "lg-all-s"])
def test_hypothesis_invariants(name):
    space = generate(load_domain(name), 3)
    seen = set()
    for h in space.hyps:
        assert fol.is_state_formula(h.body)
        assert fol.free_object_vars(h.body) <= set(h.params)
        assert not fol.free_vars(h.closed)
        bound = fol.all_var_names(h.body) - {p.name for p in h.params}
        assert not bound & {p.name for p in h.params}
        key = (h.depth, h.stoch_action, h.key)
        assert key not in seen
        seen.add(key)
        if h.depth:
            assert space[h.parent].depth == h.depth - 1
            assert h.seed_value == space[h.parent].seed_value


def test_records_round_trip():
    d = load_domain("lg-ex")
    space = generate(d, 2)
    again = parse_hypotheses(space.records(), d)
    assert again.records() == space.records()
    assert again.layer_sizes() == space.layer_sizes()


def test_goal_regression_matches_worked_example(bw3):
    d = bw3.domain
    goal = d.reward.branches[0][0]
    params, body = regress_open(goal, d.det_actions["moveS"], d)
    printed = parse_formula_text(
        "(and (not (= x table)) (not (= x y)) (not (exists (b3) (On b3 x)))"
        " (or (= y table) (not (exists (b3) (On b3 y))))"
        " (forall (b1 b2) (implies (OnG b1 b2)"
        " (or (and (= x b1) (= y b2)) (and (On b1 b2) (implies (not (= y b2)) (not (= x b1))))))))",
        d,
        variables=("x", "y"),
    )
    for e in bw3.states:
        for vals in itertools.product(bw3.objects, repeat=2):
            b = dict(zip(params, vals))
            assert holds(e, bw3, body, b) == holds(e, bw3, printed, dict(zip((x, y), vals)))


@pytest.mark.parametrize("name,size", [("bw-all", 3), ("bw-rain", 3), ("lg-ex", 2)])
def test_regression_soundness_brute_force(name, size):
    bad, checks = regression_violations(instance(name, size), 2, brute_force=True)
    assert checks > 0
    assert bad == []


def test_soundness_single_binding(bw3):
    # the oracle's two sides on one handpicked case
    space = generate(bw3.domain, 1)
    h = space[2]
    e = on_table(bw3)
    for args in [("A", "B"), ("B", "A"), ("A", "table")]:
        a = GroundAction(h.det_action, args)
        lhs = holds(e, bw3, h.body, dict(zip(h.params, args)))
        rhs = applicable(e, bw3, a) and holds(transition(e, bw3, a), bw3, space[h.parent].closed)
        assert lhs == rhs
    assert holds(e, bw3, h.body, dict(zip(h.params, ("A", "B"))))


def on_table(inst):
    return State.of(("On", (o, "table")) for o in inst.objects if o != "table")


def test_constants_survive_regression():
    d = load_domain("lg-ex")
    space = generate(d, 1)
    assert any(Const("Syd") in fol.constants_of(h.body) for h in space.hyps[2:])


@pytest.mark.parametrize("name,size", [("lg-ex", 2), ("bw-all", 4)])
def test_orbits_cover_all_states(name, size):
    from oracles import automorphisms, orbit_representatives

    inst = instance(name, size)
    autos = automorphisms(inst)
    reps = orbit_representatives(inst)
    assert len(reps) < len(inst.states)
    covered = {State.of((p, tuple(m[x] for x in a)) for p, a in e.facts) for e in reps for m in autos}
    assert covered == set(inst.states)
    # a symmetric state answers every hypothesis like its representative
    space = generate(inst.domain, 2)
    e = reps[-1]
    for m in autos:
        img = State.of((p, tuple(m[x] for x in a)) for p, a in e.facts)
        for h in space.hyps:
            assert holds(e, inst, h.closed) == holds(img, inst, h.closed)
