import functools

import pytest

from relpolicy.errors import DSLSyntaxError, EmptyExamplesError, NoBinderError
from relpolicy.ground import GroundAction, State
from relpolicy.learn import (
    FailureLeaf,
    Learner,
    LearnerConfig,
    Split,
    SuccessLeaf,
    build_tree,
    format_tree,
    leaves,
    parse_tree,
    prune,
    pure,
    route,
    satisfies,
)
from relpolicy.pipeline import learn_from, training_consistent
from relpolicy.regress import HypothesisSpace, generate
from relpolicy.solve import Example, make_examples

from conftest import solved


@functools.lru_cache(maxsize=None)
def lg_tree(prune_on=True, selector="paper"):
    return learn_from(solved("lg-ex", 2), LearnerConfig(max_n=4, prune=prune_on, selector=selector))


def ex(value, symbol="move", args=("A", "B"), state=State.of([])):
    return Example(state, value, GroundAction(symbol, args))


def test_pure():
    assert pure([])
    assert pure([ex(10.0), ex(10.0 + 1e-7, args=("B", "A"))])
    assert not pure([ex(10.0), ex(9.0)])
    assert not pure([ex(10.0), ex(10.0, symbol="noop", args=())])


def test_config_validation():
    with pytest.raises(ValueError):
        LearnerConfig(max_n=-1)
    with pytest.raises(ValueError):
        LearnerConfig(selector="gini")
    with pytest.raises(ValueError):
        LearnerConfig(eps=0)


def test_satisfies_layer0_ignores_action():
    s = solved("lg-ex", 2)
    space = generate(s.inst.domain, 0)
    examples = make_examples(s.mdp, s.vt, "P")
    goal = [e for e in examples if satisfies(e, space[0], s.inst)]
    assert goal and all(e.action.symbol == "noop" for e in goal)


def test_satisfies_requires_matching_symbol(lg2):
    space = generate(lg2.domain, 1)
    h = next(h for h in space.hyps if h.stoch_action == "unload")
    s = solved("lg-ex", 2)
    for e in make_examples(s.mdp, s.vt, "P"):
        if e.action.symbol != "unload":
            assert not satisfies(e, h, lg2)


def test_root_split_is_goal_guard():
    s = solved("lg-ex", 2)
    examples = make_examples(s.mdp, s.vt, "P")
    space = HypothesisSpace(s.inst.domain)
    learner = Learner(examples, LearnerConfig(), space, s.inst)
    E = list(range(len(examples)))
    assert learner.select(E, list(space.layers[0]), frozenset()) == 0
    pos = [i for i in E if learner.sat(i, 0)]
    # the positive side is a single value class, hence score = |pos|
    assert learner._score(E, pos) == len(pos) == 28


def test_select_prefers_smaller_id_on_ties(bw3):
    examples = [
        ex(2000.0, "noop", (), bw3.states[1]),
        ex(1900.0, "noop", (), bw3.states[2]),
    ]
    space = HypothesisSpace(bw3.domain)
    learner = Learner(examples, LearnerConfig(closed_consistency=False), space, bw3)
    learner._sat = {(0, 0): True, (1, 0): False, (0, 1): False, (1, 1): True}
    learner.sat = lambda i, h: learner._sat[(i, h)]
    assert learner.select([0, 1], [1, 0], frozenset()) == 0


def test_pure_examples_give_one_leaf():
    s = solved("lg-ex", 2)
    goal = [e for e in make_examples(s.mdp, s.vt, "P") if e.action.symbol == "noop"]
    tree, report = build_tree(goal, LearnerConfig(), HypothesisSpace(s.inst.domain), s.inst)
    assert tree == SuccessLeaf("noop", goal[0].value, ())
    assert report.success_leaves == 1 and report.failure_leaves == 0


def test_empty_examples():
    s = solved("lg-ex", 2)
    with pytest.raises(EmptyExamplesError):
        build_tree([], LearnerConfig(), HypothesisSpace(s.inst.domain), s.inst)


def test_no_binder_at_depth_zero():
    s = solved("lg-ex", 2)
    unload = [e for e in make_examples(s.mdp, s.vt, "P") if e.action.symbol == "unload"]
    with pytest.raises(NoBinderError):
        build_tree(unload, LearnerConfig(max_n=0), HypothesisSpace(s.inst.domain), s.inst)


def test_failure_leaf_when_depth_exhausted():
    s = solved("lg-ex", 2)
    tree, report = build_tree(make_examples(s.mdp, s.vt, "P"), LearnerConfig(max_n=1),
                              HypothesisSpace(s.inst.domain), s.inst)
    assert any(isinstance(leaf, FailureLeaf) for leaf in leaves(tree))
    assert report.failure_leaves >= 1


def test_lg_tree_shape():
    tree, space, examples, report = lg_tree()
    ls = leaves(tree)
    assert len(ls) == 5
    assert all(isinstance(leaf, SuccessLeaf) for leaf in ls)
    assert sorted(leaf.action for leaf in ls) == ["drive", "drive", "load", "noop", "unload"]
    assert isinstance(tree, Split) and tree.hyp == 0
    assert report.max_depth_used == 4


def test_training_consistency():
    tree, space, examples, _ = lg_tree()
    s = solved("lg-ex", 2)
    assert training_consistent(tree, examples, s.inst, space)


def test_paths_are_coherent():
    # every example routes to a leaf of its own action and value, and each
    # split hypothesis on its path agrees with the example
    tree, space, examples, _ = lg_tree()
    inst = solved("lg-ex", 2).inst
    for e in examples:
        node = tree
        while isinstance(node, Split):
            node = node.pos if satisfies(e, space[node.hyp], inst) else node.neg
        assert node == route(tree, e, inst, space)
        assert node.action == e.action.symbol
        assert node.value == pytest.approx(e.value, abs=1e-6)


def test_leaf_binders_are_goal_seeded():
    tree, space, _, _ = lg_tree()
    for leaf in leaves(tree):
        if leaf.binders:
            # goal-seeded binders come first; a leaf at the depth limit may have none
            seeded = [space[b].seed_value == 100.0 for b in leaf.binders]
            assert seeded == sorted(seeded, reverse=True)
            assert all(space[b].stoch_action == leaf.action for b in leaf.binders)


def test_build_is_deterministic():
    s = solved("lg-ex", 2)
    a = learn_from(s, LearnerConfig(max_n=4))
    b = lg_tree()
    assert format_tree(a[0]) == format_tree(b[0])
    assert a[3].text() == b[3].text()


def test_pruning_keeps_tree():
    on, off = lg_tree(True), lg_tree(False)
    assert on[3].generated < off[3].generated
    assert on[3].pruned > 0 and off[3].pruned == 0
    assert [leaf.action for leaf in leaves(on[0])] == [leaf.action for leaf in leaves(off[0])]


def test_prune_helper(lg2):
    s = solved("lg-ex", 2)
    examples = make_examples(s.mdp, s.vt, "P")
    space = generate(lg2.domain, 2)
    kept = prune(space.layers[2], examples, lg2, space)
    assert set(kept) <= set(space.layers[2])
    assert all(any(satisfies(e, space[k], lg2) for e in examples) for k in kept)
    assert prune(space.layers[2], [], lg2, space) == []


def test_infogain_selector():
    tree, space, examples, report = lg_tree(selector="infogain")
    assert report.selector == "infogain"
    assert training_consistent(tree, examples, solved("lg-ex", 2).inst, space)


def test_report_text():
    text = lg_tree()[3].text()
    first = text.splitlines()[0]
    assert first.startswith("(report :hypotheses-generated ")
    assert ":prune on" in first and ":failure-leaves 0" in first
    assert text.count("(node :kind leaf") == 5


def test_tree_round_trip():
    tree = lg_tree()[0]
    text = format_tree(tree)
    assert parse_tree(text) == tree
    assert parse_tree("(fail)") == FailureLeaf()


def test_tree_syntax_errors():
    with pytest.raises(DSLSyntaxError):
        parse_tree("(bogus)")
    with pytest.raises(DSLSyntaxError):
        parse_tree("(fail) (fail)")
