import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relpolicy import fol
from relpolicy.errors import SortError
from relpolicy.fol import (
    FALSE,
    TRUE,
    ActionEq,
    ActionTerm,
    ActVar,
    And,
    CaseStatement,
    Const,
    Eq,
    Exists,
    FluentAtom,
    Forall,
    Not,
    Or,
    StaticAtom,
    Var,
)
from relpolicy.domain import parse_instance
from relpolicy.fixtures import instance_text, load_domain
from relpolicy.ground import Instance, State, holds

x, y, z, b1, b2 = Var("x"), Var("y"), Var("z"), Var("b1"), Var("b2")
A, B, T = Const("A"), Const("B"), Const("table")
a = ActVar()


def On(s, t):
    return FluentAtom("On", (s, t))


def OnG(s, t):
    return StaticAtom("OnG", (s, t))


def P(name):
    return FluentAtom(name, ())


# ------------------------------------------------------------------ substitute


def test_substitute_direct():
    assert fol.substitute(On(x, y), {x: A}) == On(A, y)


def test_substitute_avoids_capture():
    got = fol.substitute(Exists(y, On(x, y)), {x: y})
    assert isinstance(got, Exists)
    assert got.var != y
    assert got.body == On(y, got.var)
    assert fol.free_vars(got) == {y}


def test_substitute_action_variable_leaves_pending_equation():
    f = ActionEq(a, ActionTerm("moveS", (b1, b2)))
    got = fol.substitute(f, {a: ActionTerm("moveS", (x, T))})
    assert got == ActionEq(ActionTerm("moveS", (x, T)), ActionTerm("moveS", (b1, b2)))
    assert fol.simplify(got) == fol.simplify(And((Eq(x, b1), Eq(T, b2))))


def test_substitute_sort_error():
    with pytest.raises(SortError):
        fol.substitute(On(x, y), {x: ActionTerm("moveS", (A, B))})


def test_substitute_simultaneous():
    assert fol.substitute(On(x, y), {x: y, y: x}) == On(y, x)


# ------------------------------------------------------------------- simplify


def test_distinct_action_symbols_are_unequal():
    f = ActionEq(ActionTerm("moveS", (x, y)), ActionTerm("moveF", (b1, b2)))
    assert fol.simplify(f) == FALSE


def test_same_action_symbol_gives_argument_equalities():
    f = ActionEq(ActionTerm("moveS", (x, y)), ActionTerm("moveS", (b1, b2)))
    got = fol.simplify(f)
    assert isinstance(got, And)
    assert set(got.args) == {fol.simplify(Eq(x, b1)), fol.simplify(Eq(y, b2))}


def test_one_point_rule():
    assert fol.simplify(Exists(x, And((Eq(x, A), On(x, T))))) == On(A, T)


def test_constant_equalities():
    assert fol.simplify(Eq(A, A)) == TRUE
    assert fol.simplify(Eq(A, B)) == FALSE


def test_boolean_folding_and_flattening():
    f = And((TRUE, And((On(x, y), On(x, y))), Or((FALSE, P("Rain")))))
    got = fol.simplify(f)
    assert isinstance(got, And)
    assert set(got.args) == {On(x, y), P("Rain")}


def test_vacuous_quantifier_dropped():
    assert fol.simplify(Forall(z, On(x, y))) == On(x, y)


def test_simplify_result_is_rectified():
    f = And((Exists(z, On(z, x)), Exists(z, On(z, y))))
    got = fol.simplify(f)
    bound = [g.var for g in fol.subformulas(got) if isinstance(g, (Exists, Forall))]
    assert len(bound) == len(set(bound))


# ------------------------------------------------------------------ canonical


def test_canonical_alpha_invariance():
    assert fol.canonicalize(Exists(x, On(x, A))) == fol.canonicalize(Exists(z, On(z, A)))


def test_canonical_commutativity():
    p, q = P("Rain"), On(A, B)
    assert fol.canonicalize(And((p, q))) == fol.canonicalize(And((q, p)))


def test_canonical_nnf():
    p, q = P("Rain"), On(A, B)
    assert fol.canonicalize(Not(And((p, q)))) == fol.canonicalize(Or((Not(p), Not(q))))


def test_canonical_distinguishes():
    assert fol.canonicalize(On(A, B)) != fol.canonicalize(On(B, A))


# ------------------------------------------------------------------ free vars


def test_free_vars():
    assert fol.free_vars(Exists(x, On(x, y))) == {y}
    assert fol.free_vars(P("Rain")) == set()
    assert fol.free_vars(ActionEq(a, ActionTerm("moveS", (x, T)))) == {a, x}


def test_state_formula_check():
    assert fol.is_state_formula(Forall(b1, On(b1, T)))
    assert not fol.is_state_formula(ActionEq(a, ActionTerm("moveS", (x, T))))


def test_case_statement():
    c = CaseStatement(((P("Rain"), 0.7), (Not(P("Rain")), 0.9)))
    assert c.guards == (P("Rain"), Not(P("Rain")))
    assert str(c) == "(case ((Rain) 0.7) ((not (Rain)) 0.9))"
    with pytest.raises(ValueError):
        CaseStatement(())


def test_formulas_are_immutable():
    f = On(x, y)
    with pytest.raises(AttributeError):
        f.pred = "Other"


# ------------------------------------------------------------ property suite

VARS = (x, y, z)
TERMS = st.sampled_from(VARS + (A, B, T))


def _atoms():
    return st.one_of(
        st.builds(On, TERMS, TERMS),
        st.builds(OnG, TERMS, TERMS),
        st.builds(Eq, TERMS, TERMS),
        st.just(P("Rain")),
        st.just(TRUE),
        st.just(FALSE),
    )


def _extend(children):
    return st.one_of(
        st.builds(Not, children),
        st.builds(lambda xs: And(tuple(xs)), st.lists(children, min_size=2, max_size=3)),
        st.builds(lambda xs: Or(tuple(xs)), st.lists(children, min_size=2, max_size=3)),
        st.builds(Exists, st.sampled_from(VARS), children),
        st.builds(Forall, st.sampled_from(VARS), children),
    )


FORMULAS = st.recursive(_atoms(), _extend, max_leaves=8)

OBJECTS = ("A", "B", "C", "table")
ALL_FACTS = [("On", (p, q)) for p in OBJECTS for q in OBJECTS] + [("Rain", ())]


def _rain_instance():
    # the blocks domain variant with a Rain fluent
    dom = load_domain("bw-rain")
    return Instance(dom, parse_instance(instance_text("bw", 3), dom))


_INST = _rain_instance()

STATES = st.builds(lambda fs: State.of(fs), st.sets(st.sampled_from(ALL_FACTS), max_size=6))


def _same_models(f, g, e):
    for vals in itertools.product(OBJECTS, repeat=3):
        b = dict(zip(VARS, vals))
        if holds(e, _INST, f, b) != holds(e, _INST, g, b):
            return False
    return True


@settings(max_examples=150, deadline=None)
@given(FORMULAS, STATES)
def test_simplify_preserves_models(f, e):
    assert _same_models(f, fol.simplify(f), e)


@settings(max_examples=150, deadline=None)
@given(FORMULAS)
def test_simplify_idempotent(f):
    g = fol.simplify(f)
    assert fol.simplify(g) == g


@settings(max_examples=150, deadline=None)
@given(FORMULAS, STATES)
def test_nnf_preserves_models(f, e):
    assert _same_models(f, fol.nnf(f), e)


@settings(max_examples=150, deadline=None)
@given(FORMULAS, st.sampled_from(VARS), TERMS)
def test_substitute_free_vars(f, v, t):
    if v not in fol.free_vars(f):
        return
    g = fol.substitute(f, {v: t})
    extra = {t} if isinstance(t, Var) else set()
    assert fol.free_vars(g) == (fol.free_vars(f) - {v}) | extra


@settings(max_examples=100, deadline=None)
@given(FORMULAS, st.sampled_from(VARS), TERMS, STATES)
def test_substitute_semantics(f, v, t, e):
    g = fol.substitute(f, {v: t})
    for vals in itertools.product(OBJECTS, repeat=3):
        b = dict(zip(VARS, vals))
        shifted = dict(b)
        shifted[v] = b[t] if isinstance(t, Var) else t.name
        assert holds(e, _INST, g, b) == holds(e, _INST, f, shifted)


def _rename_bound(f, suffix):
    """Rename every bound variable and reverse And/Or children."""
    if isinstance(f, (Exists, Forall)):
        nv = Var(f.var.name + suffix)
        body = fol.substitute(f.body, {f.var: nv})
        return type(f)(nv, _rename_bound(body, suffix))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(_rename_bound(g, suffix) for g in reversed(f.args)))
    if isinstance(f, Not):
        return Not(_rename_bound(f.arg, suffix))
    return f


@settings(max_examples=150, deadline=None)
@given(FORMULAS)
def test_canonical_invariant_under_renaming_and_reordering(f):
    f = fol.rectify(f)
    assert fol.canonicalize(f) == fol.canonicalize(_rename_bound(f, "q"))


def test_property_instance_objects():
    # arbitrary fact sets over the 3-block objects, reachable or not
    assert _INST.objects == OBJECTS
