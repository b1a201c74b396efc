"""First-order state formulae: terms, formula nodes, substitution,
simplification and canonical keys.

Formulas are immutable and hash-consed by value (hashes are cached on the
node, so large regressed formulas can be used as dictionary keys cheaply).
Fluent atoms carry no situation argument; every fluent atom of a formula
refers to the one situation the formula is evaluated in.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from .errors import ArityError, SortError

# --------------------------------------------------------------------------
# terms


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable name must be non-empty")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class Const:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("constant name must be non-empty")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ActVar:
    """Variable of sort action (the ``a`` of a successor state axiom)."""

    name: str = "a"

    def __str__(self) -> str:
        return self.name


ObjectTerm = Union[Var, Const]


@dataclass(frozen=True)
class ActionTerm:
    symbol: str
    args: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        for t in self.args:
            if not isinstance(t, (Var, Const)):
                raise SortError(f"action argument {t!r} is not an object term")

    def __str__(self) -> str:
        return "(" + " ".join([self.symbol, *map(str, self.args)]) + ")"


def _term_vars(t) -> frozenset:
    if isinstance(t, (Var, ActVar)):
        return frozenset((t,))
    if isinstance(t, ActionTerm):
        return frozenset(a for a in t.args if isinstance(a, Var))
    return frozenset()


# --------------------------------------------------------------------------
# formula nodes


class Formula:
    __slots__ = ("_hash", "_fv")
    _fields: tuple = ()

    def _key(self) -> tuple:
        return tuple(getattr(self, f) for f in self._fields)

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if type(self) is not type(other):
            return NotImplemented if not isinstance(other, Formula) else False
        if hash(self) != hash(other):
            return False
        return self._key() == other._key()

    def __hash__(self) -> int:
        try:
            return self._hash
        except AttributeError:
            h = hash((type(self).__name__, self._key()))
            object.__setattr__(self, "_hash", h)
            return h

    def __setattr__(self, name, value):
        raise AttributeError("formulas are immutable")

    def __repr__(self) -> str:
        return f"{type(self).__name__}<{format_formula(self)}>"

    def __str__(self) -> str:
        return format_formula(self)

    def _init(self, **fields):
        for k, v in fields.items():
            object.__setattr__(self, k, v)


class _Const0(Formula):
    __slots__ = ()

    def __init__(self):
        pass


class Top(_Const0):
    __slots__ = ()


class Bottom(_Const0):
    __slots__ = ()


TRUE = Top()
FALSE = Bottom()


class Atom(Formula):
    __slots__ = ("pred", "args")
    _fields = ("pred", "args")

    def __init__(self, pred: str, args: Iterable = ()):
        args = tuple(args)
        for t in args:
            if not isinstance(t, (Var, Const)):
                raise SortError(f"argument {t!r} of {pred} is not an object term")
        self._init(pred=pred, args=args)


class StaticAtom(Atom):
    """Situation-independent relation (e.g. ``OnG``, ``Box``)."""

    __slots__ = ()


class FluentAtom(Atom):
    __slots__ = ()


class Eq(Formula):
    __slots__ = ("left", "right")
    _fields = ("left", "right")

    def __init__(self, left, right):
        for t in (left, right):
            if not isinstance(t, (Var, Const)):
                raise SortError(f"equality operand {t!r} is not an object term")
        self._init(left=left, right=right)


class ActionEq(Formula):
    """``left = right`` over action terms; ``left`` is an action variable
    until substitution replaces it with a concrete action term."""

    __slots__ = ("left", "right")
    _fields = ("left", "right")

    def __init__(self, left, right: ActionTerm):
        if not isinstance(left, (ActVar, ActionTerm)) or not isinstance(right, ActionTerm):
            raise SortError("ActionEq needs action-sorted operands")
        self._init(left=left, right=right)


class Not(Formula):
    __slots__ = ("arg",)
    _fields = ("arg",)

    def __init__(self, arg: Formula):
        self._init(arg=arg)


class _NAry(Formula):
    __slots__ = ("args",)
    _fields = ("args",)

    def __init__(self, args: Iterable[Formula]):
        self._init(args=tuple(args))


class And(_NAry):
    __slots__ = ()


class Or(_NAry):
    __slots__ = ()


class _Quant(Formula):
    __slots__ = ("var", "body")
    _fields = ("var", "body")

    def __init__(self, var: Var, body: Formula):
        if not isinstance(var, Var):
            raise SortError("only object variables can be quantified")
        self._init(var=var, body=body)


class Exists(_Quant):
    __slots__ = ()


class Forall(_Quant):
    __slots__ = ()


def implies(a: Formula, b: Formula) -> Formula:
    return Or((Not(a), b))


def exists_many(vs: Iterable[Var], body: Formula) -> Formula:
    for v in reversed(tuple(vs)):
        body = Exists(v, body)
    return body


# --------------------------------------------------------------------------
# traversal helpers


def free_vars(f: Formula) -> frozenset:
    """Free variables (object ``Var`` and action ``ActVar`` alike)."""
    try:
        return f._fv
    except AttributeError:
        pass
    if isinstance(f, Atom):
        fv = frozenset(t for t in f.args if isinstance(t, Var))
    elif isinstance(f, (Eq, ActionEq)):
        fv = _term_vars(f.left) | _term_vars(f.right)
    elif isinstance(f, Not):
        fv = free_vars(f.arg)
    elif isinstance(f, _NAry):
        fv = frozenset().union(*(free_vars(a) for a in f.args))
    elif isinstance(f, _Quant):
        fv = free_vars(f.body) - {f.var}
    else:
        fv = frozenset()
    object.__setattr__(f, "_fv", fv)
    return fv


def free_object_vars(f: Formula) -> frozenset:
    return frozenset(v for v in free_vars(f) if isinstance(v, Var))


def all_var_names(f: Formula) -> set:
    """Names of every variable occurring in ``f``, bound or free."""
    out: set = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, _Quant):
            out.add(g.var.name)
            stack.append(g.body)
        elif isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, _NAry):
            stack.extend(g.args)
        else:
            out.update(v.name for v in free_vars(g))
    return out


def subformulas(f: Formula):
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        if isinstance(g, _Quant):
            stack.append(g.body)
        elif isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, _NAry):
            stack.extend(reversed(g.args))


def is_state_formula(f: Formula) -> bool:
    return not any(isinstance(g, ActionEq) for g in subformulas(f)) and not any(
        isinstance(v, ActVar) for v in free_vars(f)
    )


def size(f: Formula) -> int:
    return sum(1 for _ in subformulas(f))


def constants_of(f: Formula) -> set:
    out = set()
    for g in subformulas(f):
        if isinstance(g, Atom):
            out.update(t for t in g.args if isinstance(t, Const))
        elif isinstance(g, Eq):
            out.update(t for t in (g.left, g.right) if isinstance(t, Const))
        elif isinstance(g, ActionEq):
            for side in (g.left, g.right):
                if isinstance(side, ActionTerm):
                    out.update(t for t in side.args if isinstance(t, Const))
    return out


_TRAILING_DIGITS = re.compile(r"\d+$")


def fresh_name(base: str, avoid) -> str:
    if base not in avoid:
        return base
    stem = _TRAILING_DIGITS.sub("", base) or "v"
    k = 1
    while f"{stem}{k}" in avoid:
        k += 1
    return f"{stem}{k}"


# --------------------------------------------------------------------------
# substitution


def _subst_term(t, binding):
    if isinstance(t, Var):
        r = binding.get(t, t)
        if isinstance(r, ActionTerm):
            raise SortError(f"object variable {t} bound to action term {r}")
        return r
    return t


def _subst_action(t, binding):
    if isinstance(t, ActVar):
        r = binding.get(t, t)
        if not isinstance(r, (ActVar, ActionTerm)):
            raise SortError(f"action variable {t} bound to object term {r}")
        return r
    return ActionTerm(t.symbol, tuple(_subst_term(a, binding) for a in t.args))


def substitute(f: Formula, binding: Mapping) -> Formula:
    """Capture-avoiding simultaneous substitution.

    ``binding`` maps ``Var`` to object terms and ``ActVar`` to ``ActionTerm``.
    Bound variables that would capture a variable of the substituted range
    are renamed.
    """
    for k, v in binding.items():
        if isinstance(k, Var) and isinstance(v, ActionTerm):
            raise SortError(f"object variable {k} bound to action term {v}")
        if isinstance(k, ActVar) and not isinstance(v, (ActVar, ActionTerm)):
            raise SortError(f"action variable {k} bound to object term {v}")
    binding = {k: v for k, v in binding.items() if k != v}
    if not binding:
        return f
    return _subst(f, binding)


def _subst(f: Formula, binding: dict) -> Formula:
    fv = free_vars(f)
    binding = {k: v for k, v in binding.items() if k in fv}
    if not binding:
        return f
    if isinstance(f, Atom):
        return type(f)(f.pred, tuple(_subst_term(t, binding) for t in f.args))
    if isinstance(f, Eq):
        return Eq(_subst_term(f.left, binding), _subst_term(f.right, binding))
    if isinstance(f, ActionEq):
        left = _subst_action(f.left, binding)
        right = _subst_action(f.right, binding)
        if (
            isinstance(left, ActionTerm)
            and left.symbol == right.symbol
            and len(left.args) != len(right.args)
        ):
            raise ArityError(f"{left} vs {right}")
        return ActionEq(left, right)
    if isinstance(f, Not):
        return Not(_subst(f.arg, binding))
    if isinstance(f, _NAry):
        return type(f)(tuple(_subst(a, binding) for a in f.args))
    if isinstance(f, _Quant):
        v = f.var
        rng = frozenset().union(*(_term_vars(t) for t in binding.values()))
        if v in rng:
            avoid = {x.name for x in rng} | all_var_names(f.body) | {
                k.name for k in binding
            }
            nv = Var(fresh_name(v.name, avoid))
            inner = dict(binding)
            inner[v] = nv
            return type(f)(nv, _subst(f.body, inner))
        return type(f)(v, _subst(f.body, binding))
    return f


# --------------------------------------------------------------------------
# simplification


def _term_order(t):
    return (isinstance(t, Const), t.name)


def _mk_eq(l, r) -> Formula:
    if l == r:
        return TRUE
    if isinstance(l, Const) and isinstance(r, Const):
        return FALSE
    if _term_order(r) < _term_order(l):
        l, r = r, l
    return Eq(l, r)


def _is_literal(f: Formula) -> bool:
    return isinstance(f, (Atom, Eq, ActionEq)) or (
        isinstance(f, Not) and isinstance(f.arg, (Atom, Eq, ActionEq))
    )


def _complement(f: Formula) -> Formula:
    return f.arg if isinstance(f, Not) else Not(f)


def _mk_and(items: Iterable[Formula]) -> Formula:
    out: list = []
    seen: set = set()
    for g in items:
        parts = g.args if isinstance(g, And) else (g,)
        for p in parts:
            if p is TRUE or isinstance(p, Top):
                continue
            if isinstance(p, Bottom):
                return FALSE
            if p in seen:
                continue
            seen.add(p)
            out.append(p)
    for p in out:
        if _is_literal(p) and _complement(p) in seen:
            return FALSE
    # x = c ∧ x = d with distinct constants
    bound: dict = {}
    for p in out:
        if isinstance(p, Eq) and isinstance(p.left, Var) and isinstance(p.right, Const):
            if bound.setdefault(p.left, p.right) != p.right:
                return FALSE
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def _mk_or(items: Iterable[Formula]) -> Formula:
    out: list = []
    seen: set = set()
    for g in items:
        parts = g.args if isinstance(g, Or) else (g,)
        for p in parts:
            if isinstance(p, Bottom):
                continue
            if isinstance(p, Top):
                return TRUE
            if p in seen:
                continue
            seen.add(p)
            out.append(p)
    for p in out:
        if _is_literal(p) and _complement(p) in seen:
            return TRUE
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def _neg(g: Formula) -> Formula:
    """Negation of an already simplified formula, kept in negation normal form."""
    if isinstance(g, Top):
        return FALSE
    if isinstance(g, Bottom):
        return TRUE
    if isinstance(g, Not):
        return g.arg
    if isinstance(g, And):
        return _mk_or(_neg(a) for a in g.args)
    if isinstance(g, Or):
        return _mk_and(_neg(a) for a in g.args)
    if isinstance(g, Exists):
        return _mk_forall(g.var, _neg(g.body))
    if isinstance(g, Forall):
        return _mk_exists(g.var, _neg(g.body))
    return Not(g)


def _eq_partner(lit: Formula, v: Var):
    """If ``lit`` is ``v = t`` with ``t`` not ``v``, return ``t``."""
    if isinstance(lit, Eq):
        if lit.left == v and lit.right != v:
            return lit.right
        if lit.right == v and lit.left != v:
            return lit.left
    return None


def _mk_exists(v: Var, body: Formula) -> Formula:
    if v not in free_vars(body):
        return body
    if isinstance(body, Or):
        return _mk_or(_mk_exists(v, a) for a in body.args)
    if _eq_partner(body, v) is not None:
        return TRUE
    if isinstance(body, And):
        for i, c in enumerate(body.args):
            t = _eq_partner(c, v)
            if t is not None:
                rest = _mk_and(body.args[:i] + body.args[i + 1 :])
                return _simp(substitute(rest, {v: t}))
        outside = [c for c in body.args if v not in free_vars(c)]
        if outside:
            inside = [c for c in body.args if v in free_vars(c)]
            return _mk_and(outside + [_mk_exists(v, _mk_and(inside))])
    return Exists(v, body)


def _mk_forall(v: Var, body: Formula) -> Formula:
    if v not in free_vars(body):
        return body
    if isinstance(body, And):
        return _mk_and(_mk_forall(v, a) for a in body.args)
    if isinstance(body, Not) and _eq_partner(body.arg, v) is not None:
        return FALSE
    if isinstance(body, Or):
        for i, c in enumerate(body.args):
            if isinstance(c, Not):
                t = _eq_partner(c.arg, v)
                if t is not None:
                    rest = _mk_or(body.args[:i] + body.args[i + 1 :])
                    return _simp(substitute(rest, {v: t}))
        outside = [c for c in body.args if v not in free_vars(c)]
        if outside:
            inside = [c for c in body.args if v in free_vars(c)]
            return _mk_or(outside + [_mk_forall(v, _mk_or(inside))])
    return Forall(v, body)


def _simp(f: Formula) -> Formula:
    if isinstance(f, (Top, Bottom, Atom)):
        return f
    if isinstance(f, Eq):
        return _mk_eq(f.left, f.right)
    if isinstance(f, ActionEq):
        l, r = f.left, f.right
        if isinstance(l, ActVar):
            return f
        if l.symbol != r.symbol:
            return FALSE
        if len(l.args) != len(r.args):
            raise ArityError(f"{l} vs {r}")
        return _mk_and(_mk_eq(x, y) for x, y in zip(l.args, r.args))
    if isinstance(f, Not):
        return _neg(_simp(f.arg))
    if isinstance(f, And):
        return _mk_and(_simp(a) for a in f.args)
    if isinstance(f, Or):
        return _mk_or(_simp(a) for a in f.args)
    if isinstance(f, Exists):
        return _mk_exists(f.var, _simp(f.body))
    if isinstance(f, Forall):
        return _mk_forall(f.var, _simp(f.body))
    raise TypeError(f"not a formula: {f!r}")


def rectify(f: Formula, avoid: Iterable[str] = ()) -> Formula:
    """Rename bound variables so that every binder is distinct and differs
    from the free variables (and from ``avoid``)."""
    used = {v.name for v in free_vars(f)} | set(avoid)
    return _rectify(f, {}, used)


def _rectify(f: Formula, ren: dict, used: set) -> Formula:
    if isinstance(f, _Quant):
        v = f.var
        nv = Var(fresh_name(v.name, used))
        used.add(nv.name)
        inner = dict(ren)
        inner[v] = nv
        return type(f)(nv, _rectify(f.body, inner, used))
    if isinstance(f, Not):
        return Not(_rectify(f.arg, ren, used))
    if isinstance(f, _NAry):
        return type(f)(tuple(_rectify(a, ren, used) for a in f.args))
    if ren and (free_vars(f) & ren.keys()):
        return substitute(f, ren)
    return f


def simplify(f: Formula, max_rounds: int = 50) -> Formula:
    """Rewrite to a model-equivalent formula in negation normal form.

    Rules: unique-name resolution of action equalities, constant/equality
    folding, flattening and deduplication of And/Or, complementary literal
    detection, the one-point rule for both quantifiers, vacuous quantifier
    removal and miniscoping. Bound variables of the result are rectified.
    """
    g = _simp(f)
    for _ in range(max_rounds):
        h = _simp(g)
        if h == g:
            break
        g = h
    return rectify(g)


# --------------------------------------------------------------------------
# NNF and canonical keys


def nnf(f: Formula, negate: bool = False) -> Formula:
    if isinstance(f, Top):
        return FALSE if negate else TRUE
    if isinstance(f, Bottom):
        return TRUE if negate else FALSE
    if isinstance(f, Not):
        return nnf(f.arg, not negate)
    if isinstance(f, And):
        cls = Or if negate else And
        return cls(tuple(nnf(a, negate) for a in f.args))
    if isinstance(f, Or):
        cls = And if negate else Or
        return cls(tuple(nnf(a, negate) for a in f.args))
    if isinstance(f, Exists):
        return (Forall if negate else Exists)(f.var, nnf(f.body, negate))
    if isinstance(f, Forall):
        return (Exists if negate else Forall)(f.var, nnf(f.body, negate))
    return Not(f) if negate else f


CanonicalForm = tuple


def _tkey(t, env):
    if isinstance(t, Var):
        return ("b", env[t]) if t in env else ("v", t.name)
    if isinstance(t, Const):
        return ("c", t.name)
    if isinstance(t, ActVar):
        return ("av", t.name)
    return ("act", t.symbol, tuple(_tkey(a, env) for a in t.args))


def _ckey(f: Formula, env: dict, depth: int) -> tuple:
    if isinstance(f, Top):
        return ("T",)
    if isinstance(f, Bottom):
        return ("F",)
    if isinstance(f, Atom):
        tag = "P" if isinstance(f, FluentAtom) else "S"
        return (tag, f.pred, tuple(_tkey(t, env) for t in f.args))
    if isinstance(f, Eq):
        a, b = sorted((_tkey(f.left, env), _tkey(f.right, env)), key=repr)
        return ("=", a, b)
    if isinstance(f, ActionEq):
        return ("a=", _tkey(f.left, env), _tkey(f.right, env))
    if isinstance(f, Not):
        return ("~", _ckey(f.arg, env, depth))
    if isinstance(f, (And, Or)):
        tag = "&" if isinstance(f, And) else "|"
        items = set()
        for a in f.args:
            k = _ckey(a, env, depth)
            if k[0] == tag:
                items.update(k[1])
            else:
                items.add(k)
        return (tag, tuple(sorted(items, key=repr)))
    if isinstance(f, _Quant):
        inner = dict(env)
        inner[f.var] = depth
        tag = "E" if isinstance(f, Exists) else "A"
        return (tag, _ckey(f.body, inner, depth + 1))
    raise TypeError(f"not a formula: {f!r}")


def canonicalize(f: Formula) -> CanonicalForm:
    """Alpha- and AC-invariant key (NNF, de Bruijn levels, sorted children)."""
    return _ckey(nnf(f), {}, 0)


# --------------------------------------------------------------------------
# printing (DSL syntax)


def _fmt_term(t) -> str:
    return str(t)


def format_formula(f: Formula) -> str:
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bottom):
        return "false"
    if isinstance(f, Atom):
        return "(" + " ".join([f.pred, *map(_fmt_term, f.args)]) + ")"
    if isinstance(f, Eq):
        return f"(= {f.left} {f.right})"
    if isinstance(f, ActionEq):
        if isinstance(f.left, ActVar):
            if f.left.name == "a":
                return f"(act= {f.right})"
            return f"(act= {f.left.name} {f.right})"
        return f"(act= {f.left} {f.right})"
    if isinstance(f, Not):
        return f"(not {format_formula(f.arg)})"
    if isinstance(f, (And, Or)):
        op = "and" if isinstance(f, And) else "or"
        return "(" + " ".join([op, *map(format_formula, f.args)]) + ")"
    if isinstance(f, _Quant):
        op = "exists" if isinstance(f, Exists) else "forall"
        return f"({op} ({f.var}) {format_formula(f.body)})"
    raise TypeError(f"not a formula: {f!r}")


# --------------------------------------------------------------------------
# case statements


@dataclass(frozen=True)
class CaseStatement:
    branches: tuple  # of (guard Formula, float)

    def __post_init__(self):
        object.__setattr__(
            self, "branches", tuple((g, float(v)) for g, v in self.branches)
        )
        if not self.branches:
            raise ValueError("case statement needs at least one branch")

    @property
    def guards(self) -> tuple:
        return tuple(g for g, _ in self.branches)

    def __str__(self) -> str:
        inner = " ".join(f"({format_formula(g)} {_fmt_num(v)})" for g, v in self.branches)
        return f"(case {inner})"


def _fmt_num(v: float) -> str:
    return repr(float(v)) if float(v) != int(v) else f"{v:.1f}"
