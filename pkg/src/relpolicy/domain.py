"""Domain and instance DSL: parsing, validation and printing.

A domain file declares the reward case statement, stochastic actions with
nature's choices and their probability case statements, deterministic
actions with precondition formulas, and one successor state axiom per
fluent, written directly as a formula over the fluent's parameters and the
implicit action variable ``a`` (``(act= (A t...))`` atoms).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import fol
from .errors import ArityError, DSLSyntaxError, DuplicateError, UnknownSymbolError
from .fol import (
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
    Formula,
    Not,
    Or,
    StaticAtom,
    Var,
)
from .sexpr import SList, Sym, expect_list, expect_sym, pos, read_all

NOOP = "noop"
ACTION_VAR = ActVar("a")
_KEYWORDS = {"and", "or", "not", "exists", "forall", "=", "act=", "implies", "true", "false"}


@dataclass(frozen=True)
class DetActionDecl:
    name: str
    params: tuple
    poss: Formula

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class SSADecl:
    fluent: str
    params: tuple
    body: Formula


@dataclass(frozen=True)
class StochActionDecl:
    name: str
    params: tuple
    choices: tuple  # ActionTerm over params
    prob: tuple  # (choice ActionTerm, CaseStatement) pairs, aligned with choices

    @property
    def arity(self) -> int:
        return len(self.params)

    def prob_of(self, choice_symbol: str) -> CaseStatement:
        for c, case in self.prob:
            if c.symbol == choice_symbol:
                return case
        raise KeyError(choice_symbol)


@dataclass(frozen=True, eq=True)
class DomainSpec:
    name: str
    constants: tuple
    statics: dict
    fluents: dict
    det_actions: dict
    ssas: dict
    stoch_actions: dict
    reward: CaseStatement
    noop: bool = False

    __hash__ = object.__hash__

    def choices_of(self, det_name: str) -> list:
        """Stochastic actions having ``det_name`` among nature's choices."""
        return [
            b for b in self.stoch_actions.values() if any(c.symbol == det_name for c in b.choices)
        ]

    def stoch_poss(self, stoch: StochActionDecl) -> Formula:
        """Shared precondition of a stochastic action, over its own params."""
        first = stoch.choices[0]
        det = self.det_actions[first.symbol]
        return fol.substitute(det.poss, dict(zip(det.params, first.args)))


@dataclass(frozen=True)
class InstanceSpec:
    objects: tuple
    statics: frozenset
    seed: frozenset
    name: str = ""


@dataclass(frozen=True)
class Diagnostic:
    code: str
    where: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.where}: {self.message}"


# --------------------------------------------------------------------------
# formula parsing


@dataclass
class _Symbols:
    constants: set = field(default_factory=set)
    statics: dict = field(default_factory=dict)
    fluents: dict = field(default_factory=dict)
    det_arity: dict = field(default_factory=dict)


def _number(x, what: str) -> float:
    text = expect_sym(x, what)
    try:
        return float(text)
    except ValueError:
        raise DSLSyntaxError(f"expected {what}, found {text}", *pos(x)) from None


def _parse_term(x, syms: _Symbols, scope: dict):
    name = expect_sym(x, "object term")
    if name in scope:
        return scope[name]
    if name in syms.constants:
        return Const(name)
    raise UnknownSymbolError(f"unknown object symbol {name!r} at line {x.line}, column {x.col}")


def _parse_action_term(x, syms: _Symbols, scope: dict) -> ActionTerm:
    lst = expect_list(x, "action term (A t...)")
    if not lst.items:
        raise DSLSyntaxError("empty action term", *pos(x))
    sym = expect_sym(lst[0], "action symbol")
    if sym not in syms.det_arity:
        raise UnknownSymbolError(f"unknown deterministic action {sym!r} at line {lst.line}")
    args = tuple(_parse_term(t, syms, scope) for t in lst.items[1:])
    if len(args) != syms.det_arity[sym]:
        raise ArityError(f"{sym} expects {syms.det_arity[sym]} arguments, got {len(args)}")
    return ActionTerm(sym, args)


def _bind(vars_x, syms: _Symbols, scope: dict) -> tuple:
    lst = expect_list(vars_x, "variable list")
    new = dict(scope)
    vs = []
    for item in lst:
        name = expect_sym(item, "variable name")
        if name in syms.constants:
            raise DuplicateError(f"variable {name!r} shadows a constant (line {item.line})")
        if name in _KEYWORDS:
            raise DSLSyntaxError(f"reserved word {name!r} used as variable", *pos(item))
        v = Var(name)
        new[name] = v
        vs.append(v)
    return tuple(vs), new


def parse_formula(x, syms: _Symbols, scope: dict, allow_action: bool = False) -> Formula:
    if isinstance(x, Sym):
        t = x.text
        if t == "true":
            return TRUE
        if t == "false":
            return FALSE
        if t in syms.fluents or t in syms.statics:
            return _atom(t, [], syms, x)
        raise UnknownSymbolError(f"unknown formula symbol {t!r} at line {x.line}, column {x.col}")
    if not x.items:
        raise DSLSyntaxError("empty formula", *pos(x))
    head = expect_sym(x[0], "formula operator or predicate")
    rest = x.items[1:]

    def sub(y, sc=scope):
        return parse_formula(y, syms, sc, allow_action)

    if head == "and":
        return And(tuple(sub(y) for y in rest))
    if head == "or":
        return Or(tuple(sub(y) for y in rest))
    if head == "not":
        _arity_check(x, rest, 1)
        return Not(sub(rest[0]))
    if head == "implies":
        _arity_check(x, rest, 2)
        return fol.implies(sub(rest[0]), sub(rest[1]))
    if head in ("exists", "forall"):
        _arity_check(x, rest, 2)
        vs, inner = _bind(rest[0], syms, scope)
        body = sub(rest[1], inner)
        cls = Exists if head == "exists" else Forall
        for v in reversed(vs):
            body = cls(v, body)
        return body
    if head == "=":
        _arity_check(x, rest, 2)
        return Eq(_parse_term(rest[0], syms, scope), _parse_term(rest[1], syms, scope))
    if head == "act=":
        if not allow_action:
            raise DSLSyntaxError("act= is only allowed in successor state axioms", *pos(x))
        if len(rest) == 1:
            return ActionEq(ACTION_VAR, _parse_action_term(rest[0], syms, scope))
        if len(rest) == 2:
            if isinstance(rest[0], Sym):
                left = ActVar(rest[0].text)
            else:
                left = _parse_action_term(rest[0], syms, scope)
            return ActionEq(left, _parse_action_term(rest[1], syms, scope))
        raise DSLSyntaxError("act= takes one or two action terms", *pos(x))
    return _atom(head, rest, syms, x, scope)


def _arity_check(x, rest, n):
    if len(rest) != n:
        raise DSLSyntaxError(f"{x[0]} expects {n} operand(s), got {len(rest)}", *pos(x))


def _atom(pred, rest, syms: _Symbols, x, scope=None) -> Formula:
    scope = scope or {}
    if pred in syms.fluents:
        cls, arity = FluentAtom, syms.fluents[pred]
    elif pred in syms.statics:
        cls, arity = StaticAtom, syms.statics[pred]
    else:
        raise UnknownSymbolError(f"unknown predicate {pred!r} at line {x.line}, column {x.col}")
    if len(rest) != arity:
        raise ArityError(f"{pred} expects {arity} arguments, got {len(rest)} (line {x.line})")
    return cls(pred, tuple(_parse_term(t, syms, scope) for t in rest))


def _parse_case(x, syms: _Symbols, scope: dict) -> CaseStatement:
    lst = expect_list(x, "(case ...)")
    if not lst.items or expect_sym(lst[0], "case") != "case":
        raise DSLSyntaxError("expected (case (GUARD value)...)", *pos(x))
    branches = []
    for br in lst.items[1:]:
        br = expect_list(br, "case branch (GUARD value)")
        if len(br) != 2:
            raise DSLSyntaxError("case branch needs a guard and a value", *pos(br))
        guard = fol.simplify(parse_formula(br[0], syms, scope))
        branches.append((guard, _number(br[1], "numeric case value")))
    if not branches:
        raise DSLSyntaxError("case statement needs at least one branch", *pos(x))
    return CaseStatement(tuple(branches))


def _head(x, what: str) -> tuple:
    lst = expect_list(x, what)
    if not lst.items:
        raise DSLSyntaxError(f"empty {what}", *pos(x))
    name = expect_sym(lst[0], "name")
    params = tuple(expect_sym(p, "parameter") for p in lst.items[1:])
    if len(set(params)) != len(params):
        raise DuplicateError(f"repeated parameter in {name}")
    return name, params


def _keywords(items, allowed: set) -> dict:
    out: dict = {}
    i = 0
    while i < len(items):
        k = items[i]
        key = expect_sym(k, "keyword")
        if not key.startswith(":") or key not in allowed:
            raise DSLSyntaxError(f"unexpected {key!r}; expected one of {sorted(allowed)}", *pos(k))
        j = i + 1
        vals = []
        while j < len(items) and not (isinstance(items[j], Sym) and items[j].text.startswith(":")):
            vals.append(items[j])
            j += 1
        if key in out:
            raise DuplicateError(f"repeated keyword {key}")
        out[key] = vals
        i = j
    return out


# --------------------------------------------------------------------------
# domain parsing


def parse_domain(text: str) -> DomainSpec:
    forms = read_all(text)
    syms = _Symbols()
    name = ""
    noop = False
    headers: list = []
    static_decl: dict = {}
    fluent_decl: dict = {}
    for form in forms:
        form = expect_list(form, "top-level declaration")
        if not form.items:
            raise DSLSyntaxError("empty declaration", *pos(form))
        kind = expect_sym(form[0], "declaration keyword")
        if kind == "domain":
            name = expect_sym(form[1], "domain name") if len(form) > 1 else ""
        elif kind == "constants":
            for c in form.items[1:]:
                cn = expect_sym(c, "constant")
                if cn in syms.constants:
                    raise DuplicateError(f"constant {cn!r} declared twice")
                syms.constants.add(cn)
        elif kind in ("static", "fluent"):
            target = static_decl if kind == "static" else fluent_decl
            for d in form.items[1:]:
                d = expect_list(d, f"({kind} (P arity))")
                if len(d) != 2:
                    raise DSLSyntaxError("predicate declaration is (NAME ARITY)", *pos(d))
                pn = expect_sym(d[0], "predicate name")
                if pn in static_decl or pn in fluent_decl or pn in _KEYWORDS:
                    raise DuplicateError(f"predicate {pn!r} declared twice")
                target[pn] = int(_number(d[1], "arity"))
        elif kind == "noop":
            noop = True
        elif kind in ("det-action", "ssa", "stoch-action", "reward"):
            headers.append((kind, form))
        else:
            raise DSLSyntaxError(
                f"unknown declaration {kind!r}; expected domain, constants, static, fluent, "
                "noop, det-action, ssa, stoch-action or reward",
                *pos(form[0]),
            )
    syms.statics = static_decl
    syms.fluents = fluent_decl

    # first pass over action headers to fix the symbol table
    for kind, form in headers:
        if kind == "det-action":
            an, params = _head(form[1], "(A x...)")
            if an in syms.det_arity or (noop and an == NOOP):
                raise DuplicateError(f"deterministic action {an!r} declared twice")
            syms.det_arity[an] = len(params)
    if noop:
        syms.det_arity[NOOP] = 0

    det: dict = {}
    ssas: dict = {}
    stoch: dict = {}
    reward = None
    for kind, form in headers:
        if kind == "det-action":
            an, params = _head(form[1], "(A x...)")
            vs, scope = _bind(SList(list(form[1].items[1:])), syms, {})
            kw = _keywords(form.items[2:], {":poss"})
            poss_x = kw.get(":poss", [Sym("true")])
            if len(poss_x) != 1:
                raise DSLSyntaxError(":poss takes one formula", *pos(form))
            det[an] = DetActionDecl(an, vs, fol.simplify(parse_formula(poss_x[0], syms, scope)))
        elif kind == "ssa":
            if len(form) != 3:
                raise DSLSyntaxError("ssa form is (ssa (F x...) FORMULA)", *pos(form))
            fn, params = _head(form[1], "(F x...)")
            if fn not in syms.fluents:
                raise UnknownSymbolError(f"ssa for undeclared fluent {fn!r}")
            if len(params) != syms.fluents[fn]:
                raise ArityError(f"ssa head {fn} has {len(params)} params, fluent arity {syms.fluents[fn]}")
            if fn in ssas:
                raise DuplicateError(f"two successor state axioms for {fn!r}")
            vs, scope = _bind(SList(list(form[1].items[1:])), syms, {})
            body = fol.simplify(parse_formula(form[2], syms, scope, allow_action=True))
            ssas[fn] = SSADecl(fn, vs, body)
        elif kind == "stoch-action":
            bn, params = _head(form[1], "(B x...)")
            if bn in stoch or bn in syms.det_arity and bn != NOOP:
                raise DuplicateError(f"action name {bn!r} used twice")
            vs, scope = _bind(SList(list(form[1].items[1:])), syms, {})
            kw = _keywords(form.items[2:], {":choices", ":prob"})
            if ":choices" not in kw or len(kw[":choices"]) != 1:
                raise DSLSyntaxError(":choices takes one list of action terms", *pos(form))
            choices = tuple(
                _parse_action_term(c, syms, scope) for c in expect_list(kw[":choices"][0], "choice list")
            )
            if not choices:
                raise DSLSyntaxError("stochastic action needs at least one choice", *pos(form))
            probs: dict = {}
            for entry in kw.get(":prob", []):
                entry = expect_list(entry, "((A x...) (case ...))")
                if len(entry) != 2:
                    raise DSLSyntaxError("prob entry is ((A x...) (case ...))", *pos(entry))
                term = _parse_action_term(entry[0], syms, scope)
                if term.symbol in probs:
                    raise DuplicateError(f"two prob axioms for {term.symbol} in {bn}")
                probs[term.symbol] = (term, _parse_case(entry[1], syms, scope))
            if not probs and len(choices) == 1:
                probs[choices[0].symbol] = (choices[0], CaseStatement(((TRUE, 1.0),)))
            for c in choices:
                if c.symbol not in probs:
                    raise UnknownSymbolError(f"choice {c.symbol} of {bn} has no prob axiom")
            for sym_ in probs:
                if sym_ not in {c.symbol for c in choices}:
                    raise UnknownSymbolError(f"prob axiom for {sym_} which is not a choice of {bn}")
            prob = tuple((c, probs[c.symbol][1]) for c in choices)
            stoch[bn] = StochActionDecl(bn, vs, choices, prob)
        elif kind == "reward":
            if reward is not None:
                raise DuplicateError("reward declared twice")
            if len(form) != 2:
                raise DSLSyntaxError("reward form is (reward (case ...))", *pos(form))
            reward = _parse_case(form[1], syms, {})
    if reward is None:
        raise DSLSyntaxError("domain has no (reward ...) declaration", 0, 0)
    if noop:
        det[NOOP] = DetActionDecl(NOOP, (), TRUE)
        stoch[NOOP] = StochActionDecl(
            NOOP, (), (ActionTerm(NOOP, ()),), ((ActionTerm(NOOP, ()), CaseStatement(((TRUE, 1.0),))),)
        )
    return DomainSpec(
        name=name,
        constants=tuple(sorted(syms.constants)),
        statics=dict(static_decl),
        fluents=dict(fluent_decl),
        det_actions=det,
        ssas=ssas,
        stoch_actions=stoch,
        reward=reward,
        noop=noop,
    )


def symbols_of(spec: DomainSpec, extra_constants=()) -> _Symbols:
    return _Symbols(
        constants=set(spec.constants) | set(extra_constants),
        statics=dict(spec.statics),
        fluents=dict(spec.fluents),
        det_arity={n: d.arity for n, d in spec.det_actions.items()},
    )


def parse_formula_text(text: str, spec: DomainSpec, variables=(), extra_constants=(), allow_action=False) -> Formula:
    """Parse a single formula in the context of ``spec``."""
    forms = read_all(text)
    if len(forms) != 1:
        raise DSLSyntaxError("expected exactly one formula", 1, 1)
    scope = {v: Var(v) for v in variables}
    return parse_formula(forms[0], symbols_of(spec, extra_constants), scope, allow_action)


# --------------------------------------------------------------------------
# validation


def _action_eqs(f: Formula):
    return [g for g in fol.subformulas(f) if isinstance(g, ActionEq)]


def validate(spec: DomainSpec) -> list:
    """Static well-formedness diagnostics; empty list means valid."""
    diags: list = []

    def add(code, where, msg):
        diags.append(Diagnostic(code, where, msg))

    for g, r in spec.reward.branches:
        if not fol.is_state_formula(g):
            add("E_NOT_STATE_FORMULA", "reward", f"guard {g} mentions actions")
        if fol.free_vars(g):
            add("E_FREE_VAR", "reward", f"guard {g} has free variables")
    for a in spec.det_actions.values():
        where = f"{a.name}.poss"
        if not fol.is_state_formula(a.poss):
            add("E_NOT_STATE_FORMULA", where, "precondition mentions actions")
        extra = fol.free_vars(a.poss) - set(a.params)
        if extra:
            add("E_FREE_VAR", where, f"free variables {sorted(map(str, extra))} not among parameters")
    for fl, arity in spec.fluents.items():
        if fl not in spec.ssas:
            add("E_MISSING_SSA", fl, "fluent has no successor state axiom")
            continue
        s = spec.ssas[fl]
        extra = fol.free_vars(s.body) - set(s.params) - {ACTION_VAR}
        if extra:
            add("E_FREE_VAR", f"ssa {fl}", f"free variables {sorted(map(str, extra))}")
        for eq in _action_eqs(s.body):
            t = eq.right
            d = spec.det_actions.get(t.symbol)
            if d is None:
                add("E_SSA_ACTION", f"ssa {fl}", f"unknown action {t.symbol}")
            elif d.arity != len(t.args):
                add("E_SSA_ACTION", f"ssa {fl}", f"{t.symbol} used with arity {len(t.args)}")
    for b in spec.stoch_actions.values():
        where = b.name
        poss_keys = set()
        for c in b.choices:
            d = spec.det_actions.get(c.symbol)
            if d is None:
                add("E_BAD_CHOICE", where, f"choice {c.symbol} is not a deterministic action")
                continue
            if tuple(c.args) != tuple(b.params):
                add("E_BAD_CHOICE", where, f"choice {c} must take exactly the parameters of {b.name}")
                continue
            poss_keys.add(fol.canonicalize(fol.simplify(fol.substitute(d.poss, dict(zip(d.params, c.args))))))
        if len(poss_keys) > 1:
            add("E_POSS_MISMATCH", where, "choices have different preconditions")
        for c, case in b.prob:
            for g, p in case.branches:
                if not 0.0 <= p <= 1.0:
                    add("E_PROB_RANGE", f"{where}.prob({c.symbol})", f"probability {p} outside [0,1]")
                extra = fol.free_vars(g) - set(b.params)
                if extra:
                    add("E_FREE_VAR", f"{where}.prob({c.symbol})", f"guard {g} has free variables")
                if not fol.is_state_formula(g):
                    add("E_NOT_STATE_FORMULA", f"{where}.prob({c.symbol})", "guard mentions actions")
        # probability mass over every jointly consistent combination of branches
        for combo in itertools.product(*(case.branches for _, case in b.prob)):
            joint = fol.simplify(And(tuple(g for g, _ in combo)))
            if joint == FALSE:
                continue
            total = sum(p for _, p in combo)
            if abs(total - 1.0) > 1e-9:
                add("W_PROB_MASS", where, f"branch combination sums to {total:g}")
    return diags


# --------------------------------------------------------------------------
# instances


def parse_instance(text: str, domain: DomainSpec | None = None) -> InstanceSpec:
    forms = read_all(text)
    name = ""
    objects: list = []
    static_x: list = []
    seed_x: list = []
    for form in forms:
        form = expect_list(form, "instance declaration")
        if not form.items:
            raise DSLSyntaxError("empty declaration", *pos(form))
        kind = expect_sym(form[0], "declaration keyword")
        if kind == "instance":
            name = expect_sym(form[1], "instance name") if len(form) > 1 else ""
        elif kind == "objects":
            for o in form.items[1:]:
                on = expect_sym(o, "object name")
                if on in objects:
                    raise DuplicateError(f"object {on!r} listed twice")
                objects.append(on)
        elif kind == "static":
            static_x.extend(form.items[1:])
        elif kind == "seed":
            seed_x.extend(form.items[1:])
        else:
            raise DSLSyntaxError(
                f"unknown instance declaration {kind!r}; expected instance, objects, static or seed",
                *pos(form[0]),
            )
    if domain is not None:
        for c in domain.constants:
            if c not in objects:
                objects.append(c)
    known = set(objects)

    def facts(items, sig: dict | None, what: str) -> frozenset:
        out = set()
        for it in items:
            it = expect_list(it, f"{what} fact (P c...)")
            if not it.items:
                raise DSLSyntaxError("empty fact", *pos(it))
            p = expect_sym(it[0], "predicate")
            args = tuple(expect_sym(a, "object") for a in it.items[1:])
            for a, ax in zip(args, it.items[1:]):
                if a not in known:
                    raise UnknownSymbolError(f"undeclared object {a!r} at line {ax.line}, column {ax.col}")
            if sig is not None:
                if p not in sig:
                    raise UnknownSymbolError(f"undeclared {what} predicate {p!r} at line {it.line}")
                if sig[p] != len(args):
                    raise ArityError(f"{p} expects {sig[p]} arguments, got {len(args)}")
            out.add((p, args))
        return frozenset(out)

    statics = facts(static_x, domain.statics if domain else None, "static")
    seed = facts(seed_x, domain.fluents if domain else None, "fluent")
    return InstanceSpec(tuple(sorted(objects)), statics, seed, name)


# --------------------------------------------------------------------------
# printing


def _params(ps) -> str:
    return " ".join(str(p) for p in ps)


def print_domain(spec: DomainSpec) -> str:
    lines = [f"(domain {spec.name})" if spec.name else "(domain)"]
    if spec.constants:
        lines.append(f"(constants {' '.join(spec.constants)})")
    if spec.statics:
        lines.append("(static " + " ".join(f"({p} {n})" for p, n in spec.statics.items()) + ")")
    if spec.fluents:
        lines.append("(fluent " + " ".join(f"({p} {n})" for p, n in spec.fluents.items()) + ")")
    if spec.noop:
        lines.append("(noop)")
    for a in spec.det_actions.values():
        if spec.noop and a.name == NOOP:
            continue
        head = f"({a.name} {_params(a.params)})" if a.params else f"({a.name})"
        lines.append(f"(det-action {head} :poss {a.poss})")
    for s in spec.ssas.values():
        head = f"({s.fluent} {_params(s.params)})" if s.params else f"({s.fluent})"
        lines.append(f"(ssa {head} {s.body})")
    for b in spec.stoch_actions.values():
        if spec.noop and b.name == NOOP:
            continue
        head = f"({b.name} {_params(b.params)})" if b.params else f"({b.name})"
        choices = " ".join(str(c) for c in b.choices)
        probs = " ".join(f"({c} {case})" for c, case in b.prob)
        lines.append(f"(stoch-action {head} :choices ({choices}) :prob {probs})")
    lines.append(f"(reward {spec.reward})")
    return "\n".join(lines) + "\n"


def print_instance(inst: InstanceSpec) -> str:
    def fact(p, args):
        return "(" + " ".join([p, *args]) + ")"

    lines = []
    if inst.name:
        lines.append(f"(instance {inst.name})")
    lines.append(f"(objects {' '.join(inst.objects)})")
    if inst.statics:
        lines.append("(static " + " ".join(fact(p, a) for p, a in sorted(inst.statics)) + ")")
    if inst.seed:
        lines.append("(seed " + " ".join(fact(p, a) for p, a in sorted(inst.seed)) + ")")
    return "\n".join(lines) + "\n"
