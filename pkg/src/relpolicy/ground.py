"""Grounding over finite instances: model checking, witnesses, transitions,
state enumeration and case-statement partition checks.

Formulas are compiled once into small evaluation trees. Existential blocks
are evaluated as conjunctive queries: positive atoms and equalities bind
variables by scanning facts, everything else is checked as soon as its
variables are bound. Results of quantified subformulas are memoized per
state.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from . import fol
from .domain import ACTION_VAR, DomainSpec, InstanceSpec, StochActionDecl
from .errors import ExplosionError, NotApplicableError, SortError, UnboundError
from .fol import (
    ActionEq,
    ActionTerm,
    And,
    Atom,
    Bottom,
    CaseStatement,
    Const,
    Eq,
    Exists,
    Forall,
    Formula,
    Not,
    Or,
    Top,
    Var,
)

DEFAULT_STATE_CAP = 10**6


@dataclass(frozen=True, order=True)
class State:
    """Closed-world set of ground fluent facts, stored sorted."""

    facts: tuple

    @classmethod
    def of(cls, facts: Iterable) -> "State":
        return cls(tuple(sorted(set(facts))))

    def __contains__(self, fact) -> bool:
        return fact in self.as_set

    @property
    def as_set(self) -> frozenset:
        try:
            return self._set
        except AttributeError:
            s = frozenset(self.facts)
            object.__setattr__(self, "_set", s)
            return s

    def __str__(self) -> str:
        return "(state " + " ".join("(" + " ".join([p, *a]) + ")" for p, a in self.facts) + ")"


@dataclass(frozen=True, order=True)
class GroundAction:
    symbol: str
    args: tuple = ()

    def term(self) -> ActionTerm:
        return ActionTerm(self.symbol, tuple(Const(a) for a in self.args))

    def __str__(self) -> str:
        return "(" + " ".join([self.symbol, *self.args]) + ")"


class World:
    """A state viewed as a relational structure (statics + fluents)."""

    __slots__ = ("objects", "facts", "memo")

    def __init__(self, objects: tuple, facts: dict):
        self.objects = objects
        self.facts = facts
        self.memo: dict = {}


# --------------------------------------------------------------------------
# compiled evaluation


class _Node:
    __slots__ = ()

    def holds(self, w: World, env: dict) -> bool:  # pragma: no cover - interface
        raise NotImplementedError


class _Const(_Node):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value

    def holds(self, w, env):
        return self.value


def _arg_spec(t):
    if isinstance(t, Const):
        return (True, t.name)
    return (False, t.name)


class _Atom(_Node):
    __slots__ = ("pred", "spec")

    def __init__(self, a: Atom):
        self.pred = a.pred
        self.spec = tuple(_arg_spec(t) for t in a.args)

    def holds(self, w, env):
        rel = w.facts.get(self.pred)
        if not rel:
            return False
        try:
            key = tuple(v if c else env[v] for c, v in self.spec)
        except KeyError as exc:
            raise UnboundError(f"variable {exc.args[0]} is unbound") from None
        return key in rel


class _Eq(_Node):
    __slots__ = ("l", "r")

    def __init__(self, f: Eq):
        self.l = _arg_spec(f.left)
        self.r = _arg_spec(f.right)

    def holds(self, w, env):
        try:
            a = self.l[1] if self.l[0] else env[self.l[1]]
            b = self.r[1] if self.r[0] else env[self.r[1]]
        except KeyError as exc:
            raise UnboundError(f"variable {exc.args[0]} is unbound") from None
        return a == b


class _Not(_Node):
    __slots__ = ("arg",)

    def __init__(self, arg):
        self.arg = arg

    def holds(self, w, env):
        return not self.arg.holds(w, env)


class _And(_Node):
    __slots__ = ("args",)

    def __init__(self, args):
        self.args = tuple(args)

    def holds(self, w, env):
        for a in self.args:
            if not a.holds(w, env):
                return False
        return True


class _Or(_Node):
    __slots__ = ("args",)

    def __init__(self, args):
        self.args = tuple(args)

    def holds(self, w, env):
        for a in self.args:
            if a.holds(w, env):
                return True
        return False


def _conjuncts(f: Formula) -> list:
    if isinstance(f, And):
        out = []
        for a in f.args:
            out.extend(_conjuncts(a))
        return out
    if isinstance(f, Top):
        return []
    return [f]


class _Search:
    """Join plan enumerating bindings of ``vars`` satisfying a conjunction,
    given that ``bound`` variables already have values."""

    __slots__ = ("vars", "pre", "steps")

    def __init__(self, vars_: list, conjuncts: list, bound: set):
        todo = list(conjuncts)
        known = set(bound)
        self.vars = tuple(vars_)
        unbound = [v for v in vars_]

        def take_checks():
            ready = [c for c in todo if {v.name for v in fol.free_object_vars(c)} <= known]
            for c in ready:
                todo.remove(c)
            return tuple(_compile(c) for c in ready)

        self.pre = take_checks()
        steps = []
        while unbound:
            step = None
            for c in todo:  # equality generator
                if isinstance(c, Eq):
                    for a, b in ((c.left, c.right), (c.right, c.left)):
                        if isinstance(a, Var) and a.name in unbound and (
                            isinstance(b, Const) or b.name in known
                        ):
                            step = ("eq", a.name, _arg_spec(b))
                            break
                if step:
                    todo.remove(c)
                    break
            if step is None:  # positive atom generator, most bound args first
                best, best_score = None, None
                for c in todo:
                    if isinstance(c, Atom):
                        names = [t.name for t in c.args if isinstance(t, Var)]
                        if any(n in unbound for n in names):
                            score = sum(1 for t in c.args if isinstance(t, Const) or t.name in known)
                            if best is None or score > best_score:
                                best, best_score = c, score
                if best is not None:
                    todo.remove(best)
                    pattern = []
                    for t in best.args:
                        if isinstance(t, Const):
                            pattern.append((0, t.name))
                        elif t.name in known:
                            pattern.append((1, t.name))
                        else:
                            pattern.append((2, t.name))
                    step = ("atom", best.pred, tuple(pattern))
            if step is None:  # object loop over the most constrained variable
                def weight(n):
                    return sum(1 for c in todo if Var(n) in fol.free_vars(c))

                name = max(unbound, key=weight)
                step = ("loop", name, None)
            newly = (
                [step[1]]
                if step[0] in ("eq", "loop")
                else [n for k, n in step[2] if k == 2]
            )
            for n in newly:
                if n in unbound:
                    unbound.remove(n)
                known.add(n)
            steps.append((step, take_checks()))
        if todo:
            steps.append((("noop", None, None), tuple(_compile(c) for c in todo)))
        self.steps = tuple(steps)

    def run(self, w: World, env: dict, emit) -> bool:
        for c in self.pre:
            if not c.holds(w, env):
                return False
        return self._step(0, w, env, emit)

    def _step(self, k, w, env, emit) -> bool:
        if k == len(self.steps):
            return emit(env)
        (kind, a, b), checks = self.steps[k]
        nxt = k + 1
        if kind == "loop":
            for o in w.objects:
                env[a] = o
                if all(c.holds(w, env) for c in checks) and self._step(nxt, w, env, emit):
                    del env[a]
                    return True
            env.pop(a, None)
            return False
        if kind == "eq":
            env[a] = b[1] if b[0] else env[b[1]]
            ok = all(c.holds(w, env) for c in checks) and self._step(nxt, w, env, emit)
            del env[a]
            return ok
        if kind == "atom":
            rel = w.facts.get(a)
            if not rel:
                return False
            pattern = b
            for tup in rel:
                assigned = []
                good = True
                for (mode, name), val in zip(pattern, tup):
                    if mode == 0:
                        if name != val:
                            good = False
                            break
                    elif mode == 1 or name in env:
                        if env[name] != val:
                            good = False
                            break
                    else:
                        env[name] = val
                        assigned.append(name)
                if good and all(c.holds(w, env) for c in checks):
                    if self._step(nxt, w, env, emit):
                        for n in assigned:
                            del env[n]
                        return True
                for n in assigned:
                    del env[n]
            return False
        # residual checks only
        return all(c.holds(w, env) for c in checks) and self._step(nxt, w, env, emit)


def _stop(env) -> bool:
    return True


class _Exists(_Node):
    __slots__ = ("search", "key_vars")

    def __init__(self, f: Formula):
        vars_ = []
        body = f
        while isinstance(body, Exists):
            vars_.append(body.var.name)
            body = body.body
        outer = {v.name for v in fol.free_object_vars(f)}
        conj = []
        for c in _conjuncts(body):
            # flatten existential conjuncts whose variable cannot clash
            while isinstance(c, Exists) and c.var.name not in outer and c.var.name not in vars_:
                vars_.append(c.var.name)
                c = c.body
            conj.extend(_conjuncts(c))
        self.search = _Search(vars_, conj, outer)
        self.key_vars = tuple(sorted(outer))

    def holds(self, w, env):
        key = (id(self), tuple(env[v] for v in self.key_vars)) if self.key_vars else id(self)
        memo = w.memo
        r = memo.get(key)
        if r is None:
            r = self.search.run(w, dict(env) if self.key_vars else {}, _stop)
            memo[key] = r
        return r


_COMPILED: dict = {}


def _compile(f: Formula) -> _Node:
    node = _COMPILED.get(f)
    if node is not None:
        return node
    if isinstance(f, Top):
        node = _Const(True)
    elif isinstance(f, Bottom):
        node = _Const(False)
    elif isinstance(f, Atom):
        node = _Atom(f)
    elif isinstance(f, Eq):
        node = _Eq(f)
    elif isinstance(f, ActionEq):
        raise SortError(f"cannot model-check an action equality: {f}")
    elif isinstance(f, Not):
        node = _Not(_compile(f.arg))
    elif isinstance(f, And):
        node = _And(_compile(a) for a in f.args)
    elif isinstance(f, Or):
        node = _Or(_compile(a) for a in f.args)
    elif isinstance(f, Exists):
        if isinstance(f.body, Or):
            node = _Or(_compile(Exists(f.var, a)) for a in f.body.args)
        else:
            node = _Exists(f)
    elif isinstance(f, Forall):
        node = _Not(_compile(Exists(f.var, fol.nnf(Not(f.body)))))
    else:
        raise TypeError(f"not a formula: {f!r}")
    _COMPILED[f] = node
    return node


class _FormulaCache:
    """Value-keyed cache with an identity front: equal but distinct formula
    objects (one per regression run) would otherwise cost a deep ``==`` on
    every lookup. Entries keep their key alive, so ids stay valid."""

    def __init__(self, make):
        self.make = make
        self.by_id: dict = {}
        self.by_value: dict = {}

    def get(self, f, *extra):
        hit = self.by_id.get((id(f), extra))
        if hit is not None and hit[0] is f:
            return hit[1]
        key = (f, extra)
        v = self.by_value.get(key)
        if v is None:
            v = self.make(f, *extra)
            self.by_value[key] = v
        self.by_id[(id(f), extra)] = (f, v)
        return v


# rectify first: the join plans assume every binder is a distinct name
_ROOTS = _FormulaCache(lambda f: _compile(fol.rectify(f)))
_root = _ROOTS.get


def _env_of(binding: Mapping | None) -> dict:
    env = {}
    for k, v in (binding or {}).items():
        name = k.name if isinstance(k, Var) else str(k)
        env[name] = v.name if isinstance(v, Const) else str(v)
    return env


# --------------------------------------------------------------------------
# instances


class Instance:
    """A domain grounded over the objects of one instance file."""

    def __init__(self, domain: DomainSpec, spec: InstanceSpec, state_cap: int = DEFAULT_STATE_CAP):
        self.domain = domain
        self.spec = spec
        self.objects = tuple(spec.objects)
        self.object_order = {o: i for i, o in enumerate(self.objects)}
        self.statics = frozenset(spec.statics)
        self.state_cap = state_cap
        self.states: list = []
        self.index: dict = {}
        self._static_rel: dict = {}
        for p, args in self.statics:
            self._static_rel.setdefault(p, set()).add(args)
        self._worlds: dict = {}
        self._ssa_cache: dict = {}
        self._trans_cache: dict = {}
        self._effect_cache: dict = {}
        self.model_checks = 0

    @property
    def seed(self) -> State:
        return State.of(self.spec.seed)

    def world(self, e: State) -> World:
        w = self._worlds.get(e)
        if w is None:
            rel = {p: set(v) for p, v in self._static_rel.items()}
            for p, args in e.facts:
                rel.setdefault(p, set()).add(args)
            w = World(self.objects, {p: frozenset(v) for p, v in rel.items()})
            self._worlds[e] = w
        return w

    def enumerate(self, seed: State | None = None) -> list:
        self.states = enumerate_states(self, seed if seed is not None else self.seed)
        self.index = {s: i for i, s in enumerate(self.states)}
        return self.states

    def ground_actions(self, decl) -> list:
        """All argument tuples for an action declaration, lexicographic."""
        from itertools import product

        return [GroundAction(decl.name, args) for args in product(self.objects, repeat=len(decl.params))]


def holds(e: State, inst: Instance, f: Formula, b: Mapping | None = None) -> bool:
    """Tarskian truth of ``f`` in state ``e`` under binding ``b``."""
    env = _env_of(b)
    free = _extra_vars(f, ())
    if free:
        missing = free - env.keys()
        if missing:
            raise UnboundError(f"free variables without binding: {sorted(missing)}")
    inst.model_checks += 1
    return _root(f).holds(inst.world(e), env)


def _make_plans(f: Formula, params: tuple) -> list:
    names = [p.name for p in params]
    bound = {v.name for v in fol.free_object_vars(f)} - set(names)
    g = fol.nnf(fol.rectify(f))
    disjuncts = g.args if isinstance(g, Or) else (g,)
    return [_Search(names, _conjuncts(d), bound) for d in disjuncts if not isinstance(d, Bottom)]


_SEARCHES = _FormulaCache(_make_plans)
_witness_plans = _SEARCHES.get


def witness_tuples(e: State, inst: Instance, f: Formula, params: tuple, b: Mapping | None = None) -> list:
    """Sorted list of object tuples (aligned with ``params``) satisfying ``f``."""
    params = tuple(params)
    extra = _extra_vars(f, params)
    env = _env_of(b)
    if extra:
        missing = extra - env.keys()
        if missing:
            raise UnboundError(f"free variables without binding: {sorted(missing)}")
    names = [p.name for p in params]
    out: set = set()

    def emit(env_):
        out.add(tuple(env_[n] for n in names))
        return False

    w = inst.world(e)
    inst.model_checks += 1
    for plan in _witness_plans(f, params):
        plan.run(w, dict(env), emit)
    if len(out) < 2:
        return list(out)
    order = inst.object_order
    return sorted(out, key=lambda t: tuple(order[x] for x in t))


_EXTRA = _FormulaCache(lambda f, params: frozenset(v.name for v in fol.free_object_vars(f) - set(params)))
_extra_vars = _EXTRA.get


def witnesses(e: State, inst: Instance, f: Formula, params, b: Mapping | None = None) -> Iterator[dict]:
    """Bindings of ``params`` under which ``f`` holds, in lexicographic object order."""
    params = tuple(params)
    for t in witness_tuples(e, inst, f, params, b):
        yield {p: Const(o) for p, o in zip(params, t)}


def applicable(e: State, inst: Instance, a: GroundAction) -> bool:
    d = inst.domain.det_actions[a.symbol]
    return holds(e, inst, d.poss, dict(zip(d.params, a.args)))


def applicable_det_actions(e: State, inst: Instance) -> list:
    out = []
    for d in inst.domain.det_actions.values():
        for t in witness_tuples(e, inst, d.poss, d.params):
            out.append(GroundAction(d.name, t))
    return sorted(out)


def applicable_stoch_actions(e: State, inst: Instance) -> list:
    out = []
    for b in inst.domain.stoch_actions.values():
        poss = inst.domain.stoch_poss(b)
        for t in witness_tuples(e, inst, poss, b.params):
            out.append(GroundAction(b.name, t))
    return out


def instantiated_ssa(inst: Instance, fluent: str, a: GroundAction) -> Formula:
    """Successor state axiom body for ``fluent`` with ``a`` plugged in and
    action equalities resolved; free variables are the fluent parameters."""
    key = (fluent, a)
    f = inst._ssa_cache.get(key)
    if f is None:
        ssa = inst.domain.ssas[fluent]
        f = fol.simplify(fol.substitute(ssa.body, {ACTION_VAR: a.term()}))
        inst._ssa_cache[key] = f
    return f


def _effect_plan(inst: Instance, a: GroundAction) -> list:
    """Per fluent: (name, params, instantiated SSA), with None for fluents
    the action leaves alone (the SSA reduces to the atom itself)."""
    plan = inst._effect_cache.get(a)
    if plan is None:
        plan = []
        for fl in inst.domain.fluents:
            ssa = inst.domain.ssas[fl]
            body = instantiated_ssa(inst, fl, a)
            plan.append((fl, ssa.params, None if body == fol.FluentAtom(fl, ssa.params) else body))
        inst._effect_cache[a] = plan
    return plan


def transition(e: State, inst: Instance, a: GroundAction, check: bool = True) -> State:
    key = (e, a)
    r = inst._trans_cache.get(key)
    if r is not None:
        return r
    if check and not applicable(e, inst, a):
        raise NotApplicableError(f"{a} is not applicable")
    facts = []
    for fl, params, body in _effect_plan(inst, a):
        if body is None:
            facts.extend(f for f in e.facts if f[0] == fl)
        else:
            facts.extend((fl, t) for t in witness_tuples(e, inst, body, params))
    r = State.of(facts)
    inst._trans_cache[key] = r
    return r


def enumerate_states(inst: Instance, seed: State, cap: int | None = None) -> list:
    """Breadth-first reachability closure of ``seed``."""
    cap = inst.state_cap if cap is None else cap
    seen = {seed}
    order = [seed]
    queue = deque([seed])
    while queue:
        e = queue.popleft()
        succ = {transition(e, inst, a, check=False) for a in applicable_det_actions(e, inst)}
        for s in sorted(succ - seen):
            seen.add(s)
            order.append(s)
            queue.append(s)
            if len(order) > cap:
                raise ExplosionError(f"more than {cap} reachable states")
    return order


@dataclass(frozen=True)
class PartitionViolation:
    state_index: int
    binding: tuple
    satisfied: tuple  # indices of guards that hold

    def __str__(self):
        kind = "uncovered" if not self.satisfied else "overlap"
        return f"{kind} state {self.state_index} binding {self.binding} guards {self.satisfied}"


def check_partition(inst: Instance, states: list, c: CaseStatement, params: tuple = ()) -> list:
    """States (and parameter bindings) satisfying zero or several guards."""
    from itertools import product

    params = tuple(params)
    out = []
    for i, e in enumerate(states):
        for args in product(inst.objects, repeat=len(params)):
            b = dict(zip(params, args))
            sat = tuple(j for j, g in enumerate(c.guards) if holds(e, inst, g, b))
            if len(sat) != 1:
                out.append(PartitionViolation(i, args, sat))
    return out


def case_value(e: State, inst: Instance, c: CaseStatement, b: Mapping | None = None) -> float:
    from .errors import PartitionError

    vals = [v for g, v in c.branches if holds(e, inst, g, b)]
    if len(vals) != 1:
        raise PartitionError(f"{len(vals)} case guards hold in {e}")
    return vals[0]
