"""Classical first-order regression and the layered hypotheses space.

Layer 0 holds the reward guards. A hypothesis at depth ``i`` is the
regression of a depth ``i-1`` hypothesis through one deterministic action
``A(x)``: its open body is ``poss_A(x) & Repr(parent)`` and its closed form
existentially quantifies the action parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import fol
from .domain import ACTION_VAR, DetActionDecl, DomainSpec
from .errors import NoSSAError
from .fol import (
    ActionTerm,
    And,
    Atom,
    Eq,
    Exists,
    FluentAtom,
    Forall,
    Formula,
    Not,
    Or,
    Var,
)
from .sexpr import expect_list, expect_sym, read_all


def repr_(f: Formula, alpha: ActionTerm, ssas: dict) -> Formula:
    """Replace every fluent atom of ``f`` (read as holding after ``alpha``)
    by the instantiated successor state axiom; the result is simplified."""
    avoid = {v.name for v in alpha.args if isinstance(v, Var)}
    g = fol.rectify(f, avoid)
    return fol.simplify(_repr(g, alpha, ssas))


def _repr(f: Formula, alpha: ActionTerm, ssas: dict) -> Formula:
    if isinstance(f, FluentAtom):
        ssa = ssas.get(f.pred)
        if ssa is None:
            raise NoSSAError(f"fluent {f.pred} has no successor state axiom")
        binding = dict(zip(ssa.params, f.args))
        binding[ACTION_VAR] = alpha
        return fol.substitute(ssa.body, binding)
    if isinstance(f, Not):
        return Not(_repr(f.arg, alpha, ssas))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(_repr(a, alpha, ssas) for a in f.args))
    if isinstance(f, (Exists, Forall)):
        return type(f)(f.var, _repr(f.body, alpha, ssas))
    return f


def regress_open(phi: Formula, action: DetActionDecl, domain: DomainSpec, params=None):
    """Open pre-action formula ``poss_A(x) & Repr(phi after A(x))``.

    Returns ``(params, body)``; ``params`` reuse the action's declared
    parameter names and the bound variables of ``phi`` are renamed apart.
    """
    params = tuple(params) if params is not None else tuple(action.params)
    poss = fol.substitute(action.poss, dict(zip(action.params, params)))
    alpha = ActionTerm(action.name, params)
    body = fol.simplify(And((poss, repr_(phi, alpha, domain.ssas))))
    return params, fol.rectify(body)


@dataclass(frozen=True)
class Hypothesis:
    id: int
    depth: int
    det_action: str | None
    stoch_action: str | None
    params: tuple
    body: Formula
    closed: Formula
    parent: int | None
    seed_value: float
    key: tuple = field(repr=False, compare=False, default=())

    def record(self) -> str:
        parts = [f"(hyp :id {self.id} :depth {self.depth}"]
        if self.depth:
            parts.append(f":det {self.det_action} :stoch {self.stoch_action}")
            parts.append(f":params ({' '.join(p.name for p in self.params)})")
            parts.append(f":parent {self.parent}")
        parts.append(f":seed-value {self.seed_value!r} :body {self.body})")
        return " ".join(parts)


class HypothesisSpace:
    """All hypotheses generated so far, deduplicated by canonical key within
    each (depth, stochastic action) annotation."""

    def __init__(self, domain: DomainSpec):
        self.domain = domain
        self.hyps: list = []
        self.layers: list = []
        self._index: dict = {}
        self._expansions: dict = {}
        self.discarded_false = 0
        self.duplicates = 0
        self.layers.append([])
        for guard, value in domain.reward.branches:
            self._add(0, None, None, (), guard, None, value)

    def __len__(self) -> int:
        return len(self.hyps)

    def __getitem__(self, i: int) -> Hypothesis:
        return self.hyps[i]

    def _add(self, depth, det, stoch, params, body, parent, seed_value):
        closed = fol.simplify(fol.exists_many(params, body))
        key = fol.canonicalize(closed)
        slot = (depth, stoch, key)
        if slot in self._index:
            self.duplicates += 1
            return self.hyps[self._index[slot]]
        h = Hypothesis(len(self.hyps), depth, det, stoch, tuple(params), body, closed, parent, seed_value, key)
        self.hyps.append(h)
        self._index[slot] = h.id
        while len(self.layers) <= depth:
            self.layers.append([])
        self.layers[depth].append(h.id)
        return h

    def expand(self, parent_ids, depth: int) -> list:
        """Regress each parent through every deterministic action that is a
        nature's choice of some stochastic action; returns ids (ordered,
        without repeats) of the resulting depth-``depth`` hypotheses."""
        out: list = []
        seen: set = set()
        for pid in parent_ids:
            parent = self.hyps[pid]
            for det in self.domain.det_actions.values():
                for stoch in self.domain.choices_of(det.name):
                    ck = (pid, det.name, stoch.name)
                    if ck not in self._expansions:
                        params, body = regress_open(parent.closed, det, self.domain)
                        if body == fol.FALSE:
                            self.discarded_false += 1
                            self._expansions[ck] = None
                        else:
                            h = self._add(depth, det.name, stoch.name, params, body, pid, parent.seed_value)
                            self._expansions[ck] = h.id
                    hid = self._expansions[ck]
                    if hid is not None and hid not in seen and self.hyps[hid].depth == depth:
                        seen.add(hid)
                        out.append(hid)
        return out

    def expand_layer(self, i: int) -> list:
        if i < 1 or len(self.layers) < i:
            raise ValueError(f"layers 0..{i - 1} must exist before expanding layer {i}")
        return self.expand(list(self.layers[i - 1]), i)

    def generate(self, up_to: int) -> "HypothesisSpace":
        for i in range(len(self.layers), up_to + 1):
            self.expand_layer(i)
        return self

    def layer_sizes(self) -> list:
        return [len(layer) for layer in self.layers]

    def records(self, max_depth: int | None = None) -> str:
        return "".join(
            h.record() + "\n" for h in self.hyps if max_depth is None or h.depth <= max_depth
        )


def generate(domain: DomainSpec, up_to: int) -> HypothesisSpace:
    return HypothesisSpace(domain).generate(up_to)


def parse_hypotheses(text: str, domain: DomainSpec) -> HypothesisSpace:
    """Rebuild a space from ``(hyp ...)`` records (ids must be dense, in order)."""
    from .domain import parse_formula, symbols_of

    space = HypothesisSpace.__new__(HypothesisSpace)
    space.domain = domain
    space.hyps, space.layers, space._index, space._expansions = [], [], {}, {}
    space.discarded_false = space.duplicates = 0
    syms = symbols_of(domain)
    for form in read_all(text):
        form = expect_list(form, "(hyp ...)")
        if expect_sym(form[0], "hyp") != "hyp":
            continue
        kw = {}
        items = form.items[1:]
        for k in range(0, len(items), 2):
            kw[expect_sym(items[k], "keyword")] = items[k + 1]
        depth = int(expect_sym(kw[":depth"], "depth"))
        params = tuple(Var(expect_sym(p, "param")) for p in expect_list(kw[":params"], "params")) if ":params" in kw else ()
        body = parse_formula(kw[":body"], syms, {p.name: p for p in params})
        det = expect_sym(kw[":det"], "det") if ":det" in kw else None
        stoch = expect_sym(kw[":stoch"], "stoch") if ":stoch" in kw else None
        parent = int(expect_sym(kw[":parent"], "parent")) if ":parent" in kw else None
        seed_value = float(expect_sym(kw[":seed-value"], "value")) if ":seed-value" in kw else 0.0
        h = space._add(depth, det, stoch, params, body, parent, seed_value)
        if h.id != int(expect_sym(kw[":id"], "id")):
            raise ValueError(f"hypothesis record ids must be dense and ordered (got {h.id})")
        if parent is not None and det is not None:
            space._expansions[(parent, det, stoch)] = h.id
    return space
