"""Decision-tree induction over regressed hypotheses.

Each node either becomes a leaf (its examples agree on action symbol and
value), splits on the best hypothesis available on its branch, or deepens
the branch's hypothesis space by one regression step.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .domain import NOOP
from .errors import DSLSyntaxError, EmptyExamplesError, NoBinderError
from .ground import Instance, State, holds, witness_tuples
from .regress import Hypothesis, HypothesisSpace
from .sexpr import SList, expect_list, expect_sym, read_all
from .solve import SNAP_EPS, Example, distinct_values

SELECTORS = ("paper", "infogain")


@dataclass(frozen=True)
class Split:
    hyp: int
    pos: object
    neg: object


@dataclass(frozen=True)
class SuccessLeaf:
    action: str
    value: float
    binders: tuple = ()


@dataclass(frozen=True)
class FailureLeaf:
    pass


@dataclass
class LearnerConfig:
    max_n: int = 4
    eps: float = SNAP_EPS
    selector: str = "paper"
    prune: bool = True
    # only split on hypotheses whose example satisfaction agrees with the
    # truth of their closed form, so execution-time routing matches training
    closed_consistency: bool = True
    # deepen pure nodes until a binder regressed from the best reward guard
    # reproduces every example's arguments
    binder_adequacy: bool = True

    def __post_init__(self):
        if self.max_n < 0:
            raise ValueError("max_n must be >= 0")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if self.selector not in SELECTORS:
            raise ValueError(f"selector must be one of {SELECTORS}")


@dataclass
class BuildReport:
    nodes: list = field(default_factory=list)  # (kind, depth used, #examples, hyp id or None)
    generated: int = 0
    pruned: int = 0  # distinct hypotheses dropped on some branch
    model_checks: int = 0
    max_depth_used: int = 0
    prune: bool = True
    selector: str = "paper"

    @property
    def failure_leaves(self) -> int:
        return sum(1 for k, *_ in self.nodes if k == "fail")

    @property
    def success_leaves(self) -> int:
        return sum(1 for k, *_ in self.nodes if k == "leaf")

    def text(self) -> str:
        lines = [
            f"(report :hypotheses-generated {self.generated} :hypotheses-pruned {self.pruned}"
            f" :model-checks {self.model_checks} :max-depth {self.max_depth_used}"
            f" :success-leaves {self.success_leaves} :failure-leaves {self.failure_leaves}"
            f" :prune {'on' if self.prune else 'off'} :selector {self.selector})"
        ]
        for kind, depth, n, hyp in self.nodes:
            extra = f" :hyp {hyp}" if hyp is not None else ""
            lines.append(f"(node :kind {kind} :depth {depth} :examples {n}{extra})")
        return "\n".join(lines) + "\n"


def satisfies(ex: Example, h: Hypothesis, inst: Instance) -> bool:
    if h.depth == 0:
        return holds(ex.state, inst, h.closed)
    if ex.action.symbol != h.stoch_action or len(ex.action.args) != len(h.params):
        return False
    return holds(ex.state, inst, h.body, dict(zip(h.params, ex.action.args)))


def pure(examples, eps: float = SNAP_EPS) -> bool:
    if not examples:
        return True
    if len({ex.action.symbol for ex in examples}) > 1:
        return False
    vals = [ex.value for ex in examples]
    return max(vals) - min(vals) <= eps


def _entropy(labels) -> float:
    n = len(labels)
    return -sum(c / n * math.log2(c / n) for c in Counter(labels).values())


def leaf_arguments(e: State, inst: Instance, space: HypothesisSpace, leaf: SuccessLeaf):
    """Arguments for the leaf's action in ``e``: the first witness of the
    first binder that also satisfies every other binder, or None."""
    if not leaf.binders:
        return ()
    first, rest = space[leaf.binders[0]], [space[k] for k in leaf.binders[1:]]
    for t in witness_tuples(e, inst, first.body, first.params):
        if all(holds(e, inst, h.body, dict(zip(h.params, t))) for h in rest):
            return t
    return None


class Learner:
    """One run of tree induction; caches satisfaction per (example, hypothesis)."""

    def __init__(self, examples, config: LearnerConfig, space: HypothesisSpace, inst: Instance):
        self.examples = list(examples)
        self.config = config
        self.space = space
        self.inst = inst
        self.report = BuildReport(prune=config.prune, selector=config.selector)
        self._sat: dict = {}
        self._closed: dict = {}
        self._pruned: set = set()
        self._labels = self._value_labels()
        self._top_reward = max(v for _, v in space.domain.reward.branches)

    def _value_labels(self) -> list:
        ladder = distinct_values([ex.value for ex in self.examples], self.config.eps)
        out = []
        for ex in self.examples:
            out.append(min(range(len(ladder)), key=lambda k: abs(ladder[k] - ex.value)))
        return out

    def sat(self, i: int, hid: int) -> bool:
        key = (i, hid)
        r = self._sat.get(key)
        if r is None:
            r = satisfies(self.examples[i], self.space[hid], self.inst)
            self._sat[key] = r
        return r

    def closed(self, i: int, hid: int) -> bool:
        h = self.space[hid]
        if h.depth == 0:
            return self.sat(i, hid)
        key = (i, hid)
        r = self._closed.get(key)
        if r is None:
            r = holds(self.examples[i].state, self.inst, h.closed)
            self._closed[key] = r
        return r

    # ---------------------------------------------------------------- scoring

    def _score(self, E: list, pos: list):
        if self.config.selector == "paper":
            values = distinct_values([self.examples[i].value for i in pos], self.config.eps)
            return len(pos) / len(values)
        labels = [(self.examples[i].action.symbol, self._labels[i]) for i in E]
        pos_set = set(pos)
        lp = [lab for i, lab in zip(E, labels) if i in pos_set]
        ln = [lab for i, lab in zip(E, labels) if i not in pos_set]
        n = len(E)
        return _entropy(labels) - len(lp) / n * _entropy(lp) - len(ln) / n * _entropy(ln)

    def select(self, E: list, available: list, used: frozenset):
        best = None
        for hid in available:
            if hid in used:
                continue
            pos = [i for i in E if self.sat(i, hid)]
            if not pos or len(pos) == len(E):
                continue
            if self.config.closed_consistency and any(self.sat(i, hid) != self.closed(i, hid) for i in E):
                continue
            h = self.space[hid]
            key = (self._score(E, pos), -h.depth, -hid)
            if best is None or key > best[0]:
                best = (key, hid)
        return None if best is None else best[1]

    # -------------------------------------------------------------- deepening

    def deepen(self, E: list, layers: list) -> list:
        n = len(layers)
        new = self.space.expand(layers[-1], n)
        if self.config.prune:
            kept = [hid for hid in new if any(self.sat(i, hid) for i in E)]
            self._pruned.update(set(new) - set(kept))
            new = kept
        self.report.max_depth_used = max(self.report.max_depth_used, n)
        return layers + [new]

    # ------------------------------------------------------------------ leaves

    def binders(self, E: list, layers: list, symbol: str) -> tuple:
        """Hypotheses of the leaf's action satisfied by all its examples;
        those regressed from the best reward guard come first."""
        out = []
        for layer in layers[1:]:
            for hid in layer:
                if self.space[hid].stoch_action == symbol and all(self.sat(i, hid) for i in E):
                    out.append(hid)
        return tuple(sorted(out, key=lambda k: (not self._goal_seeded(k), self.space[k].depth, k)))

    def _goal_seeded(self, hid: int) -> bool:
        return self.space[hid].seed_value == self._top_reward

    def adequate(self, E: list, leaf: SuccessLeaf) -> bool:
        for i in E:
            ex = self.examples[i]
            if leaf_arguments(ex.state, self.inst, self.space, leaf) != ex.action.args:
                return False
        return True

    def _leaf(self, E: list, layers: list):
        ex0 = self.examples[E[0]]
        symbol = ex0.action.symbol
        value = max(self.examples[i].value for i in E)
        if symbol == NOOP or not ex0.action.args:
            return SuccessLeaf(symbol, value, ()), layers
        while True:
            leaf = SuccessLeaf(symbol, value, self.binders(E, layers, symbol))
            if leaf.binders and (
                not self.config.binder_adequacy
                or (self._goal_seeded(leaf.binders[0]) and self.adequate(E, leaf))
            ):
                return leaf, layers
            if len(layers) - 1 >= self.config.max_n:
                if leaf.binders:
                    return leaf, layers
                raise NoBinderError(
                    f"no hypothesis up to depth {self.config.max_n} binds the arguments of {symbol}"
                    f" for {len(E)} examples of value {value!r}"
                )
            layers = self.deepen(E, layers)

    # -------------------------------------------------------------- recursion

    def build(self, E: list, layers: list, used: frozenset):
        if not E:
            raise EmptyExamplesError("no training examples at node")
        if pure([self.examples[i] for i in E], self.config.eps):
            leaf, layers = self._leaf(E, layers)
            self.report.nodes.append(("leaf", len(layers) - 1, len(E), None))
            return leaf
        while True:
            available = [hid for layer in layers for hid in layer]
            hid = self.select(E, available, used)
            if hid is not None:
                break
            if len(layers) - 1 >= self.config.max_n:
                self.report.nodes.append(("fail", len(layers) - 1, len(E), None))
                return FailureLeaf()
            layers = self.deepen(E, layers)
        self.report.nodes.append(("split", len(layers) - 1, len(E), hid))
        pos = [i for i in E if self.sat(i, hid)]
        neg = [i for i in E if not self.sat(i, hid)]
        used = used | {hid}
        return Split(hid, self.build(pos, layers, used), self.build(neg, layers, used))

    def run(self):
        checks0 = self.inst.model_checks
        hyps0 = len(self.space)
        layer0 = list(self.space.layers[0])
        tree = self.build(list(range(len(self.examples))), [layer0], frozenset())
        self.report.generated = len(self.space) - hyps0 + len(layer0)
        self.report.model_checks = self.inst.model_checks - checks0
        self.report.pruned = len(self._pruned)
        return tree, self.report


def build_tree(examples, config: LearnerConfig, space: HypothesisSpace, inst: Instance):
    """Induce a tree from ``examples``; returns ``(tree, report)``."""
    if not examples:
        raise EmptyExamplesError("no training examples")
    return Learner(examples, config, space, inst).run()


def prune(layer, examples, inst: Instance, space: HypothesisSpace) -> list:
    """Hypotheses of ``layer`` satisfied by at least one example."""
    return [hid for hid in layer if any(satisfies(ex, space[hid], inst) for ex in examples)]


def route(tree, ex: Example, inst: Instance, space: HypothesisSpace):
    """Leaf reached by a training example (positive arc iff satisfied)."""
    while isinstance(tree, Split):
        tree = tree.pos if satisfies(ex, space[tree.hyp], inst) else tree.neg
    return tree


def leaves(tree) -> list:
    if isinstance(tree, Split):
        return leaves(tree.pos) + leaves(tree.neg)
    return [tree]


# ------------------------------------------------------------------ records


def format_tree(tree, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(tree, Split):
        return (
            f"{pad}(split :hyp {tree.hyp}\n{pad}  (pos\n{format_tree(tree.pos, indent + 2)})\n"
            f"{pad}  (neg\n{format_tree(tree.neg, indent + 2)}))"
        )
    if isinstance(tree, SuccessLeaf):
        binders = " ".join(str(k) for k in tree.binders)
        return f"{pad}(leaf :action ({tree.action}) :value {tree.value:.17g} :binders ({binders}))"
    return f"{pad}(fail)"


def _parse_node(x):
    x = expect_list(x, "tree node")
    head = expect_sym(x[0], "split, leaf or fail") if x.items else ""
    if head == "fail":
        return FailureLeaf()
    if head == "split":
        if len(x) != 5 or expect_sym(x[1], ":hyp") != ":hyp":
            raise DSLSyntaxError("expected (split :hyp k (pos ...) (neg ...))", x.line, x.col)
        arcs = {}
        for arc in x.items[3:]:
            arc = expect_list(arc, "(pos ...) or (neg ...)")
            arcs[expect_sym(arc[0], "pos or neg")] = _parse_node(arc[1])
        return Split(int(expect_sym(x[2], "hypothesis id")), arcs["pos"], arcs["neg"])
    if head == "leaf":
        kw = {expect_sym(x[k], "keyword"): x[k + 1] for k in range(1, len(x) - 1, 2)}
        act = expect_list(kw[":action"], "action")
        binders = tuple(int(expect_sym(b, "hypothesis id")) for b in expect_list(kw.get(":binders", SList()), "binders"))
        return SuccessLeaf(expect_sym(act[0], "action"), float(expect_sym(kw[":value"], "value")), binders)
    raise DSLSyntaxError(f"expected split, leaf or fail, found {head!r}", x.line, x.col)


def parse_tree(text: str):
    forms = read_all(text)
    if len(forms) != 1:
        raise DSLSyntaxError("expected exactly one tree form", 1, 1)
    return _parse_node(forms[0])


__all__ = [
    "BuildReport", "FailureLeaf", "Learner", "LearnerConfig", "Split", "SuccessLeaf", "build_tree",
    "format_tree", "leaf_arguments", "leaves", "parse_tree", "prune", "pure", "route", "satisfies",
]
