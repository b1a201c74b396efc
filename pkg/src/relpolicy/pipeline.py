"""Executing learned policies: decisions, coverage and scope against the
exact oracle, sampled rollouts, and the end-to-end pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import InstanceSpec, parse_domain, parse_instance
from .errors import IOFailure, UncoveredStateError
from .fol import Var
from .ground import GroundAction, Instance, State, case_value, holds, transition
from .learn import (
    FailureLeaf,
    LearnerConfig,
    Split,
    SuccessLeaf,
    build_tree,
    format_tree,
    leaf_arguments,
    route,
)
from .regress import HypothesisSpace
from .solve import (
    DEFAULT_BETA,
    DEFAULT_TOL,
    SNAP_EPS,
    GroundMDP,
    ValueTable,
    build_mdp,
    distinct_values,
    format_examples,
    make_examples,
    value_iteration,
)


@dataclass(frozen=True)
class Uncovered:
    reason: str  # failure-leaf | no-binder | inapplicable

    def __str__(self) -> str:
        return f"(uncovered {self.reason})"


def decide(tree, e: State, inst: Instance, space: HypothesisSpace):
    """Ground stochastic action prescribed in ``e``, or ``Uncovered``.

    Splits are routed on the truth of the hypothesis' closed form."""
    node = tree
    while isinstance(node, Split):
        node = node.pos if holds(e, inst, space[node.hyp].closed) else node.neg
    if isinstance(node, FailureLeaf):
        return Uncovered("failure-leaf")
    args = leaf_arguments(e, inst, space, node)
    if args is None:
        return Uncovered("no-binder")
    a = GroundAction(node.action, tuple(args))
    decl = inst.domain.stoch_actions.get(a.symbol)
    if decl is None or len(decl.params) != len(a.args):
        return Uncovered("inapplicable")
    if not holds(e, inst, inst.domain.stoch_poss(decl), dict(zip(decl.params, a.args))):
        return Uncovered("inapplicable")
    return a


@dataclass
class CoverageReport:
    instance: str
    total: int
    optimal: int
    uncovered: int
    scope: float  # math.inf when every state is optimal
    ladder: list = field(default_factory=list)  # (training value, #test states, #optimal)

    @property
    def optimal_rate(self) -> float:
        return self.optimal / self.total if self.total else 1.0

    @property
    def uncovered_rate(self) -> float:
        return self.uncovered / self.total if self.total else 0.0

    @property
    def all_optimal(self) -> bool:
        return self.optimal == self.total

    def scope_text(self) -> str:
        return "inf" if math.isinf(self.scope) else str(int(self.scope))

    def text(self) -> str:
        lines = [
            f"(coverage :instance {self.instance or '-'} :states {self.total}"
            f" :optimal-rate {self.optimal_rate:.6f} :uncovered-rate {self.uncovered_rate:.6f}"
            f" :scope {self.scope_text()})"
        ]
        for v, n, k in self.ladder:
            lines.append(f"(value :v {v:.17g} :states {n} :optimal {k})")
        return "\n".join(lines) + "\n"


def evaluate(tree, space: HypothesisSpace, m: GroundMDP, vt: ValueTable, training_values, eps: float = SNAP_EPS, name: str = "") -> CoverageReport:
    """Compare the policy's decisions with the oracle on every state of ``m``."""
    inst = m.inst
    is_opt = np.zeros(m.n_states, dtype=bool)
    uncovered = 0
    for s, e in enumerate(m.states):
        d = decide(tree, e, inst, space)
        if isinstance(d, Uncovered):
            uncovered += 1
            continue
        r = m.row_of(s, d)
        if r is None:
            continue
        rows = m.rows_of(s)
        q = m.rewards[s] + vt.beta * (m.P[rows.start:rows.stop] @ vt.V)
        is_opt[s] = q[r - rows.start] >= q.max() - eps
    ladder = []
    scope = 0
    stop = False
    for v in distinct_values(training_values, eps):
        at = np.abs(vt.V - v) <= eps
        n, k = int(at.sum()), int((is_opt & at).sum())
        ladder.append((v, n, k))
        if not stop and k == n:
            scope += 1
        else:
            stop = True
    opt = int(is_opt.sum())
    return CoverageReport(name, m.n_states, opt, uncovered, math.inf if opt == m.n_states else scope, ladder)


@dataclass
class Rollout:
    states: list
    actions: list
    rewards: list
    discounted_return: float


def simulate(tree, space: HypothesisSpace, inst: Instance, start: State, horizon: int, seed=0, beta: float = DEFAULT_BETA) -> Rollout:
    """Sample one rollout of ``horizon`` steps; return sum_t beta^t R(e_t)."""
    rng = np.random.default_rng(seed)
    dom = inst.domain
    e = start
    states, actions, rewards = [e], [], [case_value(e, inst, dom.reward)]
    for _ in range(horizon):
        a = decide(tree, e, inst, space)
        if isinstance(a, Uncovered):
            partial = Rollout(states, actions, rewards, _discount(rewards, beta))
            raise UncoveredStateError(f"policy does not cover {e}: {a.reason}", rollout=partial)
        decl = dom.stoch_actions[a.symbol]
        b = dict(zip(decl.params, a.args))
        probs = np.array([case_value(e, inst, case, b) for _, case in decl.prob])
        k = int(rng.choice(len(probs), p=probs / probs.sum()))
        choice = decl.prob[k][0]
        d = GroundAction(choice.symbol, tuple(b[t] if isinstance(t, Var) else t.name for t in choice.args))
        e = transition(e, inst, d)
        actions.append(a)
        states.append(e)
        rewards.append(case_value(e, inst, dom.reward))
    return Rollout(states, actions, rewards, _discount(rewards, beta))


def _discount(rewards, beta: float) -> float:
    return float(sum(r * beta**t for t, r in enumerate(rewards)))


def mean_return(tree, space, inst, start, horizon: int, runs: int, seed=0, beta: float = DEFAULT_BETA) -> float:
    """Average discounted return of independent rollouts (one child seed each)."""
    children = np.random.SeedSequence(seed).spawn(runs)
    return float(np.mean([simulate(tree, space, inst, start, horizon, c, beta).discounted_return for c in children]))


# ---------------------------------------------------------------- pipeline


@dataclass
class Solved:
    inst: Instance
    mdp: GroundMDP
    vt: ValueTable


def solve_instance(inst: Instance, beta: float = DEFAULT_BETA, tol: float = DEFAULT_TOL) -> Solved:
    if not inst.states:
        inst.enumerate()
    m = build_mdp(inst)
    return Solved(inst, m, value_iteration(m, beta, tol))


@dataclass
class PipelineResult:
    tree: object
    space: HypothesisSpace
    examples: list
    build_report: object
    coverage: list
    training_consistent: bool

    def text(self) -> str:
        out = [f"(training :examples {len(self.examples)} :consistent {'yes' if self.training_consistent else 'no'})\n"]
        out.append(self.build_report.text())
        out.extend(c.text() for c in self.coverage)
        return "".join(out)


def training_consistent(tree, examples, inst, space, eps: float = SNAP_EPS) -> bool:
    for ex in examples:
        leaf = route(tree, ex, inst, space)
        if not isinstance(leaf, SuccessLeaf) or leaf.action != ex.action.symbol or abs(leaf.value - ex.value) > eps:
            return False
    return True


def learn_from(train: Solved, config: LearnerConfig, kind: str = "P", starts=None):
    examples = make_examples(train.mdp, train.vt, kind, starts, config.eps)
    space = HypothesisSpace(train.inst.domain)
    tree, report = build_tree(examples, config, space, train.inst)
    return tree, space, examples, report


def read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc.strerror or exc}") from None


def load_domain_arg(arg: str):
    """A bundled domain name or a path to a domain file."""
    from .fixtures import DOMAINS, load_domain

    if arg in DOMAINS and not Path(arg).exists():
        return load_domain(arg)
    return parse_domain(read_text(arg))


def load_instance_arg(domain, arg, domain_name: str | None = None) -> Instance:
    """An instance file path, or a bundled size (integer) for ``domain_name``."""
    from .fixtures import family_of, instance_text

    if isinstance(arg, int) or (isinstance(arg, str) and arg.isdigit() and not Path(arg).exists()):
        if domain_name is None:
            raise IOFailure("a bundled instance size needs a bundled domain name")
        spec = parse_instance(instance_text(family_of(domain_name), int(arg)), domain)
    else:
        spec = parse_instance(read_text(arg), domain)
    if not spec.name and isinstance(arg, str):
        spec = InstanceSpec(spec.objects, spec.statics, spec.seed, Path(arg).stem)
    return Instance(domain, spec)


def run_pipeline(domain, train, tests, config: LearnerConfig, out_dir=None, kind: str = "P",
                 beta: float = DEFAULT_BETA, tol: float = DEFAULT_TOL, domain_name: str | None = None) -> PipelineResult:
    """parse, enumerate, solve, extract examples, learn, evaluate; optionally
    write examples, hypotheses, tree and report files to ``out_dir``."""
    if isinstance(domain, str):
        domain_name = domain_name or domain
        domain = load_domain_arg(domain)
    train_inst = train if isinstance(train, Instance) else load_instance_arg(domain, train, domain_name)
    solved = solve_instance(train_inst, beta, tol)
    tree, space, examples, report = learn_from(solved, config, kind)
    values = [ex.value for ex in examples]
    coverage = []
    for t in tests:
        inst = t if isinstance(t, Instance) else load_instance_arg(domain, t, domain_name)
        s = solve_instance(inst, beta, tol)
        coverage.append(evaluate(tree, space, s.mdp, s.vt, values, config.eps, inst.spec.name))
    result = PipelineResult(tree, space, examples, report, coverage,
                            training_consistent(tree, examples, train_inst, space, config.eps))
    if out_dir is not None:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "examples.txt").write_text(format_examples(examples), encoding="utf-8")
            (out / "hypotheses.txt").write_text(space.records(), encoding="utf-8")
            (out / "tree.txt").write_text(format_tree(tree) + "\n", encoding="utf-8")
            (out / "report.txt").write_text(result.text(), encoding="utf-8")
        except OSError as exc:
            raise IOFailure(f"cannot write to {out}: {exc.strerror or exc}") from None
    return result
