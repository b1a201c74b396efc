"""Ground MDP construction, value iteration and training-example extraction.

Rewards are collected in the current state, so
``V(e) = R(e) + beta * max_A sum_e' Pr(e, A, e') V(e')``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .domain import NOOP
from .errors import DSLSyntaxError, NoActionError, PartitionError, ProbMassError
from .fol import Var
from .ground import (
    GroundAction,
    Instance,
    State,
    applicable_stoch_actions,
    case_value,
    check_partition,
    holds,
    transition,
)
from .sexpr import expect_list, expect_sym, read_all

DEFAULT_BETA = 0.95
DEFAULT_TOL = 1e-9
SNAP_EPS = 1e-6
MASS_TOL = 1e-9


def action_order(a: GroundAction) -> tuple:
    """Tie-break key among equally good actions: noop first, then lexicographic."""
    return (a.symbol != NOOP, a.symbol, a.args)


@dataclass
class GroundMDP:
    inst: Instance
    states: list
    index: dict
    rewards: np.ndarray
    # one row per applicable (state, stochastic action) pair, grouped by state
    row_state: np.ndarray
    row_action: list
    row_start: np.ndarray  # first row of each state; row_start[n] = number of rows
    P: sp.csr_matrix

    @property
    def n_states(self) -> int:
        return len(self.states)

    def rows_of(self, s: int) -> range:
        return range(int(self.row_start[s]), int(self.row_start[s + 1]))

    def actions_of(self, s: int) -> list:
        return [self.row_action[r] for r in self.rows_of(s)]

    def row_of(self, s: int, a: GroundAction) -> int | None:
        for r in self.rows_of(s):
            if self.row_action[r] == a:
                return r
        return None

    def successors(self, r: int) -> list:
        """``(state index, probability)`` pairs of one row."""
        lo, hi = self.P.indptr[r], self.P.indptr[r + 1]
        return list(zip(self.P.indices[lo:hi].tolist(), self.P.data[lo:hi].tolist()))

    def q_values(self, V: np.ndarray, beta: float) -> np.ndarray:
        return self.rewards[self.row_state] + beta * (self.P @ V)


def _choice_action(choice, stoch_params, args) -> GroundAction:
    b = dict(zip(stoch_params, args))
    return GroundAction(choice.symbol, tuple(b[t] if isinstance(t, Var) else t.name for t in choice.args))


def build_mdp(inst: Instance, states: list | None = None) -> GroundMDP:
    """Aggregate nature's choices into successor distributions."""
    if states is None:
        states = inst.states or inst.enumerate()
    index = {e: i for i, e in enumerate(states)}
    dom = inst.domain
    bad = check_partition(inst, states, dom.reward)
    if bad:
        raise PartitionError(f"reward case: {bad[0]}")
    rewards = np.array([case_value(e, inst, dom.reward) for e in states], dtype=float)

    row_state, row_action, row_start = [], [], [0]
    indptr, indices, data = [0], [], []
    for i, e in enumerate(states):
        acts = applicable_stoch_actions(e, inst)
        if not acts:
            raise NoActionError(f"no applicable action in state {i} {e}")
        for a in acts:
            decl = dom.stoch_actions[a.symbol]
            binding = dict(zip(decl.params, a.args))
            dist: dict = {}
            total = 0.0
            for choice, case in decl.prob:
                try:
                    p = case_value(e, inst, case, binding)
                except PartitionError as exc:
                    raise PartitionError(f"prob case of {choice.symbol} under {a}: {exc}") from None
                total += p
                if p == 0.0:
                    continue
                d = _choice_action(choice, decl.params, a.args)
                succ = transition(e, inst, d, check=False)
                j = index.get(succ)
                if j is None:
                    raise ProbMassError(f"{d} leaves the enumerated state space")
                dist[j] = dist.get(j, 0.0) + p
            if abs(total - 1.0) > MASS_TOL:
                raise ProbMassError(f"{a} in state {i}: probabilities sum to {total!r}")
            for j in sorted(dist):
                indices.append(j)
                data.append(dist[j])
            indptr.append(len(indices))
            row_state.append(i)
            row_action.append(a)
        row_start.append(len(row_action))
    n = len(states)
    P = sp.csr_matrix((np.array(data), np.array(indices, dtype=np.int64), np.array(indptr)), shape=(len(row_action), n))
    return GroundMDP(
        inst, list(states), index, rewards, np.array(row_state, dtype=np.int64), row_action,
        np.array(row_start, dtype=np.int64), P,
    )


@dataclass
class ValueTable:
    V: np.ndarray
    residual: float
    iterations: int
    beta: float


def value_iteration(m: GroundMDP, beta: float = DEFAULT_BETA, tol: float = DEFAULT_TOL, max_iter: int = 100_000) -> ValueTable:
    """Synchronous Bellman sweeps until the sup-norm change is at most ``tol``."""
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"discount must lie in [0, 1), got {beta}")
    if m.P.shape[0] == 0:
        raise NoActionError("MDP has no actions")
    starts = m.row_start[:-1]
    V = m.rewards.copy()
    residual = float("inf")
    it = 0
    while residual > tol and it < max_iter:
        Q = m.P @ V
        new = m.rewards + beta * np.maximum.reduceat(Q, starts)
        residual = float(np.max(np.abs(new - V)))
        V = new
        it += 1
    return ValueTable(V, residual, it, beta)


def snap_values(V, eps: float = SNAP_EPS) -> np.ndarray:
    """Cluster values closer than ``eps`` (chained) onto the cluster maximum."""
    V = np.asarray(V, dtype=float)
    order = np.argsort(-V, kind="stable")
    out = V.copy()
    rep = None
    prev = None
    for i in order:
        v = V[i]
        if prev is None or prev - v > eps:
            rep = v
        out[i] = rep
        prev = v
    return out


def distinct_values(values, eps: float = SNAP_EPS) -> list:
    """Descending list of eps-distinct values."""
    out: list = []
    for v in sorted(values, reverse=True):
        if not out or out[-1] - v > eps:
            out.append(v)
    return out


def optimal_actions(m: GroundMDP, vt: ValueTable, s: int, tol: float = SNAP_EPS) -> list:
    """Actions whose Q-value is within ``tol`` of the best, in tie-break order."""
    rows = m.rows_of(s)
    q = m.rewards[s] + vt.beta * (m.P[rows.start:rows.stop] @ vt.V)
    best = float(q.max())
    acts = [m.row_action[r] for r, qv in zip(rows, q) if qv >= best - tol]
    return sorted(acts, key=action_order)


def greedy_action(m: GroundMDP, vt: ValueTable, s: int, tol: float = SNAP_EPS) -> GroundAction:
    return optimal_actions(m, vt, s, tol)[0]


@dataclass(frozen=True)
class Example:
    state: State
    value: float
    action: GroundAction

    def record(self) -> str:
        return f"(example :value {self.value:.17g} :action {self.action} :state {self.state})"


def _goal_guard(inst: Instance):
    return max(inst.domain.reward.branches, key=lambda b: b[1])[0]


def make_examples(m: GroundMDP, vt: ValueTable, kind: str = "P", starts=None, eps: float = SNAP_EPS) -> list:
    """Training triples from the optimal policy (P) or from greedy
    trajectories (T).  Values are snapped to eps-clusters."""
    snapped = snap_values(vt.V, eps)
    if kind == "P":
        return [Example(e, float(snapped[i]), greedy_action(m, vt, i)) for i, e in enumerate(m.states)]
    if kind != "T":
        raise ValueError(f"example kind must be P or T, got {kind!r}")
    goal = _goal_guard(m.inst)
    if starts is None:
        starts = range(m.n_states)
    out: list = []
    seen: set = set()
    for s0 in starts:
        s = m.index[s0] if isinstance(s0, State) else int(s0)
        values_seen: list = []
        while True:
            v = float(snapped[s])
            if any(abs(v - w) <= eps for w in values_seen):
                break
            values_seen.append(v)
            a = greedy_action(m, vt, s)
            if s not in seen:
                seen.add(s)
                out.append(Example(m.states[s], v, a))
            if holds(m.states[s], m.inst, goal):
                break
            succ = m.successors(m.row_of(s, a))
            s = max(succ, key=lambda jp: (jp[1], -jp[0]))[0]
    return out


def format_examples(examples) -> str:
    return "".join(ex.record() + "\n" for ex in examples)


def _state_of(x) -> State:
    x = expect_list(x, "state")
    items = list(x.items)
    if items and not isinstance(items[0], type(x)) and expect_sym(items[0], "state") == "state":
        items = items[1:]
    facts = []
    for f in items:
        f = expect_list(f, "fact")
        facts.append((expect_sym(f[0], "fluent"), tuple(expect_sym(t, "object") for t in f.items[1:])))
    return State.of(facts)


def parse_examples(text: str) -> list:
    out = []
    for form in read_all(text):
        form = expect_list(form, "(example ...)")
        if not form.items or expect_sym(form[0], "example") != "example":
            raise DSLSyntaxError("expected (example ...)", form.line, form.col)
        kw = {}
        items = form.items[1:]
        for k in range(0, len(items) - 1, 2):
            kw[expect_sym(items[k], "keyword")] = items[k + 1]
        for need in (":value", ":action", ":state"):
            if need not in kw:
                raise DSLSyntaxError(f"example record lacks {need}", form.line, form.col)
        act = expect_list(kw[":action"], "action")
        action = GroundAction(expect_sym(act[0], "action"), tuple(expect_sym(t, "object") for t in act.items[1:]))
        out.append(Example(_state_of(kw[":state"]), float(expect_sym(kw[":value"], "value")), action))
    return out
