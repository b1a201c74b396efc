"""Command line interface: ``relpolicy <subcommand> ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .domain import print_domain, validate
from .errors import IOFailure, RelPolicyError
from .learn import SELECTORS, LearnerConfig, build_tree, format_tree, parse_tree
from .pipeline import (
    evaluate,
    load_domain_arg,
    load_instance_arg,
    mean_return,
    read_text,
    run_pipeline,
    simulate,
    solve_instance,
)
from .regress import HypothesisSpace, generate, parse_hypotheses
from .solve import DEFAULT_BETA, DEFAULT_TOL, format_examples, make_examples, parse_examples


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write {out}: {exc.strerror or exc}") from None


def _domain(args):
    return load_domain_arg(args.domain)


def _instance(args, domain, which: str = "instance"):
    arg = getattr(args, which)
    if arg is None:
        raise IOFailure(f"--{which} is required")
    return load_instance_arg(domain, arg, args.domain)


def _config(args) -> LearnerConfig:
    return LearnerConfig(max_n=args.max_n, selector=args.selector, prune=not args.no_prune)


def cmd_parse(args) -> int:
    dom = _domain(args)
    diags = validate(dom)
    if args.instance is not None:
        _instance(args, dom)
    if args.format == "records":
        sys.stdout.write(print_domain(dom))
    else:
        print(f"domain {dom.name}: {len(dom.det_actions)} deterministic actions, "
              f"{len(dom.stoch_actions)} stochastic actions, {len(dom.fluents)} fluents")
    for d in diags:
        print(d)
    return 1 if any(d.code.startswith("E_") for d in diags) else 0


def cmd_enumerate(args) -> int:
    inst = _instance(args, _domain(args))
    states = inst.enumerate()
    if args.format == "records":
        _write("".join(f"{s}\n" for s in states), args.out)
    print(f"states {len(states)}", file=sys.stderr if args.format == "records" and args.out is None else sys.stdout)
    return 0


def cmd_solve(args) -> int:
    inst = _instance(args, _domain(args))
    s = solve_instance(inst, args.beta, args.tol)
    examples = make_examples(s.mdp, s.vt, args.kind)
    _write(format_examples(examples), args.out)
    if args.out is not None:
        print(f"examples {len(examples)} iterations {s.vt.iterations} residual {s.vt.residual:.3g}")
    return 0


def cmd_hypotheses(args) -> int:
    space = generate(_domain(args), args.max_n)
    _write(space.records(), args.out)
    if args.out is not None:
        print("layers " + " ".join(str(k) for k in space.layer_sizes()))
    return 0


def _space(args, domain) -> HypothesisSpace:
    if args.hypotheses is None:
        return HypothesisSpace(domain)
    return parse_hypotheses(read_text(args.hypotheses), domain)


def cmd_learn(args) -> int:
    dom = _domain(args)
    inst = _instance(args, dom)
    examples = parse_examples(read_text(args.examples))
    space = _space(args, dom)
    tree, report = build_tree(examples, _config(args), space, inst)
    if args.out is None:
        print(format_tree(tree))
        sys.stdout.write(report.text())
        return 0
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "tree.txt").write_text(format_tree(tree) + "\n", encoding="utf-8")
        (out / "hypotheses.txt").write_text(space.records(), encoding="utf-8")
        (out / "report.txt").write_text(report.text(), encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write to {out}: {exc.strerror or exc}") from None
    print(f"wrote {out}/tree.txt, hypotheses.txt, report.txt")
    return 0


def _policy(args, dom):
    return parse_tree(read_text(args.tree)), parse_hypotheses(read_text(args.hypotheses), dom)


def cmd_eval(args) -> int:
    dom = _domain(args)
    tree, space = _policy(args, dom)
    values = [ex.value for ex in parse_examples(read_text(args.examples))]
    inst = _instance(args, dom)
    s = solve_instance(inst, args.beta, args.tol)
    rep = evaluate(tree, space, s.mdp, s.vt, values, name=inst.spec.name)
    _write(rep.text(), args.out)
    return 0


def cmd_simulate(args) -> int:
    dom = _domain(args)
    tree, space = _policy(args, dom)
    inst = _instance(args, dom)
    states = inst.enumerate()
    start = states[args.start]
    if args.runs > 1:
        print(f"mean-return {mean_return(tree, space, inst, start, args.horizon, args.runs, args.seed, args.beta):.10g}")
        return 0
    r = simulate(tree, space, inst, start, args.horizon, args.seed, args.beta)
    for t, e in enumerate(r.states):
        act = f" :action {r.actions[t]}" if t < len(r.actions) else ""
        print(f"(step :t {t} :reward {r.rewards[t]:.17g}{act} :state {e})")
    print(f"return {r.discounted_return:.10g}")
    return 0


def cmd_pipeline(args) -> int:
    dom_arg = args.domain
    train = args.instance if args.instance is not None else args.train_size
    if train is None:
        raise IOFailure("give --instance or --train-size")
    tests = list(args.test or []) + [str(k) for k in (args.test_size or [])]
    result = run_pipeline(dom_arg, str(train), tests, _config(args), args.out, args.kind, args.beta, args.tol)
    sys.stdout.write(result.text())
    return 0


def _common(p: argparse.ArgumentParser, *, instance=True, learner=False, solver=False) -> None:
    p.add_argument("--domain", required=True, help="domain file or bundled domain name")
    if instance:
        p.add_argument("--instance", help="instance file, or a bundled size for a bundled domain")
    if solver:
        p.add_argument("--beta", type=float, default=DEFAULT_BETA, help="discount factor (default 0.95)")
        p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="value iteration tolerance")
    if learner:
        p.add_argument("--max-n", type=int, default=4, help="regression depth budget")
        p.add_argument("--selector", choices=SELECTORS, default="paper")
        p.add_argument("--no-prune", action="store_true", help="keep hypotheses no example satisfies")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--format", choices=("text", "records"), default="text")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relpolicy", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse and validate a domain (and optionally an instance)")
    _common(p)
    p.set_defaults(run=cmd_parse)

    p = sub.add_parser("enumerate", help="count (and print) reachable states")
    _common(p)
    p.set_defaults(run=cmd_enumerate)

    p = sub.add_parser("solve", help="value iteration and training examples")
    _common(p, solver=True)
    p.add_argument("--kind", choices=("P", "T"), default="P")
    p.set_defaults(run=cmd_solve)

    p = sub.add_parser("hypotheses", help="print the hypotheses space up to --max-n")
    _common(p, instance=False)
    p.add_argument("--max-n", type=int, default=2)
    p.set_defaults(run=cmd_hypotheses)

    p = sub.add_parser("learn", help="induce a tree from example records")
    _common(p, learner=True)
    p.add_argument("--examples", required=True)
    p.add_argument("--hypotheses", help="hypothesis records to start from")
    p.set_defaults(run=cmd_learn)

    p = sub.add_parser("eval", help="coverage and scope of a tree on an instance")
    _common(p, solver=True)
    p.add_argument("--tree", required=True)
    p.add_argument("--hypotheses", required=True)
    p.add_argument("--examples", required=True, help="training examples (for the value ladder)")
    p.set_defaults(run=cmd_eval)

    p = sub.add_parser("simulate", help="sample rollouts of a tree")
    _common(p, solver=True)
    p.add_argument("--tree", required=True)
    p.add_argument("--hypotheses", required=True)
    p.add_argument("--start", type=int, default=0, help="index of the start state (BFS order)")
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--runs", type=int, default=1)
    p.set_defaults(run=cmd_simulate)

    p = sub.add_parser("pipeline", help="solve, learn and evaluate end to end")
    _common(p, learner=True, solver=True)
    p.add_argument("--train-size", type=int, help="bundled training instance size")
    p.add_argument("--test-size", type=int, action="append", help="bundled test instance size (repeatable)")
    p.add_argument("--test", action="append", help="test instance file (repeatable)")
    p.add_argument("--kind", choices=("P", "T"), default="P")
    p.set_defaults(run=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except RelPolicyError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error E_UNKNOWN_SYMBOL: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
