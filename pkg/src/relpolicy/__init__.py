"""Generalized policies for relational MDPs from regressed first-order
hypotheses and decision-tree induction."""

from .domain import parse_domain, parse_instance, validate
from .errors import RelPolicyError
from .ground import Instance, State, holds
from .learn import LearnerConfig, build_tree
from .pipeline import decide, evaluate, run_pipeline, simulate
from .regress import HypothesisSpace, generate
from .solve import build_mdp, make_examples, value_iteration

__version__ = "0.1.0"

__all__ = [
    "HypothesisSpace",
    "Instance",
    "LearnerConfig",
    "RelPolicyError",
    "State",
    "build_mdp",
    "build_tree",
    "decide",
    "evaluate",
    "generate",
    "holds",
    "make_examples",
    "parse_domain",
    "parse_instance",
    "run_pipeline",
    "simulate",
    "validate",
    "value_iteration",
]
