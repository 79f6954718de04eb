"""Datalog-with-templates rule language: parser, grounding, evaluation."""

from .ast import (  # noqa: F401
    AnnQuery,
    Atom,
    Comparison,
    Disj,
    Instantiate,
    Neg,
    Program,
    Rule,
    Template,
    const,
    var,
)
from .parser import ParseError, parse_program  # noqa: F401
from .ground import (  # noqa: F401
    GroundProgram,
    GroundRule,
    InstantiationError,
    StratificationError,
    check_safety,
    instantiate,
    stratify,
)
from .engine import EvalContext, FactBase, eval_annotation_query, evaluate  # noqa: F401
