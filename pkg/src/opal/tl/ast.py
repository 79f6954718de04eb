"""Syntax tree for the template language.

Terms are ("var", name) or ("const", value) pairs; one namespace covers
template and first-order variables, and instantiation substitutes the
declared template parameters away wherever they occur.  Whatever variables
remain after instantiation are first-order: node variables in argument
positions, type variables in template-argument or annotation positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

Term = tuple[str, str]  # ("var", name) | ("const", value)


def var(name: str) -> Term:
    return ("var", name)


def const(value: str) -> Term:
    return ("const", value)


def is_var(t: Term) -> bool:
    return t[0] == "var"


@dataclass(frozen=True)
class Atom:
    pred: Optional[str]  # None when the predicate itself is a variable
    targs: tuple[Term, ...]
    args: tuple[Term, ...]
    pred_var: Optional[str] = None
    pos: tuple[int, int] = (0, 0)

    def name(self) -> str:
        return self.pred if self.pred is not None else f"<{self.pred_var}>"


@dataclass(frozen=True)
class AnnQuery:
    var_name: str
    atype: Term
    modifiers: frozenset[str]
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Comparison:
    op: str  # "=", "!=", "<<"
    left: Term
    right: Term
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Neg:
    body: tuple["Expr", ...]
    pos: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class Disj:
    left: tuple["Expr", ...]
    right: tuple["Expr", ...]
    pos: tuple[int, int] = (0, 0)


Expr = Union[Atom, AnnQuery, Comparison, Neg, Disj]


@dataclass
class Rule:
    head: Atom
    body: tuple[Expr, ...]
    pos: tuple[int, int] = (0, 0)


@dataclass
class Instantiate:
    template: str
    params: tuple[str, ...]
    tuples: tuple[tuple[Term, ...], ...]
    pos: tuple[int, int] = (0, 0)


@dataclass
class Template:
    name: str
    params: tuple[str, ...]
    rules: list[Rule] = field(default_factory=list)
    insts: list[Instantiate] = field(default_factory=list)
    pos: tuple[int, int] = (0, 0)


@dataclass
class Program:
    templates: dict[str, Template] = field(default_factory=dict)
    insts: list[Instantiate] = field(default_factory=list)
    rules: list[Rule] = field(default_factory=list)

    def merged(self, other: "Program") -> "Program":
        out = Program(dict(self.templates), list(self.insts), list(self.rules))
        for name, tpl in other.templates.items():
            if name in out.templates:
                raise ValueError(f"duplicate template {name!r}")
            out.templates[name] = tpl
        out.insts.extend(other.insts)
        out.rules.extend(other.rules)
        return out


def expr_vars(expr: Expr) -> set[str]:
    """All variable names in an expression, any position."""
    out: set[str] = set()
    if isinstance(expr, Atom):
        for t in expr.targs + expr.args:
            if is_var(t):
                out.add(t[1])
        if expr.pred_var is not None:
            out.add(expr.pred_var)
    elif isinstance(expr, AnnQuery):
        out.add(expr.var_name)
        if is_var(expr.atype):
            out.add(expr.atype[1])
    elif isinstance(expr, Comparison):
        for t in (expr.left, expr.right):
            if is_var(t):
                out.add(t[1])
    elif isinstance(expr, Neg):
        for e in expr.body:
            out |= expr_vars(e)
    elif isinstance(expr, Disj):
        for e in expr.left + expr.right:
            out |= expr_vars(e)
    return out


def subst_term(t: Term, sigma: dict[str, str]) -> Term:
    if is_var(t) and t[1] in sigma:
        return const(sigma[t[1]])
    return t


def subst_expr(expr: Expr, sigma: dict[str, str]) -> Expr:
    if isinstance(expr, Atom):
        pred, pred_var = expr.pred, expr.pred_var
        if pred_var is not None and pred_var in sigma:
            pred, pred_var = sigma[pred_var], None
        return Atom(
            pred=pred,
            targs=tuple(subst_term(t, sigma) for t in expr.targs),
            args=tuple(subst_term(t, sigma) for t in expr.args),
            pred_var=pred_var,
            pos=expr.pos,
        )
    if isinstance(expr, AnnQuery):
        return AnnQuery(expr.var_name, subst_term(expr.atype, sigma), expr.modifiers, expr.pos)
    if isinstance(expr, Comparison):
        return Comparison(expr.op, subst_term(expr.left, sigma), subst_term(expr.right, sigma), expr.pos)
    if isinstance(expr, Neg):
        return Neg(tuple(subst_expr(e, sigma) for e in expr.body), expr.pos)
    if isinstance(expr, Disj):
        return Disj(
            tuple(subst_expr(e, sigma) for e in expr.left),
            tuple(subst_expr(e, sigma) for e in expr.right),
            expr.pos,
        )
    raise TypeError(expr)


def subst_rule(rule: Rule, sigma: dict[str, str]) -> Rule:
    head = subst_expr(rule.head, sigma)
    return Rule(head=head, body=tuple(subst_expr(e, sigma) for e in rule.body), pos=rule.pos)
