"""Template expansion into a stratified, safe Datalog program.

Instantiation substitutes template parameters by constants, repeating for
directives nested inside templates until none remain (recursive template
instantiation is rejected).  Template-ground atoms become first-order
predicates named ``pred<c1,...,ck>``.  Body atoms whose template argument
is still a variable after substitution range over the known ground
instances of that predicate through generated ``__any_pred`` bridge rules.
Disjunction and negation over conjunctions desugar into fresh ``__disj_k``
and ``__neg_k`` predicates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .ast import (
    AnnQuery,
    Atom,
    Comparison,
    Disj,
    Expr,
    Instantiate,
    Neg,
    Program,
    Rule,
    Term,
    const,
    expr_vars,
    is_var,
    subst_rule,
    var,
)


class InstantiationError(Exception):
    pass


class StratificationError(Exception):
    pass


# -- ground representation ----------------------------------------------------


@dataclass(frozen=True)
class GAtom:
    pred: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class GAnn:
    var_name: str
    atype: Term  # const, or var ranging over annotation types
    modifiers: frozenset[str]


@dataclass(frozen=True)
class GCmp:
    op: str
    left: Term
    right: Term


GBody = Union[GAtom, GAnn, GCmp]


@dataclass(frozen=True)
class GLit:
    item: GBody
    positive: bool = True


@dataclass
class GroundRule:
    head: GAtom
    body: tuple[GLit, ...]
    origin: tuple[int, int] = (0, 0)

    def __repr__(self):
        return f"{self.head.pred}{self.head.args} :- {self.body}"


@dataclass
class GroundProgram:
    rules: list[GroundRule] = field(default_factory=list)
    strata: list[list[str]] = field(default_factory=list)
    any_preds: dict[str, list[str]] = field(default_factory=dict)
    # __any_pred name -> base predicate (unmangled) it bridges

    def head_preds(self) -> set[str]:
        return {r.head.pred for r in self.rules}


def mangle(pred: str, targs: Iterable[Term]) -> str:
    consts = [t[1] for t in targs]
    if not consts:
        return pred
    return f"{pred}<{','.join(consts)}>"


def base_name(pred: str) -> str:
    return pred.split("<", 1)[0]


# -- instantiation -----------------------------------------------------------


def _template_graph(program: Program) -> dict[str, set[str]]:
    graph: dict[str, set[str]] = {}
    for name, tpl in program.templates.items():
        graph[name] = {inst.template for inst in tpl.insts}
    return graph


def _check_acyclic(graph: dict[str, set[str]]) -> None:
    state: dict[str, int] = {}

    def visit(node: str, path: list[str]):
        state[node] = 1
        for nxt in graph.get(node, ()):
            if state.get(nxt) == 1:
                cycle = " -> ".join(path + [node, nxt])
                raise InstantiationError(f"recursive template instantiation: {cycle}")
            if state.get(nxt, 0) == 0:
                visit(nxt, path + [node])
        state[node] = 2

    for node in graph:
        if state.get(node, 0) == 0:
            visit(node, [])


def instantiate(program: Program) -> GroundProgram:
    """Expand all INSTANTIATE directives and desugar to ground Datalog."""
    _check_acyclic(_template_graph(program))
    expanded: list[Rule] = []
    seen_rules: set[str] = set()

    def emit(rule: Rule) -> None:
        key = repr(rule)
        if key not in seen_rules:
            seen_rules.add(key)
            expanded.append(rule)

    def run_inst(inst: Instantiate, outer: dict[str, str]) -> None:
        tpl = program.templates.get(inst.template)
        if tpl is None:
            raise InstantiationError(
                f"{inst.pos[0]}:{inst.pos[1]}: unknown template {inst.template!r}"
            )
        if len(inst.params) != len(tpl.params):
            raise InstantiationError(
                f"{inst.pos[0]}:{inst.pos[1]}: arity mismatch for "
                f"{inst.template!r}: {len(inst.params)} vs {len(tpl.params)}"
            )
        for values in inst.tuples:
            if len(values) != len(tpl.params):
                raise InstantiationError(
                    f"{inst.pos[0]}:{inst.pos[1]}: value tuple arity mismatch "
                    f"for {inst.template!r}"
                )
            resolved: list[str] = []
            for v in values:
                if is_var(v):
                    if v[1] not in outer:
                        raise InstantiationError(
                            f"{inst.pos[0]}:{inst.pos[1]}: unbound template "
                            f"variable {v[1]!r} in instantiation values"
                        )
                    resolved.append(outer[v[1]])
                else:
                    resolved.append(v[1])
            sigma = dict(zip(tpl.params, resolved))
            for rule in tpl.rules:
                emit(subst_rule(rule, sigma))
            for nested in tpl.insts:
                run_inst(nested, sigma)

    for rule in program.rules:
        emit(rule)
    for inst in program.insts:
        run_inst(inst, {})

    ground = GroundProgram()
    counter = [0]
    for rule in expanded:
        _compile_rule(rule, ground, counter)
    _add_bridges(ground)
    return ground


def _ground_atom(atom: Atom) -> GAtom:
    """Mangle a template atom; variable template args go through __any."""
    if atom.pred_var is not None:
        raise InstantiationError(
            f"{atom.pos[0]}:{atom.pos[1]}: predicate variable "
            f"{atom.pred_var!r} not resolved by instantiation"
        )
    if all(not is_var(t) for t in atom.targs):
        return GAtom(mangle(atom.pred, atom.targs), atom.args)
    return GAtom(f"__any_{atom.pred}", tuple(atom.targs) + tuple(atom.args))


def _compile_rule(rule: Rule, ground: GroundProgram, counter: list[int]) -> None:
    head = rule.head
    if head.pred_var is not None:
        raise InstantiationError(
            f"{head.pos[0]}:{head.pos[1]}: predicate variable head "
            f"{head.pred_var!r} not resolved by instantiation"
        )
    if any(is_var(t) for t in head.targs):
        bad = [t[1] for t in head.targs if is_var(t)]
        raise InstantiationError(
            f"{head.pos[0]}:{head.pos[1]}: unbound template variable "
            f"{bad[0]!r} in rule head after instantiation"
        )
    ghead = GAtom(mangle(head.pred, head.targs), head.args)
    body = _compile_body(rule.body, ground, counter, rule.pos)
    ground.rules.append(GroundRule(head=ghead, body=tuple(body), origin=rule.pos))


def _compile_body(
    exprs: Iterable[Expr],
    ground: GroundProgram,
    counter: list[int],
    pos: tuple[int, int],
) -> list[GLit]:
    out: list[GLit] = []
    exprs = list(exprs)
    outside_vars: list[set[str]] = []
    for i, e in enumerate(exprs):
        others: set[str] = set()
        for j, o in enumerate(exprs):
            if i != j:
                others |= expr_vars(o)
        outside_vars.append(others)

    for e, outside in zip(exprs, outside_vars):
        out.extend(_compile_expr(e, outside, ground, counter, pos))
    return out


def _compile_expr(
    e: Expr,
    outside: set[str],
    ground: GroundProgram,
    counter: list[int],
    pos: tuple[int, int],
) -> list[GLit]:
    if isinstance(e, Atom):
        return [GLit(_ground_atom(e))]
    if isinstance(e, AnnQuery):
        return [GLit(GAnn(e.var_name, e.atype, e.modifiers))]
    if isinstance(e, Comparison):
        return [GLit(GCmp(e.op, e.left, e.right))]
    if isinstance(e, Neg):
        inner = e.body
        if len(inner) == 1 and isinstance(inner[0], Comparison):
            c = inner[0]
            flipped = {"=": "!=", "!=": "="}.get(c.op)
            if flipped:
                return [GLit(GCmp(flipped, c.left, c.right))]
            return [GLit(GCmp(c.op, c.left, c.right), positive=False)]
        if len(inner) == 1 and isinstance(inner[0], Atom):
            return [GLit(_ground_atom(inner[0]), positive=False)]
        shared = sorted(_free_vars(inner) & outside)
        name = _fresh(ground, counter, "__neg")
        aux_head = Atom(pred=name, targs=(), args=tuple(var(v) for v in shared), pos=pos)
        _compile_rule(Rule(head=aux_head, body=tuple(inner), pos=pos), ground, counter)
        return [GLit(GAtom(name, tuple(var(v) for v in shared)), positive=False)]
    if isinstance(e, Disj):
        shared = sorted(_free_vars(e.left + e.right) & outside)
        name = _fresh(ground, counter, "__disj")
        aux_head = Atom(pred=name, targs=(), args=tuple(var(v) for v in shared), pos=pos)
        _compile_rule(Rule(head=aux_head, body=tuple(e.left), pos=pos), ground, counter)
        _compile_rule(Rule(head=aux_head, body=tuple(e.right), pos=pos), ground, counter)
        return [GLit(GAtom(name, tuple(var(v) for v in shared)))]
    raise TypeError(e)


def _free_vars(exprs: Iterable[Expr]) -> set[str]:
    out: set[str] = set()
    for e in exprs:
        out |= expr_vars(e)
    return out


def _fresh(ground: GroundProgram, counter: list[int], prefix: str) -> str:
    counter[0] += 1
    return f"{prefix}_{counter[0]}"


def _add_bridges(ground: GroundProgram) -> None:
    """__any_pred(T1..,args..) :- pred<c1..>(args..) for every known ground
    instance; instances provided only as extensional facts are seeded at
    evaluation time."""
    wanted: dict[str, int] = {}
    for rule in ground.rules:
        for lit in rule.body:
            if isinstance(lit.item, GAtom) and lit.item.pred.startswith("__any_"):
                base = lit.item.pred[len("__any_"):]
                wanted.setdefault(base, 0)
    if not wanted:
        return
    instances: dict[str, set[str]] = {b: set() for b in wanted}
    for rule in ground.rules:
        pred = rule.head.pred
        b = base_name(pred)
        if b in instances and "<" in pred:
            instances[b].add(pred)
    for base, preds in instances.items():
        any_name = f"__any_{base}"
        ground.any_preds[any_name] = sorted(preds)
        for pred in sorted(preds):
            inside = pred[len(base) + 1:-1]
            consts = inside.split(",") if inside else []
            arity = _pred_arity(ground, pred)
            arg_vars = tuple(var(f"X{i}") for i in range(arity))
            head = GAtom(any_name, tuple(const(c) for c in consts) + arg_vars)
            ground.rules.append(
                GroundRule(head=head, body=(GLit(GAtom(pred, arg_vars)),))
            )


def _pred_arity(ground: GroundProgram, pred: str) -> int:
    for rule in ground.rules:
        if rule.head.pred == pred:
            return len(rule.head.args)
    return 1


# -- safety ---------------------------------------------------------------------


@dataclass
class SafetyViolation:
    pos: tuple[int, int]
    message: str

    def __str__(self):
        return f"{self.pos[0]}:{self.pos[1]}: {self.message}"


def check_safety(program: Program) -> list[SafetyViolation]:
    """Template-variable and first-order safety over the parsed program."""
    out: list[SafetyViolation] = []
    for rule in program.rules:
        out.extend(_check_rule(rule, params=()))
    for tpl in program.templates.values():
        for rule in tpl.rules:
            out.extend(_check_rule(rule, params=tpl.params))
    return out


def _binding_vars(exprs: Iterable[Expr]) -> set[str]:
    """Variables bound by positive body positions.

    Positive atoms bind their arguments and any variable template argument
    (those range over the finite ground instances); annotation queries bind
    their node variable and a variable annotation type; the precedence test
    and comparisons bind nothing new except that `=` against a constant
    could — we keep `=` as a pure test.
    """
    bound: set[str] = set()
    for e in exprs:
        if isinstance(e, Atom):
            for t in e.targs + e.args:
                if is_var(t):
                    bound.add(t[1])
        elif isinstance(e, AnnQuery):
            bound.add(e.var_name)
            if is_var(e.atype):
                bound.add(e.atype[1])
        elif isinstance(e, Comparison) and e.op == "<<":
            # precedence pairs form a finite table
            for t in (e.left, e.right):
                if is_var(t):
                    bound.add(t[1])
        elif isinstance(e, Disj):
            left = _binding_vars(e.left)
            right = _binding_vars(e.right)
            bound |= left & right
    return bound


def _check_rule(rule: Rule, params: tuple[str, ...]) -> list[SafetyViolation]:
    out: list[SafetyViolation] = []
    bound = _binding_vars(rule.body)
    head = rule.head

    head_tvars = [t[1] for t in head.targs if is_var(t)]
    if head.pred_var is not None:
        head_tvars.append(head.pred_var)
    for tv in head_tvars:
        if tv not in params and tv not in bound:
            out.append(SafetyViolation(
                head.pos,
                f"template variable {tv!r} in head is neither a template "
                f"parameter nor bound in the body",
            ))
    for v in (t[1] for t in head.args if is_var(t)):
        if v not in bound and v not in params:
            out.append(SafetyViolation(
                head.pos, f"head variable {v!r} does not occur in a positive body atom"
            ))

    def walk(exprs: Iterable[Expr], enclosing_bound: set[str]):
        for e in exprs:
            if isinstance(e, Neg):
                inner_bound = _binding_vars(e.body) | enclosing_bound
                for v in _free_vars(e.body):
                    if v in params:
                        continue
                    if v not in inner_bound:
                        out.append(SafetyViolation(
                            e.pos,
                            f"variable {v!r} under negation is not bound by any "
                            f"positive atom",
                        ))
                walk(e.body, inner_bound)
            elif isinstance(e, Disj):
                walk(e.left, enclosing_bound | _binding_vars(e.left))
                walk(e.right, enclosing_bound | _binding_vars(e.right))
            elif isinstance(e, Comparison):
                for t in (e.left, e.right):
                    if is_var(t) and t[1] not in enclosing_bound and t[1] not in params and e.op != "<<":
                        out.append(SafetyViolation(
                            e.pos,
                            f"comparison variable {t[1]!r} is not bound by any "
                            f"positive atom",
                        ))

    walk(rule.body, bound)
    return out


def check_ground_safety(ground: GroundProgram) -> list[SafetyViolation]:
    """Classic Datalog safety on the expanded program."""
    out: list[SafetyViolation] = []
    for rule in ground.rules:
        bound: set[str] = set()
        for lit in rule.body:
            if not lit.positive:
                continue
            if isinstance(lit.item, GAtom):
                bound |= {t[1] for t in lit.item.args if is_var(t)}
            elif isinstance(lit.item, GAnn):
                bound.add(lit.item.var_name)
                if is_var(lit.item.atype):
                    bound.add(lit.item.atype[1])
            elif isinstance(lit.item, GCmp) and lit.item.op == "<<":
                bound |= {t[1] for t in (lit.item.left, lit.item.right) if is_var(t)}
        for v in (t[1] for t in rule.head.args if is_var(t)):
            if v not in bound:
                out.append(SafetyViolation(
                    rule.origin, f"{rule.head.pred}: head variable {v!r} unbound"
                ))
        for lit in rule.body:
            if lit.positive:
                continue
            vars_here: set[str] = set()
            if isinstance(lit.item, GAtom):
                vars_here = {t[1] for t in lit.item.args if is_var(t)}
            elif isinstance(lit.item, GAnn):
                vars_here = {lit.item.var_name}
            elif isinstance(lit.item, GCmp):
                vars_here = {t[1] for t in (lit.item.left, lit.item.right) if is_var(t)}
            for v in vars_here:
                if v not in bound:
                    out.append(SafetyViolation(
                        rule.origin,
                        f"{rule.head.pred}: negated variable {v!r} unbound",
                    ))
    return out


# -- stratification -------------------------------------------------------------


def stratify(ground: GroundProgram) -> list[list[str]]:
    """Assign predicates to strata; negative edges must cross strata downward."""
    preds: set[str] = set()
    pos_edges: dict[str, set[str]] = {}
    neg_edges: dict[str, set[str]] = {}
    idb = ground.head_preds()
    for rule in ground.rules:
        h = rule.head.pred
        preds.add(h)
        for lit in rule.body:
            if not isinstance(lit.item, GAtom):
                continue
            b = lit.item.pred
            if b not in idb:
                continue  # extensional or builtin
            preds.add(b)
            target = pos_edges if lit.positive else neg_edges
            target.setdefault(h, set()).add(b)

    # Tarjan SCC over dependency graph (head -> body)
    graph = {p: pos_edges.get(p, set()) | neg_edges.get(p, set()) for p in preds}
    sccs = _tarjan(graph)
    comp: dict[str, int] = {}
    for i, scc in enumerate(sccs):
        for p in scc:
            comp[p] = i
    for h, targets in neg_edges.items():
        for b in targets:
            if comp[h] == comp[b]:
                cycle = sorted(sccs[comp[h]])
                raise StratificationError(
                    "negative cycle through " + ", ".join(cycle)
                )

    level: dict[int, int] = {}

    def comp_level(ci: int) -> int:
        if ci in level:
            return level[ci]
        lv = 0
        for p in sccs[ci]:
            for b in pos_edges.get(p, ()):  # depends on
                if comp[b] != ci:
                    lv = max(lv, comp_level(comp[b]))
            for b in neg_edges.get(p, ()):  # strict
                lv = max(lv, comp_level(comp[b]) + 1)
        level[ci] = lv
        return lv

    by_level: dict[int, list[str]] = {}
    for ci in range(len(sccs)):
        lv = comp_level(ci)
        by_level.setdefault(lv, []).extend(sccs[ci])
    strata = [sorted(by_level[lv]) for lv in sorted(by_level)]
    ground.strata = strata
    return strata


def _tarjan(graph: dict[str, set[str]]) -> list[list[str]]:
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    out: list[list[str]] = []
    counter = [0]

    def strongconnect(v: str):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w in sorted(graph.get(v, ())):
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            scc = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                scc.append(w)
                if w == v:
                    break
            out.append(scc)

    import sys
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 10000))
    try:
        for v in sorted(graph):
            if v not in index:
                strongconnect(v)
    finally:
        sys.setrecursionlimit(old)
    return out
