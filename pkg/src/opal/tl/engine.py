"""Stratified semi-naive evaluation against a form labeling and a DOM.

Builtins: `child`/`descendant` over the labeling tree, `follows` (document
order of representatives with no labeling node between), `adjacent`
(element siblings either way), `form`, `link`, HTML tag tests, quoted
text tests, `partof`/`subclass` over the domain schema, `<<` precedence,
and annotation-query atoms.  Explicit fact tables shadow nothing: they are
unioned with derived facts, and symmetric builtins given as explicit facts
(`adjacent`, `aligned`) are symmetrized.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Optional

from ..annotation import AnnotationIndex, AnnotationSchema, PROPER, normalize
from ..dom import DomTree
from ..labeling import FIELD, FORM, FormLabeling
from .ast import Term, const, is_var, var
from .ground import GAtom, GAnn, GCmp, GLit, GroundProgram, GroundRule, base_name

SYMMETRIC_PREDS = {"adjacent", "aligned"}

HTML_TAGS = {
    "input", "select", "textarea", "button", "a", "div", "span", "td", "tr",
    "table", "form", "fieldset", "ul", "li", "label", "p", "img", "option",
}


class EvaluationError(Exception):
    pass


class FactBase:
    """Relation name -> set of constant tuples."""

    def __init__(self, facts: Optional[dict[str, set[tuple]]] = None):
        self.tables: dict[str, set[tuple]] = {}
        if facts:
            for pred, rows in facts.items():
                for row in rows:
                    self.add(pred, *row)

    def add(self, pred: str, *args) -> None:
        self.tables.setdefault(pred, set()).add(tuple(args))
        if pred in SYMMETRIC_PREDS and len(args) == 2:
            self.tables[pred].add((args[1], args[0]))

    def table(self, pred: str) -> set[tuple]:
        return self.tables.get(pred, set())

    def has(self, pred: str, row: tuple) -> bool:
        return row in self.tables.get(pred, ())

    def copy(self) -> "FactBase":
        out = FactBase()
        out.tables = {p: set(rows) for p, rows in self.tables.items()}
        return out

    def __eq__(self, other):
        if not isinstance(other, FactBase):
            return NotImplemented
        a = {p: rows for p, rows in self.tables.items() if rows}
        b = {p: rows for p, rows in other.tables.items() if rows}
        return a == b


class EvalContext:
    """Builtin relations computed from labeling, DOM, annotations, schema."""

    def __init__(
        self,
        tree: Optional[DomTree] = None,
        labeling: Optional[FormLabeling] = None,
        index: Optional[AnnotationIndex] = None,
        schema: Optional[AnnotationSchema] = None,
        partof_pairs: Iterable[tuple[str, str]] = (),
        domain_types: Iterable[str] = (),
    ):
        self.tree = tree
        self.labeling = labeling
        self.index = index
        self.schema = schema
        self.partof = set(partof_pairs)
        self.domain_types = list(domain_types)
        self._ann_cache: dict[tuple[str, frozenset], set] = {}
        self._order_cache: Optional[list[tuple[int, int]]] = None

    # -- node sets ---------------------------------------------------------

    def nodes(self) -> list[int]:
        return list(self.labeling.iter_nodes()) if self.labeling else []

    def fields(self) -> list[int]:
        if not self.labeling:
            return []
        return [n for n in self.labeling.iter_nodes()
                if self.labeling.nodes[n].kind == FIELD]

    def child_pairs(self) -> list[tuple[int, int]]:
        if not self.labeling:
            return []
        out = []
        for n in self.labeling.iter_nodes():
            p = self.labeling.parent.get(n)
            if p is not None:
                out.append((n, p))
        return out

    def descendant_pairs(self) -> list[tuple[int, int]]:
        if not self.labeling:
            return []
        out = []
        for n in self.labeling.iter_nodes():
            for a in self.labeling.ancestors(n):
                out.append((n, a))
        return out

    def _ordered_nodes(self) -> list[tuple[int, int]]:
        """(doc position of representative, labeling node id)."""
        if self._order_cache is None:
            pairs = []
            for n in self.labeling.iter_nodes() if self.labeling else []:
                rep = self.labeling.nodes[n].rep
                if rep is not None and self.tree is not None:
                    pairs.append((self.tree.order[rep], n))
            pairs.sort()
            self._order_cache = pairs
        return self._order_cache

    def follows_pairs(self) -> list[tuple[int, int]]:
        """(X, Y) with X directly after Y: no labeling node between."""
        out = []
        ordered = self._ordered_nodes()
        for i in range(1, len(ordered)):
            prev_pos, prev_node = ordered[i - 1]
            pos, node = ordered[i]
            out.append((node, prev_node))
        return out

    def adjacent_ok(self, a: int, b: int) -> bool:
        ra = self.labeling.nodes[a].rep
        rb = self.labeling.nodes[b].rep
        if ra is None or rb is None:
            return False
        return self._elem_next(ra) == rb or self._elem_next(rb) == ra

    def _elem_next(self, nid: int) -> Optional[int]:
        cur = self.tree.next_sibling(nid)
        while cur is not None and self.tree.nodes[cur].kind != "element":
            cur = self.tree.next_sibling(cur)
        return cur

    def adjacent_pairs(self) -> list[tuple[int, int]]:
        out = []
        if not self.labeling:
            return out
        by_rep = {}
        for n in self.labeling.iter_nodes():
            rep = self.labeling.nodes[n].rep
            if rep is not None:
                by_rep[rep] = n
        for rep, n in by_rep.items():
            nxt = self._elem_next(rep)
            if nxt is not None and nxt in by_rep:
                out.append((n, by_rep[nxt]))
                out.append((by_rep[nxt], n))
        return out

    def tag_nodes(self, tag: str) -> list[int]:
        if not self.labeling:
            return []
        out = []
        for n in self.labeling.iter_nodes():
            rep = self.labeling.nodes[n].rep
            if rep is not None and self.tree is not None and self.tree.tag(rep) == tag:
                out.append(n)
        return out

    def form_nodes(self) -> list[int]:
        if not self.labeling:
            return []
        return [n for n in self.labeling.iter_nodes()
                if self.labeling.nodes[n].kind == FORM]

    def submit_widgets(self) -> list[int]:
        out = []
        for n in self.fields():
            rep = self.labeling.nodes[n].rep
            if rep is not None and self.tree.field_kind(rep) == "submit":
                out.append(n)
        return out

    def text_matches(self, label: str, n: int) -> bool:
        rep = self.labeling.nodes[n].rep
        if rep is None or self.tree is None:
            return False
        want = normalize(label)
        for t in self.tree.label_texts(rep):
            if normalize(self.tree.nodes[t].text or "") == want:
                return True
        return False

    # -- annotation queries ---------------------------------------------------

    def ann_query(self, atype: str, modifiers: frozenset[str]) -> set[int]:
        key = (atype, modifiers)
        if key not in self._ann_cache:
            self._ann_cache[key] = eval_annotation_query(
                atype, modifiers, self.labeling, self.index, self.schema
            )
        return self._ann_cache[key]

    def annotation_types(self) -> list[str]:
        return sorted(self.schema.types) if self.schema else []


def eval_annotation_query(
    atype: str,
    modifiers: frozenset[str] | set[str],
    labeling: FormLabeling,
    index: AnnotationIndex,
    schema: AnnotationSchema,
) -> set[int]:
    """Fields whose allowed labels match the type, minus blocked nodes.

    Allowed labels are the node's own plus its parent's unless `d`; matches
    count distinct text nodes, proper-only under `p`, with subclass closure;
    `m` blocks nodes where any other type has strictly more matches, `e`
    where a type with precedence does.
    """
    modifiers = frozenset(modifiers)
    if atype not in schema.types:
        raise EvaluationError(f"unknown annotation type {atype!r}")
    fields = [
        n for n in labeling.iter_nodes() if labeling.nodes[n].kind == FIELD
    ]

    def allowed(n: int) -> list[int]:
        texts = list(labeling.labels_of(n))
        if "d" not in modifiers:
            p = labeling.parent.get(n)
            if p is not None:
                texts += labeling.labels_of(p)
        return texts

    def matches(a: str, n: int) -> set[int]:
        subs = schema.subtypes_of(a)
        out = set()
        for t in allowed(n):
            for typ, role in index.annotations(t):
                if typ not in subs:
                    continue
                if role == PROPER or "p" not in modifiers:
                    out.add(t)
                    break
        return out

    if "m" in modifiers:
        blockers = [a for a in schema.types if a != atype]
    elif "e" in modifiers:
        blockers = sorted(schema.dominators_of(atype))
    else:
        blockers = []

    result = set()
    for n in fields:
        own = matches(atype, n)
        if not own:
            continue
        if any(len(matches(a2, n)) > len(own) for a2 in blockers):
            continue
        result.add(n)
    return result


# -- rule evaluation ----------------------------------------------------------


def evaluate(
    ground: GroundProgram,
    facts: FactBase,
    context: Optional[EvalContext] = None,
) -> FactBase:
    """Stratified semi-naive least fixpoint; returns extensional + derived."""
    from .ground import stratify

    if not ground.strata:
        stratify(ground)
    context = context or EvalContext()
    db = facts.copy()
    _seed_any_tables(ground, db)

    rules_by_stratum: list[list[GroundRule]] = []
    for stratum in ground.strata:
        preds = set(stratum)
        rules_by_stratum.append([r for r in ground.rules if r.head.pred in preds])

    for stratum, rules in zip(ground.strata, rules_by_stratum):
        in_stratum = set(stratum)
        delta: dict[str, set[tuple]] = {p: set() for p in in_stratum}
        # initial round: full evaluation of every rule
        for rule in rules:
            for row in _eval_rule(rule, db, context, None, in_stratum):
                if not db.has(rule.head.pred, row):
                    db.add(rule.head.pred, *row)
                    delta[rule.head.pred].add(row)
        while any(delta.values()):
            new_delta: dict[str, set[tuple]] = {p: set() for p in in_stratum}
            for rule in rules:
                idb_lits = [
                    i for i, lit in enumerate(rule.body)
                    if lit.positive and isinstance(lit.item, GAtom)
                    and lit.item.pred in in_stratum
                ]
                if not idb_lits:
                    continue  # cannot produce anything new
                for di in idb_lits:
                    pred_d = rule.body[di].item.pred
                    if not delta.get(pred_d):
                        continue
                    for row in _eval_rule(rule, db, context, (di, delta), in_stratum):
                        if not db.has(rule.head.pred, row):
                            db.add(rule.head.pred, *row)
                            new_delta[rule.head.pred].add(row)
            delta = new_delta
    return db


def _seed_any_tables(ground: GroundProgram, db: FactBase) -> None:
    """Extensional tables for mangled predicates feed the __any bridges."""
    if not ground.any_preds:
        return
    bases = {p[len("__any_"):]: p for p in ground.any_preds}
    for pred in list(db.tables):
        if "<" not in pred:
            continue
        b = base_name(pred)
        if b in bases:
            inside = pred[len(b) + 1:-1]
            consts = tuple(inside.split(",")) if inside else ()
            for row in db.table(pred):
                db.add(bases[b], *(consts + row))


def _eval_rule(rule, db, context, delta_info, in_stratum) -> Iterator[tuple]:
    order = _plan(rule)
    delta_idx = delta_info[0] if delta_info else None

    def relation(pred: str, use_delta: bool) -> set[tuple]:
        if use_delta:
            return delta_info[1].get(pred, set())
        return db.table(pred)

    def run(k: int, binding: dict) -> Iterator[dict]:
        if k == len(order):
            yield binding
            return
        i = order[k]
        lit = rule.body[i]
        for nb in _eval_literal(lit, binding, db, context,
                                relation if (delta_idx == i) else None):
            yield from run(k + 1, nb)

    seen = set()
    for binding in run(0, {}):
        row = tuple(_resolve(t, binding) for t in rule.head.args)
        if any(v is _UNBOUND for v in row):
            raise EvaluationError(
                f"unbound head variable in {rule.head.pred} (unsafe rule)"
            )
        if row not in seen:
            seen.add(row)
            yield row


_UNBOUND = object()


def _resolve(term: Term, binding: dict):
    if is_var(term):
        return binding.get(term[1], _UNBOUND)
    return term[1]


def _plan(rule: GroundRule) -> list[int]:
    """Greedy join order: generators first as their inputs become bound."""
    remaining = list(range(len(rule.body)))
    bound: set[str] = set()
    order: list[int] = []

    def lit_vars(lit: GLit) -> set[str]:
        item = lit.item
        if isinstance(item, GAtom):
            return {t[1] for t in item.args if is_var(t)}
        if isinstance(item, GAnn):
            out = {item.var_name}
            if is_var(item.atype):
                out.add(item.atype[1])
            return out
        return {t[1] for t in (item.left, item.right) if is_var(t)}

    def ready(lit: GLit) -> bool:
        item = lit.item
        free = lit_vars(lit) - bound
        if not lit.positive:
            return not free
        if isinstance(item, GCmp):
            if item.op == "<<":
                return True
            return not free
        return True

    def score(lit: GLit) -> tuple:
        free = lit_vars(lit) - bound
        item = lit.item
        generator = isinstance(item, (GAtom, GAnn)) and lit.positive
        return (0 if not free else 1, len(free), 0 if generator else 1)

    while remaining:
        candidates = [i for i in remaining if ready(rule.body[i])]
        if not candidates:
            # fall back to any positive literal to make progress
            candidates = [
                i for i in remaining
                if rule.body[i].positive and not isinstance(rule.body[i].item, GCmp)
            ]
            if not candidates:
                raise EvaluationError(f"cannot order body of {rule.head.pred} (unsafe)")
        best = min(candidates, key=lambda i: score(rule.body[i]))
        order.append(best)
        bound |= lit_vars(rule.body[best])
        remaining.remove(best)
    return order


def _eval_literal(lit, binding, db, context, delta_relation) -> Iterator[dict]:
    item = lit.item
    if isinstance(item, GCmp):
        yield from _eval_cmp(item, lit.positive, binding, context)
        return
    if isinstance(item, GAnn):
        yield from _eval_ann(item, lit.positive, binding, context)
        return
    assert isinstance(item, GAtom)
    pred = item.pred
    rows: Optional[Iterable[tuple]] = None
    if delta_relation is not None:
        rows = delta_relation(pred, True)
    elif pred in db.tables:
        rows = db.table(pred)
        builtin_rows = _builtin_rows(pred, item, binding, context)
        if builtin_rows is not None:
            rows = set(rows) | set(builtin_rows)
    else:
        rows = _builtin_rows(pred, item, binding, context)
        if rows is None:
            rows = set()

    if lit.positive:
        for row in rows:
            nb = _unify(item.args, row, binding)
            if nb is not None:
                yield nb
    else:
        want = tuple(_resolve(t, binding) for t in item.args)
        if any(v is _UNBOUND for v in want):
            raise EvaluationError(f"unbound variable under negation of {pred}")
        if want not in set(rows):
            yield binding


def _unify(args: tuple[Term, ...], row: tuple, binding: dict) -> Optional[dict]:
    if len(args) != len(row):
        return None
    nb = dict(binding)
    for t, v in zip(args, row):
        if is_var(t):
            name = t[1]
            if name in nb:
                if nb[name] != v:
                    return None
            else:
                nb[name] = v
        else:
            if t[1] != v:
                return None
    return nb


def _eval_cmp(item: GCmp, positive: bool, binding: dict, context) -> Iterator[dict]:
    lv = _resolve(item.left, binding)
    rv = _resolve(item.right, binding)
    if item.op == "<<":
        schema = context.schema
        pairs = schema._precedes if schema else set()
        if positive:
            for a, b in sorted(pairs):
                if lv is not _UNBOUND and lv != a:
                    continue
                if rv is not _UNBOUND and rv != b:
                    continue
                nb = dict(binding)
                if is_var(item.left):
                    nb[item.left[1]] = a
                if is_var(item.right):
                    nb[item.right[1]] = b
                yield nb
        else:
            if lv is _UNBOUND or rv is _UNBOUND:
                raise EvaluationError("negated precedence test on unbound variable")
            if (lv, rv) not in pairs:
                yield binding
        return
    if lv is _UNBOUND or rv is _UNBOUND:
        raise EvaluationError(f"comparison on unbound variable: {item}")
    ok = (lv == rv) if item.op == "=" else (lv != rv)
    if ok == positive:
        yield binding


def _eval_ann(item: GAnn, positive: bool, binding: dict, context) -> Iterator[dict]:
    if context.schema is None or context.labeling is None or context.index is None:
        if positive:
            return
        yield binding
        return
    atype = _resolve(item.atype, binding)
    types = [atype] if atype is not _UNBOUND else context.annotation_types()
    if not positive:
        node = binding.get(item.var_name, _UNBOUND)
        if node is _UNBOUND or atype is _UNBOUND:
            raise EvaluationError("negated annotation query needs bound variables")
        if node not in context.ann_query(atype, item.modifiers):
            yield binding
        return
    for t in types:
        result = context.ann_query(t, item.modifiers)
        for node in sorted(result):
            nb = _unify((var(item.var_name),), (node,), binding)
            if nb is None:
                continue
            if is_var(item.atype):
                name = item.atype[1]
                if name in nb and nb[name] != t:
                    continue
                nb[name] = t
            yield nb


def _builtin_rows(pred, item, binding, context) -> Optional[set[tuple]]:
    """Rows of a builtin relation, or None when pred is not a builtin."""
    if context.labeling is None:
        return None
    arity = len(item.args)
    if pred == "child" and arity == 2:
        return set(context.child_pairs())
    if pred == "descendant" and arity == 2:
        return set(context.descendant_pairs())
    if pred == "follows" and arity == 2:
        return set(context.follows_pairs())
    if pred == "adjacent" and arity == 2:
        return set(context.adjacent_pairs())
    if pred == "form" and arity == 1:
        return {(n,) for n in context.form_nodes()}
    if pred == "link" and arity == 1:
        return {(n,) for n in context.tag_nodes("a")}
    if pred == "submit_widget" and arity == 1:
        return {(n,) for n in context.submit_widgets()}
    if pred == "field" and arity == 1:
        return {(n,) for n in context.fields()}
    if pred == "partof" and arity == 2:
        return {tuple(p) for p in context.partof}
    if pred == "subclass" and arity == 2 and context.schema:
        return set(context.schema._subclass)
    if pred in HTML_TAGS and arity == 1:
        return {(n,) for n in context.tag_nodes(pred)}
    if pred.startswith('"') and pred.endswith('"') and arity == 1:
        label = pred[1:-1]
        return {(n,) for n in context.nodes() if context.text_matches(label, n)}
    return None
