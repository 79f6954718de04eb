"""Domain-independent form labeling in three scopes.

Fields are labeled in strict precedence order: field scope (texts that
share a subtree with exactly one field, plus explicit ``label for=``
references), segment scope (regular interleaving of texts and fields
inside segments of the segment tree), and layout scope (visible texts to
the west/north-west/north of a field that no other field overshadows).
A field labeled at one scope is never touched by a later scope.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dfield
from typing import Iterator, Optional

from .dom import DomTree, TEXT, collapse_ws
from .geometry import (
    LayoutTree,
    LayoutUnavailable,
    W_NW_N,
    contains as box_contains,
    overshadowed_set,
)

log = logging.getLogger("opal.labeling")

FIELD = "field"
SEGMENT = "segment"
FORM = "form"


@dataclass(frozen=True)
class LabelRef:
    """One label assignment: a DOM text node plus its provenance."""

    text: int
    scope: str  # "field" | "segment" | "layout"
    flavor: str = ""  # "segment-label" | "field-label" for segment scope


@dataclass
class LNode:
    id: int
    kind: str  # field | segment | form
    rep: Optional[int]  # DOM node id; None only for repair-pool segments
    children: list[int] = dfield(default_factory=list)
    labels: list[LabelRef] = dfield(default_factory=list)


class FormLabeling:
    """Tree of field leaves and segment/form inner nodes over a DomTree."""

    def __init__(self, tree: DomTree):
        self.tree = tree
        self.nodes: dict[int, LNode] = {}
        self.roots: list[int] = []
        self.parent: dict[int, Optional[int]] = {}
        self._next = 1

    # -- construction ------------------------------------------------------

    def add_node(self, kind: str, rep: Optional[int], nid: Optional[int] = None) -> int:
        if nid is None:
            nid = self._next
        self._next = max(self._next, nid + 1)
        self.nodes[nid] = LNode(id=nid, kind=kind, rep=rep)
        self.parent[nid] = None
        self.roots.append(nid)
        return nid

    def attach(self, child: int, parent: int, index: Optional[int] = None) -> None:
        old = self.parent.get(child)
        if old is not None:
            self.nodes[old].children.remove(child)
        elif child in self.roots:
            self.roots.remove(child)
        if index is None:
            self.nodes[parent].children.append(child)
        else:
            self.nodes[parent].children.insert(index, child)
        self.parent[child] = parent

    def detach(self, child: int) -> None:
        old = self.parent.get(child)
        if old is not None:
            self.nodes[old].children.remove(child)
            self.parent[child] = None
            self.roots.append(child)

    def remove_node(self, nid: int) -> None:
        """Remove an inner node, splicing its children into its place."""
        node = self.nodes[nid]
        p = self.parent.get(nid)
        kids = list(node.children)
        if p is None:
            pos = self.roots.index(nid)
            self.roots[pos:pos + 1] = kids
            for c in kids:
                self.parent[c] = None
        else:
            sibs = self.nodes[p].children
            pos = sibs.index(nid)
            sibs[pos:pos + 1] = kids
            for c in kids:
                self.parent[c] = p
        del self.nodes[nid]
        self.parent.pop(nid, None)

    # -- views ---------------------------------------------------------------

    def leaves(self) -> list[int]:
        return [n for n in self.iter_nodes() if self.nodes[n].kind == FIELD]

    def segments(self) -> list[int]:
        return [n for n in self.iter_nodes() if self.nodes[n].kind == SEGMENT]

    def iter_nodes(self) -> Iterator[int]:
        for r in self.roots:
            stack = [r]
            while stack:
                n = stack.pop()
                yield n
                stack.extend(reversed(self.nodes[n].children))

    def by_rep(self) -> dict[int, int]:
        return {
            self.nodes[n].rep: n
            for n in self.iter_nodes()
            if self.nodes[n].rep is not None
        }

    def labels_of(self, nid: int) -> list[int]:
        return [ref.text for ref in self.nodes[nid].labels]

    def label_strings(self, nid: int) -> list[str]:
        return [
            collapse_ws(self.tree.nodes[ref.text].text or "")
            for ref in self.nodes[nid].labels
        ]

    def assigned_texts(self) -> set[int]:
        out: set[int] = set()
        for n in self.iter_nodes():
            out.update(ref.text for ref in self.nodes[n].labels)
        return out

    def ancestors(self, nid: int) -> Iterator[int]:
        p = self.parent.get(nid)
        while p is not None:
            yield p
            p = self.parent.get(p)

    def enclosing_form(self, nid: int) -> Optional[int]:
        for a in self.ancestors(nid):
            if self.nodes[a].kind == FORM:
                return a
        return None

    def add_label(self, nid: int, text: int, scope: str, flavor: str = "") -> None:
        if text in set(self.labels_of(nid)):
            return
        self.nodes[nid].labels.append(LabelRef(text=text, scope=scope, flavor=flavor))


def _is_blank(tree: DomTree, text_id: int) -> bool:
    return not (tree.nodes[text_id].text or "").strip()


# -- field scope ------------------------------------------------------------


def field_scope(tree: DomTree) -> FormLabeling:
    """One leaf per form field; labels from `for`-references and from the
    maximal ancestor containing no other field (orange/red colouring)."""
    labeling = FormLabeling(tree)
    fields = tree.fields()
    colour: dict[int, str] = {}
    for f in fields:
        n = f
        while True:
            if n in colour:
                colour[n] = "red"
                break
            colour[n] = "orange"
            p = tree.parent_of(n)
            if p is None:
                break
            n = p

    for_targets: dict[str, list[int]] = {}
    for n in tree.pre_order():
        if tree.nodes[n].kind == "element" and tree.tag(n) == "label":
            ref = tree.attr(n, "for")
            if ref:
                for_targets.setdefault(ref, []).append(n)

    for f in fields:
        leaf = labeling.add_node(FIELD, f)
        fid = tree.attr(f, "id")
        if fid:
            for lab_elem in for_targets.get(fid, []):
                for t in tree.label_texts(lab_elem):
                    if not _is_blank(tree, t):
                        labeling.add_label(leaf, t, "field")
        top = f
        p = tree.parent_of(top)
        while p is not None and colour.get(p) != "red":
            top = p
            p = tree.parent_of(top)
        for t in tree.label_texts(top):
            if not _is_blank(tree, t):
                labeling.add_label(leaf, t, "field")
    return labeling


# -- style equivalence and the segment tree -----------------------------------


def style_key(tree: DomTree, f: int):
    """Key whose equality defines style equivalence of two fields.

    The class attribute wins when non-empty; otherwise the effective type
    (input type attribute, or the tag for other widgets) together with the
    inline style string.  Key equality is an equivalence relation.
    """
    cls = (tree.attr(f, "class") or "").strip()
    if cls:
        return ("class", cls)
    tag = tree.tag(f)
    if tag == "input":
        typ = (tree.attr(f, "type") or "text").strip().lower()
    else:
        typ = tag or ""
    style = (tree.attr(f, "style") or "").strip()
    return ("type", typ, style)


def style_equivalent(tree: DomTree, f1: int, f2: int) -> bool:
    return style_key(tree, f1) == style_key(tree, f2)


class SegmentTree:
    """Maximal included tree whose leaves are fields: no inner node has a
    single child and none is equivalence breaking."""

    def __init__(self):
        self.root: Optional[int] = None
        self.children: dict[int, list[int]] = {}
        self.parent: dict[int, Optional[int]] = {}
        self.representative: dict[int, Optional[int]] = {}

    def inner_nodes(self) -> list[int]:
        return [n for n, c in self.children.items() if c]

    def leaves(self) -> list[int]:
        out = []
        if self.root is None:
            return out
        stack = [self.root]
        while stack:
            n = stack.pop()
            kids = self.children.get(n, [])
            if kids:
                stack.extend(kids)
            else:
                out.append(n)
        return out

    def depth_order(self) -> list[int]:
        """Inner nodes ordered deepest-first."""
        depth: dict[int, int] = {}
        order: list[int] = []
        if self.root is None:
            return order
        stack = [(self.root, 0)]
        while stack:
            n, d = stack.pop()
            depth[n] = d
            if self.children.get(n):
                order.append(n)
                for c in self.children[n]:
                    stack.append((c, d + 1))
        return sorted(order, key=lambda n: -depth[n])


def build_segment_tree(tree: DomTree) -> SegmentTree:
    seg = SegmentTree()
    fields = set(tree.fields())
    if not fields:
        return seg

    has_field: set[int] = set()
    post = []
    stack: list[tuple[int, bool]] = [(tree.root, False)]
    while stack:
        n, done = stack.pop()
        if done:
            post.append(n)
            continue
        stack.append((n, True))
        for c in tree.children(n):
            stack.append((c, False))
    for n in post:
        if n in fields or any(c in has_field for c in tree.children(n)):
            has_field.add(n)

    # fields become leaves: their DOM content has no field descendants
    children: dict[int, list[int]] = {}
    for n in has_field:
        if n in fields:
            children[n] = []
        else:
            children[n] = [c for c in tree.children(n) if c in has_field]

    root = tree.root
    while root not in fields and len(children[root]) == 1:
        root = children[root][0]

    def spliced(c: int) -> int:
        while c not in fields and len(children[c]) == 1:
            c = children[c][0]
        return c

    order = [root]
    i = 0
    while i < len(order):
        n = order[i]
        i += 1
        if n in fields:
            continue
        children[n] = [spliced(c) for c in children[n]]
        order.extend(children[n])

    reps: dict[int, Optional[int]] = {}
    for n in reversed(order):
        if n in fields:
            continue
        group: list[Optional[int]] = []
        for c in children[n]:
            group.append(c if c in fields else reps[c])
        if None not in group:
            keys = {style_key(tree, g) for g in group}
            if len(keys) == 1:
                reps[n] = min(group, key=lambda g: tree.order[g])
                flat: list[int] = []
                for c in children[n]:
                    if c in fields:
                        flat.append(c)
                    else:
                        flat.extend(children[c])
                        del children[c]
                children[n] = flat
                continue
        reps[n] = None

    live = {root}
    stack2 = [root]
    while stack2:
        n = stack2.pop()
        for c in children.get(n, []):
            live.add(c)
            stack2.append(c)

    seg.root = root
    seg.children = {n: list(children[n]) for n in live}
    seg.parent[root] = None
    for n in live:
        for c in seg.children.get(n, []):
            seg.parent[c] = n
    seg.representative = {n: reps.get(n) for n in live if seg.children.get(n)}
    return seg


# -- segment scope ---------------------------------------------------------


def segment_scope(tree: DomTree, labeling: FormLabeling) -> SegmentTree:
    """Add one segment node per segment-tree inner node and distribute the
    free text groups when they interleave regularly with unlabeled nodes."""
    seg = build_segment_tree(tree)
    by_rep = labeling.by_rep()
    for s in seg.depth_order()[::-1]:  # shallow first so parents exist
        if s not in by_rep:
            by_rep[s] = labeling.add_node(SEGMENT, s)
    for s in seg.depth_order()[::-1]:
        for c in seg.children[s]:
            if c in by_rep:
                labeling.attach(by_rep[c], by_rep[s])

    for s in seg.depth_order():  # deepest first
        _distribute(tree, labeling, by_rep[s])
    return seg


def _distribute(tree: DomTree, labeling: FormLabeling, seg_node: int) -> None:
    rep = labeling.nodes[seg_node].rep
    by_rep = labeling.by_rep()
    assigned = labeling.assigned_texts()
    nodes_list: list[int] = []
    groups: list[list[int]] = []
    grp: list[int] = []

    def flush():
        nonlocal grp
        kept = [t for t in grp if not _is_blank(tree, t)]
        if kept:
            groups.append(kept)
        grp = []

    stack = [c for c in reversed(tree.children(rep))]
    while stack:
        c = stack.pop()
        node = tree.nodes[c]
        lnode = by_rep.get(c)
        if lnode is not None and lnode != seg_node:
            # every contained field or segment delimits the text groups;
            # only the unlabeled ones take part in the assignment
            flush()
            if not labeling.nodes[lnode].labels:
                nodes_list.append(lnode)
            continue  # skip the subtree either way
        if node.kind == TEXT:
            if c not in assigned:
                grp.append(c)
            continue
        if node.kind == "attribute":
            continue
        stack.extend(reversed(node.children))
    flush()

    if len(groups) == len(nodes_list) + 1:
        for t in groups[0]:
            labeling.add_label(seg_node, t, "segment", "segment-label")
        groups = groups[1:]
    if groups and len(groups) == len(nodes_list):
        for target, group in zip(nodes_list, groups):
            flavor = "field-label" if labeling.nodes[target].kind == FIELD else "segment-label"
            for t in group:
                labeling.add_label(target, t, "segment", flavor)


# -- form assembly ------------------------------------------------------------


def assemble_forms(tree: DomTree, labeling: FormLabeling) -> None:
    """Root the labeling under one representative node per detected form."""
    form_elems = [
        n
        for n in tree.pre_order()
        if tree.nodes[n].kind == "element"
        and tree.tag(n) == "form"
        and any(tree.is_field(d) for d in tree.descendants(n))
    ]
    by_rep = labeling.by_rep()

    # segments grouping whole forms (rep strictly above a form element) are dropped
    for s in list(labeling.segments()):
        rep = labeling.nodes[s].rep
        if rep is not None and any(tree.is_descendant(f, rep) for f in form_elems):
            labeling.remove_node(s)

    form_nodes: dict[int, int] = {}
    by_rep = labeling.by_rep()
    for felem in form_elems:
        existing = by_rep.get(felem)
        if existing is not None and labeling.nodes[existing].kind == SEGMENT:
            labeling.nodes[existing].kind = FORM
            form_nodes[felem] = existing
        else:
            form_nodes[felem] = labeling.add_node(FORM, felem)

    def owner(rep: Optional[int]) -> Optional[int]:
        if rep is None:
            return None
        for felem in form_elems:
            if rep == felem or tree.is_descendant(rep, felem):
                return felem
        return None

    for nid in list(labeling.roots):
        node = labeling.nodes[nid]
        if node.kind == FORM:
            continue
        felem = owner(node.rep)
        if felem is not None and nid != form_nodes[felem]:
            labeling.attach(nid, form_nodes[felem])

    # Fields outside any form element: a root segment is by now a maximal
    # group free of form-owned fields, so it becomes a form representative
    # itself; root fields with no such segment share one page-level group.
    page_group: Optional[int] = None
    for nid in list(labeling.roots):
        node = labeling.nodes[nid]
        if node.kind == SEGMENT:
            node.kind = FORM
        elif node.kind == FIELD:
            if page_group is None:
                body = next(
                    (n for n in tree.pre_order() if tree.tag(n) == "body"), tree.root
                )
                page_group = labeling.add_node(FORM, body)
            labeling.attach(nid, page_group)

    labeling.roots.sort(
        key=lambda n: tree.order.get(labeling.nodes[n].rep, 0)
        if labeling.nodes[n].rep is not None
        else 0
    )


# -- layout scope ------------------------------------------------------------


def build_layout_tree(tree: DomTree) -> LayoutTree:
    return LayoutTree(tree)


def layout_scope(
    tree: DomTree, labeling: FormLabeling, layout: Optional[LayoutTree] = None
) -> None:
    """Label remaining fields with visible, non-overshadowed texts in their
    west/north-west/north region, bounded to the enclosing form's box."""
    if layout is None:
        try:
            layout = LayoutTree(tree)
        except LayoutUnavailable:
            log.warning("layout scope skipped: no bounding boxes on this page")
            return

    all_fields = [f for f in tree.fields() if f in layout.boxes]
    visible_texts = [
        n
        for n in layout.boxes
        if tree.nodes[n].kind == TEXT and layout.visible(n) and not _is_blank(tree, n)
    ]
    segment_nodes = [
        n for n in labeling.iter_nodes() if labeling.nodes[n].kind in (SEGMENT, FORM)
    ]

    for leaf in labeling.leaves():
        node = labeling.nodes[leaf]
        if node.labels or node.rep not in layout.boxes:
            continue
        f = node.rep
        form_node = labeling.enclosing_form(leaf)
        form_box = None
        if form_node is not None:
            form_rep = labeling.nodes[form_node].rep
            if form_rep is not None:
                form_box = layout.boxes.get(form_rep)
        if form_box is None and form_node is not None:
            log.warning(
                "layout scope: form representative has no box; search unbounded"
            )
        anc = set(labeling.ancestors(leaf))
        candidates = []
        for t in visible_texts:
            if not layout.in_region(t, f, W_NW_N):
                continue
            if form_box is not None and not box_contains(
                form_box, layout.boxes[t], layout.eps
            ):
                continue
            foreign = False
            for s in segment_nodes:
                srep = labeling.nodes[s].rep
                if srep is None or s in anc:
                    continue
                if tree.is_descendant(t, srep):
                    foreign = True
                    break
            if not foreign:
                candidates.append(t)
        if not candidates:
            continue
        shadowed = overshadowed_set(layout, f, visible_texts, all_fields)
        for t in sorted(candidates, key=lambda x: tree.order[x]):
            if t not in shadowed:
                labeling.add_label(leaf, t, "layout")


# -- the pipeline -------------------------------------------------------------


def label_form(tree: DomTree) -> FormLabeling:
    """Field scope, then segment scope, then layout scope; forms are rooted
    under their representative nodes in between."""
    labeling = field_scope(tree)
    segment_scope(tree, labeling)
    assemble_forms(tree, labeling)
    layout_scope(tree, labeling)
    return labeling
