"""Builders for synthetic DOM trees used across the test suite."""

from __future__ import annotations

from opal.dom import ATTRIBUTE, BoundingBox, DomNode, DomTree, ELEMENT, TEXT


class E:
    """Element spec: E("div", child, ..., class_="x", box=(x, y, w, h))."""

    def __init__(self, tag, *children, box=None, **attrs):
        self.tag = tag
        self.children = list(children)
        self.box = box
        self.attrs = {k.rstrip("_"): v for k, v in attrs.items()}


class T:
    """Text node spec."""

    def __init__(self, text, box=None):
        self.text = text
        self.box = box


def build_tree(spec) -> DomTree:
    nodes: dict[int, DomNode] = {}
    counter = [0]

    def fresh():
        nid = counter[0]
        counter[0] += 1
        return nid

    def walk(item) -> int:
        nid = fresh()
        if isinstance(item, T):
            box = BoundingBox(*item.box) if item.box else None
            nodes[nid] = DomNode(id=nid, kind=TEXT, text=item.text, box=box)
            return nid
        box = BoundingBox(*item.box) if item.box else None
        node = DomNode(id=nid, kind=ELEMENT, tag=item.tag, box=box)
        nodes[nid] = node
        for name, value in item.attrs.items():
            anode = fresh()
            tnode = fresh()
            nodes[anode] = DomNode(id=anode, kind=ATTRIBUTE, tag=name, children=[tnode])
            nodes[tnode] = DomNode(id=tnode, kind=TEXT, text=str(value))
            node.children.append(anode)
        for child in item.children:
            node.children.append(walk(child))
        return nid

    root = walk(spec)
    return DomTree(root, nodes)


def page(*body_children) -> DomTree:
    return build_tree(E("html", E("head"), E("body", *body_children)))


def text_of(tree, nid) -> str:
    return " ".join((tree.nodes[nid].text or "").split())


def labels_as_strings(tree, labeling, lnode) -> set[str]:
    return {text_of(tree, ref.text) for ref in labeling.nodes[lnode].labels}


def leaf_for(labeling, dom_id):
    for n in labeling.iter_nodes():
        node = labeling.nodes[n]
        if node.kind == "field" and node.rep == dom_id:
            return n
    raise KeyError(dom_id)


def field_by_name(tree, name):
    for f in tree.fields():
        if tree.attr(f, "name") == name:
            return f
    raise KeyError(name)
