import json
import random
import time

import pytest

from opal.dom import (
    DomNode,
    DomTree,
    DumpFormatError,
    load_dom_dump,
    parse_html,
)


def find_tag(tree, tag):
    return [n for n in tree.pre_order() if tree.node(n).tag == tag and tree.node(n).kind == "element"]


def test_minimal_form_document():
    tree = parse_html(b'<form><input name="a"></form>')
    assert len(find_tag(tree, "form")) == 1
    assert len(tree.fields()) == 1


def test_empty_input_gives_skeleton():
    tree = parse_html(b"")
    tags = [tree.node(n).tag for n in tree.pre_order() if tree.node(n).kind == "element"]
    assert tags == ["html", "head", "body"]
    assert tree.fields() == []


def test_attribute_becomes_child_with_text_value():
    tree = parse_html(b'<div class="x">hi</div>')
    div = find_tag(tree, "div")[0]
    attrs = [c for c in tree.children(div) if tree.node(c).kind == "attribute"]
    assert len(attrs) == 1
    assert tree.node(attrs[0]).tag == "class"
    value_kids = tree.children(attrs[0])
    assert len(value_kids) == 1
    assert tree.node(value_kids[0]).kind == "text"
    assert tree.node(value_kids[0]).text == "x"
    assert tree.attr(div, "class") == "x"


def test_table_auto_close_and_hidden_inputs():
    tree = parse_html(
        b"<table><tr><td>one<td><input type=hidden name=h>"
        b"<tr><td><input name=v></table>"
    )
    assert len(find_tag(tree, "tr")) == 2
    assert len(find_tag(tree, "td")) == 3
    # hidden inputs are present in the tree but are not fields
    assert len(find_tag(tree, "input")) == 2
    assert len(tree.fields()) == 1


def make_dump(n_nodes=3):
    return {
        "root": 0,
        "nodes": [
            {"id": 0, "kind": "element", "tag": "html", "children": [1, 2]},
            {"id": 1, "kind": "element", "tag": "body", "children": []},
            {"id": 2, "kind": "text", "text": "x", "children": []},
        ],
    }


def test_dump_round_trip_identity():
    tree = load_dom_dump(make_dump())
    again = load_dom_dump(tree.to_dump())
    assert again.to_dump() == tree.to_dump()


def test_dump_child_under_two_parents_rejected():
    dump = {
        "root": 0,
        "nodes": [
            {"id": 0, "kind": "element", "tag": "a", "children": [1, 2]},
            {"id": 1, "kind": "element", "tag": "b", "children": [2]},
            {"id": 2, "kind": "text", "text": "t", "children": []},
        ],
    }
    with pytest.raises(DumpFormatError) as err:
        load_dom_dump(dump)
    assert "2" in str(err.value)


def test_dump_duplicate_id_rejected():
    dump = make_dump()
    dump["nodes"].append({"id": 1, "kind": "text", "text": "dup", "children": []})
    with pytest.raises(DumpFormatError):
        load_dom_dump(dump)


def test_dump_orphan_rejected():
    dump = make_dump()
    dump["nodes"].append({"id": 9, "kind": "text", "text": "orphan", "children": []})
    with pytest.raises(DumpFormatError):
        load_dom_dump(dump)


def random_tree(rng, n):
    nodes = [DomNode(id=0, kind="element", tag="div")]
    for i in range(1, n):
        parent = rng.randrange(i)
        while nodes[parent].kind != "element":
            parent = rng.randrange(i)
        kind = rng.choice(["element", "element", "text"])
        if kind == "text":
            nodes.append(DomNode(id=i, kind="text", text=f"t{i}"))
        else:
            nodes.append(DomNode(id=i, kind="element", tag="div"))
        nodes[parent].children.append(i)
    return DomTree(0, {n.id: n for n in nodes})


def brute_descendants(tree, nid):
    out = set()
    frontier = list(tree.children(nid))
    while frontier:
        c = frontier.pop()
        out.add(c)
        frontier.extend(tree.children(c))
    return out


def test_descendant_equals_transitive_closure_of_child():
    rng = random.Random(42)
    for _ in range(25):
        tree = random_tree(rng, rng.randint(1, 50))
        for nid in tree.pre_order():
            assert set(tree.descendants(nid)) == brute_descendants(tree, nid)


def test_following_irreflexive_and_order_consistent():
    rng = random.Random(43)
    for _ in range(10):
        tree = random_tree(rng, rng.randint(2, 50))
        for nid in tree.pre_order():
            follow = set(tree.following(nid))
            assert nid not in follow
            desc = brute_descendants(tree, nid)
            assert not (follow & desc)
            for other in follow:
                assert tree.order[other] > tree.order[nid]


def test_chain_following_axis():
    # root -> a -> b: nothing follows anything (single path)
    nodes = {
        0: DomNode(id=0, kind="element", tag="div", children=[1]),
        1: DomNode(id=1, kind="element", tag="div", children=[2]),
        2: DomNode(id=2, kind="element", tag="div", children=[]),
    }
    tree = DomTree(0, nodes)
    assert list(tree.following(1)) == []
    assert list(tree.descendants(2)) == []


def test_siblings_follow_each_other():
    nodes = {
        0: DomNode(id=0, kind="element", tag="div", children=[1, 2]),
        1: DomNode(id=1, kind="element", tag="div", children=[]),
        2: DomNode(id=2, kind="element", tag="div", children=[]),
    }
    tree = DomTree(0, nodes)
    assert set(tree.following(1)) == {2}
    assert set(tree.following(2)) == set()


def test_preorder_visits_once_and_is_stable():
    rng = random.Random(44)
    tree = random_tree(rng, 40)
    first = list(tree.pre_order())
    second = list(tree.pre_order())
    assert first == second
    assert len(first) == len(set(first)) == 40


def test_large_dump_loads_fast(tmp_path):
    nodes = [{"id": 0, "kind": "element", "tag": "html", "children": []}]
    for i in range(1, 2200):
        parent = (i - 1) // 3
        nodes[parent]["children"].append(i)
        nodes.append({"id": i, "kind": "element", "tag": "div", "children": []})
    path = tmp_path / "big.json"
    path.write_text(json.dumps({"root": 0, "nodes": nodes}))
    start = time.monotonic()
    tree = load_dom_dump(str(path))
    elapsed = time.monotonic() - start
    assert len(tree.nodes) == 2200
    assert elapsed < 1.0
