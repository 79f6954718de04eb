import random

from opal.dom import DomNode, DomTree, ELEMENT, TEXT
from opal.labeling import field_scope

from helpers import E, T, build_tree, labels_as_strings, leaf_for, page


def test_page_with_zero_fields_gives_zero_leaves():
    tree = page(E("div", T("hello")))
    labeling = field_scope(tree)
    assert labeling.leaves() == []


def test_shared_subtree_with_single_field_labels_it():
    # div[ span "Price" input#a ]  div[ input#b input#c span "X" ]
    tree = page(
        E("div", E("span", T("Price")), E("input", name="a")),
        E("div", E("input", name="b"), E("input", name="c"), E("span", T("X"))),
    )
    labeling = field_scope(tree)
    a = [f for f in tree.fields() if tree.attr(f, "name") == "a"][0]
    b = [f for f in tree.fields() if tree.attr(f, "name") == "b"][0]
    c = [f for f in tree.fields() if tree.attr(f, "name") == "c"][0]
    assert labels_as_strings(tree, labeling, leaf_for(labeling, a)) == {"Price"}
    assert labels_as_strings(tree, labeling, leaf_for(labeling, b)) == set()
    assert labels_as_strings(tree, labeling, leaf_for(labeling, c)) == set()


def test_label_for_reference():
    tree = page(
        E("label", T("Town"), for_="town"),
        E("div", E("input", id="town"), E("input", id="other")),
    )
    labeling = field_scope(tree)
    town = [f for f in tree.fields() if tree.attr(f, "id") == "town"][0]
    assert labels_as_strings(tree, labeling, leaf_for(labeling, town)) == {"Town"}


def test_select_is_labeled_by_its_own_options():
    tree = page(
        E("div",
          E("select", E("option", T("Any")), E("option", T("Flat")), name="s"),
          E("input", name="x")),
    )
    labeling = field_scope(tree)
    sel = [f for f in tree.fields() if tree.tag(f) == "select"][0]
    assert labels_as_strings(tree, labeling, leaf_for(labeling, sel)) == {"Any", "Flat"}


def test_provenance_is_field_scope():
    tree = page(E("div", T("Price"), E("input", name="a")))
    labeling = field_scope(tree)
    leaf = labeling.leaves()[0]
    assert all(ref.scope == "field" for ref in labeling.nodes[leaf].labels)


# -- oracle: least common ancestor has exactly one field descendant ----------


def random_page(rng, n_extra):
    nodes = {0: DomNode(id=0, kind=ELEMENT, tag="body")}
    elements = [0]
    next_id = 1
    for _ in range(n_extra):
        parent = rng.choice(elements)
        roll = rng.random()
        nid = next_id
        next_id += 1
        if roll < 0.3:
            nodes[nid] = DomNode(id=nid, kind=TEXT, text=f"t{nid}")
        elif roll < 0.55:
            nodes[nid] = DomNode(id=nid, kind=ELEMENT, tag="input")
        else:
            nodes[nid] = DomNode(id=nid, kind=ELEMENT, tag="div")
            elements.append(nid)
        nodes[parent].children.append(nid)
    return DomTree(0, nodes)


def lca(tree, a, b):
    anc_a = [a] + list(tree.ancestors(a))
    anc_b = set([b] + list(tree.ancestors(b)))
    for x in anc_a:
        if x in anc_b:
            return x
    raise AssertionError("no common ancestor")


def oracle_field_labels(tree, f):
    out = set()
    fields = set(tree.fields())
    for t in tree.pre_order():
        if tree.nodes[t].kind != TEXT or not (tree.nodes[t].text or "").strip():
            continue
        common = lca(tree, t, f)
        field_descs = {d for d in tree.descendants(common) if d in fields}
        field_descs |= {common} if common in fields else set()
        if field_descs == {f}:
            out.add(t)
    return out


def test_field_scope_matches_lca_oracle_on_random_trees():
    rng = random.Random(7)
    for _ in range(60):
        tree = random_page(rng, rng.randint(1, 45))
        labeling = field_scope(tree)
        for leaf in labeling.leaves():
            f = labeling.nodes[leaf].rep
            assert set(labeling.labels_of(leaf)) == oracle_field_labels(tree, f), (
                tree.to_dump()
            )
