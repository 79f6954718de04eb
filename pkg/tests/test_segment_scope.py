from opal.labeling import field_scope, segment_scope

from helpers import E, T, build_tree, labels_as_strings, leaf_for, page


def input_(name, cls=None, **kw):
    attrs = {"name": name}
    if cls:
        attrs["class_"] = cls
    attrs.update(kw)
    return E("input", **attrs)


def run_scopes(tree):
    labeling = field_scope(tree)
    segment_scope(tree, labeling)
    return labeling


def seg_for(labeling, dom_id):
    for n in labeling.iter_nodes():
        node = labeling.nodes[n]
        if node.kind == "segment" and node.rep == dom_id:
            return n
    raise KeyError(dom_id)


def test_fig5_left_segment_text_groups_label_fields():
    # (text+, field)+ : the i-th group of texts labels the i-th field
    tree = page(
        E("div",
          T("A1"), T("A2"), input_("f1", cls="l"),
          T("B"), input_("f2", cls="l")),
        E("div",
          input_("g1", cls="r1"), input_("g2", cls="r2")),
    )
    labeling = run_scopes(tree)
    f1 = leaf_for(labeling, [f for f in tree.fields() if tree.attr(f, "name") == "f1"][0])
    f2 = leaf_for(labeling, [f for f in tree.fields() if tree.attr(f, "name") == "f2"][0])
    assert labels_as_strings(tree, labeling, f1) == {"A1", "A2"}
    assert labels_as_strings(tree, labeling, f2) == {"B"}
    assert all(ref.scope == "segment" for ref in labeling.nodes[f1].labels)


def test_fig5_right_segment_prelabeled_field_skipped():
    """The pre-labeled field is ignored; the one remaining text group becomes
    the segment label; inside the subsegment a leading extra group labels the
    subsegment and the rest distribute (field, text+)+."""
    tree = page(
        # left竖 sibling keeps the right segment from collapsing
        E("div", input_("l1", cls="a"), input_("l2", cls="a")),
        E("div",                                    # segment 4
          E("div", E("span", T("Field8Label")), input_("f8", cls="b")),
          T("SegLabel4"),
          E("div",                                  # segment 5
            T("SegLabel5"),
            input_("f5a", cls="c"), T("C"),
            input_("f5b", cls="c"), T("D"))),
    )
    labeling = run_scopes(tree)
    fields = {tree.attr(f, "name"): f for f in tree.fields()}
    f8 = leaf_for(labeling, fields["f8"])
    assert labels_as_strings(tree, labeling, f8) == {"Field8Label"}
    assert all(ref.scope == "field" for ref in labeling.nodes[f8].labels)

    seg5_dom = tree.parent_of(fields["f5a"])
    seg5 = seg_for(labeling, seg5_dom)
    assert labels_as_strings(tree, labeling, seg5) == {"SegLabel5"}
    f5a = leaf_for(labeling, fields["f5a"])
    f5b = leaf_for(labeling, fields["f5b"])
    assert labels_as_strings(tree, labeling, f5a) == {"C"}
    assert labels_as_strings(tree, labeling, f5b) == {"D"}

    seg4_dom = tree.parent_of(seg5_dom)
    seg4 = seg_for(labeling, seg4_dom)
    assert labels_as_strings(tree, labeling, seg4) == {"SegLabel4"}
    assert labeling.nodes[seg4].labels[0].flavor == "segment-label"


def test_segment_with_fields_but_no_free_texts():
    tree = page(
        E("div", input_("a", cls="x"), input_("b", cls="y")),
        E("div", input_("c", cls="z"), input_("d", cls="z")),
    )
    labeling = run_scopes(tree)
    for f in tree.fields():
        assert labels_as_strings(tree, labeling, leaf_for(labeling, f)) == set()


def test_mismatched_counts_assign_nothing():
    # four text groups, two unlabeled fields: |Labels| = |Nodes| + 2
    # (the field labeled in field scope separates groups but is not a Node)
    tree = page(
        E("div",
          T("g1"), input_("a", cls="x"),
          T("g2"),
          E("div", E("span", T("OwnLabel")), input_("x", cls="q")),
          T("g3"), input_("b", cls="y"),
          T("g4")),
        E("div", input_("c", cls="z"), input_("d", cls="w")),
    )
    labeling = run_scopes(tree)
    fields = {tree.attr(f, "name"): f for f in tree.fields()}
    assert labels_as_strings(tree, labeling, leaf_for(labeling, fields["x"])) == {"OwnLabel"}
    for name in ("a", "b"):
        assert labels_as_strings(tree, labeling, leaf_for(labeling, fields[name])) == set()


def test_whitespace_only_groups_dropped_before_counting():
    tree = page(
        E("div",
          T("  \n "), T("Name"), input_("a", cls="x"),
          T(" \t"), T("Town"), input_("b", cls="y")),
        E("div", input_("c", cls="z"), input_("d", cls="w")),
    )
    labeling = run_scopes(tree)
    fields = {tree.attr(f, "name"): f for f in tree.fields()}
    assert labels_as_strings(tree, labeling, leaf_for(labeling, fields["a"])) == {"Name"}
    assert labels_as_strings(tree, labeling, leaf_for(labeling, fields["b"])) == {"Town"}


def test_trailing_groups_pattern_field_then_text():
    # (field, text+)+ as in checkbox lists: text after each box labels it
    tree = page(
        E("div",
          input_("cb1", cls="c", type="checkbox"), T("1 bed"),
          input_("cb2", cls="c", type="checkbox"), T("2 beds")),
        E("div", input_("x", cls="q"), input_("y", cls="r")),
    )
    labeling = run_scopes(tree)
    fields = {tree.attr(f, "name"): f for f in tree.fields()}
    assert labels_as_strings(tree, labeling, leaf_for(labeling, fields["cb1"])) == {"1 bed"}
    assert labels_as_strings(tree, labeling, leaf_for(labeling, fields["cb2"])) == {"2 beds"}


def test_scope_precedence_field_labels_never_touched():
    tree = page(
        E("div",
          T("SegText"),
          E("div", E("span", T("Mine")), input_("a", cls="x")),
          input_("b", cls="y")),
        E("div", input_("c", cls="z"), input_("d", cls="w")),
    )
    labeling = run_scopes(tree)
    fields = {tree.attr(f, "name"): f for f in tree.fields()}
    a = leaf_for(labeling, fields["a"])
    assert labels_as_strings(tree, labeling, a) == {"Mine"}
    assert all(ref.scope == "field" for ref in labeling.nodes[a].labels)
    b = leaf_for(labeling, fields["b"])
    # a is labeled, so the one group pairs with the single unlabeled node b
    assert labels_as_strings(tree, labeling, b) == {"SegText"}
