import json

import pytest

from opal.annotation import (
    AnnotationSchema,
    Annotator,
    SchemaError,
    annotate,
    load_annotation_schema,
    normalize,
    parse_gazetteer,
)
from opal.labeling import field_scope

from helpers import E, T, page


def test_normalize_strips_one_colon_and_collapses():
    assert normalize("  Price :") == "price"
    assert normalize("Price:") == "price"
    assert normalize("PRICE\n  range") == "price range"


def test_proper_match_whole_string_with_plural_fold():
    ann = Annotator("bedroom", proper_entries=["bedroom", "bed"])
    assert ann.is_label("Bedrooms:")
    assert ann.is_label("bed")
    assert ann.is_label("Beds")
    assert not ann.is_label("Bedroom count")
    assert not ann.is_label("")


def test_value_match_token_phrase_regex_and_range():
    ann = Annotator(
        "price",
        value_entries=["guide price"],
        value_regexes=[r"[£$]\s*\d"],
        value_ranges=[(0, 1000000)],
    )
    assert ann.is_value("more than £500")
    assert ann.is_value("a guide price applies")
    assert ann.is_value("250,000")
    assert not ann.is_value("cheap")


def test_price_label_example():
    schema = AnnotationSchema(
        {"price": Annotator("price", proper_entries=["price"],
                            value_regexes=[r"[£$€]\s*\d"])},
    )
    assert schema.annotator("price").is_label("Price:")
    assert schema.annotator("price").is_value("more than £500")


def test_empty_schema_contains_core_types():
    schema = AnnotationSchema()
    for core in ("min", "max", "range_connector", "submit_button"):
        assert core in schema.types
    assert schema.annotator("min").is_label("From")
    assert schema.annotator("max").is_label("up to")
    assert schema.annotator("range_connector").is_label("to")
    assert schema.annotator("submit_button").is_label("Search")


def test_precedence_cycle_rejected():
    with pytest.raises(SchemaError):
        AnnotationSchema(
            {"a": Annotator("a", proper_entries=["a"]),
             "b": Annotator("b", proper_entries=["b"])},
            precedence_pairs=[("a", "b"), ("b", "a")],
        )


def test_subclass_reflexive_transitive():
    schema = AnnotationSchema(
        {
            "postcode": Annotator("postcode", proper_entries=["postcode"]),
            "location": Annotator("location", proper_entries=["location"]),
            "place": Annotator("place", proper_entries=["place"]),
        },
        subclass_pairs=[("postcode", "location"), ("location", "place")],
    )
    for t in schema.types:
        assert schema.subclass(t, t)
    assert schema.subclass("postcode", "place")
    assert "postcode" in schema.subtypes_of("location")


def test_manifest_loading_and_precedes(tmp_path):
    (tmp_path / "gaz").mkdir()
    (tmp_path / "gaz" / "price.labels.txt").write_text("price\n# comment\nguide price\n")
    (tmp_path / "gaz" / "price.values.txt").write_text("re:[£$]\\s*\\d\nnum:0..9999999\n")
    (tmp_path / "gaz" / "order_by.labels.txt").write_text("order by\nsort by\n")
    manifest = {
        "types": [
            {"name": "price", "labels": "gaz/price.labels.txt", "values": "gaz/price.values.txt"},
            {"name": "order_by", "labels": "gaz/order_by.labels.txt", "precedes": ["price"]},
        ]
    }
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    schema = load_annotation_schema(tmp_path)
    assert schema.precedes("order_by", "price")
    assert not schema.precedes("price", "order_by")
    assert schema.annotator("price").is_label("Guide Price:")
    assert schema.annotator("price").is_value("£300")


def test_manifest_missing_gazetteer_errors(tmp_path):
    (tmp_path / "manifest.json").write_text(json.dumps(
        {"types": [{"name": "x", "labels": "nope.txt"}]}
    ))
    with pytest.raises(SchemaError):
        load_annotation_schema(tmp_path)


def test_empty_manifest_gives_core_only(tmp_path):
    (tmp_path / "manifest.json").write_text(json.dumps({"types": []}))
    schema = load_annotation_schema(tmp_path)
    assert {"min", "max", "range_connector", "submit_button"} <= schema.types


def test_annotate_covers_label_texts_and_is_deterministic():
    tree = page(
        E("div", T("Price:"), E("input", name="p")),
        E("div", E("input", name="q"), E("input", name="r"), T("stray")),
    )
    labeling = field_scope(tree)
    schema = AnnotationSchema(
        {"price": Annotator("price", proper_entries=["price"])}
    )
    index = annotate(tree, labeling, schema)
    assert index.to_json() == annotate(tree, labeling, schema).to_json()
    price_text = [
        n for n in tree.pre_order()
        if tree.nodes[n].kind == "text" and (tree.nodes[n].text or "").startswith("Price")
    ][0]
    assert index.has(price_text, "price", "proper")
    # "stray" is not reachable as a label (its subtree has two fields)
    stray = [
        n for n in tree.pre_order()
        if tree.nodes[n].kind == "text" and tree.nodes[n].text == "stray"
    ][0]
    assert index.annotations(stray) == set()


def test_no_substring_proper_matches():
    ann = Annotator("price", proper_entries=["price"])
    for text in ("price range", "the price", "priced"):
        assert not ann.is_label(text)
