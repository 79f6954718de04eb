"""Annotation schema and gazetteer annotators over label texts.

An annotation type carries two characteristic functions: proper-label
matching (the text *describes* the field, e.g. "Price:") and value
matching (the text *enumerates* possible values, e.g. "more than £500").
Proper matching is whole-string after normalization; value matching fires
on token phrases, regexes, or numeric range hits.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .dom import DomTree, collapse_ws
from .labeling import FormLabeling

PROPER = "proper"
VALUE = "value"


class SchemaError(Exception):
    pass


def normalize(s: str) -> str:
    s = collapse_ws(s).lower().strip()
    if s.endswith(":"):
        s = s[:-1].rstrip()
    return s


def fold_plural(token: str) -> str:
    if len(token) > 1 and token.endswith("s"):
        return token[:-1]
    return token


_TOKEN_RE = re.compile(r"[^\W_]+(?:\+)?", re.UNICODE)
_NUM_RE = re.compile(r"\d[\d,]*(?:\.\d+)?")


def tokens(s: str) -> list[str]:
    return [fold_plural(t.rstrip("+")) for t in _TOKEN_RE.findall(normalize(s))]


def numbers(s: str) -> list[float]:
    out = []
    for m in _NUM_RE.findall(s):
        try:
            out.append(float(m.replace(",", "")))
        except ValueError:
            continue
    return out


@dataclass
class Annotator:
    """Gazetteer-backed characteristic functions for one annotation type."""

    name: str
    proper_entries: list[str] = field(default_factory=list)
    value_entries: list[str] = field(default_factory=list)
    value_regexes: list[str] = field(default_factory=list)
    value_ranges: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        self._proper = {tuple(tokens(e)) for e in self.proper_entries if tokens(e)}
        self._phrases = {tuple(tokens(e)) for e in self.value_entries if tokens(e)}
        self._regexes = [re.compile(rx, re.IGNORECASE) for rx in self.value_regexes]

    def is_label(self, text: str) -> bool:
        return tuple(tokens(text)) in self._proper if text.strip() else False

    def is_value(self, text: str) -> bool:
        if not text.strip():
            return False
        toks = tokens(text)
        for phrase in self._phrases:
            k = len(phrase)
            if k and any(tuple(toks[i:i + k]) == phrase for i in range(len(toks) - k + 1)):
                return True
        norm = normalize(text)
        if any(rx.search(norm) for rx in self._regexes):
            return True
        if self.value_ranges:
            for num in numbers(text):
                if any(lo <= num <= hi for lo, hi in self.value_ranges):
                    return True
        return False


CORE_GAZETTEERS = {
    "min": ["min", "minimum", "from", "at least"],
    "max": ["max", "maximum", "to", "up to"],
    "range_connector": ["to", "-", "–", "and"],
    "submit_button": ["search", "go", "find", "submit"],
    "link_button": ["search", "go", "find", "submit", "view", "results"],
}


class AnnotationSchema:
    """Annotation types with subclass and precedence relations.

    Subclass is closed reflexively and transitively at load; precedence is
    closed transitively and must stay irreflexive (acyclic).
    """

    def __init__(
        self,
        annotators: Optional[dict[str, Annotator]] = None,
        subclass_pairs: Iterable[tuple[str, str]] = (),
        precedence_pairs: Iterable[tuple[str, str]] = (),
    ):
        self.annotators: dict[str, Annotator] = {}
        for name, entries in CORE_GAZETTEERS.items():
            self.annotators[name] = Annotator(name, proper_entries=list(entries))
        if annotators:
            self.annotators.update(annotators)
        self.types = set(self.annotators)
        self._subclass = self._close_subclass(subclass_pairs)
        self._precedes = self._close_precedence(precedence_pairs)

    def _close_subclass(self, pairs) -> set[tuple[str, str]]:
        rel = {(a, a) for a in self.types}
        rel.update((a, b) for a, b in pairs)
        return _transitive_closure(rel)

    def _close_precedence(self, pairs) -> set[tuple[str, str]]:
        rel = _transitive_closure(set(pairs))
        for a, b in rel:
            if a == b:
                raise SchemaError(f"precedence cycle through {a!r}")
        return rel

    def subclass(self, a: str, b: str) -> bool:
        """a is a subclass of b (reflexive, transitive)."""
        return (a, b) in self._subclass or a == b

    def subtypes_of(self, a: str) -> set[str]:
        return {x for x in self.types if self.subclass(x, a)} | {a}

    def precedes(self, a: str, b: str) -> bool:
        """a takes precedence over b."""
        return (a, b) in self._precedes

    def dominators_of(self, a: str) -> set[str]:
        return {x for x, y in self._precedes if y == a}

    def annotator(self, name: str) -> Annotator:
        if name not in self.annotators:
            raise SchemaError(f"unknown annotation type {name!r}")
        return self.annotators[name]


def _transitive_closure(rel: set[tuple[str, str]]) -> set[tuple[str, str]]:
    closure = set(rel)
    changed = True
    while changed:
        changed = False
        for a, b in list(closure):
            for c, d in list(closure):
                if b == c and (a, d) not in closure:
                    closure.add((a, d))
                    changed = True
    return closure


# -- loading from a schema directory ---------------------------------------------


def parse_gazetteer(text: str) -> tuple[list[str], list[str], list[tuple[float, float]]]:
    """Entries, regexes, and numeric ranges from one gazetteer file."""
    entries: list[str] = []
    regexes: list[str] = []
    ranges: list[tuple[float, float]] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("re:"):
            regexes.append(line[3:].strip())
        elif line.startswith("num:"):
            spec = line[4:].strip()
            lo, _, hi = spec.partition("..")
            try:
                ranges.append((float(lo), float(hi)))
            except ValueError as exc:
                raise SchemaError(f"bad numeric range {spec!r}") from exc
        else:
            entries.append(line)
    return entries, regexes, ranges


def load_annotation_schema(directory) -> AnnotationSchema:
    """Load `manifest.json` plus its gazetteer files from a directory."""
    root = Path(directory)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise SchemaError(f"no manifest.json in {root}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    annotators: dict[str, Annotator] = {}
    subclass: list[tuple[str, str]] = []
    precedes: list[tuple[str, str]] = []

    def read(rel: str) -> str:
        path = root / rel
        if not path.exists():
            raise SchemaError(f"gazetteer file not found: {rel}")
        return path.read_text(encoding="utf-8")

    for spec in manifest.get("types", []):
        name = spec["name"]
        proper: list[str] = []
        value_entries: list[str] = []
        value_regexes: list[str] = []
        value_ranges: list[tuple[float, float]] = []
        if spec.get("labels"):
            entries, regexes, ranges = parse_gazetteer(read(spec["labels"]))
            proper = entries
            if regexes or ranges:
                raise SchemaError(f"{name}: label gazetteers hold plain entries only")
        if spec.get("values"):
            value_entries, value_regexes, value_ranges = parse_gazetteer(read(spec["values"]))
        if not proper and not (value_entries or value_regexes or value_ranges):
            if name not in CORE_GAZETTEERS:
                raise SchemaError(f"{name}: empty annotator")
        annotators[name] = Annotator(
            name,
            proper_entries=proper,
            value_entries=value_entries,
            value_regexes=value_regexes,
            value_ranges=value_ranges,
        )
        for sup in spec.get("subclass_of", []):
            subclass.append((name, sup))
        for dominated in spec.get("precedes", []):
            precedes.append((name, dominated))
    for name, entries in CORE_GAZETTEERS.items():
        if name not in annotators:
            annotators[name] = Annotator(name, proper_entries=list(entries))
    known = set(annotators)
    for a, b in subclass + precedes:
        for t in (a, b):
            if t not in known:
                raise SchemaError(f"relation references undeclared type {t!r}")
    return AnnotationSchema(annotators, subclass, precedes)


# -- the index -------------------------------------------------------------------


class AnnotationIndex:
    """text node id -> set of (annotation type, role) pairs."""

    def __init__(self):
        self.by_text: dict[int, set[tuple[str, str]]] = {}

    def add(self, text_id: int, ann_type: str, role: str) -> None:
        self.by_text.setdefault(text_id, set()).add((ann_type, role))

    def annotations(self, text_id: int) -> set[tuple[str, str]]:
        return self.by_text.get(text_id, set())

    def has(self, text_id: int, ann_type: str, role: Optional[str] = None) -> bool:
        anns = self.by_text.get(text_id, ())
        if role is None:
            return any(t == ann_type for t, _ in anns)
        return (ann_type, role) in anns

    def to_json(self) -> str:
        data = {
            str(tid): sorted([list(pair) for pair in pairs])
            for tid, pairs in self.by_text.items()
            if pairs
        }
        return json.dumps(data, sort_keys=True, separators=(",", ":"))


def annotate(tree: DomTree, labeling: FormLabeling, schema: AnnotationSchema) -> AnnotationIndex:
    """Match every text node reachable as a label against every annotator."""
    index = AnnotationIndex()
    label_texts: set[int] = set()
    for n in labeling.iter_nodes():
        label_texts.update(labeling.labels_of(n))
    for tid in sorted(label_texts):
        content = tree.nodes[tid].text or ""
        if not content.strip():
            continue
        for name, annotator in schema.annotators.items():
            if annotator.is_label(content):
                index.add(tid, name, PROPER)
            if annotator.is_value(content):
                index.add(tid, name, VALUE)
    return index
