"""DOM trees with optional box geometry and the relations derived from them.

Nodes come in three kinds: elements, text nodes and attribute nodes.  For
uniformity an attribute hangs off its element like a child and carries its
value as a single text child.  In document order the attribute nodes of an
element sort before its element/text children, in declaration order.

Two ingestion paths exist: :func:`parse_html` for raw HTML (no geometry)
and :func:`load_dom_dump` for the JSON dump format produced by an external
renderer, which may attach a bounding box per node.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Iterable, Iterator, Optional


class IngestionError(Exception):
    """Raised when a document cannot be turned into a DomTree."""


class DumpFormatError(IngestionError):
    """Raised for malformed dom-dump files; carries the offending id."""


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError("box extent must be non-negative")

    @property
    def left(self) -> float:
        return self.x

    @property
    def top(self) -> float:
        return self.y

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h


ELEMENT = "element"
TEXT = "text"
ATTRIBUTE = "attribute"

# input types excluded from labeling; the nodes are still part of the tree
HIDDEN_INPUT_TYPES = {"hidden"}
FIELD_TAGS = {"input", "select", "textarea", "button"}

# (tag, attribute) pairs whose values carry user-visible text and therefore
# participate in labeling: a button's value, a link's tooltip, image alt text
LABEL_ATTRS = {
    ("input", "value"),
    ("input", "placeholder"),
    ("button", "value"),
    ("textarea", "placeholder"),
    ("a", "title"),
    ("img", "alt"),
}


@dataclass
class DomNode:
    id: int
    kind: str
    tag: Optional[str] = None
    text: Optional[str] = None
    box: Optional[BoundingBox] = None
    children: list[int] = field(default_factory=list)


class DomTree:
    """Immutable-after-construction DOM with parent/order indexes."""

    def __init__(self, root: int, nodes: dict[int, DomNode]):
        self.root = root
        self.nodes = nodes
        self.parent: dict[int, Optional[int]] = {root: None}
        self.order: dict[int, int] = {}
        self._index()

    def _index(self) -> None:
        seen = set()
        pos = 0
        stack = [self.root]
        while stack:
            nid = stack.pop()
            if nid in seen:
                raise DumpFormatError(f"node {nid} reachable twice (cycle or shared child)")
            seen.add(nid)
            if nid not in self.nodes:
                raise DumpFormatError(f"child id {nid} has no node record")
            self.order[nid] = pos
            pos += 1
            node = self.nodes[nid]
            for c in reversed(node.children):
                if c in self.parent:
                    raise DumpFormatError(f"node {c} appears under two parents")
                self.parent[c] = nid
                stack.append(c)
        orphans = set(self.nodes) - seen
        if orphans:
            raise DumpFormatError(f"node {min(orphans)} unreachable from root")

    # -- basic accessors ---------------------------------------------------

    def node(self, nid: int) -> DomNode:
        return self.nodes[nid]

    def children(self, nid: int) -> list[int]:
        return self.nodes[nid].children

    def parent_of(self, nid: int) -> Optional[int]:
        return self.parent.get(nid)

    def next_sibling(self, nid: int) -> Optional[int]:
        p = self.parent.get(nid)
        if p is None:
            return None
        sibs = self.nodes[p].children
        i = sibs.index(nid)
        return sibs[i + 1] if i + 1 < len(sibs) else None

    def tag(self, nid: int) -> Optional[str]:
        return self.nodes[nid].tag

    def attr(self, nid: int, name: str) -> Optional[str]:
        """Value of attribute `name` on element `nid`, or None."""
        for c in self.nodes[nid].children:
            node = self.nodes[c]
            if node.kind == ATTRIBUTE and node.tag == name:
                for t in node.children:
                    return self.nodes[t].text
                return ""
        return None

    # -- derived relations ---------------------------------------------------

    def pre_order(self, nid: Optional[int] = None) -> Iterator[int]:
        stack = [self.root if nid is None else nid]
        while stack:
            n = stack.pop()
            yield n
            stack.extend(reversed(self.nodes[n].children))

    def descendants(self, nid: int) -> Iterator[int]:
        """Strict descendants of nid in document order."""
        it = self.pre_order(nid)
        next(it)
        return it

    def ancestors(self, nid: int) -> Iterator[int]:
        p = self.parent.get(nid)
        while p is not None:
            yield p
            p = self.parent.get(p)

    def is_descendant(self, nid: int, anc: int) -> bool:
        p = self.parent.get(nid)
        while p is not None:
            if p == anc:
                return True
            p = self.parent.get(p)
        return False

    def following(self, nid: int) -> Iterator[int]:
        """XPath following axis: after nid in document order, not its descendants."""
        last = nid
        for d in self.pre_order(nid):
            last = d
        cutoff = self.order[last]
        for other, pos in self.order.items():
            if pos > cutoff:
                yield other

    def doc_less(self, a: int, b: int) -> bool:
        return self.order[a] < self.order[b]

    def text_descendants(self, nid: int) -> list[int]:
        """Text nodes below nid in document order, without attribute values."""
        out = []
        stack = [(nid, False)]
        while stack:
            n, under_attr = stack.pop()
            node = self.nodes[n]
            if node.kind == TEXT and not under_attr and n != nid:
                out.append(n)
            flag = under_attr or node.kind == ATTRIBUTE
            for c in reversed(node.children):
                stack.append((c, flag))
        return out

    def label_texts(self, nid: int) -> list[int]:
        """Text nodes below nid that may serve as labels.

        Attribute values are included only for the user-visible (tag, attr)
        pairs in LABEL_ATTRS; ids, classes, option values and the like never
        label anything.
        """
        out = []
        stack = [nid]
        while stack:
            n = stack.pop()
            node = self.nodes[n]
            if node.kind == TEXT and n != nid:
                out.append(n)
                continue
            for c in reversed(node.children):
                child = self.nodes[c]
                if child.kind == ATTRIBUTE:
                    if (node.tag, child.tag) in LABEL_ATTRS:
                        stack.extend(reversed(child.children))
                else:
                    stack.append(c)
        return out

    # -- field detection -----------------------------------------------------

    def is_field(self, nid: int) -> bool:
        node = self.nodes[nid]
        if node.kind != ELEMENT or node.tag not in FIELD_TAGS:
            return False
        if node.tag == "input":
            typ = (self.attr(nid, "type") or "text").strip().lower()
            return typ not in HIDDEN_INPUT_TYPES
        return True

    def fields(self) -> list[int]:
        return [n for n in self.pre_order() if self.is_field(n)]

    def field_kind(self, nid: int) -> str:
        """Widget kind: text, select, textarea, checkbox, radio, submit, button, link."""
        tag = self.nodes[nid].tag
        if tag == "select":
            return "select"
        if tag == "textarea":
            return "textarea"
        if tag == "a":
            return "link"
        if tag == "button":
            typ = (self.attr(nid, "type") or "submit").strip().lower()
            return "submit" if typ in ("submit", "") else "button"
        typ = (self.attr(nid, "type") or "text").strip().lower()
        if typ in ("checkbox", "radio"):
            return typ
        if typ in ("submit", "image"):
            return "submit"
        if typ == "button":
            return "button"
        return "text"

    def select_options(self, nid: int) -> list[tuple[int, str]]:
        """(option element id, collapsed option text) for a select field."""
        out = []
        for d in self.descendants(nid):
            if self.nodes[d].kind == ELEMENT and self.nodes[d].tag == "option":
                texts = [self.nodes[t].text or "" for t in self.text_descendants(d)]
                out.append((d, collapse_ws("".join(texts))))
        return out

    # -- serialization ---------------------------------------------------------

    def to_dump(self) -> dict:
        nodes = []
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            rec: dict = {"id": node.id, "kind": node.kind}
            if node.tag is not None:
                rec["tag"] = node.tag
            if node.text is not None:
                rec["text"] = node.text
            if node.box is not None:
                rec["box"] = {"x": node.box.x, "y": node.box.y, "w": node.box.w, "h": node.box.h}
            rec["children"] = list(node.children)
            nodes.append(rec)
        return {"root": self.root, "nodes": nodes}

    def has_boxes(self) -> bool:
        return any(n.box is not None for n in self.nodes.values())


def collapse_ws(s: str) -> str:
    return " ".join(s.split())


# -- dom-dump ingestion ---------------------------------------------------------


def load_dom_dump(source) -> DomTree:
    """Load the JSON dom-dump format.

    `source` may be a path, a file object, a JSON string or a parsed dict.
    Malformed dumps (duplicate ids, orphan children, unknown kinds) raise
    DumpFormatError naming the offending id.
    """
    if isinstance(source, dict):
        data = source
    elif hasattr(source, "read"):
        data = json.load(source)
    else:
        text = str(source)
        if text.lstrip().startswith("{"):
            data = json.loads(text)
        else:
            with open(text, "r", encoding="utf-8") as fh:
                data = json.load(fh)
    if "root" not in data or "nodes" not in data:
        raise DumpFormatError("dump must define 'root' and 'nodes'")
    nodes: dict[int, DomNode] = {}
    for rec in data["nodes"]:
        nid = rec.get("id")
        if not isinstance(nid, int) or nid < 0:
            raise DumpFormatError(f"node id {nid!r} is not a non-negative integer")
        if nid in nodes:
            raise DumpFormatError(f"duplicate node id {nid}")
        kind = rec.get("kind")
        if kind not in (ELEMENT, TEXT, ATTRIBUTE):
            raise DumpFormatError(f"node {nid} has unknown kind {kind!r}")
        box = None
        if rec.get("box") is not None:
            b = rec["box"]
            try:
                box = BoundingBox(float(b["x"]), float(b["y"]), float(b["w"]), float(b["h"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise DumpFormatError(f"node {nid} has malformed box: {exc}") from exc
        nodes[nid] = DomNode(
            id=nid,
            kind=kind,
            tag=rec.get("tag"),
            text=rec.get("text"),
            box=box,
            children=list(rec.get("children", [])),
        )
    root = data["root"]
    if root not in nodes:
        raise DumpFormatError(f"root id {root} has no node record")
    return DomTree(root, nodes)


# -- HTML ingestion --------------------------------------------------------------

VOID_ELEMENTS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
}

# tags closed implicitly when one of the listed tags opens while they are open
_AUTO_CLOSE = {
    "li": {"li"},
    "p": {"p", "div", "table", "form", "ul", "ol", "li", "h1", "h2", "h3", "h4", "h5", "h6",
          "blockquote", "pre", "section", "article", "fieldset"},
    "option": {"option", "optgroup"},
    "optgroup": {"optgroup"},
    "tr": {"tr", "tbody", "thead", "tfoot"},
    "td": {"td", "th", "tr", "tbody", "thead", "tfoot"},
    "th": {"td", "th", "tr", "tbody", "thead", "tfoot"},
    "thead": {"tbody", "tfoot"},
    "tbody": {"tbody", "tfoot"},
    "dt": {"dt", "dd"},
    "dd": {"dt", "dd"},
}

_HEAD_ONLY = {"title", "base", "meta"}


class _TreeBuilder(HTMLParser):
    """Pragmatic HTML tree construction: implied html/head/body skeleton,
    void elements, common auto-close rules.  Enough for form pages; not a
    full HTML5 tree constructor."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.nodes: dict[int, DomNode] = {}
        self._next = 0
        self.html = self._element("html")
        self.head = self._element("head")
        self.body = self._element("body")
        self.nodes[self.html].children = [self.head, self.body]
        self.stack = [self.html, self.body]
        self._saw_explicit = {"html": False, "head": False, "body": False}

    def _new(self, kind: str, **kw) -> int:
        nid = self._next
        self._next += 1
        self.nodes[nid] = DomNode(id=nid, kind=kind, **kw)
        return nid

    def _element(self, tag: str) -> int:
        return self._new(ELEMENT, tag=tag)

    def _append(self, parent: int, child: int) -> None:
        self.nodes[parent].children.append(child)

    def _attach_attrs(self, elem: int, attrs) -> None:
        for name, value in attrs:
            anode = self._new(ATTRIBUTE, tag=name.lower())
            tnode = self._new(TEXT, text=value if value is not None else "")
            self.nodes[anode].children.append(tnode)
            self._append(elem, anode)

    def _top(self) -> int:
        return self.stack[-1]

    def handle_starttag(self, tag, attrs):
        tag = tag.lower()
        if tag == "html":
            self._attach_attrs(self.html, attrs)
            return
        if tag == "head":
            if self.stack[-1] == self.body:
                self.stack[-1] = self.head
            return
        if tag == "body":
            self._attach_attrs(self.body, attrs)
            while len(self.stack) > 1:
                self.stack.pop()
            self.stack.append(self.body)
            return
        if tag in _HEAD_ONLY and self._top() == self.body and not self.nodes[self.body].children:
            parent = self.head
        else:
            parent = self._top()
            while True:
                open_tag = self.nodes[parent].tag
                closers = _AUTO_CLOSE.get(open_tag)
                if closers and tag in closers and len(self.stack) > 2:
                    self.stack.pop()
                    parent = self._top()
                else:
                    break
        elem = self._element(tag)
        self._attach_attrs(elem, attrs)
        self._append(parent, elem)
        if tag not in VOID_ELEMENTS:
            self.stack.append(elem)

    def handle_startendtag(self, tag, attrs):
        tag = tag.lower()
        elem = self._element(tag)
        self._attach_attrs(elem, attrs)
        self._append(self._top(), elem)

    def handle_endtag(self, tag):
        tag = tag.lower()
        if tag in ("html", "head", "body"):
            if tag == "head" and self._top() == self.head:
                self.stack[-1] = self.body
            return
        for i in range(len(self.stack) - 1, 1, -1):
            if self.nodes[self.stack[i]].tag == tag:
                del self.stack[i:]
                return
        # stray end tag: ignored, as browsers do

    def handle_data(self, data):
        if not data:
            return
        parent = self._top()
        tnode = self._new(TEXT, text=data)
        self._append(parent, tnode)


def parse_html(raw: bytes | str) -> DomTree:
    """Parse an HTML document into a DomTree (no boxes).

    Decoding falls back from UTF-8 to latin-1; only a byte sequence that
    cannot be decoded at all raises IngestionError.
    """
    if isinstance(raw, bytes):
        for enc in ("utf-8", "latin-1"):
            try:
                text = raw.decode(enc)
                break
            except UnicodeDecodeError:
                continue
        else:
            raise IngestionError("undecodable byte sequence")
    else:
        text = raw
    builder = _TreeBuilder()
    builder.feed(text)
    builder.close()
    return DomTree(builder.html, builder.nodes)
