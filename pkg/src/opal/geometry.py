"""Box geometry: quadrant relations, alignment, and label overshadowing.

All relations are computed from CSS-pixel bounding boxes attached to DOM
nodes by an external renderer.  Quadrants are assigned with a fixed
priority (w, n, e, s, then the corners) so that every ordered pair of
boxes receives at most one quadrant; projections must overlap by more
than the tolerance for the cardinal directions, which keeps the cardinal
and corner relations mutually exclusive.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .dom import BoundingBox, DomTree, TEXT

EPS = 2.0


class LayoutUnavailable(Exception):
    """No node of the tree carries a bounding box."""


def quadrant(t: BoundingBox, f: BoundingBox, eps: float = EPS) -> Optional[str]:
    """Quadrant of box t relative to box f, or None for overlapping boxes."""
    north = t.bottom <= f.top + eps
    south = t.top >= f.bottom - eps
    west = t.right <= f.left + eps
    east = t.left >= f.right - eps
    h_overlap = min(t.right, f.right) - max(t.left, f.left) > eps
    v_overlap = min(t.bottom, f.bottom) - max(t.top, f.top) > eps
    if west and v_overlap:
        return "w"
    if north and h_overlap:
        return "n"
    if east and v_overlap:
        return "e"
    if south and h_overlap:
        return "s"
    if north and west:
        return "nw"
    if north and east:
        return "ne"
    if south and east:
        return "se"
    if south and west:
        return "sw"
    return None


def aligned(a: BoundingBox, b: BoundingBox, eps: float = EPS) -> bool:
    """Same height and same top edge, within tolerance."""
    return abs(a.h - b.h) <= eps and abs(a.top - b.top) <= eps


def contains(outer: BoundingBox, inner: BoundingBox, eps: float = EPS) -> bool:
    return (
        inner.left >= outer.left - eps
        and inner.top >= outer.top - eps
        and inner.right <= outer.right + eps
        and inner.bottom <= outer.bottom + eps
    )


def visible(box: Optional[BoundingBox]) -> bool:
    return box is not None and box.w > 0 and box.h > 0


class LayoutTree:
    """Relation views over the boxed nodes of a DomTree."""

    def __init__(self, tree: DomTree, eps: float = EPS):
        self.tree = tree
        self.eps = eps
        self.boxes: dict[int, BoundingBox] = {
            nid: node.box for nid, node in tree.nodes.items() if node.box is not None
        }
        if not self.boxes:
            raise LayoutUnavailable("no node carries a bounding box")

    def box(self, nid: int) -> Optional[BoundingBox]:
        return self.boxes.get(nid)

    def rel(self, a: int, b: int) -> Optional[str]:
        ba, bb = self.boxes.get(a), self.boxes.get(b)
        if ba is None or bb is None:
            return None
        return quadrant(ba, bb, self.eps)

    def in_region(self, a: int, b: int, region: Iterable[str]) -> bool:
        r = self.rel(a, b)
        return r is not None and r in region

    def aligned(self, a: int, b: int) -> bool:
        ba, bb = self.boxes.get(a), self.boxes.get(b)
        return ba is not None and bb is not None and aligned(ba, bb, self.eps)

    def contains(self, outer: int, inner: int) -> bool:
        bo, bi = self.boxes.get(outer), self.boxes.get(inner)
        return bo is not None and bi is not None and contains(bo, bi, self.eps)

    def visible(self, nid: int) -> bool:
        return visible(self.boxes.get(nid))


W_NW_N = ("w", "nw", "n")
NW_N = ("nw", "n")
NE_E = ("ne", "e")
W_NW_N_NE_E = ("w", "nw", "n", "ne", "e")


def overshadowed_set(
    layout: LayoutTree,
    f: int,
    texts: list[int],
    fields: list[int],
) -> set[int]:
    """Texts among `texts` that some field in `fields` overshadows for `f`.

    The aligned case (2ii) refers back to the non-overshadowed texts, so it
    is iterated to a fixpoint: each round re-evaluates the condition against
    the previous round's overshadowed set and adds every newly derivable
    text at once.
    """
    others = [fp for fp in fields if fp != f and fp in layout.boxes]
    candidates = [t for t in texts if layout.in_region(t, f, W_NW_N)]
    shadowed: set[int] = set()
    for t in texts:
        for fp in others:
            if _static_case(layout, t, fp, f):
                shadowed.add(t)
                break
    while True:
        added = set()
        for t in texts:
            if t in shadowed:
                continue
            for fp in others:
                if _aligned_witness_case(layout, t, fp, f, candidates, shadowed):
                    added.add(t)
                    break
        if not added:
            return shadowed
        shadowed |= added


def _static_case(layout: LayoutTree, t: int, fp: int, f: int) -> bool:
    if not layout.aligned(fp, f):
        return layout.in_region(fp, f, W_NW_N) and layout.in_region(t, fp, W_NW_N_NE_E)
    return layout.in_region(t, fp, ("w",))


def _aligned_witness_case(
    layout: LayoutTree,
    t: int,
    fp: int,
    f: int,
    candidates: list[int],
    shadowed: set[int],
) -> bool:
    if not layout.aligned(fp, f) or not layout.in_region(t, fp, NW_N):
        return False
    for tp in candidates:
        if tp in shadowed or tp == t:
            continue
        if layout.in_region(tp, fp, NE_E) and layout.in_region(tp, f, W_NW_N):
            return True
    return False


def overshadows(
    layout: LayoutTree,
    t: int,
    fp: int,
    f: int,
    texts: Optional[list[int]] = None,
    fields: Optional[list[int]] = None,
) -> bool:
    """Does field fp overshadow text t with respect to field f?

    `texts` and `fields` give the universe for the recursive witness search;
    they default to all boxed text nodes and all boxed form fields.
    """
    if texts is None:
        texts = [
            n for n in layout.boxes
            if layout.tree.nodes[n].kind == TEXT and layout.visible(n)
        ]
    if fields is None:
        fields = [n for n in layout.tree.fields() if n in layout.boxes]
    if _static_case(layout, t, fp, f):
        return True
    candidates = [x for x in texts if layout.in_region(x, f, W_NW_N)]
    shadowed = overshadowed_set(layout, f, texts, fields)
    return _aligned_witness_case(layout, t, fp, f, candidates, shadowed)
