"""Shared constructors and randomized generators for the test suite."""

from __future__ import annotations

import random

from comui.core import BoundingBox, UIBlock, UIElement
from comui.usg import GraphConfig, GraphNode, UIStructureGraph, _graph_from_nodes


def box(x: int, y: int, w: int, h: int) -> BoundingBox:
    return BoundingBox(x, y, w, h)


def elem(eid: str, x: int, y: int, w: int, h: int, cls="Other", text=None) -> UIElement:
    from comui.core import ElementClass

    return UIElement(eid, BoundingBox(x, y, w, h), ElementClass(cls), text)


def make_graph(
    bboxes: list[tuple[int, int, int, int]],
    cfg: GraphConfig | None = None,
    block_id: str = "b",
    id_prefix: str = "n",
) -> UIStructureGraph:
    """Graph over explicit node boxes, bypassing block containment."""
    cfg = cfg or GraphConfig()
    nodes = [GraphNode(f"{id_prefix}{i}", BoundingBox(*t)) for i, t in enumerate(bboxes)]
    return _graph_from_nodes(block_id, nodes, cfg)


def random_graph(
    rng: random.Random,
    max_nodes: int = 5,
    span: int = 160,
    cfg: GraphConfig | None = None,
    block_id: str = "b",
) -> UIStructureGraph:
    n = rng.randint(0, max_nodes)
    boxes = []
    for _ in range(n):
        w = rng.randint(6, 50)
        h = rng.randint(6, 50)
        x = rng.randint(0, span)
        y = rng.randint(0, span)
        boxes.append((x, y, w, h))
    return make_graph(boxes, cfg, block_id=block_id)


def translated_graph(g: UIStructureGraph, dx: int, dy: int, cfg=None) -> UIStructureGraph:
    cfg = cfg or GraphConfig()
    boxes = [(n.bbox.x + dx, n.bbox.y + dy, n.bbox.w, n.bbox.h) for n in g.nodes]
    return make_graph(boxes, cfg, block_id=g.block_id + "_t")


def extended_graph(g: UIStructureGraph, rng: random.Random, cfg=None) -> UIStructureGraph:
    """g plus one extra node placed well away from alignment coincidences."""
    cfg = cfg or GraphConfig()
    boxes = [n.bbox.as_tuple() for n in g.nodes]
    w = rng.randint(6, 50)
    h = rng.randint(6, 50)
    x = rng.randint(300, 400)
    y = rng.randint(300, 400)
    boxes.append((x, y, w, h))
    return make_graph(boxes, cfg, block_id=g.block_id + "_x")


# Deterministic UI block patterns for image-based tests.  Each variant has a
# block size, a fill color, and inner parts: (relative bbox, color, class, text).
PATTERN_SPECS = {
    "card": {
        "size": (50, 40),
        "fill": (240, 240, 240),
        "parts": [
            ((5, 5, 40, 12), (70, 110, 200), "Image", None),
            ((5, 20, 40, 6), (40, 40, 40), "Text", "Card"),
            ((5, 29, 18, 8), (220, 120, 40), "Button", "Go"),
        ],
    },
    "nav": {
        "size": (60, 16),
        "fill": (250, 250, 250),
        "parts": [
            ((4, 4, 14, 8), (90, 90, 90), "Text", "Tab1"),
            ((22, 4, 14, 8), (90, 90, 90), "Text", "Tab2"),
            ((40, 4, 14, 8), (90, 90, 90), "Text", "Tab3"),
        ],
    },
    "nav4": {
        "size": (78, 16),
        "fill": (250, 250, 250),
        "parts": [
            ((4, 4, 14, 8), (90, 90, 90), "Text", "Tab1"),
            ((22, 4, 14, 8), (90, 90, 90), "Text", "Tab2"),
            ((40, 4, 14, 8), (90, 90, 90), "Text", "Tab3"),
            ((58, 4, 14, 8), (90, 90, 90), "Text", "Tab4"),
        ],
    },
    "hero": {
        "size": (60, 40),
        "fill": (230, 240, 255),
        "parts": [
            ((4, 4, 52, 20), (120, 80, 160), "Image", None),
            ((4, 28, 30, 6), (30, 30, 30), "Text", "Big"),
        ],
    },
}


def plant(arr, x: int, y: int, variant: str, id_prefix: str):
    """Draw a pattern onto an RGB array; return (block bbox, elements)."""
    from comui.core import ElementClass

    spec = PATTERN_SPECS[variant]
    w, h = spec["size"]
    arr[y : y + h, x : x + w] = spec["fill"]
    elements = []
    for k, (rel, color, cls, text) in enumerate(spec["parts"]):
        rx, ry, rw, rh = rel
        arr[y + ry : y + ry + rh, x + rx : x + rx + rw] = color
        elements.append(
            UIElement(
                f"{id_prefix}e{k}",
                BoundingBox(x + rx, y + ry, rw, rh),
                ElementClass(cls),
                text,
            )
        )
    return BoundingBox(x, y, w, h), elements
