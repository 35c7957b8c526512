"""Inline-style parsing shared by the naive renderer and page analysis.

Generated pages in this project position everything with inline
``position:absolute`` styles, so a page's geometry can be recovered
without a layout engine: walk the DOM, read ``left/top/width/height``
pixel values, and treat them as page coordinates.  That convention is
what makes the offline renderer and the generated-side element
extraction possible at all; CSS beyond simple inline declarations is
out of scope on purpose.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .core import BoundingBox
from .metrics.dom import DomNode, DomTree

_NAMED_COLORS = {
    "white": (255, 255, 255),
    "black": (0, 0, 0),
    "red": (255, 0, 0),
    "green": (0, 128, 0),
    "blue": (0, 0, 255),
    "gray": (128, 128, 128),
    "grey": (128, 128, 128),
    "lightgray": (211, 211, 211),
    "lightgrey": (211, 211, 211),
    "silver": (192, 192, 192),
    "orange": (255, 165, 0),
    "yellow": (255, 255, 0),
    "purple": (128, 0, 128),
    "navy": (0, 0, 128),
    "teal": (0, 128, 128),
    "maroon": (128, 0, 0),
}

_RGB_RE = re.compile(r"rgb\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)")


def parse_style(style: str | None) -> dict[str, str]:
    """'left:10px; top: 4px' -> {'left': '10px', 'top': '4px'}.

    Keys are lowercased, values stripped; malformed fragments are
    dropped rather than raised on.
    """
    out: dict[str, str] = {}
    if not style:
        return out
    for part in style.split(";"):
        if ":" not in part:
            continue
        key, _, value = part.partition(":")
        key = key.strip().lower()
        value = value.strip()
        if key and value:
            out[key] = value
    return out


def parse_px(value: str | None) -> int | None:
    """'120px' -> 120; also accepts bare numbers.  None when unparsable."""
    if value is None:
        return None
    value = value.strip().lower()
    if value.endswith("px"):
        value = value[:-2].strip()
    try:
        return int(round(float(value)))
    except ValueError:
        return None


def parse_color(value: str | None) -> tuple[int, int, int] | None:
    """#rrggbb, #rgb, rgb(r, g, b), or a small set of names."""
    if not value:
        return None
    value = value.strip().lower()
    m = _RGB_RE.fullmatch(value)
    if m:
        r, g, b = (min(255, int(m.group(i))) for i in (1, 2, 3))
        return (r, g, b)
    if value.startswith("#"):
        hexpart = value[1:]
        if len(hexpart) == 3:
            hexpart = "".join(c * 2 for c in hexpart)
        if len(hexpart) == 6:
            try:
                return tuple(int(hexpart[i : i + 2], 16) for i in (0, 2, 4))
            except ValueError:
                return None
        return None
    return _NAMED_COLORS.get(value)


def node_styles(node: DomNode) -> dict[str, str]:
    return parse_style(node.attrs.get("style"))


def is_hidden(styles: dict[str, str]) -> bool:
    return styles.get("display", "").strip().lower() == "none"


@dataclass(frozen=True)
class NodeBox:
    """An absolutely positioned element and its page-coordinate rectangle."""

    node: DomNode
    bbox: BoundingBox
    styles: dict[str, str]

    def __hash__(self) -> int:
        return id(self.node)


def _box_of(node: DomNode) -> NodeBox | None:
    styles = node_styles(node)
    if styles.get("position", "").strip().lower() != "absolute":
        return None
    x = parse_px(styles.get("left"))
    y = parse_px(styles.get("top"))
    w = parse_px(styles.get("width"))
    h = parse_px(styles.get("height"))
    if x is None or y is None or w is None or h is None or w <= 0 or h <= 0:
        return None
    return NodeBox(node=node, bbox=BoundingBox(x, y, w, h), styles=styles)


def absolute_boxes(tree: DomTree | DomNode) -> list[NodeBox]:
    """Every visible absolutely positioned element, in document order.

    Coordinates are taken verbatim as page coordinates: nesting does not
    accumulate offsets.  ``display:none`` prunes whole subtrees.
    """
    root = tree.root if isinstance(tree, DomTree) else tree
    out: list[NodeBox] = []

    def walk(node: DomNode) -> None:
        if is_hidden(node_styles(node)):
            return
        box = _box_of(node)
        if box is not None:
            out.append(box)
        for child in node.children:
            walk(child)

    walk(root)
    return out


def top_level_boxes(boxes: list[NodeBox]) -> list[NodeBox]:
    """Boxes not strictly inside any other box in the list."""
    from .core import contains

    out = []
    for b in boxes:
        inside = any(
            other is not b and contains(other.bbox, b.bbox) and other.bbox != b.bbox
            for other in boxes
        )
        if not inside:
            out.append(b)
    return out


def own_text(node: DomNode, stop) -> str:
    """Whitespace-joined text of a subtree, excluding hidden parts and any
    descendant for which ``stop`` returns True (it renders itself)."""
    pieces: list[str] = []

    def walk(n: DomNode, is_root: bool) -> None:
        styles = node_styles(n)
        if is_hidden(styles):
            return
        if not is_root and stop(n):
            return
        if n.text:
            pieces.append(n.text)
        for child in n.children:
            walk(child, False)

    walk(node, True)
    return " ".join(pieces)


def subtree_text(node: DomNode) -> str:
    return own_text(node, lambda n: False)


def box_text(box: NodeBox) -> str:
    """Text belonging to a box, stopping at nested positioned boxes."""
    return own_text(box.node, lambda n: _box_of(n) is not None)
