"""Deterministic offline page renderer for absolutely positioned HTML.

``python3 -m comui.naive_renderer input.html output.png`` rasterizes a
generated page without a browser: every visible ``position:absolute``
element becomes a filled rectangle, its text is drawn in the default
bitmap font, and everything else is ignored.  The output is pixel-stable
across runs, which is what the offline evaluation loop needs; visual
fidelity beyond boxes and labels is a non-goal.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .metrics.dom import DomNode, parse_dom
from .styles import (
    NodeBox,
    absolute_boxes,
    box_text,
    node_styles,
    parse_color,
    parse_px,
)

DEFAULT_SIZE = (800, 600)
TEXT_COLOR = (20, 20, 20)
BORDER_COLOR = (120, 120, 120)
CANVAS_MARGIN = 8


def _find_body(root: DomNode) -> DomNode | None:
    for node in root.iter_nodes():
        if node.tag == "body":
            return node
    return None


def _canvas_size(root: DomNode, boxes: list[NodeBox]) -> tuple[int, int]:
    body = _find_body(root)
    if body is not None:
        styles = node_styles(body)
        w = parse_px(styles.get("width"))
        h = parse_px(styles.get("height"))
        if w and h and w > 0 and h > 0:
            return (w, h)
    if boxes:
        w = max(b.bbox.right for b in boxes) + CANVAS_MARGIN
        h = max(b.bbox.bottom for b in boxes) + CANVAS_MARGIN
        return (w, h)
    return DEFAULT_SIZE


def _background(root: DomNode) -> tuple[int, int, int]:
    body = _find_body(root)
    if body is not None:
        color = parse_color(node_styles(body).get("background-color"))
        if color is not None:
            return color
    return (255, 255, 255)


def render_html(html: str) -> np.ndarray:
    """Rasterize a page to an RGB array.

    Boxes paint in document order, so later siblings draw over earlier
    ones the way a browser would stack them without z-index.
    """
    tree = parse_dom(html)
    boxes = absolute_boxes(tree)
    width, height = _canvas_size(tree.root, boxes)
    img = Image.new("RGB", (width, height), _background(tree.root))
    draw = ImageDraw.Draw(img)
    font = ImageFont.load_default()
    for box in boxes:
        fill = parse_color(box.styles.get("background-color"))
        rect = [box.bbox.x, box.bbox.y, box.bbox.right - 1, box.bbox.bottom - 1]
        if fill is not None:
            draw.rectangle(rect, fill=fill)
        if "border" in box.styles:
            draw.rectangle(rect, outline=BORDER_COLOR, width=1)
        text = box_text(box)
        if text:
            color = parse_color(box.styles.get("color")) or TEXT_COLOR
            draw.text((box.bbox.x + 4, box.bbox.y + 3), text, fill=color, font=font)
    return np.asarray(img)


def render_file(input_path: str | Path, output_path: str | Path) -> None:
    html = Path(input_path).read_text(encoding="utf-8")
    arr = render_html(html)
    Image.fromarray(arr).save(str(output_path), format="PNG")


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 2:
        print("usage: python3 -m comui.naive_renderer input.html output.png", file=sys.stderr)
        return 2
    try:
        render_file(args[0], args[1])
    except OSError as err:
        print(f"render failed: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
