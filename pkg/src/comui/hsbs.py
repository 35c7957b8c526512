"""Hybrid block segmentation: semantic proposals refined by element boxes.

The split of labor: a multimodal model proposes semantically coherent
block regions (good meaning, sloppy pixels), a detector supplies precise
element boxes (good pixels, no meaning).  Refinement snaps each proposal
onto the union of the elements it credibly owns: an element belongs to
proposal m when it lies fully inside m, or when more than t_overlap of
the element's own area overlaps m.  Proposals that own nothing keep
their original bbox; the semantic region may well contain content the
detector missed.

A fallback detector (edge map, Otsu threshold, connected components) is
included so the pipeline can run without any external detector.  It is
plumbing for tests and demos, not a fidelity claim.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .client import ModelClient
from .core import (
    BlockKind,
    BoundingBox,
    ElementClass,
    Page,
    UIBlock,
    UIElement,
    contains,
    overlap_ratio,
    union_bbox,
)
from .errors import ParseError, ReplyParseError, ValidationError
from .prompts import REASK_NOTE, PromptAsset
from .visual import to_array, to_gray

FALLBACK_MIN_AREA = 64  # px^2, bbox area floor for detected components


class ProposalSource(str, Enum):
    MODEL = "model"
    FILE = "file"


@dataclass(frozen=True)
class BlockProposal:
    bbox: BoundingBox
    label: str = ""
    source: ProposalSource = ProposalSource.MODEL


@dataclass(frozen=True)
class RefinementConfig:
    t_overlap: float = 0.4

    def __post_init__(self) -> None:
        if not 0.0 <= self.t_overlap <= 1.0:
            raise ValidationError(f"t_overlap must be in [0,1], got {self.t_overlap}")


# -- ingestion ---------------------------------------------------------------


def ingest_elements(path: str | Path, page_id: str | None = None) -> Page:
    """Load and validate an elements JSON file into a Page.

    Schema: {"page": {"width", "height"},
             "elements": [{"id"?, "x", "y", "w", "h", "class"?, "text"?}]}.
    Elements without an id get one assigned; geometry must be positive
    and inside the page; ids must be unique.
    """
    path = Path(path)
    if page_id is None:
        page_id = path.parent.name or path.stem
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "page" not in raw or "elements" not in raw:
        raise ValidationError(f"{path}: expected an object with 'page' and 'elements'")
    page_spec = raw["page"]
    try:
        width, height = int(page_spec["width"]), int(page_spec["height"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: page width/height missing or non-numeric") from exc

    items = raw["elements"]
    if not isinstance(items, list):
        raise ValidationError(f"{path}: 'elements' must be an array")
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ValidationError(f"{path}: element {i} is not an object")
    # assign ids in a second pass so autos never collide with explicit ids
    taken: set[str] = set()
    elements: list[UIElement] = []
    auto = 0
    explicit = {str(item["id"]) for item in items if item.get("id") is not None}
    by_class = {c.value.lower(): c for c in ElementClass}
    for item in items:
        elem_id = item.get("id")
        if elem_id is None:
            while f"e{auto}" in explicit or f"e{auto}" in taken:
                auto += 1
            elem_id = f"e{auto}"
        elem_id = str(elem_id)
        if elem_id in taken:
            raise ValidationError(f"{path}: duplicate element id {elem_id!r}")
        taken.add(elem_id)
        try:
            bbox = BoundingBox(int(item["x"]), int(item["y"]), int(item["w"]), int(item["h"]))
        except KeyError as exc:
            raise ValidationError(f"{path}: element {elem_id!r} missing field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{path}: element {elem_id!r} has non-integer geometry") from exc
        if bbox.right > width or bbox.bottom > height:
            raise ValidationError(
                f"{path}: element {elem_id!r} extends outside the {width}x{height} page"
            )
        cls_name = item.get("class", "other")
        elem_class = by_class.get(str(cls_name).lower())
        if elem_class is None:
            raise ValidationError(f"{path}: element {elem_id!r} has unknown class {cls_name!r}")
        elements.append(
            UIElement(id=elem_id, bbox=bbox, elem_class=elem_class, text=item.get("text"))
        )
    return Page(id=page_id, width=width, height=height, elements=elements)


# -- fallback detector -------------------------------------------------------


def _otsu_threshold(values: np.ndarray) -> float:
    """Classic Otsu on a 256-bin histogram of values scaled to [0, 255]."""
    hist, _ = np.histogram(values, bins=256, range=(0.0, 255.0))
    total = int(values.size)
    bins = np.arange(256, dtype=np.float64)
    sum_all = float(bins @ hist)
    weight_b = 0.0
    sum_b = 0.0
    best_t, best_var = 0, -1.0
    for t in range(256):
        weight_b += hist[t]
        if weight_b == 0:
            continue
        weight_f = total - weight_b
        if weight_f == 0:
            break
        sum_b += t * hist[t]
        mean_b = sum_b / weight_b
        mean_f = (sum_all - sum_b) / weight_f
        var = weight_b * weight_f * (mean_b - mean_f) ** 2
        if var > best_var:
            best_var, best_t = var, t
    return float(best_t)


def fallback_detect(screenshot) -> list[UIElement]:
    """Edge-based stand-in for an element detector.

    Sobel magnitude, Otsu binarization, 8-connected components, and a
    bbox-area floor of FALLBACK_MIN_AREA.  Fully deterministic.
    """
    gray = to_gray(to_array(screenshot))
    sx = ndimage.sobel(gray, axis=0)
    sy = ndimage.sobel(gray, axis=1)
    mag = np.hypot(sx, sy)
    peak = float(mag.max())
    if peak <= 1e-9:
        return []
    scaled = mag * (255.0 / peak)
    mask = scaled > _otsu_threshold(scaled)
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    boxes: list[BoundingBox] = []
    for sl in ndimage.find_objects(labels):
        if sl is None:
            continue
        ys, xs = sl
        bbox = BoundingBox(int(xs.start), int(ys.start), int(xs.stop - xs.start), int(ys.stop - ys.start))
        if bbox.area >= FALLBACK_MIN_AREA:
            boxes.append(bbox)
    boxes.sort(key=lambda b: (b.y, b.x, b.w, b.h))
    return [
        UIElement(id=f"f{i}", bbox=b, elem_class=ElementClass.OTHER) for i, b in enumerate(boxes)
    ]


# -- model proposals ---------------------------------------------------------


def _strip_fences(text: str) -> str:
    """If the reply contains fenced code blocks, keep the longest one."""
    lines = text.split("\n")
    blocks: list[str] = []
    inner: list[str] | None = None
    for line in lines:
        if line.lstrip().startswith("```"):
            if inner is None:
                inner = []
            else:
                blocks.append("\n".join(inner))
                inner = None
            continue
        if inner is not None:
            inner.append(line)
    if blocks:
        return max(blocks, key=len)
    return text


def _parse_proposal_reply(reply: str, page_w: int, page_h: int) -> list[BlockProposal]:
    text = _strip_fences(reply).strip()
    try:
        data = json.loads(text)
    except ValueError:
        # tolerate prose around the array
        start, end = text.find("["), text.rfind("]")
        if start == -1 or end <= start:
            raise ReplyParseError("proposal reply contains no JSON array")
        try:
            data = json.loads(text[start : end + 1])
        except ValueError as exc:
            raise ReplyParseError(f"proposal reply is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise ReplyParseError(f"proposal reply must be a JSON array, got {type(data).__name__}")
    page = BoundingBox(0, 0, page_w, page_h)
    proposals: list[BlockProposal] = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or "bbox" not in item:
            raise ReplyParseError(f"proposal {i} is not an object with a 'bbox'")
        raw = item["bbox"]
        if not isinstance(raw, (list, tuple)) or len(raw) != 4:
            raise ReplyParseError(f"proposal {i}: bbox must be [x, y, w, h]")
        try:
            x, y, w, h = (int(round(float(v))) for v in raw)
        except (TypeError, ValueError) as exc:
            raise ReplyParseError(f"proposal {i}: non-numeric bbox") from exc
        label = item.get("label", "")
        if not isinstance(label, str):
            raise ReplyParseError(f"proposal {i}: label must be a string")
        # clamp to page bounds; fully-outside boxes are dropped
        x1, y1 = max(x, 0), max(y, 0)
        x2, y2 = min(x + w, page.w), min(y + h, page.h)
        if x2 - x1 <= 0 or y2 - y1 <= 0:
            continue
        proposals.append(
            BlockProposal(bbox=BoundingBox(x1, y1, x2 - x1, y2 - y1), label=label)
        )
    return proposals


def propose_blocks(
    screenshot, client: ModelClient, prompt: PromptAsset | str
) -> list[BlockProposal]:
    """Ask the model for semantic block proposals on one screenshot.

    One automatic re-ask on an unparseable reply, then ReplyParseError.
    Bboxes are clamped to the page; boxes entirely outside it are dropped.
    """
    arr = to_array(screenshot)
    page_h, page_w = arr.shape[:2]
    if isinstance(prompt, PromptAsset):
        prompt_text = prompt.render(width=page_w, height=page_h)
    else:
        prompt_text = prompt
    reply = client.call(prompt_text, [arr])
    try:
        return _parse_proposal_reply(reply, page_w, page_h)
    except ReplyParseError:
        retry_reply = client.call(prompt_text + "\n\n" + REASK_NOTE, [arr])
        return _parse_proposal_reply(retry_reply, page_w, page_h)


# -- refinement --------------------------------------------------------------


def absorbed_elements(
    proposal: BoundingBox, elements: Sequence[UIElement], t_overlap: float
) -> list[UIElement]:
    """Elements a proposal owns: fully contained, or overlapping it by
    more than t_overlap of the element's own area."""
    out = []
    for u in elements:
        if contains(proposal, u.bbox) or overlap_ratio(u.bbox, proposal) > t_overlap:
            out.append(u)
    return out


def refine_blocks(
    proposals: Sequence[BlockProposal],
    elements: Sequence[UIElement],
    page_id: str = "page",
    cfg: RefinementConfig | None = None,
) -> list[UIBlock]:
    """Snap each proposal to the union bbox of the elements it absorbs.

    Output order mirrors the input order; block ids are positional; a
    proposal absorbing nothing keeps its original bbox.  Elements may be
    absorbed by several overlapping proposals; the per-proposal sets are
    independent.
    """
    cfg = cfg or RefinementConfig()
    blocks: list[UIBlock] = []
    for j, m in enumerate(proposals):
        owned = absorbed_elements(m.bbox, elements, cfg.t_overlap)
        bbox = union_bbox(u.bbox for u in owned) if owned else m.bbox
        blocks.append(
            UIBlock(id=f"b{j}", page_id=page_id, bbox=bbox, label=m.label, kind=BlockKind.REFINED)
        )
    return blocks
