"""Positional-error feedback: match elements, detect mismatches, write fixes.

A generated page is compared against the reference: elements are paired
greedily in reading order, each pair is checked channel by channel
(position, size, text, visual appearance), and the findings become a
small instruction program in a fixed grammar.  Both screenshots get
numbered annotation tags so the revision model can see exactly which
rectangle each instruction talks about.

The greedy matcher here is intentionally not the optimal assignment used
for scoring in the metrics package: feedback favors a cheap, stable,
locally explainable pairing, while evaluation wants the global optimum.
The two are never interchangeable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .client import ModelClient
from .core import ElementClass, UIBlock, UIElement, canonical_sort
from .errors import FeedbackApplyError, ParseError, ValidationError
from .prompts import REASK_NOTE, PromptAsset
from .visual import to_array

ARROW = "→"
TIMES = "×"

RANK_TOP_K = 5
MOVE_DEADBAND_PX = 2
RESIZE_DEADBAND_PX = 2

# strict-greater threshold comparisons carry this guard so that a
# dissimilarity computed as exactly the cutoff stays below the line
# despite float rounding (1 - 0.85 is 0.15000000000000002 in doubles)
THRESHOLD_EPS = 1e-9

FIX_COLOR = (220, 40, 40)
ADD_COLOR = (30, 140, 30)
DEL_COLOR = (230, 140, 0)


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class MatchWeights:
    """Mixing weights for the composite element similarity.

    alpha scales position, beta size, gamma visual appearance; they must
    sum to one.  theta is the acceptance threshold: a candidate pair
    below it stays unmatched.
    """

    alpha: float = 0.3
    beta: float = 0.2
    gamma: float = 0.5
    theta: float = 0.5

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        total = self.alpha + self.beta + self.gamma
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"alpha + beta + gamma must sum to 1, got {total}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValidationError(f"theta must lie in [0, 1], got {self.theta}")


@dataclass(frozen=True)
class MismatchThresholds:
    """Severity cutoffs on dissimilarity (1 - similarity) per channel.

    A channel raises an issue above t_medium; it escalates to High above
    t_high, but only when the reference element also covers more than
    t_area of the page, so large drifts on tiny elements stay Medium.
    """

    t_high: float = 0.3
    t_medium: float = 0.15
    t_area: float = 0.02

    def __post_init__(self) -> None:
        if not 0.0 <= self.t_medium < self.t_high:
            raise ValidationError(
                f"need 0 <= t_medium < t_high, got {self.t_medium} and {self.t_high}"
            )
        if self.t_area < 0:
            raise ValidationError(f"t_area must be non-negative, got {self.t_area}")


class MatchChannel(str, Enum):
    TEXT = "Text"
    COMPOSITE = "Composite"


class IssueChannel(str, Enum):
    POSITION = "Position"
    SIZE = "Size"
    TEXT = "Text"
    VISUAL = "Visual"


class Severity(str, Enum):
    HIGH = "High"
    MEDIUM = "Medium"


class InstructionOp(str, Enum):
    FIX = "fix"
    ADD = "add"
    DEL = "del"


@dataclass(frozen=True)
class BlockPriority:
    block_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class ElementMatch:
    gt: UIElement
    gen: UIElement
    similarity: float
    channel: MatchChannel


@dataclass(frozen=True)
class MismatchIssue:
    channel: IssueChannel
    severity: Severity
    similarity: float


@dataclass(frozen=True)
class FeedbackInstruction:
    op: InstructionOp
    index: int
    clauses: tuple[str, ...]
    ref_index: int | None = None

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValidationError("instruction indices are 1-based")
        if (self.op is InstructionOp.FIX) != (self.ref_index is not None):
            raise ValidationError("ref_index is required exactly for fix instructions")
        if not self.clauses:
            raise ValidationError("an instruction needs at least one clause")


# -- block prioritization ----------------------------------------------------


def rank_blocks(
    block_pairs: Sequence[tuple[UIBlock, UIBlock]],
    block_sims: Sequence[float],
    page_area: float,
    k: int = RANK_TOP_K,
) -> list[BlockPriority]:
    """Order matched blocks by how much fixing them should pay off.

    score = -sim * (1 - area / page_area) with the reference block's
    area: low-similarity blocks come first, and among equally dissimilar
    blocks the smaller one wins because its relative weight (1 - p) is
    larger.  Descending score, block id as tiebreak, top k kept with
    1-based ranks.  Any strictly increasing transform of the similarity
    leaves the ordering unchanged.
    """
    if len(block_pairs) != len(block_sims):
        raise ValidationError(
            f"{len(block_pairs)} block pairs but {len(block_sims)} similarities"
        )
    if page_area <= 0:
        raise ValidationError(f"page area must be positive, got {page_area}")
    entries = []
    for (gt_block, _gen_block), sim in zip(block_pairs, block_sims):
        if not 0.0 <= sim <= 1.0:
            raise ValidationError(f"block similarity out of [0, 1]: {sim}")
        p = min(1.0, gt_block.bbox.area / page_area)
        entries.append((gt_block.id, -sim * (1.0 - p)))
    entries.sort(key=lambda e: (-e[1], e[0]))
    return [
        BlockPriority(block_id=bid, score=score, rank=i)
        for i, (bid, score) in enumerate(entries[: max(k, 0)], 1)
    ]


# -- similarity channels -----------------------------------------------------


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit insert, delete, and substitute costs."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def text_similarity(a: str, b: str) -> float:
    """1 - edit_distance / max(len): 1.0 for equal strings, 0.0 when every
    character of the longer string must change."""
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def composite_similarity(
    gt: UIElement,
    gen: UIElement,
    page_dims: tuple[int, int],
    weights: MatchWeights | None = None,
    provider=None,
    gt_crop=None,
    gen_crop=None,
) -> float:
    """alpha * position + beta * size + gamma * visual, each term in [0, 1].

    Position compares centers against the page diagonal; size compares
    (w, h) vectors against the larger of the two norms; the visual term
    is 1 - provider distance on the element crops.  Without a provider
    or crops the visual term is taken as a perfect match, leaving
    geometry to decide.
    """
    w = weights or MatchWeights()
    page_w, page_h = page_dims
    diag = math.hypot(page_w, page_h)
    if diag <= 0:
        raise ValidationError("page dimensions must be positive")
    (cx1, cy1), (cx2, cy2) = gt.bbox.center, gen.bbox.center
    sim_pos = _clamp01(1.0 - math.hypot(cx1 - cx2, cy1 - cy2) / diag)
    norm = max(
        math.hypot(gt.bbox.w, gt.bbox.h), math.hypot(gen.bbox.w, gen.bbox.h)
    )
    sim_size = _clamp01(
        1.0 - math.hypot(gt.bbox.w - gen.bbox.w, gt.bbox.h - gen.bbox.h) / norm
    )
    if provider is not None and gt_crop is not None and gen_crop is not None:
        sim_clip = _clamp01(1.0 - float(provider.distance(gt_crop, gen_crop)))
    else:
        sim_clip = 1.0
    return w.alpha * sim_pos + w.beta * sim_size + w.gamma * sim_clip


def _crop(arr: np.ndarray, bbox) -> np.ndarray:
    h, w = arr.shape[:2]
    x0, y0 = max(0, bbox.x), max(0, bbox.y)
    x1, y1 = min(w, bbox.right), min(h, bbox.bottom)
    if x1 <= x0 or y1 <= y0:
        return np.full((1, 1, 3), 255, dtype=np.uint8)
    return arr[y0:y1, x0:x1]


# -- element matching --------------------------------------------------------


def _pair_similarity(
    gt: UIElement,
    gen: UIElement,
    page_dims: tuple[int, int],
    weights: MatchWeights,
    provider,
    gt_arr: np.ndarray | None,
    gen_arr: np.ndarray | None,
) -> tuple[float, MatchChannel]:
    if gt.has_text and gen.has_text:
        return text_similarity(gt.text or "", gen.text or ""), MatchChannel.TEXT
    gt_crop = _crop(gt_arr, gt.bbox) if gt_arr is not None else None
    gen_crop = _crop(gen_arr, gen.bbox) if gen_arr is not None else None
    sim = composite_similarity(gt, gen, page_dims, weights, provider, gt_crop, gen_crop)
    return sim, MatchChannel.COMPOSITE


def match_elements(
    gt_elements: Sequence[UIElement],
    gen_elements: Sequence[UIElement],
    page_dims: tuple[int, int],
    weights: MatchWeights | None = None,
    provider=None,
    gt_image=None,
    gen_image=None,
) -> tuple[list[ElementMatch], list[UIElement], list[UIElement]]:
    """Greedy one-to-one pairing in reading order.

    Reference elements are visited top to bottom, left to right; each
    takes the still-free candidate with the strictly highest similarity,
    accepted only above theta.  When both sides carry text the text
    channel scores the pair, otherwise the composite channel does.
    Returns (matches, unmatched_reference, unmatched_generated).
    """
    w = weights or MatchWeights()
    gts = canonical_sort(gt_elements)
    available = canonical_sort(gen_elements)
    gt_arr = to_array(gt_image) if gt_image is not None else None
    gen_arr = to_array(gen_image) if gen_image is not None else None
    matches: list[ElementMatch] = []
    unmatched_gt: list[UIElement] = []
    for gt in gts:
        best = None
        best_sim = -1.0
        best_channel = MatchChannel.COMPOSITE
        for cand in available:
            sim, channel = _pair_similarity(gt, cand, page_dims, w, provider, gt_arr, gen_arr)
            if sim > best_sim:
                best, best_sim, best_channel = cand, sim, channel
        if best is not None and best_sim > w.theta:
            matches.append(ElementMatch(gt=gt, gen=best, similarity=best_sim, channel=best_channel))
            available.remove(best)
        else:
            unmatched_gt.append(gt)
    return matches, unmatched_gt, available


# -- mismatch detection ------------------------------------------------------


def detect_mismatches(
    match: ElementMatch,
    page_dims: tuple[int, int],
    thresholds: MismatchThresholds | None = None,
    provider=None,
    gt_crop=None,
    gen_crop=None,
) -> list[MismatchIssue]:
    """Check one matched pair channel by channel.

    Channels run in a fixed order: position (page-normalized center
    shift), size (mean relative width and height difference), text
    (edit-distance similarity whenever either side has text), visual
    (provider distance on crops when available).  A channel whose
    dissimilarity exceeds t_medium yields an issue; it is High only when
    it also exceeds t_high and the reference element covers more than
    t_area of the page.
    """
    t = thresholds or MismatchThresholds()
    page_w, page_h = page_dims
    page_area = page_w * page_h
    if page_area <= 0:
        raise ValidationError("page dimensions must be positive")
    gt, gen = match.gt, match.gen
    issues: list[MismatchIssue] = []

    def consider(channel: IssueChannel, sim: float) -> None:
        dissim = 1.0 - sim
        if dissim > t.t_medium + THRESHOLD_EPS:
            big = gt.bbox.area / page_area > t.t_area + THRESHOLD_EPS
            severity = (
                Severity.HIGH
                if (dissim > t.t_high + THRESHOLD_EPS and big)
                else Severity.MEDIUM
            )
            issues.append(MismatchIssue(channel=channel, severity=severity, similarity=sim))

    (cx1, cy1), (cx2, cy2) = gt.bbox.center, gen.bbox.center
    consider(
        IssueChannel.POSITION,
        _clamp01(1.0 - math.hypot((cx1 - cx2) / page_w, (cy1 - cy2) / page_h)),
    )
    diff_w = abs(gt.bbox.w - gen.bbox.w) / max(gt.bbox.w, gen.bbox.w)
    diff_h = abs(gt.bbox.h - gen.bbox.h) / max(gt.bbox.h, gen.bbox.h)
    consider(IssueChannel.SIZE, 1.0 - (diff_w + diff_h) / 2.0)
    if gt.has_text or gen.has_text:
        consider(IssueChannel.TEXT, text_similarity(gt.text or "", gen.text or ""))
    if provider is not None and gt_crop is not None and gen_crop is not None:
        consider(
            IssueChannel.VISUAL,
            _clamp01(1.0 - float(provider.distance(gt_crop, gen_crop))),
        )
    return issues


# -- instruction grammar -----------------------------------------------------


def _type_word(el: UIElement) -> str:
    if el.elem_class is ElementClass.OTHER:
        return "element"
    return el.elem_class.value.lower()


def _movement_clause(gt: UIElement, gen: UIElement) -> str | None:
    dx = gt.bbox.x - gen.bbox.x
    dy = gt.bbox.y - gen.bbox.y
    vertical = None if abs(dy) < MOVE_DEADBAND_PX else ("down" if dy > 0 else "up")
    horizontal = None if abs(dx) < MOVE_DEADBAND_PX else ("right" if dx > 0 else "left")
    if vertical and horizontal:
        return f"move it {vertical} and to the {horizontal}"
    if vertical:
        return f"move it {vertical}"
    if horizontal:
        return f"move it {horizontal}"
    return None


def _size_clause(gt: UIElement, gen: UIElement) -> str:
    dw = gt.bbox.w - gen.bbox.w
    dh = gt.bbox.h - gen.bbox.h
    width_moves = abs(dw) >= RESIZE_DEADBAND_PX
    height_moves = abs(dh) >= RESIZE_DEADBAND_PX
    if width_moves and not height_moves:
        word = "wider" if dw > 0 else "narrower"
        return f"make it {word} (width: {gen.bbox.w}px {ARROW} {gt.bbox.w}px)"
    if height_moves and not width_moves:
        word = "taller" if dh > 0 else "shorter"
        return f"make it {word} (height: {gen.bbox.h}px {ARROW} {gt.bbox.h}px)"
    word = "larger" if gt.bbox.area > gen.bbox.area else "smaller"
    return f"make it {word} (resize to {gt.bbox.w}{TIMES}{gt.bbox.h}px)"


def _text_clause(gt: UIElement, gen: UIElement) -> str:
    return f'change text to "{gt.text or ""}" (currently showing "{gen.text or ""}")'


_VISUAL_CLAUSE = "adjust visual appearance to match reference"


def _add_clause(el: UIElement) -> str:
    geom = f"at position ({el.bbox.x}, {el.bbox.y}) with size {el.bbox.w}{TIMES}{el.bbox.h}px"
    if el.has_text:
        return f'add {_type_word(el)} showing "{el.text}" {geom}'
    return f"add {_type_word(el)} {geom}"


def _del_clause(el: UIElement) -> str:
    if el.has_text:
        return f'remove the redundant item showing "{el.text}"'
    return f"remove the redundant item at ({el.bbox.x}, {el.bbox.y})"


def build_instructions(
    pairs: Sequence[tuple[ElementMatch, Sequence[MismatchIssue]]],
    unmatched_gt: Sequence[UIElement] = (),
    unmatched_gen: Sequence[UIElement] = (),
) -> list[FeedbackInstruction]:
    """Turn detected issues into the structured instruction list.

    Fix indices number only the matches that produce at least one
    clause, densely from 1; the ref index mirrors the fix index so the
    annotation tags on the two screenshots correspond.  A position issue
    inside the two-pixel deadband on both axes contributes no clause and
    can silence an otherwise issue-bearing match.
    """
    out: list[FeedbackInstruction] = []
    fix_index = 0
    for match, issues in pairs:
        clauses: list[str] = []
        for issue in issues:
            if issue.channel is IssueChannel.POSITION:
                clause = _movement_clause(match.gt, match.gen)
                if clause:
                    clauses.append(clause)
            elif issue.channel is IssueChannel.SIZE:
                clauses.append(_size_clause(match.gt, match.gen))
            elif issue.channel is IssueChannel.TEXT:
                clauses.append(_text_clause(match.gt, match.gen))
            else:
                clauses.append(_VISUAL_CLAUSE)
        if clauses:
            fix_index += 1
            out.append(
                FeedbackInstruction(
                    op=InstructionOp.FIX,
                    index=fix_index,
                    clauses=tuple(clauses),
                    ref_index=fix_index,
                )
            )
    for i, el in enumerate(unmatched_gt, 1):
        out.append(FeedbackInstruction(op=InstructionOp.ADD, index=i, clauses=(_add_clause(el),)))
    for i, el in enumerate(unmatched_gen, 1):
        out.append(FeedbackInstruction(op=InstructionOp.DEL, index=i, clauses=(_del_clause(el),)))
    return out


def render_instruction(ins: FeedbackInstruction) -> str:
    if ins.op is InstructionOp.FIX:
        head = f"[fix#{ins.index} {ARROW} ref#{ins.ref_index}]: "
    else:
        head = f"[{ins.op.value}#{ins.index}]: "
    return head + ", and ".join(ins.clauses)


def render_instructions(instructions: Sequence[FeedbackInstruction]) -> str:
    """One line per instruction, grouped into fix, add, and del sections
    separated by a blank line; empty overall means nothing to change."""
    sections = []
    for op in (InstructionOp.FIX, InstructionOp.ADD, InstructionOp.DEL):
        lines = [render_instruction(i) for i in instructions if i.op is op]
        if lines:
            sections.append("\n".join(lines))
    return "\n\n".join(sections)


def synthesize_instructions(
    pairs: Sequence[tuple[ElementMatch, Sequence[MismatchIssue]]],
    unmatched_gt: Sequence[UIElement] = (),
    unmatched_gen: Sequence[UIElement] = (),
) -> str:
    return render_instructions(build_instructions(pairs, unmatched_gt, unmatched_gen))


_FIX_HEAD_RE = re.compile(rf"^\[fix#(\d+) {ARROW} ref#(\d+)\]: (.*)$")
_ADDDEL_HEAD_RE = re.compile(r"^\[(add|del)#(\d+)\]: (.*)$")


def _split_clauses(body: str) -> list[str]:
    """Split on ', and ' between clauses, never inside a quoted string."""
    sep = ", and "
    parts: list[str] = []
    in_quote = False
    start = i = 0
    while i < len(body):
        ch = body[i]
        if ch == '"':
            in_quote = not in_quote
            i += 1
        elif not in_quote and body.startswith(sep, i):
            parts.append(body[start:i])
            i += len(sep)
            start = i
        else:
            i += 1
    parts.append(body[start:])
    return parts


def parse_instructions(text: str) -> list[FeedbackInstruction]:
    """Inverse of render_instructions: the grammar is unambiguous, so a
    rendered program parses back to the same structured list."""
    out: list[FeedbackInstruction] = []
    for line in text.split("\n"):
        if not line.strip():
            continue
        m = _FIX_HEAD_RE.match(line)
        if m:
            out.append(
                FeedbackInstruction(
                    op=InstructionOp.FIX,
                    index=int(m.group(1)),
                    clauses=tuple(_split_clauses(m.group(3))),
                    ref_index=int(m.group(2)),
                )
            )
            continue
        m = _ADDDEL_HEAD_RE.match(line)
        if m:
            out.append(
                FeedbackInstruction(
                    op=InstructionOp(m.group(1)),
                    index=int(m.group(2)),
                    clauses=tuple(_split_clauses(m.group(3))),
                )
            )
            continue
        raise ParseError(f"unrecognized instruction line: {line!r}")
    return out


# -- screenshot annotation ---------------------------------------------------


def _draw_tag(draw: ImageDraw.ImageDraw, x: int, y: int, label: str, color) -> None:
    font = ImageFont.load_default()
    left, top, right, bottom = draw.textbbox((0, 0), label, font=font)
    tw, th = right - left, bottom - top
    ty = max(0, y - th - 6)
    draw.rectangle([x, ty, x + tw + 5, ty + th + 5], fill=color)
    draw.text((x + 3, ty + 2), label, fill=(255, 255, 255), font=font)


def _outline(draw: ImageDraw.ImageDraw, bbox, color) -> None:
    draw.rectangle([bbox.x, bbox.y, bbox.right - 1, bbox.bottom - 1], outline=color, width=2)


def annotate_screenshots(
    gt_image,
    gen_image,
    matches: Sequence[ElementMatch],
    unmatched_gt: Sequence[UIElement] = (),
    unmatched_gen: Sequence[UIElement] = (),
) -> tuple[np.ndarray, np.ndarray]:
    """Draw numbered boxes on copies of both screenshots.

    The reference gets ref#i over matched elements and add#n over
    missing ones; the generated page gets fix#i and del#n.  Numbering
    follows list position, so pass the same filtered lists used for
    instruction synthesis and the tags line up with the text.
    """
    gt_pil = Image.fromarray(to_array(gt_image)).convert("RGB")
    gen_pil = Image.fromarray(to_array(gen_image)).convert("RGB")
    gt_draw = ImageDraw.Draw(gt_pil)
    gen_draw = ImageDraw.Draw(gen_pil)
    for i, match in enumerate(matches, 1):
        _outline(gt_draw, match.gt.bbox, FIX_COLOR)
        _draw_tag(gt_draw, match.gt.bbox.x, match.gt.bbox.y, f"ref#{i}", FIX_COLOR)
        _outline(gen_draw, match.gen.bbox, FIX_COLOR)
        _draw_tag(gen_draw, match.gen.bbox.x, match.gen.bbox.y, f"fix#{i}", FIX_COLOR)
    for i, el in enumerate(unmatched_gt, 1):
        _outline(gt_draw, el.bbox, ADD_COLOR)
        _draw_tag(gt_draw, el.bbox.x, el.bbox.y, f"add#{i}", ADD_COLOR)
    for i, el in enumerate(unmatched_gen, 1):
        _outline(gen_draw, el.bbox, DEL_COLOR)
        _draw_tag(gen_draw, el.bbox.x, el.bbox.y, f"del#{i}", DEL_COLOR)
    return np.asarray(gt_pil), np.asarray(gen_pil)


# -- feedback application ----------------------------------------------------


def _strip_fences(text: str) -> str:
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


def apply_feedback(
    block_code: str,
    instructions: str,
    gt_annotated,
    gen_annotated,
    client: ModelClient,
    prompt: PromptAsset | str,
) -> str:
    """Send the code, the instruction program, and both annotated
    screenshots to the model; it must answer with the complete revised
    code.  One re-ask on an empty reply, then FeedbackApplyError.
    """
    if isinstance(prompt, PromptAsset):
        prompt_text = prompt.render(block_code=block_code, instructions=instructions)
    else:
        prompt_text = prompt
    images = [to_array(gt_annotated), to_array(gen_annotated)]
    reply = client.call(prompt_text, images)
    code = _strip_fences(reply).strip()
    if not code:
        retry = client.call(prompt_text + "\n\n" + REASK_NOTE, images)
        code = _strip_fences(retry).strip()
        if not code:
            raise FeedbackApplyError("model returned no code for the revised block")
    return code
