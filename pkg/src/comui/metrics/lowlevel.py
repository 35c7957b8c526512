"""Element-level comparison of a generated page against its reference.

Blocks from the two sides are aligned by a minimum-cost one-to-one
assignment, then scored on overlap area, text character sets, center
positions, and mean-color difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..core import BoundingBox, intersection_area
from .color import ciede2000, rgb_to_lab


@dataclass(frozen=True)
class PageFacts:
    """What the scorer needs to know about one side of the comparison.

    texts and colors are parallel to blocks; None entries mean the
    block carries no text / no sampled color.
    """

    size: tuple[int, int]  # (width, height)
    blocks: tuple[BoundingBox, ...]
    texts: tuple[Optional[str], ...] = ()
    colors: tuple[Optional[tuple[int, int, int]], ...] = ()

    def text_of(self, i: int) -> str:
        if i < len(self.texts) and self.texts[i] is not None:
            return self.texts[i]
        return ""

    def color_of(self, i: int):
        if i < len(self.colors):
            return self.colors[i]
        return None


def assign_blocks(
    ref_blocks: Sequence,
    gen_blocks: Sequence,
    cost: Callable,
) -> list[tuple[int, int]]:
    """Minimum-total-cost one-to-one assignment between the two block
    lists; the shorter side is fully matched.  Returns (ref index,
    gen index) pairs sorted by ref index."""
    if not ref_blocks or not gen_blocks:
        return []
    matrix = np.array(
        [[float(cost(r, g)) for g in gen_blocks] for r in ref_blocks],
        dtype=np.float64,
    )
    rows, cols = linear_sum_assignment(matrix)
    return sorted(zip(rows.tolist(), cols.tolist()))


def center_distance_cost(a: BoundingBox, b: BoundingBox) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)


def dice(t1: str, t2: str) -> float:
    """Sorensen-Dice on character sets; two empty texts count as a
    perfect match."""
    s1, s2 = set(t1), set(t2)
    if not s1 and not s2:
        return 1.0
    return 2.0 * len(s1 & s2) / (len(s1) + len(s2))


@dataclass(frozen=True)
class LowLevelScores:
    block_match: float
    text: float
    position: float
    color: float

    def to_dict(self) -> dict:
        return {
            "block_match": self.block_match,
            "text": self.text,
            "position": self.position,
            "color": self.color,
        }


def low_level_scores(
    ref: PageFacts,
    gen: PageFacts,
    assignment: Sequence[tuple[int, int]],
) -> LowLevelScores:
    """Score an assignment produced by assign_blocks.

    block_match: matched intersection area over total reference area.
    text: mean character-set Dice over matched pairs.
    position: mean (1 - center distance / reference diagonal).
    color: mean (1 - deltaE00/100) over pairs with sampled colors.
    """
    if not ref.blocks and not gen.blocks:
        return LowLevelScores(1.0, 1.0, 1.0, 1.0)

    ref_area = sum(b.area for b in ref.blocks)
    inter = sum(
        intersection_area(ref.blocks[i], gen.blocks[j]) for i, j in assignment
    )
    block_match = inter / ref_area if ref_area > 0 else 0.0

    if not assignment:
        return LowLevelScores(block_match, 0.0, 0.0, 0.0)

    text_score = sum(
        dice(ref.text_of(i), gen.text_of(j)) for i, j in assignment
    ) / len(assignment)

    diag = math.hypot(*ref.size)
    pos_total = 0.0
    for i, j in assignment:
        dist = center_distance_cost(ref.blocks[i], gen.blocks[j])
        pos_total += max(0.0, min(1.0, 1.0 - dist / diag)) if diag > 0 else 0.0
    position = pos_total / len(assignment)

    color_pairs = [
        (ref.color_of(i), gen.color_of(j))
        for i, j in assignment
        if ref.color_of(i) is not None and gen.color_of(j) is not None
    ]
    if color_pairs:
        color = sum(
            max(0.0, min(1.0, 1.0 - ciede2000(rgb_to_lab(c1), rgb_to_lab(c2)) / 100.0))
            for c1, c2 in color_pairs
        ) / len(color_pairs)
    else:
        color = 0.0

    return LowLevelScores(block_match, text_score, position, color)
