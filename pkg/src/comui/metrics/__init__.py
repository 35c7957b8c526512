"""Evaluation suite: DOM structure, clustering agreement, color,
low-level element alignment, segmentation quality, and reporting."""

from .clustering import Labeling, VMeasure, ari, v_measure
from .color import ciede2000, color_similarity, rgb_to_lab
from .dom import (
    DomNode,
    DomTree,
    line_count,
    parse_dom,
    serialize,
    serialize_with_spans,
    tree_encoding,
)
from .lowlevel import (
    LowLevelScores,
    PageFacts,
    assign_blocks,
    center_distance_cost,
    dice,
    low_level_scores,
)
from .report import MetricsReport, render_pages
from .segmentation import SegmentationReport, blank_ratio, match_components_iou
from .treemetrics import (
    duplicate_classes,
    repetitive_ratio,
    reuse_rate,
    ted,
    tree_bleu,
    tree_similarity,
    tree_size,
)

__all__ = [
    "DomNode",
    "DomTree",
    "Labeling",
    "LowLevelScores",
    "MetricsReport",
    "PageFacts",
    "SegmentationReport",
    "VMeasure",
    "ari",
    "assign_blocks",
    "blank_ratio",
    "center_distance_cost",
    "ciede2000",
    "color_similarity",
    "dice",
    "duplicate_classes",
    "line_count",
    "low_level_scores",
    "match_components_iou",
    "parse_dom",
    "render_pages",
    "repetitive_ratio",
    "reuse_rate",
    "rgb_to_lab",
    "serialize",
    "serialize_with_spans",
    "ted",
    "tree_bleu",
    "tree_encoding",
    "tree_similarity",
    "tree_size",
    "v_measure",
]
