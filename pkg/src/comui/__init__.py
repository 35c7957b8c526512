"""Component-aware UI screenshot-to-code pipeline.

Stages: semantic block segmentation and boundary refinement, repeated-block
detection (visual + structural), component-based code generation against a
pluggable multimodal model client, element-wise feedback synthesis, and a
metric suite for evaluating the result.
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    BlockKind,
    BoundingBox,
    ElementClass,
    Page,
    Project,
    UIBlock,
    UIElement,
    contains,
    iou,
    overlap_ratio,
    union_bbox,
)
