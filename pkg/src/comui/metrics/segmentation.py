"""Segmentation quality: IoU matching of predicted blocks against
ground truth, plus the blank-crop test used for block audits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import iou
from ..errors import ImageDecodeError


@dataclass(frozen=True)
class SegmentationReport:
    precision: float
    recall: float
    f1: float
    mean_iou: float
    tp: int
    fp: int
    fn: int
    matches: tuple[tuple[int, int, float], ...]  # (gt idx, pred idx, iou)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "mean_iou": self.mean_iou,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


def match_components_iou(gt: Sequence, pred: Sequence) -> SegmentationReport:
    """One-to-one greedy matching in descending IoU order; only
    overlapping pairs (IoU > 0) can match.  Ties break on (gt index,
    pred index) so the result is deterministic."""
    gt_boxes = [b.bbox if hasattr(b, "bbox") else b for b in gt]
    pred_boxes = [b.bbox if hasattr(b, "bbox") else b for b in pred]

    candidates = []
    for i, g in enumerate(gt_boxes):
        for j, p in enumerate(pred_boxes):
            score = iou(g, p)
            if score > 0.0:
                candidates.append((score, i, j))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))

    used_gt: set[int] = set()
    used_pred: set[int] = set()
    matches = []
    for score, i, j in candidates:
        if i in used_gt or j in used_pred:
            continue
        used_gt.add(i)
        used_pred.add(j)
        matches.append((i, j, score))
    matches.sort()

    tp = len(matches)
    fn = len(gt_boxes) - tp
    fp = len(pred_boxes) - tp
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    mean_iou = sum(m[2] for m in matches) / tp if tp else 0.0
    return SegmentationReport(
        precision=precision,
        recall=recall,
        f1=f1,
        mean_iou=mean_iou,
        tp=tp,
        fp=fp,
        fn=fn,
        matches=tuple(matches),
    )


BLANK_STDDEV = 2.0


def blank_ratio(crop) -> tuple[bool, float]:
    """A crop is blank when every channel's pixel standard deviation
    stays under 2.0.  Returns (is_blank, worst channel stddev)."""
    arr = np.asarray(crop)
    if arr.size == 0:
        raise ImageDecodeError("empty crop")
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3:
        raise ImageDecodeError(f"expected an image array, got shape {arr.shape}")
    stds = arr.astype(np.float64).std(axis=(0, 1))
    worst = float(stds.max())
    return bool((stds < BLANK_STDDEV).all()), worst
