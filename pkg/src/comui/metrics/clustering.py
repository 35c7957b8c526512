"""Clustering agreement scores for merge evaluation.

Both metrics compare two labelings of the same item set: the adjusted
Rand index (pair counting, chance corrected) and the V-measure family
(entropy based).  Labels themselves carry no meaning; only the induced
partitions matter.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import NamedTuple

from ..errors import LabelSetMismatch

Labeling = dict


def _check_same_items(a: Labeling, b: Labeling) -> None:
    if set(a) != set(b):
        only_a = sorted(set(a) - set(b))
        only_b = sorted(set(b) - set(a))
        raise LabelSetMismatch(
            f"labelings cover different items (only in first: {only_a}, "
            f"only in second: {only_b})"
        )


def ari(a: Labeling, b: Labeling) -> float:
    """Adjusted Rand index in [-1, 1]; 1 iff identical partitions,
    0 expected agreement under random labeling."""
    _check_same_items(a, b)
    n = len(a)
    if n < 2:
        return 1.0
    contingency = Counter((a[item], b[item]) for item in a)
    rows = Counter(a.values())
    cols = Counter(b.values())
    sum_cells = sum(math.comb(c, 2) for c in contingency.values())
    sum_rows = sum(math.comb(c, 2) for c in rows.values())
    sum_cols = sum(math.comb(c, 2) for c in cols.values())
    total = math.comb(n, 2)
    expected = sum_rows * sum_cols / total
    maximum = (sum_rows + sum_cols) / 2
    if maximum == expected:
        # both partitions trivial (all singletons or all one cluster)
        return 1.0
    return (sum_cells - expected) / (maximum - expected)


class VMeasure(NamedTuple):
    homogeneity: float
    completeness: float
    v: float


def _entropy(counts: Counter, n: int) -> float:
    return -sum((c / n) * math.log(c / n) for c in counts.values() if c)


def _conditional_entropy(x: Labeling, given: Labeling, n: int) -> float:
    """H(X | Given), natural log."""
    joint = Counter((given[item], x[item]) for item in x)
    marginal = Counter(given.values())
    h = 0.0
    for (g, _), c in joint.items():
        h -= (c / n) * math.log(c / marginal[g])
    return h


def v_measure(gt: Labeling, pred: Labeling) -> VMeasure:
    """Homogeneity h = 1 - H(gt|pred)/H(gt), completeness
    c = 1 - H(pred|gt)/H(pred), each defined as 1 when the
    normalizing entropy is zero; v = harmonic mean, 0 when h = c = 0."""
    _check_same_items(gt, pred)
    n = len(gt)
    if n == 0:
        return VMeasure(1.0, 1.0, 1.0)
    h_gt = _entropy(Counter(gt.values()), n)
    h_pred = _entropy(Counter(pred.values()), n)
    homogeneity = 1.0 if h_gt == 0 else 1.0 - _conditional_entropy(gt, pred, n) / h_gt
    completeness = 1.0 if h_pred == 0 else 1.0 - _conditional_entropy(pred, gt, n) / h_pred
    if homogeneity + completeness == 0:
        v = 0.0
    else:
        v = 2 * homogeneity * completeness / (homogeneity + completeness)
    return VMeasure(homogeneity, completeness, v)
