"""Block merging: pairwise visual+structural criterion, then grouping.

A pair merges only when both signals agree: the visual score clears
t_visual strictly, and the structure graphs match (isomorphic, one embeds
in the other, or a large-enough common subgraph).  Groups are connected
components of the pairwise relation; the relation itself is not
transitive, so closure can chain dissimilar extremes through middlemen;
that is a documented artifact choice.  Page identity never blocks a
merge: repeated components are expected to recur across pages.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .core import UIBlock
from .errors import NotAPartition, ValidationError
from .usg import GraphConfig, UIStructureGraph, graph_match
from .visual import ImageRef, VisualScorer


@dataclass(frozen=True)
class MergeConfig:
    t_visual: float = 0.5
    graph_cfg: GraphConfig = field(default_factory=GraphConfig)
    match_budget: int = 200_000

    def __post_init__(self) -> None:
        if not (0.0 <= self.t_visual <= 1.0):
            raise ValidationError("t_visual must lie in [0, 1]")


@dataclass
class MergeContext:
    """Everything should_merge needs: per-block graphs, crops, and a scorer."""

    graphs: dict[str, UIStructureGraph]
    refs: dict[str, ImageRef]
    scorer: VisualScorer


@dataclass(frozen=True)
class ComponentGroup:
    group_id: str
    member_block_ids: tuple[str, ...]
    representative_block_id: str

    def __post_init__(self) -> None:
        if not self.member_block_ids:
            raise ValidationError(f"group {self.group_id}: empty member list")
        if self.representative_block_id not in self.member_block_ids:
            raise ValidationError(f"group {self.group_id}: representative not a member")


@dataclass
class Grouping:
    groups: list[ComponentGroup]

    def validate_partition(self, all_block_ids: Iterable[str]) -> None:
        seen: list[str] = []
        for g in self.groups:
            seen.extend(g.member_block_ids)
        if len(seen) != len(set(seen)):
            raise NotAPartition("a block appears in more than one group")
        if set(seen) != set(all_block_ids):
            raise NotAPartition("groups do not cover the block set exactly")

    def group_of(self, block_id: str) -> ComponentGroup:
        for g in self.groups:
            if block_id in g.member_block_ids:
                return g
        raise ValidationError(f"block {block_id!r} not in any group")


def should_merge(bi: UIBlock, bj: UIBlock, ctx: MergeContext, cfg: MergeConfig) -> bool:
    """Both conditions, evaluated strictly: S_visual > t_visual AND a
    structural match verdict."""
    sim = ctx.scorer.similarity(ctx.refs[bi.id], ctx.refs[bj.id])
    if not sim > cfg.t_visual:
        return False
    res = graph_match(ctx.graphs[bi.id], ctx.graphs[bj.id], cfg.graph_cfg, cfg.match_budget)
    return res.structural_match


class _UnionFind:
    def __init__(self, items: Iterable[str]) -> None:
        self.parent = {i: i for i in items}

    def find(self, x: str) -> str:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the smaller id as root so grouping stays canonical
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def group_blocks(
    blocks: Sequence[UIBlock],
    ctx: MergeContext,
    cfg: MergeConfig | None = None,
    parallel: int = 1,
) -> Grouping:
    """Transitive closure of should_merge over all unordered pairs.

    Pairs are evaluated in canonical block-id order; closure makes the
    result order-invariant, so ordering only stabilizes logs and caching.
    Group ids are assigned by each group's smallest member block id.
    """
    cfg = cfg or MergeConfig()
    by_id = {b.id: b for b in blocks}
    if len(by_id) != len(blocks):
        raise ValidationError("duplicate block ids in grouping input")
    ids = sorted(by_id)
    pairs = [(a, b) for i, a in enumerate(ids) for b in ids[i + 1 :]]

    def decide(pair: tuple[str, str]) -> bool:
        a, b = pair
        return should_merge(by_id[a], by_id[b], ctx, cfg)

    if parallel > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            verdicts = list(pool.map(decide, pairs))
    else:
        verdicts = [decide(p) for p in pairs]

    uf = _UnionFind(ids)
    for (a, b), ok in zip(pairs, verdicts):
        if ok:
            uf.union(a, b)

    clusters: dict[str, list[str]] = {}
    for i in ids:
        clusters.setdefault(uf.find(i), []).append(i)

    groups = []
    for k, root in enumerate(sorted(clusters)):
        members = tuple(sorted(clusters[root]))
        # largest-area member represents the group; ties go to the smallest id
        best_area = max(by_id[m].bbox.area for m in members)
        rep = min(m for m in members if by_id[m].bbox.area == best_area)
        groups.append(ComponentGroup(f"g{k:03d}", members, rep))

    grouping = Grouping(groups)
    grouping.validate_partition(ids)
    return grouping
