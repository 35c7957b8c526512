"""UI structure graphs and exact attributed matching between them.

A graph's nodes are the elements inside one block.  Every unordered node
pair carries exactly one spatial edge (vertical, horizontal, or one of
two diagonals, classified from center offsets) plus any number of
alignment edges for boundary coincidence within a pixel tolerance.  Two
blocks that repeat the same internal layout produce graphs that are
isomorphic or nearly so, which is what graph_match decides.

Spatial classification is deliberately total (every pair gets exactly one
spatial edge) so that graphs over the same node count are directly
comparable edge-for-edge.  The diagonal split uses signed center deltas
in screen coordinates (y grows downward): NW-SE when the deltas share a
sign, NE-SW otherwise.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .core import BoundingBox, UIBlock, UIElement, contains
from .errors import ValidationError


class EdgeType(str, Enum):
    VERTICAL = "Vertical"
    HORIZONTAL = "Horizontal"
    NW_SE = "NW-SE"
    NE_SW = "NE-SW"
    ALIGN_TOP = "Align-Top"
    ALIGN_BOTTOM = "Align-Bottom"
    ALIGN_LEFT = "Align-Left"
    ALIGN_RIGHT = "Align-Right"


SPATIAL_TYPES = frozenset(
    {EdgeType.VERTICAL, EdgeType.HORIZONTAL, EdgeType.NW_SE, EdgeType.NE_SW}
)
ALIGNMENT_TYPES = frozenset(
    {EdgeType.ALIGN_TOP, EdgeType.ALIGN_BOTTOM, EdgeType.ALIGN_LEFT, EdgeType.ALIGN_RIGHT}
)


@dataclass(frozen=True)
class GraphConfig:
    tau: float = 10.0        # center-offset tolerance for vertical/horizontal
    epsilon: float = 3.0     # boundary tolerance for alignment edges
    t_size: float = 0.7      # node size-similarity floor
    rho: float = 0.8         # common-subgraph coverage bar

    def __post_init__(self) -> None:
        if self.tau < 0 or self.epsilon < 0:
            raise ValidationError("tau and epsilon must be non-negative")
        if not (0 < self.t_size <= 1) or not (0 < self.rho <= 1):
            raise ValidationError("t_size and rho must lie in (0, 1]")


@dataclass(frozen=True)
class GraphNode:
    id: str
    bbox: BoundingBox


class MatchVerdict(str, Enum):
    ISOMORPHIC = "Isomorphic"
    SUBGRAPH_OF_FIRST = "SubgraphOfFirst"    # second graph embeds into the first
    SUBGRAPH_OF_SECOND = "SubgraphOfSecond"  # first graph embeds into the second
    COMMON_SUBGRAPH = "CommonSubgraph"
    NO_MATCH = "NoMatch"


_MERGEABLE = frozenset(
    {
        MatchVerdict.ISOMORPHIC,
        MatchVerdict.SUBGRAPH_OF_FIRST,
        MatchVerdict.SUBGRAPH_OF_SECOND,
        MatchVerdict.COMMON_SUBGRAPH,
    }
)


@dataclass
class GraphMatchResult:
    verdict: MatchVerdict
    mapping: dict[str, str]  # node id in g1 -> node id in g2, partial
    coverage: float
    exhausted: bool = False

    @property
    def structural_match(self) -> bool:
        return self.verdict in _MERGEABLE


def classify_spatial_edge(a, b, tau: float) -> EdgeType:
    """Classify the spatial relation between two elements' centers.

    Vertical and horizontal require the off-axis center offset to stay
    under tau; everything else is a diagonal.  Equal offsets fall through
    to the diagonal branch (neither strict inequality holds).
    """
    (ax, ay), (bx, by) = a.bbox.center, b.bbox.center
    dx, dy = abs(bx - ax), abs(by - ay)
    if dy > dx and dx < tau:
        return EdgeType.VERTICAL
    if dx > dy and dy < tau:
        return EdgeType.HORIZONTAL
    if (bx - ax) * (by - ay) > 0:
        return EdgeType.NW_SE
    return EdgeType.NE_SW


def detect_alignment_edges(a, b, epsilon: float) -> set[EdgeType]:
    """All boundary coincidences within epsilon.  A pair may earn several."""
    ab, bb = a.bbox, b.bbox
    out: set[EdgeType] = set()
    if abs(ab.x - bb.x) < epsilon:
        out.add(EdgeType.ALIGN_LEFT)
    if abs(ab.right - bb.right) < epsilon:
        out.add(EdgeType.ALIGN_RIGHT)
    if abs(ab.y - bb.y) < epsilon:
        out.add(EdgeType.ALIGN_TOP)
    if abs(ab.bottom - bb.bottom) < epsilon:
        out.add(EdgeType.ALIGN_BOTTOM)
    return out


@dataclass
class UIStructureGraph:
    block_id: str
    nodes: list[GraphNode]
    # unordered pair (i, j) with i < j -> every edge type on that pair
    pair_types: dict[tuple[int, int], frozenset[EdgeType]] = field(default_factory=dict)

    @property
    def edge_count(self) -> int:
        return sum(len(t) for t in self.pair_types.values())

    def edges(self) -> list[tuple[str, str, EdgeType]]:
        out = []
        for (i, j), types in sorted(self.pair_types.items()):
            for t in sorted(types, key=lambda e: e.value):
                out.append((self.nodes[i].id, self.nodes[j].id, t))
        return out

    def to_json(self) -> dict:
        return {
            "block_id": self.block_id,
            "nodes": [{"id": n.id, "bbox": list(n.bbox.as_tuple())} for n in self.nodes],
            "edges": [{"a": a, "b": b, "etype": t.value} for a, b, t in self.edges()],
        }


def _graph_from_nodes(block_id: str, nodes: Sequence[GraphNode], cfg: GraphConfig) -> UIStructureGraph:
    ids = [n.id for n in nodes]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate node ids in graph for block {block_id!r}")
    pair_types: dict[tuple[int, int], frozenset[EdgeType]] = {}
    for i, j in itertools.combinations(range(len(nodes)), 2):
        types = {classify_spatial_edge(nodes[i], nodes[j], cfg.tau)}
        types |= detect_alignment_edges(nodes[i], nodes[j], cfg.epsilon)
        pair_types[(i, j)] = frozenset(types)
    return UIStructureGraph(block_id, list(nodes), pair_types)


def build_graph(
    block: UIBlock, elements: Iterable[UIElement], cfg: GraphConfig
) -> UIStructureGraph:
    """Graph over the elements contained in the block, in canonical order."""
    inside = [e for e in elements if contains(block.bbox, e.bbox)]
    inside.sort(key=lambda e: (e.bbox.y, e.bbox.x, e.id))
    nodes = [GraphNode(e.id, e.bbox) for e in inside]
    return _graph_from_nodes(block.id, nodes, cfg)


def node_compatible(a: GraphNode, b: GraphNode, t_size: float) -> bool:
    """Per-axis min/max size ratio, both axes must clear t_size."""
    wa, ha = a.bbox.w, a.bbox.h
    wb, hb = b.bbox.w, b.bbox.h
    return (
        min(wa, wb) / max(wa, wb) >= t_size
        and min(ha, hb) / max(ha, hb) >= t_size
    )


class _Exhausted(Exception):
    pass


class _Budget:
    __slots__ = ("remaining",)

    def __init__(self, n: int) -> None:
        self.remaining = n

    def spend(self) -> None:
        self.remaining -= 1
        if self.remaining < 0:
            raise _Exhausted


def _compat_matrix(ga: UIStructureGraph, gb: UIStructureGraph, t_size: float) -> list[list[bool]]:
    return [[node_compatible(na, nb, t_size) for nb in gb.nodes] for na in ga.nodes]


def _embed(
    gs: UIStructureGraph,
    gl: UIStructureGraph,
    comp: list[list[bool]],
    budget: _Budget,
) -> dict[int, int] | None:
    """Injective mapping of every gs node into gl with every gs edge present.

    Edge condition is subset: the small pair's type set must be contained
    in the large pair's type set.  Returns index mapping or None.
    """
    n_s, n_l = len(gs.nodes), len(gl.nodes)
    phi: dict[int, int] = {}
    used = [False] * n_l

    def rec(k: int) -> bool:
        if k == n_s:
            return True
        for c in range(n_l):
            if used[c] or not comp[k][c]:
                continue
            budget.spend()
            ok = True
            for j, cj in phi.items():
                ts = gs.pair_types[(min(j, k), max(j, k))]
                tl = gl.pair_types[(min(cj, c), max(cj, c))]
                if not ts <= tl:
                    ok = False
                    break
            if not ok:
                continue
            phi[k] = c
            used[c] = True
            if rec(k + 1):
                return True
            del phi[k]
            used[c] = False
        return False

    return dict(phi) if rec(0) else None


def _best_common(
    g1: UIStructureGraph,
    g2: UIStructureGraph,
    comp: list[list[bool]],
    budget: _Budget,
    holder: dict,
) -> None:
    """Branch-and-bound for the partial mapping with maximum matched edges.

    A matched edge is a shared type on a mapped pair; spatial types count
    one each, alignment types one per coincidence.  Best mapping and count
    are written into holder as the search improves, so callers still see
    the best-so-far when the budget runs out mid-search.
    """
    n1, n2 = len(g1.nodes), len(g2.nodes)
    perfect = min(g1.edge_count, g2.edge_count)

    # pot[k]: total multiplicity of g1 edges whose larger endpoint is >= k
    pot = [0] * (n1 + 1)
    for k in range(n1 - 1, -1, -1):
        here = sum(len(g1.pair_types[(i, k)]) for i in range(k))
        pot[k] = pot[k + 1] + here

    phi: dict[int, int] = {}
    used = [False] * n2

    def rec(k: int, matched: int) -> None:
        if matched > holder["count"]:
            holder["count"] = matched
            holder["mapping"] = dict(phi)
        if k == n1 or holder["count"] >= perfect:
            return
        if matched + pot[k] <= holder["count"]:
            return
        for c in range(n2):
            if used[c] or not comp[k][c]:
                continue
            budget.spend()
            gain = 0
            for j, cj in phi.items():
                ts = g1.pair_types[(min(j, k), max(j, k))]
                tl = g2.pair_types[(min(cj, c), max(cj, c))]
                gain += len(ts & tl)
            phi[k] = c
            used[c] = True
            rec(k + 1, matched + gain)
            del phi[k]
            used[c] = False
        rec(k + 1, matched)  # leave node k unmapped

    rec(0, 0)


def _smaller_edge_count(g1: UIStructureGraph, g2: UIStructureGraph) -> int:
    """Edge count of the smaller graph: fewer edges, then fewer nodes, then g1."""
    e1, e2 = g1.edge_count, g2.edge_count
    if e1 != e2:
        return min(e1, e2)
    return e1


def graph_match(
    g1: UIStructureGraph,
    g2: UIStructureGraph,
    cfg: GraphConfig | None = None,
    budget: int = 200_000,
) -> GraphMatchResult:
    """Decide the structural relation between two block graphs.

    Verdict priority: Isomorphic, then either subgraph direction, then
    CommonSubgraph when the best shared structure covers at least cfg.rho
    of the smaller graph's edges.  The search is exact backtracking under
    a node-expansion budget; running out of budget is reported via the
    exhausted flag with the best verdict found so far, never an error.

    Conventions for degenerate inputs: two empty graphs are Isomorphic;
    an empty graph against a non-empty one is NoMatch (no structural
    evidence either way).
    """
    cfg = cfg or GraphConfig()
    n1, n2 = len(g1.nodes), len(g2.nodes)
    e1, e2 = g1.edge_count, g2.edge_count

    if n1 == 0 and n2 == 0:
        return GraphMatchResult(MatchVerdict.ISOMORPHIC, {}, 1.0)
    if n1 == 0 or n2 == 0:
        return GraphMatchResult(MatchVerdict.NO_MATCH, {}, 0.0)

    comp12 = _compat_matrix(g1, g2, cfg.t_size)
    bud = _Budget(budget)
    holder: dict = {"count": 0, "mapping": {}}
    denom = _smaller_edge_count(g1, g2)

    def idx_to_ids(phi: dict[int, int]) -> dict[str, str]:
        return {g1.nodes[i].id: g2.nodes[c].id for i, c in sorted(phi.items())}

    try:
        if n1 == n2 and e1 == e2:
            # subset embedding with equal edge totals forces type equality
            phi = _embed(g1, g2, comp12, bud)
            if phi is not None:
                return GraphMatchResult(MatchVerdict.ISOMORPHIC, idx_to_ids(phi), 1.0)
        else:
            if n1 <= n2 and e1 <= e2:
                phi = _embed(g1, g2, comp12, bud)
                if phi is not None:
                    return GraphMatchResult(
                        MatchVerdict.SUBGRAPH_OF_SECOND, idx_to_ids(phi), 1.0
                    )
            if n2 <= n1 and e2 <= e1:
                comp21 = [list(row) for row in zip(*comp12)]
                psi = _embed(g2, g1, comp21, bud)
                if psi is not None:
                    mapping = {
                        g1.nodes[c].id: g2.nodes[i].id for i, c in sorted(psi.items())
                    }
                    return GraphMatchResult(MatchVerdict.SUBGRAPH_OF_FIRST, mapping, 1.0)

        _best_common(g1, g2, comp12, bud, holder)
        exhausted = False
    except _Exhausted:
        exhausted = True

    coverage = holder["count"] / denom if denom > 0 else 0.0
    mapping = idx_to_ids(holder["mapping"])
    if denom > 0 and coverage >= cfg.rho:
        return GraphMatchResult(MatchVerdict.COMMON_SUBGRAPH, mapping, coverage, exhausted)
    return GraphMatchResult(MatchVerdict.NO_MATCH, mapping, coverage, exhausted)
