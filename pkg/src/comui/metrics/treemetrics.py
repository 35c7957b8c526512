"""Structural code metrics over DOM trees.

Tree BLEU (height-1 subtree recall), exact ordered tree edit distance,
TED-based similarity, duplicate-component detection with the resulting
repetitive ratio, and the block-level reuse rate.
"""

from __future__ import annotations

from collections import Counter

from ..errors import BothEmpty, NotAPartition
from .dom import DomNode, root_of, serialize_with_spans, tree_encoding


def _postorder(root: DomNode) -> list[DomNode]:
    out: list[DomNode] = []
    stack: list[tuple[DomNode, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            out.append(node)
        else:
            stack.append((node, True))
            for child in reversed(node.children):
                stack.append((child, False))
    return out


def _nodes_for_edit(tree) -> list[DomNode]:
    """Postorder node list; the virtual empty document counts as zero
    nodes so that edit costs against it are pure inserts/deletes."""
    root = root_of(tree)
    if root.tag == "#document" and not root.children:
        return []
    return _postorder(root)


def tree_size(tree) -> int:
    return len(_nodes_for_edit(tree))


def tree_bleu(gen, ref) -> float:
    """Recall of the reference's height-1 subtrees in the generation.

    A height-1 subtree is (parent tag, ordered child-tag sequence);
    counting is multiset intersection.  A reference with no internal
    nodes has nothing to recall and scores 1 by convention.
    """
    ref_subs = _height1_subtrees(root_of(ref))
    total = sum(ref_subs.values())
    if total == 0:
        return 1.0
    gen_subs = _height1_subtrees(root_of(gen))
    hit = sum((ref_subs & gen_subs).values())
    return hit / total


def _height1_subtrees(root: DomNode) -> Counter:
    subs: Counter = Counter()
    for node in root.iter_nodes():
        if node.children:
            subs[(node.tag, tuple(c.tag for c in node.children))] += 1
    return subs


def ted(t1, t2) -> int:
    """Exact edit distance between ordered labeled trees, unit costs
    for insert, delete, and relabel (Zhang-Shasha dynamic program)."""
    post1 = _nodes_for_edit(t1)
    post2 = _nodes_for_edit(t2)
    n1, n2 = len(post1), len(post2)
    if n1 == 0 or n2 == 0:
        return n1 + n2

    lml1 = _leftmost_leaves(post1)
    lml2 = _leftmost_leaves(post2)
    kr1 = _keyroots(lml1)
    kr2 = _keyroots(lml2)
    tags1 = [n.tag for n in post1]
    tags2 = [n.tag for n in post2]

    td = [[0] * n2 for _ in range(n1)]
    for i in kr1:
        for j in kr2:
            _treedist(i, j, tags1, tags2, lml1, lml2, td)
    return td[n1 - 1][n2 - 1]


def _leftmost_leaves(post: list[DomNode]) -> list[int]:
    index = {id(n): i for i, n in enumerate(post)}
    lml = [0] * len(post)
    for i, node in enumerate(post):
        if not node.children:
            lml[i] = i
        else:
            lml[i] = lml[index[id(node.children[0])]]
    return lml


def _keyroots(lml: list[int]) -> list[int]:
    # highest postorder index for each distinct leftmost-leaf value
    seen: set[int] = set()
    roots = []
    for i in range(len(lml) - 1, -1, -1):
        if lml[i] not in seen:
            seen.add(lml[i])
            roots.append(i)
    roots.reverse()
    return roots


def _treedist(i, j, tags1, tags2, lml1, lml2, td) -> None:
    m = i - lml1[i] + 2
    n = j - lml2[j] + 2
    ioff = lml1[i] - 1
    joff = lml2[j] - 1
    fd = [[0] * n for _ in range(m)]
    for x in range(1, m):
        fd[x][0] = fd[x - 1][0] + 1
    for y in range(1, n):
        fd[0][y] = fd[0][y - 1] + 1
    for x in range(1, m):
        for y in range(1, n):
            if lml1[x + ioff] == lml1[i] and lml2[y + joff] == lml2[j]:
                cost = 0 if tags1[x + ioff] == tags2[y + joff] else 1
                fd[x][y] = min(
                    fd[x - 1][y] + 1,
                    fd[x][y - 1] + 1,
                    fd[x - 1][y - 1] + cost,
                )
                td[x + ioff][y + joff] = fd[x][y]
            else:
                p = lml1[x + ioff] - 1 - ioff
                q = lml2[y + joff] - 1 - joff
                fd[x][y] = min(
                    fd[x - 1][y] + 1,
                    fd[x][y - 1] + 1,
                    fd[p][q] + td[x + ioff][y + joff],
                )


def tree_similarity(t1, t2) -> float:
    """1 - TED/max(|T1|,|T2|).  Not clamped: heavily divergent trees
    can score below zero, which simply never passes a duplicate
    threshold."""
    s1 = tree_size(t1)
    s2 = tree_size(t2)
    if s1 == 0 and s2 == 0:
        raise BothEmpty("tree_similarity needs at least one nonempty tree")
    return 1.0 - ted(t1, t2) / max(s1, s2)


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the smaller key as root for determinism
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def duplicate_classes(doc, tau_dup: float = 0.8, min_nodes: int = 5):
    """Find duplicated components in a document.

    Candidates are element subtrees with >= min_nodes nodes.  Two
    candidates are duplicates when their structural encodings match
    exactly, or when their TED similarity reaches tau_dup; classes are
    the transitive closure of those links.  Within a class, a member
    whose ancestor sits in the same class is dropped (the ancestor
    already accounts for it).  Returns classes with >= 2 surviving
    members, each as a document-ordered list of nodes.
    """
    root = root_of(doc)
    order = {id(n): k for k, n in enumerate(root.iter_nodes())}
    candidates = [
        n for n in root.iter_nodes()
        if n.tag != "#document" and n.node_count >= min_nodes
    ]
    if len(candidates) < 2:
        return []

    descendants = {
        id(c): {id(d) for d in c.iter_nodes() if d is not c} for c in candidates
    }
    encodings = {id(c): tree_encoding(c) for c in candidates}

    uf = _UnionFind(range(len(candidates)))
    for i in range(len(candidates)):
        for j in range(i + 1, len(candidates)):
            a, b = candidates[i], candidates[j]
            if encodings[id(a)] == encodings[id(b)]:
                uf.union(i, j)
            elif tree_similarity(a, b) >= tau_dup:
                uf.union(i, j)

    by_root: dict[int, list[DomNode]] = {}
    for i, cand in enumerate(candidates):
        by_root.setdefault(uf.find(i), []).append(cand)

    classes = []
    for _, members in sorted(by_root.items()):
        members.sort(key=lambda n: order[id(n)])
        kept = [
            m for m in members
            if not any(id(m) in descendants[id(other)] for other in members if other is not m)
        ]
        if len(kept) >= 2:
            classes.append(kept)
    return classes


def repetitive_ratio(doc, tau_dup: float = 0.8, min_nodes: int = 5) -> float:
    """Percentage of document lines occupied by redundant duplicate
    components.

    Every duplicate class contributes all members except its first
    (document order) representative; their line spans in the canonical
    serialization are counted once each, against the document's total
    line count.
    """
    text, spans = serialize_with_spans(doc)
    total = text.count("\n") + 1 if text else 0
    if total == 0:
        return 0.0
    covered: set[int] = set()
    for members in duplicate_classes(doc, tau_dup=tau_dup, min_nodes=min_nodes):
        for extra in members[1:]:
            start, end = spans[extra]
            covered.update(range(start, end + 1))
    return 100.0 * len(covered) / total


def reuse_rate(blocks, groups, components_used: dict) -> float:
    """(|B| - |G| + |C>=2|) / |B|, clamped to [0, 1].

    blocks: block ids; groups: iterable of id groups partitioning the
    blocks; components_used: component name -> instantiation count.
    """
    block_ids = [b if isinstance(b, str) else b.id for b in blocks]
    block_set = set(block_ids)
    if len(block_set) != len(block_ids):
        raise NotAPartition("duplicate block ids")
    seen: set[str] = set()
    group_list = [list(g) for g in groups]
    for group in group_list:
        for member in group:
            if member in seen:
                raise NotAPartition(f"block {member!r} appears in two groups")
            if member not in block_set:
                raise NotAPartition(f"group member {member!r} is not a known block")
            seen.add(member)
    if seen != block_set:
        missing = sorted(block_set - seen)
        raise NotAPartition(f"blocks missing from grouping: {missing}")

    n = len(block_set)
    if n == 0:
        return 0.0
    reused_components = sum(1 for count in components_used.values() if count >= 2)
    rate = (n - len(group_list) + reused_components) / n
    return max(0.0, min(1.0, rate))
