"""Lenient HTML parsing into a minimal DOM, plus canonical forms.

The tree keeps only what the structural metrics need: lowercase tag
names, ordered children, attribute maps, and whitespace-normalized text
payloads.  Parsing never raises; malformed input degrades to a
"#document" wrapper around whatever could be recovered.

Two canonical forms are derived here and shared by the tree metrics:

* ``tree_encoding``: a string capturing tags and child order only.
  Two subtrees have equal encodings iff they are structurally
  identical (attributes and text ignored).
* ``serialize_with_spans``: a deterministic pretty-print used for
  line accounting; every node maps to the inclusive line range it
  occupies in the printed document.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from html.parser import HTMLParser

# elements that never take children and never get a closing tag
VOID_TAGS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
})


@dataclass(eq=False)
class DomNode:
    """One element.  Identity semantics: nodes are unique tree positions."""

    tag: str
    attrs: dict[str, str] = field(default_factory=dict)
    children: list["DomNode"] = field(default_factory=list)
    text: str = ""
    span: tuple[int, int] | None = None  # (line, col) of the start tag in the source

    def iter_nodes(self):
        """Preorder traversal, self first."""
        yield self
        for child in self.children:
            yield from child.iter_nodes()

    @property
    def node_count(self) -> int:
        return sum(1 for _ in self.iter_nodes())


@dataclass(eq=False)
class DomTree:
    root: DomNode

    def iter_nodes(self):
        return self.root.iter_nodes()

    @property
    def node_count(self) -> int:
        return self.root.node_count

    @property
    def is_empty(self) -> bool:
        """True for the tree produced from markup with no elements."""
        return self.root.tag == "#document" and not self.root.children


def root_of(tree) -> DomNode:
    return tree.root if isinstance(tree, DomTree) else tree


class _LenientParser(HTMLParser):
    """Stack-based recovery parser: unclosed tags auto-close, stray
    end tags are dropped, unknown tags pass through untouched."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.doc = DomNode("#document")
        self.stack = [self.doc]

    def _attach(self, tag, attrs):
        node = DomNode(
            tag,
            {k: (v if v is not None else "") for k, v in attrs},
            span=self.getpos(),
        )
        self.stack[-1].children.append(node)
        return node

    def handle_starttag(self, tag, attrs):
        node = self._attach(tag, attrs)
        if tag not in VOID_TAGS:
            self.stack.append(node)

    def handle_startendtag(self, tag, attrs):
        self._attach(tag, attrs)

    def handle_endtag(self, tag):
        for depth in range(len(self.stack) - 1, 0, -1):
            if self.stack[depth].tag == tag:
                del self.stack[depth:]
                return
        # close tag with no matching open element: ignore

    def handle_data(self, data):
        piece = " ".join(data.split())
        if piece:
            top = self.stack[-1]
            top.text = f"{top.text} {piece}" if top.text else piece


def parse_dom(html: str) -> DomTree:
    """Error-tolerant parse.  A document with exactly one top-level
    element and no stray top-level text gets that element as root;
    anything else is wrapped under a virtual "#document" node."""
    parser = _LenientParser()
    parser.feed(html)
    parser.close()
    doc = parser.doc
    if len(doc.children) == 1 and not doc.text:
        return DomTree(doc.children[0])
    return DomTree(doc)


def tree_encoding(node) -> str:
    """Canonical structural string: tag names and child order, nothing
    else.  Equal encodings iff structurally identical subtrees."""
    root = root_of(node)
    if not root.children:
        return root.tag
    inner = ",".join(tree_encoding(c) for c in root.children)
    return f"{root.tag}({inner})"


def _emit(node: DomNode, depth: int, lines: list[str], spans: dict) -> None:
    pad = "  " * depth
    attrs = "".join(f' {k}="{v}"' for k, v in sorted(node.attrs.items()))
    start = len(lines)
    if node.tag in VOID_TAGS:
        lines.append(f"{pad}<{node.tag}{attrs}>")
    elif not node.children:
        lines.append(f"{pad}<{node.tag}{attrs}>{node.text}</{node.tag}>")
    else:
        lines.append(f"{pad}<{node.tag}{attrs}>")
        if node.text:
            lines.append(f"{pad}  {node.text}")
        for child in node.children:
            _emit(child, depth + 1, lines, spans)
        lines.append(f"{pad}</{node.tag}>")
    spans[node] = (start, len(lines) - 1)


def serialize_with_spans(tree) -> tuple[str, dict[DomNode, tuple[int, int]]]:
    """Deterministic pretty-print (2-space indent, sorted attributes).

    Returns the text and a map node -> (first, last) line, 0-based
    inclusive, in the printed output.  The virtual "#document" wrapper
    contributes no lines of its own; its span covers the whole print.
    """
    root = root_of(tree)
    lines: list[str] = []
    spans: dict[DomNode, tuple[int, int]] = {}
    if root.tag == "#document":
        for child in root.children:
            _emit(child, 0, lines, spans)
        spans[root] = (0, len(lines) - 1)
    else:
        _emit(root, 0, lines, spans)
    return "\n".join(lines), spans


def serialize(tree) -> str:
    text, _ = serialize_with_spans(tree)
    return text


def line_count(tree) -> int:
    text = serialize(tree)
    return text.count("\n") + 1 if text else 0
