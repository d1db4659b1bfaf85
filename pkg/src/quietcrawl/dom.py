"""HTML document model.

Parses markup with the stdlib ``html.parser`` into a small element tree
that knows how to report each node's absolute XPath.  The parser is
forgiving in the way browsers are forgiving: void elements never take a
closing tag, a handful of container tags implicitly close their
predecessor (``<li>`` closes an open ``<li>`` and so on), stray closing
tags are ignored, and a missing ``<html>``/``<body>`` shell is
synthesized so every document has a single root.

Only element and text nodes are modelled.  Comments, processing
instructions and doctypes are dropped; original page bytes are always
preserved elsewhere when fidelity matters.
"""

from __future__ import annotations

import re
from html import escape
from html.parser import HTMLParser
from typing import Callable, Iterator, Optional, Union


VOID_ELEMENTS = frozenset(
    "area base br col embed hr img input link meta param source track wbr".split()
)

# Start of <key> implicitly closes an open element whose tag is in the set.
_CLOSE_BEFORE = {
    "p": {"p"},
    "li": {"li"},
    "dt": {"dd", "dt"},
    "dd": {"dd", "dt"},
    "td": {"td", "th"},
    "th": {"td", "th"},
    "tr": {"tr", "td", "th"},
    "tbody": {"thead", "tbody", "tfoot", "tr", "td", "th"},
    "tfoot": {"thead", "tbody", "tr", "td", "th"},
    "option": {"option"},
}

_RAW_TEXT_TAGS = frozenset({"script", "style"})

_WS = re.compile(r"\s+")


class Node:
    """One element in the parsed tree."""

    __slots__ = ("tag", "attrs", "parent", "children", "doc_order", "_norm_text")

    def __init__(self, tag: str, attrs: Optional[dict] = None, parent: Optional["Node"] = None):
        self.tag = tag
        self.attrs: dict = attrs or {}
        self.parent = parent
        self.children: list[Union["Node", str]] = []
        self.doc_order = -1
        self._norm_text: Optional[str] = None

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        ident = f" id={self.attrs['id']!r}" if "id" in self.attrs else ""
        return f"<Node {self.tag}{ident} at {self.absolute_xpath()}>"

    @property
    def id(self) -> Optional[str]:
        return self.attrs.get("id")

    @property
    def classes(self) -> tuple:
        return tuple(self.attrs.get("class", "").split())

    @property
    def element_children(self) -> list:
        return [c for c in self.children if isinstance(c, Node)]

    @property
    def direct_text(self) -> str:
        return "".join(c for c in self.children if isinstance(c, str))

    @property
    def full_text(self) -> str:
        parts: list[str] = []
        for child in self.children:
            if isinstance(child, str):
                parts.append(child)
            else:
                parts.append(child.full_text)
        return "".join(parts)

    @property
    def normalized_text(self) -> str:
        """Whitespace-collapsed text content; used for snippet matching."""
        if self._norm_text is None:
            self._norm_text = _WS.sub(" ", self.full_text).strip()
        return self._norm_text

    def sibling_index(self) -> int:
        """1-based position among same-tag element siblings."""
        if self.parent is None:
            return 1
        index = 0
        for sibling in self.parent.element_children:
            if sibling.tag == self.tag:
                index += 1
            if sibling is self:
                return index
        raise RuntimeError("node detached from parent")

    def path_segments(self) -> list:
        """(tag, 1-based index) pairs from the root down to this node."""
        chain: list[Node] = []
        node: Optional[Node] = self
        while node is not None:
            chain.append(node)
            node = node.parent
        chain.reverse()
        return [(n.tag, n.sibling_index()) for n in chain]

    def absolute_xpath(self) -> str:
        """Fully indexed path, e.g. ``/html[1]/body[1]/div[2]/a[1]``."""
        return "".join(f"/{tag}[{idx}]" for tag, idx in self.path_segments())

    def structural_xpath(self) -> str:
        """Path with positional indices stripped, e.g. ``/html/body/div/a``."""
        return "".join(f"/{tag}" for tag, _ in self.path_segments())

    def iter_subtree(self) -> Iterator["Node"]:
        """This node and every descendant element, in document order."""
        yield self
        for child in self.children:
            if isinstance(child, Node):
                yield from child.iter_subtree()

    def contains(self, other: "Node") -> bool:
        """Descendant-or-self containment."""
        node: Optional[Node] = other
        while node is not None:
            if node is self:
                return True
            node = node.parent
        return False

    def ancestors(self) -> Iterator["Node"]:
        node = self.parent
        while node is not None:
            yield node
            node = node.parent


class Document:
    """Parsed page: a single ``<html>`` root plus lookup indexes."""

    def __init__(self, root: Node):
        self.root = root
        self.nodes: list[Node] = list(root.iter_subtree())
        for order, node in enumerate(self.nodes):
            node.doc_order = order
        self.by_id: dict = {}
        for node in self.nodes:
            node_id = node.id
            if node_id is not None:
                self.by_id.setdefault(node_id, []).append(node)

    def find_by_id(self, value: str) -> list:
        return list(self.by_id.get(value, []))

    def find_by_class(self, token: str) -> list:
        return [n for n in self.nodes if token in n.classes]

    def deepest_text_matches(self, snippet: str) -> list:
        """Deepest elements whose text contains the snippet.

        Both sides are whitespace-normalized.  A match is "deepest" when
        no child element also matches, which pins a snippet to the
        tightest enclosing element.
        """
        needle = _WS.sub(" ", snippet).strip()
        if not needle:
            return []
        matches = [n for n in self.nodes if needle in n.normalized_text]
        deepest = []
        for node in matches:
            if not any(needle in c.normalized_text for c in node.element_children):
                deepest.append(node)
        return deepest


class _TreeBuilder(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.top_level: list[Union[Node, str]] = []
        self.stack: list[Node] = []

    def _append(self, item: Union[Node, str]) -> None:
        if self.stack:
            self.stack[-1].children.append(item)
        else:
            self.top_level.append(item)

    def _implicit_close(self, tag: str) -> None:
        closes = _CLOSE_BEFORE.get(tag)
        if not closes:
            return
        while self.stack and self.stack[-1].tag in closes:
            self.stack.pop()

    def handle_starttag(self, tag: str, attrs: list) -> None:
        self._implicit_close(tag)
        attr_map: dict = {}
        for name, value in attrs:
            if name not in attr_map:
                attr_map[name] = value if value is not None else ""
        node = Node(tag, attr_map, parent=self.stack[-1] if self.stack else None)
        self._append(node)
        if tag not in VOID_ELEMENTS:
            self.stack.append(node)

    def handle_startendtag(self, tag: str, attrs: list) -> None:
        self._implicit_close(tag)
        attr_map: dict = {}
        for name, value in attrs:
            if name not in attr_map:
                attr_map[name] = value if value is not None else ""
        node = Node(tag, attr_map, parent=self.stack[-1] if self.stack else None)
        self._append(node)

    def handle_endtag(self, tag: str) -> None:
        if tag in VOID_ELEMENTS:
            return
        for depth in range(len(self.stack) - 1, -1, -1):
            if self.stack[depth].tag == tag:
                del self.stack[depth:]
                return
        # Stray closing tag: ignore.

    def handle_data(self, data: str) -> None:
        if data:
            self._append(data)


def _ensure_shell(items: list) -> Node:
    """Wrap parsed top-level content in an ``<html>``/``<body>`` shell."""
    elements = [i for i in items if isinstance(i, Node)]
    if len(elements) == 1 and elements[0].tag == "html":
        return elements[0]
    html_node = next((e for e in elements if e.tag == "html"), None)
    if html_node is None:
        html_node = Node("html")
    body = next((c for c in html_node.element_children if c.tag == "body"), None)
    for item in items:
        if isinstance(item, Node) and item is html_node:
            continue
        if isinstance(item, Node) and item.tag in ("head", "body"):
            item.parent = html_node
            html_node.children.append(item)
            if item.tag == "body":
                body = item
            continue
        if body is None:
            body = Node("body", parent=html_node)
            html_node.children.append(body)
        if isinstance(item, Node):
            item.parent = body
        body.children.append(item)
    return html_node


def parse_html(text: str) -> Document:
    """Parse markup into a :class:`Document` with a guaranteed single root."""
    builder = _TreeBuilder()
    builder.feed(text)
    builder.close()
    return Document(_ensure_shell(builder.top_level))


def serialize(node: Node) -> str:
    """Render a subtree back to markup.

    Text is re-escaped, so byte fidelity with the source is not promised;
    raw-text elements (``script``/``style``) are emitted verbatim.
    """
    parts: list[str] = []
    _serialize_into(node, parts)
    return "".join(parts)


def _serialize_into(node: Node, parts: list) -> None:
    attrs = "".join(f' {k}="{escape(v, quote=True)}"' for k, v in node.attrs.items())
    if node.tag in VOID_ELEMENTS:
        parts.append(f"<{node.tag}{attrs}>")
        return
    parts.append(f"<{node.tag}{attrs}>")
    raw = node.tag in _RAW_TEXT_TAGS
    for child in node.children:
        if isinstance(child, str):
            parts.append(child if raw else escape(child, quote=False))
        else:
            _serialize_into(child, parts)
    parts.append(f"</{node.tag}>")


def document_to_html(doc: Document) -> str:
    return "<!DOCTYPE html>\n" + serialize(doc.root)


NodePredicate = Callable[[Node], bool]
