"""Identifier inference from operator-labelled exemplars.

Given one or more exemplar nodes for a resource role, four techniques
are tried in a fixed fallback order, each cheaper to break than the
next:

1. **ExactXPath** — the node's own XPath.  Several exemplars generalize
   to the most frequent structural path (indices kept only where they
   agree), or to an ``starts-with(@id, prefix)`` scan when every
   exemplar carries an id with a shared non-numeric stem.
2. **ParentXPath** — same, one level up.  Catches resources wrapped in
   per-instance styling tags (a bolded author name on the first post).
3. **SingleClass** — most frequent class token among the exemplars,
   falling back to the parents when the exemplars are classless.
4. **DoubleClass** — the two most frequent class tokens, for platforms
   whose single classes are too generic to be selective.

A candidate is only surfaced if its resolution covers every exemplar
(descendant-or-self, so wrapper-shaped candidates count) and, for
single-node roles, resolves exactly one element.  The operator can
still reject a surfaced candidate, which advances the iterator to the
next technique.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple

from . import xpath
from .dom import Document, Node
from .errors import (
    AmbiguousSnippet,
    NoTechniqueFits,
    RefinementExhausted,
    SnippetNotFound,
)
from .model import ConflictRecord, ResourceIdentifier, Technique


def resolve(doc: Document, identifier: ResourceIdentifier) -> List[Node]:
    """Every node the identifier matches, in document order."""
    if identifier.technique in (Technique.EXACT_XPATH, Technique.PARENT_XPATH):
        return xpath.evaluate(doc, identifier.selector)
    tokens = identifier.selector.split()
    return [n for n in doc.nodes if all(t in n.classes for t in tokens)]


def exemplars_from_snippets(doc: Document, snippets: Sequence[str]) -> List[Node]:
    """Map pasted text snippets to their tightest enclosing elements.

    Raises :class:`SnippetNotFound` when a snippet does not occur in the
    page and :class:`AmbiguousSnippet` when it occurs in more than one
    place (the operator should paste a longer stretch of text).
    """
    nodes: List[Node] = []
    for snippet in snippets:
        matches = doc.deepest_text_matches(snippet)
        if not matches:
            raise SnippetNotFound(snippet)
        if len(matches) > 1:
            raise AmbiguousSnippet(snippet)
        nodes.append(matches[0])
    return nodes


def _covers(resolved: Sequence[Node], exemplars: Sequence[Node]) -> bool:
    return all(any(r.contains(e) for r in resolved) for e in exemplars)


def _passes(resolved: Sequence[Node], exemplars: Sequence[Node], expects_many: bool) -> bool:
    if not resolved:
        return False
    if not expects_many and len(resolved) != 1:
        return False
    return _covers(resolved, exemplars)


def shared_id_prefix(nodes: Sequence[Node]) -> Optional[str]:
    """Common non-numeric id stem, e.g. ``post_101``/``post_102`` -> ``post_``.

    Returns None unless every node has an id and the stem is non-empty.
    Trailing digits are stripped so the prefix generalizes past the ids
    seen on the training page.
    """
    ids = [n.id for n in nodes]
    if not ids or any(i is None or i == "" for i in ids):
        return None
    prefix = ids[0]
    for value in ids[1:]:
        while not value.startswith(prefix):
            prefix = prefix[:-1]
            if not prefix:
                return None
    prefix = prefix.rstrip("0123456789")
    return prefix or None


def _most_frequent_structural_group(nodes: Sequence[Node]) -> List[Node]:
    counts = Counter(n.structural_xpath() for n in nodes)
    # Deterministic tie-break: highest count, then lexicographic path.
    best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    return [n for n in nodes if n.structural_xpath() == best]


def generalized_path_selector(nodes: Sequence[Node]) -> str:
    """Shared path over same-shaped nodes, indexed only where they agree.

    ``/html[1]/body[1]/div[2]/div/a[1]`` reads "within each such div,
    the first anchor": positions that vary across exemplars are left
    unindexed so the selector extends to siblings the operator never
    clicked.
    """
    segment_lists = [n.path_segments() for n in nodes]
    parts: List[str] = []
    for depth, (tag, _) in enumerate(segment_lists[0]):
        indices = {segments[depth][1] for segments in segment_lists}
        if len(indices) == 1:
            parts.append(f"/{tag}[{indices.pop()}]")
        else:
            parts.append(f"/{tag}")
    return "".join(parts)


def _frequent_class_tokens(nodes: Sequence[Node]) -> List[str]:
    counts: Counter = Counter()
    for node in nodes:
        counts.update(node.classes)
    return [token for token, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]


def _exact_xpath_candidates(doc: Document, exemplars: Sequence[Node]) -> Iterator[str]:
    if len(exemplars) == 1:
        node = exemplars[0]
        if node.id and len(doc.find_by_id(node.id)) == 1:
            yield xpath.id_selector(node.id)
        yield node.absolute_xpath()
        return
    prefix = shared_id_prefix(exemplars)
    if prefix is not None:
        yield xpath.id_prefix_selector(prefix)
    group = _most_frequent_structural_group(exemplars)
    yield generalized_path_selector(group)


def _parent_xpath_candidates(exemplars: Sequence[Node]) -> Iterator[str]:
    parents = [n.parent for n in exemplars if n.parent is not None]
    if len(parents) != len(exemplars):
        return
    if len(parents) == 1:
        yield parents[0].absolute_xpath()
        return
    group = _most_frequent_structural_group(parents)
    yield generalized_path_selector(group)


def _class_candidates(exemplars: Sequence[Node], size: int) -> Iterator[str]:
    tokens = _frequent_class_tokens(exemplars)
    if not tokens:
        # Classless resources stand in for their parent, which acts as a
        # wrapper around the real target.
        parents = [n.parent for n in exemplars if n.parent is not None]
        if len(parents) != len(exemplars):
            return
        tokens = _frequent_class_tokens(parents)
    if len(tokens) >= size:
        yield " ".join(tokens[:size])


def candidate_identifiers(
    doc: Document, exemplars: Sequence[Node], expects_many: bool
) -> Iterator[ResourceIdentifier]:
    """All acceptable identifiers in technique order, without operator input.

    Each yielded identifier already satisfies the structural acceptance
    predicate (covers every exemplar; single-node roles resolve exactly
    one element).  Iterating past the first yield is how an operator
    rejection advances to the next fallback.
    """
    if not exemplars:
        raise ValueError("at least one exemplar is required")

    def attempts() -> Iterator[Tuple[Technique, str]]:
        for selector in _exact_xpath_candidates(doc, exemplars):
            yield Technique.EXACT_XPATH, selector
        for selector in _parent_xpath_candidates(exemplars):
            yield Technique.PARENT_XPATH, selector
        for selector in _class_candidates(exemplars, 1):
            yield Technique.SINGLE_CLASS, selector
        for selector in _class_candidates(exemplars, 2):
            yield Technique.DOUBLE_CLASS, selector

    seen: set = set()
    for technique, selector in attempts():
        key = (technique, selector)
        if key in seen:
            continue
        seen.add(key)
        try:
            identifier = ResourceIdentifier(
                technique=technique, selector=selector, expects_many=expects_many
            )
        except ValueError:
            continue
        if _passes(resolve(doc, identifier), exemplars, expects_many):
            yield identifier


def infer(doc: Document, exemplars: Sequence[Node], expects_many: bool) -> ResourceIdentifier:
    """First acceptable identifier, or :class:`NoTechniqueFits`."""
    for identifier in candidate_identifiers(doc, exemplars, expects_many):
        return identifier
    raise NoTechniqueFits(f"no technique covers the {len(exemplars)} exemplar(s)")


@dataclass(frozen=True, slots=True)
class RefinementEvent:
    """One candidate tried during post-wrapper refinement."""

    identifier: ResourceIdentifier
    resolved_count: int
    outcome: str  # count_mismatch | no_coverage | rejected | accepted


DecideFn = Callable[[ResourceIdentifier, List[Node]], bool]


def refine_post_wrapper(
    doc: Document,
    snippets: Sequence[str],
    post_count: int,
    decide: DecideFn,
) -> Tuple[ResourceIdentifier, List[RefinementEvent]]:
    """Find the repeating element that wraps a whole post.

    Starting from the deepest elements containing the operator's text
    snippets, candidate identifiers are generated level by level; when a
    level offers nothing acceptable, every candidate node is replaced by
    its parent and the search repeats.  A candidate must resolve exactly
    ``post_count`` nodes (the count the operator confirmed for this
    page) and contain all the snippets, and is then shown to the
    operator via ``decide``.  Walking past the document root raises
    :class:`RefinementExhausted`.

    Returns the accepted identifier plus the full trail of attempts,
    including automatic rejections, for audit.
    """
    if post_count < 1:
        raise ValueError("post_count must be >= 1")
    if not snippets:
        raise ValueError("at least one snippet is required")
    current = exemplars_from_snippets(doc, snippets)
    events: List[RefinementEvent] = []

    while True:
        for identifier in _wrapper_candidates(doc, current):
            resolved = resolve(doc, identifier)
            if len(resolved) != post_count:
                events.append(RefinementEvent(identifier, len(resolved), "count_mismatch"))
                continue
            if not _covers(resolved, current):
                events.append(RefinementEvent(identifier, len(resolved), "no_coverage"))
                continue
            if decide(identifier, resolved):
                events.append(RefinementEvent(identifier, len(resolved), "accepted"))
                return identifier, events
            events.append(RefinementEvent(identifier, len(resolved), "rejected"))
        parents = []
        for node in current:
            if node.parent is None:
                raise RefinementExhausted(
                    "walked to the document root without an accepted wrapper"
                )
            parents.append(node.parent)
        deduped: List[Node] = []
        seen_ids: set = set()
        for node in parents:
            if id(node) not in seen_ids:
                seen_ids.add(id(node))
                deduped.append(node)
        current = deduped


def _wrapper_candidates(doc: Document, nodes: Sequence[Node]) -> Iterator[ResourceIdentifier]:
    """Technique-ordered candidates for one refinement level."""
    emitted: set = set()

    def emit(technique: Technique, selector: str) -> Optional[ResourceIdentifier]:
        key = (technique, selector)
        if key in emitted:
            return None
        emitted.add(key)
        try:
            return ResourceIdentifier(technique=technique, selector=selector, expects_many=True)
        except ValueError:
            return None

    prefix = shared_id_prefix(nodes)
    if prefix is not None:
        identifier = emit(Technique.EXACT_XPATH, xpath.id_prefix_selector(prefix))
        if identifier:
            yield identifier
    group = _most_frequent_structural_group(nodes)
    if len(group) == len(nodes):
        identifier = emit(Technique.EXACT_XPATH, generalized_path_selector(group))
        if identifier:
            yield identifier
    tokens = _frequent_class_tokens(nodes)
    if tokens:
        identifier = emit(Technique.SINGLE_CLASS, tokens[0])
        if identifier:
            yield identifier
    if len(tokens) >= 2:
        identifier = emit(Technique.DOUBLE_CLASS, " ".join(tokens[:2]))
        if identifier:
            yield identifier


AskConflictFn = Callable[[int, List[Node]], bool]


def detect_next_button_conflict(
    identifier: ResourceIdentifier, inner_page: Document, ask: AskConflictFn
) -> Optional[ConflictRecord]:
    """Check a next-button identifier against an inner page.

    On first pages the back button does not exist yet, so platforms that
    share one class between the two directions train cleanly and then
    resolve two elements on page 2.  When more than one node resolves,
    ``ask(count, nodes)`` puts the question to the operator: ``True``
    means "these are several distinct elements" and records a conflict
    whose chosen element is the second one (document order puts the
    back button first on such platforms).  ``False`` means the matches
    are one logical element and no conflict is recorded.
    """
    resolved = resolve(inner_page, identifier)
    if len(resolved) <= 1:
        return None
    if ask(len(resolved), resolved):
        return ConflictRecord(resolved_count=len(resolved), chosen_index=2)
    return None
