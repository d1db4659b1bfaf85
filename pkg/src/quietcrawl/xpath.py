"""Evaluator for the XPath subset the trainer emits.

Identifier inference only ever produces a few selector shapes:

* fully or partially indexed absolute paths: ``/html[1]/body[1]/div[2]/a``
* structural paths with no indices: ``/html/body/div/div/span``
* id lookups: ``//*[@id="login_button"]``
* id prefix scans: ``//*[starts-with(@id,"post_")]``

The grammar below covers those (and simple attribute-equality or
class-style predicates on any step) and nothing else.  Anything outside
it raises :class:`~quietcrawl.errors.InvalidSelector`, which is exactly
the validation the blueprint loader wants: an identifier that cannot be
evaluated here could never have been produced by training.

Positional predicates follow XPath child-axis semantics: ``div[2]``
means "second ``div`` among the sibling ``div`` elements of the current
context", not "second match overall".
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional, Union

from .dom import Document, Node
from .errors import InvalidSelector


@dataclass(frozen=True, slots=True)
class Pos:
    index: int  # 1-based


@dataclass(frozen=True, slots=True)
class AttrEq:
    name: str
    value: str


@dataclass(frozen=True, slots=True)
class AttrStartsWith:
    name: str
    value: str


@dataclass(frozen=True, slots=True)
class AttrPresent:
    name: str


Predicate = Union[Pos, AttrEq, AttrStartsWith, AttrPresent]


@dataclass(frozen=True, slots=True)
class Step:
    """One location step: axis, node test and predicates."""

    descendant: bool  # True for '//', False for '/'
    name: str  # tag name or '*'
    predicates: tuple


_NAME = r"[A-Za-z_][A-Za-z0-9_.:-]*"
_STEP_RE = re.compile(rf"(//|/)({_NAME}|\*)((?:\[[^\]]*\])*)")
_PRED_RE = re.compile(r"\[([^\]]*)\]")
_POS_RE = re.compile(r"^\s*(\d+)\s*$")
_ATTR_EQ_RE = re.compile(rf"^\s*@({_NAME})\s*=\s*(\"([^\"]*)\"|'([^']*)')\s*$")
_STARTS_RE = re.compile(
    rf"^\s*starts-with\(\s*@({_NAME})\s*,\s*(\"([^\"]*)\"|'([^']*)')\s*\)\s*$"
)
_ATTR_PRESENT_RE = re.compile(rf"^\s*@({_NAME})\s*$")


def parse(selector: str) -> List[Step]:
    """Parse a selector into steps, raising :class:`InvalidSelector` on any deviation."""
    if not isinstance(selector, str) or not selector.strip():
        raise InvalidSelector("empty selector")
    text = selector.strip()
    if not text.startswith("/"):
        raise InvalidSelector(f"selector must be absolute: {selector!r}")
    steps: List[Step] = []
    pos = 0
    while pos < len(text):
        match = _STEP_RE.match(text, pos)
        if match is None or match.start() != pos:
            raise InvalidSelector(f"cannot parse step at offset {pos} in {selector!r}")
        axis, name, raw_preds = match.groups()
        predicates = tuple(_parse_predicate(p, selector) for p in _PRED_RE.findall(raw_preds))
        steps.append(Step(descendant=(axis == "//"), name=name, predicates=predicates))
        pos = match.end()
    if not steps:
        raise InvalidSelector(f"no steps in {selector!r}")
    return steps


def _parse_predicate(body: str, selector: str) -> Predicate:
    match = _POS_RE.match(body)
    if match:
        index = int(match.group(1))
        if index < 1:
            raise InvalidSelector(f"positional predicate must be >= 1 in {selector!r}")
        return Pos(index)
    match = _ATTR_EQ_RE.match(body)
    if match:
        return AttrEq(match.group(1), match.group(3) if match.group(3) is not None else match.group(4))
    match = _STARTS_RE.match(body)
    if match:
        return AttrStartsWith(match.group(1), match.group(3) if match.group(3) is not None else match.group(4))
    match = _ATTR_PRESENT_RE.match(body)
    if match:
        return AttrPresent(match.group(1))
    raise InvalidSelector(f"unsupported predicate [{body}] in {selector!r}")


def validate(selector: str) -> None:
    """Parse-and-discard; raises on invalid selectors."""
    parse(selector)


def _matches_test(node: Node, name: str) -> bool:
    return name == "*" or node.tag == name


def _attr_filter(nodes: List[Node], pred: Predicate) -> List[Node]:
    if isinstance(pred, AttrEq):
        return [n for n in nodes if n.attrs.get(pred.name) == pred.value]
    if isinstance(pred, AttrStartsWith):
        return [n for n in nodes if n.attrs.get(pred.name, None) is not None
                and n.attrs[pred.name].startswith(pred.value)]
    if isinstance(pred, AttrPresent):
        return [n for n in nodes if pred.name in n.attrs]
    raise TypeError(pred)


def _apply_step(context: List[Node], step: Step) -> List[Node]:
    result: List[Node] = []
    seen = set()
    for ctx in context:
        if step.descendant:
            # Descendant-or-self axis grouped under one context: positional
            # predicates then index into the combined candidate list.
            groups = [[n for n in ctx.iter_subtree() if _matches_test(n, step.name)]]
        else:
            groups = [[n for n in ctx.element_children if _matches_test(n, step.name)]]
        for group in groups:
            candidates = group
            for pred in step.predicates:
                if isinstance(pred, Pos):
                    candidates = [candidates[pred.index - 1]] if len(candidates) >= pred.index else []
                else:
                    candidates = _attr_filter(candidates, pred)
            for node in candidates:
                if id(node) not in seen:
                    seen.add(id(node))
                    result.append(node)
    result.sort(key=lambda n: n.doc_order)
    return result


def evaluate(doc: Document, selector: str) -> List[Node]:
    """All nodes the selector resolves to, in document order."""
    steps = parse(selector)
    first = steps[0]
    if first.descendant:
        context = [doc.root]
        remaining = steps
    else:
        # An absolute '/html...' path starts its first step at the root
        # element itself rather than at its children.
        if not _matches_test(doc.root, first.name):
            return []
        candidates = [doc.root]
        for pred in first.predicates:
            if isinstance(pred, Pos):
                candidates = candidates if pred.index == 1 else []
            else:
                candidates = _attr_filter(candidates, pred)
        context = candidates
        remaining = steps[1:]
    for step in remaining:
        if not context:
            return []
        context = _apply_step(context, step)
    return context


def id_selector(value: str) -> str:
    return f'//*[@id="{value}"]'


def id_prefix_selector(prefix: str) -> str:
    return f'//*[starts-with(@id,"{prefix}")]'
