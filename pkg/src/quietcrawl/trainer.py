"""Operator-in-the-loop training backend.

Training never touches the live site while the operator works: each
workflow page is saved once (markup byte-for-byte, subresources in a
local store), then served back instrumented so that clicks and pasted
snippets flow to this backend as JSON. Inference runs against the saved
copy, the operator confirms or rejects each candidate on a highlight
render, and a finished session writes the assembled blueprint.

The instrumented copy differs from the original only additively: every
original element gains a ``data-cstl-path`` attribute carrying its
absolute XPath, and a handful of whole elements marked
``data-cstl-injected`` are added (a ``<base>`` pointing subresources at
the asset store, the operator banner, script slots for the optional
browser UI). In-page behavior such as click capture and navigation
suppression lives in that UI script; the backend works equally well
when it is absent, driven by direct POSTs from a scripted operator.

Wire protocol (loopback HTTP, JSON bodies):

* ``GET /session`` — workflow state.
* ``GET /page/{page_id}`` — instrumented saved page.
* ``GET /collector/{page_id}`` — snippet collector form for the wrapper
  step. Submits snippets together with the operator-confirmed post
  count of the page.
* ``GET /highlight`` — current pending candidate rendered on its page
  with matches marked; during the conflict step, the next-button
  resolution on the inner page.
* ``POST /label`` — ``{session_id, page_id, role, node_path}`` for
  click roles, ``{session_id, page_id, role, snippets, post_count}``
  for the wrapper. Optional roles accept ``{.., absent: true}``.
* ``POST /decision`` — ``{session_id, accept}``. With a candidate
  pending this confirms or rejects it (reject advances to the next
  fallback technique). During the conflict step ``accept: true`` means
  "the highlighted matches are several distinct elements" and records
  the conflict; ``false`` means they are one element.
* ``GET /asset/{page_id}/...`` — stored subresource; unknown root
  paths also fall back to the asset store so site-absolute URLs in
  saved pages keep rendering.

Live forums gate section and thread pages behind the login, so only
the login and home pages are fetched up front. Once the login roles
are confirmed the service logs in with the trained identifiers and the
supplied credentials, then saves the remaining workflow pages through
the authenticated session.
"""

from __future__ import annotations

import json
import mimetypes
import queue
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple
from urllib.parse import urljoin, urlparse

from . import xpath
from .dom import Document, Node, parse_html, document_to_html
from .errors import QuietcrawlError, ConfigError
from .fetch import BrowserSession
from .inference import (
    candidate_identifiers,
    refine_post_wrapper,
    resolve,
)
from .model import (
    ConflictRecord,
    ForumBlueprint,
    PageKind,
    ResourceIdentifier,
    ResourceRole,
    blueprint_to_dict,
    save_blueprint,
)

MARKER_PREFIX = "cstl-"
_INJECTED_ATTR = "data-cstl-injected"
_PATH_ATTR = "data-cstl-path"

PAGE_KEYS = ("login", "home", "section", "thread", "section_inner", "thread_inner")
REQUIRED_PAGE_KEYS = ("login", "home", "section", "thread")


class WorkflowStep(str, Enum):
    LOGIN = "Login"
    HOME = "Home"
    SECTION = "Section"
    THREAD_PAGE = "ThreadPage"
    WRAPPER_REFINEMENT = "WrapperRefinement"
    CONFLICT_CHECK = "ConflictCheck"
    DONE = "Done"


_STEP_ORDER = (
    WorkflowStep.LOGIN,
    WorkflowStep.HOME,
    WorkflowStep.SECTION,
    WorkflowStep.THREAD_PAGE,
    WorkflowStep.WRAPPER_REFINEMENT,
    WorkflowStep.CONFLICT_CHECK,
    WorkflowStep.DONE,
)

# Each labeling step: (page key, page kind, ordered roles).
_STEP_ROLES: Dict[WorkflowStep, Tuple[str, PageKind, Tuple[ResourceRole, ...]]] = {
    WorkflowStep.LOGIN: (
        "login",
        PageKind.LOGIN_PAGE,
        (ResourceRole.USERNAME_FIELD, ResourceRole.PASSWORD_FIELD, ResourceRole.LOGIN_SUBMIT),
    ),
    WorkflowStep.HOME: ("home", PageKind.HOME_PAGE, (ResourceRole.SECTION_LINK,)),
    WorkflowStep.SECTION: (
        "section",
        PageKind.SECTION_INDEX,
        (ResourceRole.THREAD_LINK, ResourceRole.THREAD_REPLIES, ResourceRole.NEXT_PAGE_BUTTON),
    ),
    WorkflowStep.THREAD_PAGE: (
        "thread",
        PageKind.THREAD_PAGE,
        (
            ResourceRole.POST_AUTHOR,
            ResourceRole.POST_DATE,
            ResourceRole.POST_BODY,
            ResourceRole.NEXT_PAGE_BUTTON,
        ),
    ),
    WorkflowStep.WRAPPER_REFINEMENT: (
        "thread",
        PageKind.THREAD_PAGE,
        (ResourceRole.POST_WRAPPER,),
    ),
}

_SINGLE_NODE_ROLES = frozenset({
    ResourceRole.USERNAME_FIELD,
    ResourceRole.PASSWORD_FIELD,
    ResourceRole.LOGIN_SUBMIT,
    ResourceRole.NEXT_PAGE_BUTTON,
})

# Roles the operator may mark absent: everything the completeness
# invariant does not demand.
_SKIPPABLE_ROLES = frozenset({ResourceRole.THREAD_REPLIES})


# -- page store ----------------------------------------------------------------------


@dataclass
class StoredPage:
    page_id: str
    key: str
    source_url: str
    original: str
    doc: Document
    assets: Dict[str, Tuple[bytes, str]] = field(default_factory=dict)
    missing_assets: List[str] = field(default_factory=list)


def _asset_key(asset_url: str, page_url: str) -> str:
    asset = urlparse(asset_url)
    page = urlparse(page_url)
    key = asset.path.lstrip("/")
    if asset.netloc and asset.netloc != page.netloc:
        key = f"{asset.netloc}/{key}"
    return key


class PageStore:
    """Saves workflow pages plus their subresources under one directory."""

    def __init__(self, root: Path, browser: Optional[BrowserSession] = None):
        self.root = Path(root)
        self.browser = browser
        self.pages: Dict[str, StoredPage] = {}
        self._order: List[str] = []

    def save(self, key: str, source: str) -> StoredPage:
        page_id = f"{len(self._order) + 1}-{key}"
        if source.startswith(("http://", "https://")):
            page = self._save_live(page_id, key, source)
        else:
            page = self._save_file(page_id, key, source)
        self.pages[page.page_id] = page
        self._order.append(page.page_id)
        self._write(page)
        return page

    def _save_live(self, page_id: str, key: str, url: str) -> StoredPage:
        if self.browser is None:
            raise ConfigError("live page sources need a browser session")
        result = self.browser.navigate(url)
        page = StoredPage(
            page_id=page_id,
            key=key,
            source_url=result.final_url,
            original=result.body,
            doc=parse_html(result.body),
        )
        for asset_url, kind in self.browser.page_subresources(result):
            status, body, content_type = self.browser.asset_body(
                asset_url, kind, result.final_url
            )
            if status == 200:
                page.assets[_asset_key(asset_url, result.final_url)] = (body, content_type)
            else:
                page.missing_assets.append(asset_url)
        return page

    def _save_file(self, page_id: str, key: str, source: str) -> StoredPage:
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read page file {source}: {exc}") from None
        page = StoredPage(
            page_id=page_id,
            key=key,
            source_url=path.resolve().as_uri(),
            original=text,
            doc=parse_html(text),
        )
        base = path.resolve().parent
        for node in page.doc.nodes:
            ref: Optional[str] = None
            if node.tag == "link" and node.attrs.get("rel") == "stylesheet":
                ref = node.attrs.get("href")
            elif node.tag in ("img", "script"):
                ref = node.attrs.get("src")
            if not ref or ref.startswith(("http://", "https://", "data:")):
                continue
            candidate = base / ref.lstrip("/")
            if candidate.is_file():
                content_type = mimetypes.guess_type(candidate.name)[0] or ""
                page.assets[ref.lstrip("/")] = (candidate.read_bytes(), content_type)
            else:
                page.missing_assets.append(ref)
        return page

    def _write(self, page: StoredPage) -> None:
        page_dir = self.root / page.page_id
        page_dir.mkdir(parents=True, exist_ok=True)
        (page_dir / "original.html").write_bytes(page.original.encode("utf-8"))
        meta = {
            "page_id": page.page_id,
            "key": page.key,
            "source_url": page.source_url,
            "assets": sorted(page.assets),
            "missing_assets": page.missing_assets,
        }
        (page_dir / "meta.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        assets_root = (page_dir / "assets").resolve()
        for asset_key, (body, _) in page.assets.items():
            target = (assets_root / asset_key).resolve()
            # Keys come from URLs; refuse any that escape the store.
            if not str(target).startswith(str(assets_root)):
                continue
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(body)

    def write_instrumented(self, page: StoredPage, html: str) -> None:
        (self.root / page.page_id / "instrumented.html").write_text(html, encoding="utf-8")

    def by_key(self, key: str) -> Optional[StoredPage]:
        for page_id in self._order:
            if self.pages[page_id].key == key:
                return self.pages[page_id]
        return None

    def find_asset(self, root_path: str) -> Optional[Tuple[bytes, str]]:
        """Site-absolute asset lookup across pages, in save order."""
        key = root_path.lstrip("/")
        for page_id in self._order:
            hit = self.pages[page_id].assets.get(key)
            if hit is not None:
                return hit
        return None


# -- instrumentation ------------------------------------------------------------------


def _find_child(root: Node, tag: str) -> Optional[Node]:
    for child in root.element_children:
        if child.tag == tag:
            return child
    return None


def _inject(parent: Node, tag: str, attrs: Dict[str, str], position: Optional[int] = None) -> Node:
    node = Node(tag, dict(attrs), parent=parent)
    if position is None:
        parent.children.append(node)
    else:
        parent.children.insert(position, node)
    return node


def instrument_page(
    original: str, page_id: str, session_id: str, prompt: str
) -> str:
    """Additive capture markup over a fresh parse of the saved page.

    Original elements receive their absolute XPath in ``data-cstl-path``
    (stamped before any elements are added, so paths refer to the
    original tree); injected elements all carry ``data-cstl-injected``.
    """
    doc = parse_html(original)
    for node in doc.nodes:
        node.attrs[_PATH_ATTR] = node.absolute_xpath()

    head = _find_child(doc.root, "head")
    if head is None:
        head = _inject(doc.root, "head", {_INJECTED_ATTR: "1"}, position=0)
    _inject(
        head,
        "base",
        {_INJECTED_ATTR: "1", "href": f"/asset/{page_id}/"},
        position=0,
    )

    body = _find_child(doc.root, "body") or doc.root
    banner = _inject(
        body,
        "div",
        {
            _INJECTED_ATTR: "1",
            "class": "cstl-banner",
            "data-cstl-session": session_id,
            "data-cstl-page": page_id,
            "data-cstl-prompt": prompt,
        },
        position=0,
    )
    banner.children.append(prompt)
    _inject(body, "script", {_INJECTED_ATTR: "1", "src": "/ui/capture.js"})
    return document_to_html(doc)


def highlight_page(
    original: str,
    page_id: str,
    identifier: ResourceIdentifier,
    prompt: str,
) -> Tuple[str, int]:
    """Saved page with every resolved node marked; returns (html, count)."""
    doc = parse_html(original)
    targets = resolve(doc, identifier)
    for index, node in enumerate(targets, start=1):
        node.attrs["data-cstl-marker"] = str(index)
        outline = "outline: 3px solid #cc2222; outline-offset: 2px"
        existing = node.attrs.get("style")
        node.attrs["style"] = f"{existing}; {outline}" if existing else outline

    head = _find_child(doc.root, "head")
    if head is None:
        head = _inject(doc.root, "head", {_INJECTED_ATTR: "1"}, position=0)
    _inject(head, "base", {_INJECTED_ATTR: "1", "href": f"/asset/{page_id}/"}, position=0)

    body = _find_child(doc.root, "body") or doc.root
    message = prompt if targets else "no matches"
    bar = _inject(
        body,
        "div",
        {
            _INJECTED_ATTR: "1",
            "class": "cstl-review",
            "data-cstl-technique": identifier.technique.value,
            "data-cstl-selector": identifier.selector,
            "data-cstl-count": str(len(targets)),
        },
        position=0,
    )
    bar.children.append(message)
    for decision, label in (("accept", "Accept"), ("reject", "Reject")):
        button = _inject(bar, "button", {_INJECTED_ATTR: "1", "data-cstl-decision": decision})
        button.children.append(label)
    _inject(body, "script", {_INJECTED_ATTR: "1", "src": "/ui/review.js"})
    return document_to_html(doc), len(targets)


def collector_page(page_id: str, session_id: str) -> str:
    """Snippet collector: paste text from distinct posts, confirm the count."""
    return (
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
        "<title>Content collector</title>\n</head>\n<body>\n"
        f'<form class="cstl-collector" data-cstl-session="{session_id}" '
        f'data-cstl-page="{page_id}" data-cstl-endpoint="/label" '
        f'data-cstl-role="{ResourceRole.POST_WRAPPER.value}">\n'
        "<p>Paste a snippet of text from each of several different posts "
        "(at least two), then enter how many posts this page shows.</p>\n"
        '<textarea name="snippet" rows="3" cols="60"></textarea>\n'
        '<textarea name="snippet" rows="3" cols="60"></textarea>\n'
        '<textarea name="snippet" rows="3" cols="60"></textarea>\n'
        '<label>Posts on this page <input name="post_count" type="number" min="1"></label>\n'
        '<button type="submit">Infer wrapper</button>\n'
        "</form>\n"
        '<script src="/ui/collector.js"></script>\n'
        "</body>\n</html>\n"
    )


# -- wrapper refinement bridge ---------------------------------------------------------


class _RefinementBridge:
    """Runs refine_post_wrapper in a worker so each confirm/reject
    round-trip can ride a separate HTTP request."""

    def __init__(self, doc: Document, snippets: List[str], post_count: int):
        self._offers: "queue.Queue[Tuple[str, object]]" = queue.Queue()
        self._verdicts: "queue.Queue[bool]" = queue.Queue()
        self._thread = threading.Thread(
            target=self._run, args=(doc, snippets, post_count), daemon=True
        )

    def _run(self, doc: Document, snippets: List[str], post_count: int) -> None:
        try:
            identifier, events = refine_post_wrapper(
                doc, snippets, post_count, self._decide
            )
            self._offers.put(("done", (identifier, events)))
        except Exception as exc:  # surfaced to the operator, not the server
            self._offers.put(("error", exc))

    def _decide(self, identifier: ResourceIdentifier, nodes: List[Node]) -> bool:
        self._offers.put(("offer", identifier))
        return self._verdicts.get()

    def start(self) -> Tuple[str, object]:
        self._thread.start()
        return self._offers.get(timeout=60)

    def answer(self, accept: bool) -> Tuple[str, object]:
        self._verdicts.put(accept)
        return self._offers.get(timeout=60)


# -- training session -------------------------------------------------------------------


class _ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _identifier_json(identifier: ResourceIdentifier, resolved_count: int) -> dict:
    payload = {
        "technique": identifier.technique.value,
        "selector": identifier.selector,
        "expects_many": identifier.expects_many,
        "resolved_count": resolved_count,
    }
    if identifier.conflict is not None:
        payload["conflict"] = {
            "resolved_count": identifier.conflict.resolved_count,
            "chosen_index": identifier.conflict.chosen_index,
        }
    return payload


def _href_of(node: Node) -> Optional[str]:
    current: Optional[Node] = node
    while current is not None:
        href = current.attrs.get("href")
        if href:
            return href
        current = current.parent
    return None


class TrainingSession:
    """One operator workflow from Login through Done.

    The workflow advances monotonically; each step's roles are labeled
    and confirmed in order. All mutation happens under ``lock`` so
    concurrent label POSTs serialize.
    """

    def __init__(self, forum_id: str, store: PageStore):
        self.session_id = f"train-{forum_id}"
        self.forum_id = forum_id
        self.store = store
        self.lock = threading.Lock()
        self.step = WorkflowStep.LOGIN
        self.role_index = 0
        self.entries: Dict[PageKind, Dict[ResourceRole, ResourceIdentifier]] = {}
        self.sections_of_interest: List[str] = []
        self.exemplars: List[Node] = []
        self.rejected: set = set()
        self.pending: Optional[ResourceIdentifier] = None
        self.pending_count: int = 0
        self.bridge: Optional[_RefinementBridge] = None
        self.conflict_queue: List[dict] = []
        self.pending_conflict: Optional[dict] = None
        self.events: List[dict] = []
        self.blueprint: Optional[ForumBlueprint] = None

    # -- state helpers ------------------------------------------------------------

    def current_page(self) -> Optional[StoredPage]:
        spec = _STEP_ROLES.get(self.step)
        if spec is None:
            return None
        return self.store.by_key(spec[0])

    def current_kind(self) -> Optional[PageKind]:
        spec = _STEP_ROLES.get(self.step)
        return spec[1] if spec else None

    def pending_role(self) -> Optional[ResourceRole]:
        spec = _STEP_ROLES.get(self.step)
        if spec is None:
            return None
        return spec[2][self.role_index]

    def prompt(self) -> str:
        if self.step is WorkflowStep.DONE:
            return "training complete"
        if self.pending_conflict is not None:
            return (
                "conflict check: is the highlighted match one element or "
                "several? (accept = several)"
            )
        role = self.pending_role()
        if self.pending is not None:
            return f"confirm candidate for {role.value}"
        if role is ResourceRole.POST_WRAPPER:
            return "paste post snippets in the collector"
        return f"click the {role.value} element"

    # -- labeling -----------------------------------------------------------------

    def receive_label(self, payload: dict) -> dict:
        role = self._validated_role(payload)
        page = self.current_page()
        if page is None:
            raise _ApiError(409, "the page for this step is not saved yet")
        if payload.get("page_id") != page.page_id:
            raise _ApiError(409, f"current step labels page {page.page_id}")

        if payload.get("absent"):
            if role not in _SKIPPABLE_ROLES:
                raise _ApiError(409, f"{role.value} cannot be marked absent")
            self.events.append({"event": "role-skipped", "role": role.value})
            self._advance_role()
            return {"role": role.value, "skipped": True, "pending": None}

        if role is ResourceRole.POST_WRAPPER:
            return self._receive_snippets(payload, page, role)
        return self._receive_click(payload, page, role)

    def _validated_role(self, payload: dict) -> ResourceRole:
        expected = self.pending_role()
        if expected is None:
            raise _ApiError(409, "no label is expected at this step")
        try:
            role = ResourceRole(payload.get("role"))
        except ValueError:
            raise _ApiError(400, f"unknown role {payload.get('role')!r}") from None
        if role is not expected:
            raise _ApiError(409, f"expected a label for {expected.value}")
        return role

    def _receive_click(self, payload: dict, page: StoredPage, role: ResourceRole) -> dict:
        node_path = payload.get("node_path")
        if not isinstance(node_path, str) or not node_path:
            raise _ApiError(400, "click labels need node_path")
        if role in _SINGLE_NODE_ROLES and self.exemplars:
            raise _ApiError(409, f"{role.value} already captured")
        try:
            nodes = xpath.evaluate(page.doc, node_path)
        except QuietcrawlError as exc:
            raise _ApiError(400, f"bad node_path: {exc}") from None
        if len(nodes) != 1:
            raise _ApiError(400, f"node_path resolves {len(nodes)} nodes, need 1")
        self.exemplars.append(nodes[0])
        self.events.append({"event": "label", "role": role.value, "node_path": node_path})
        return self._offer_next_candidate(page, role)

    def _offer_next_candidate(self, page: StoredPage, role: ResourceRole) -> dict:
        expects_many = role not in _SINGLE_NODE_ROLES
        for identifier in candidate_identifiers(page.doc, self.exemplars, expects_many):
            key = (identifier.technique, identifier.selector)
            if key in self.rejected:
                continue
            self.pending = identifier
            self.pending_count = len(resolve(page.doc, identifier))
            return {
                "role": role.value,
                "pending": _identifier_json(identifier, self.pending_count),
            }
        # Nothing left to offer: restart the role so the operator can
        # pick different exemplars.
        self.exemplars = []
        self.rejected = set()
        self.pending = None
        raise _ApiError(
            422, f"no technique fits the exemplars for {role.value}; label again"
        )

    def _receive_snippets(self, payload: dict, page: StoredPage, role: ResourceRole) -> dict:
        snippets = payload.get("snippets")
        if not isinstance(snippets, list) or not all(isinstance(s, str) for s in snippets):
            raise _ApiError(400, "wrapper labels need a snippets list")
        snippets = [s for s in (s.strip() for s in snippets) if s]
        if len(snippets) < 2:
            raise _ApiError(400, "need at least 2 snippets from distinct posts")
        post_count = payload.get("post_count")
        if not isinstance(post_count, int) or post_count < 1:
            raise _ApiError(400, "post_count must be a positive integer")
        if self.bridge is not None:
            raise _ApiError(409, "wrapper refinement already running")
        bridge = _RefinementBridge(page.doc, snippets, post_count)
        self.events.append({
            "event": "label",
            "role": role.value,
            "snippets": len(snippets),
            "post_count": post_count,
        })
        self.bridge = bridge
        return self._consume_bridge(bridge.start(), page, role)

    def _consume_bridge(self, event: Tuple[str, object], page: StoredPage, role: ResourceRole) -> dict:
        kind, value = event
        if kind == "error":
            self.bridge = None
            self.pending = None
            raise _ApiError(422, f"wrapper refinement failed: {value}")
        if kind == "offer":
            identifier = value
            self.pending = identifier
            self.pending_count = len(resolve(page.doc, identifier))
            return {
                "role": role.value,
                "pending": _identifier_json(identifier, self.pending_count),
            }
        identifier, events = value  # kind == "done"
        self.bridge = None
        self.events.extend(
            {
                "event": "refinement",
                "technique": e.identifier.technique.value,
                "selector": e.identifier.selector,
                "resolved": e.resolved_count,
                "outcome": e.outcome,
            }
            for e in events
        )
        count = len(resolve(page.doc, identifier))
        self._commit(identifier, role, page)
        return {
            "role": role.value,
            "pending": None,
            "accepted": _identifier_json(identifier, count),
        }

    # -- decisions ----------------------------------------------------------------

    def receive_decision(self, payload: dict) -> dict:
        accept = payload.get("accept")
        if not isinstance(accept, bool):
            raise _ApiError(400, "decision needs accept: true|false")
        if self.pending_conflict is not None:
            return self._decide_conflict(accept)
        if self.pending is None:
            raise _ApiError(409, "nothing is pending a decision")
        page = self.current_page()
        role = self.pending_role()
        if self.bridge is not None:
            result = self._decide_bridge(accept, page, role)
        elif accept:
            self._commit(self.pending, role, page)
            result = {"accepted": True, "role": role.value}
        else:
            self.rejected.add((self.pending.technique, self.pending.selector))
            self.events.append({
                "event": "rejected",
                "role": role.value,
                "selector": self.pending.selector,
            })
            self.pending = None
            result = self._offer_next_candidate(page, role)
        result.update(self.describe())
        return result

    def _decide_bridge(self, accept: bool, page: StoredPage, role: ResourceRole) -> dict:
        if accept:
            event = self.bridge.answer(True)
            self.pending = None
            return self._consume_bridge(event, page, role)
        self.events.append({
            "event": "rejected",
            "role": role.value,
            "selector": self.pending.selector,
        })
        self.pending = None
        try:
            return self._consume_bridge(self.bridge.answer(False), page, role)
        except _ApiError:
            self.bridge = None
            raise

    def _commit(self, identifier: ResourceIdentifier, role: ResourceRole, page: StoredPage) -> None:
        kind = self.current_kind()
        self.entries.setdefault(kind, {})[role] = identifier
        self.events.append({
            "event": "confirmed",
            "role": role.value,
            "technique": identifier.technique.value,
            "selector": identifier.selector,
        })
        if role is ResourceRole.SECTION_LINK:
            self._record_sections(page)
        self.pending = None
        self._advance_role()

    def _record_sections(self, page: StoredPage) -> None:
        for node in self.exemplars:
            href = _href_of(node)
            if href:
                url = urljoin(page.source_url, href)
                if url not in self.sections_of_interest:
                    self.sections_of_interest.append(url)

    def _advance_role(self) -> None:
        self.exemplars = []
        self.rejected = set()
        self.pending = None
        self.pending_count = 0
        spec = _STEP_ROLES[self.step]
        if self.role_index + 1 < len(spec[2]):
            self.role_index += 1
            return
        self.role_index = 0
        self.step = _STEP_ORDER[_STEP_ORDER.index(self.step) + 1]
        if self.step is WorkflowStep.CONFLICT_CHECK:
            self._enter_conflict_check()

    def _enter_conflict_check(self) -> None:
        self.conflict_queue = []
        for kind, inner_key in (
            (PageKind.SECTION_INDEX, "section_inner"),
            (PageKind.THREAD_PAGE, "thread_inner"),
        ):
            identifier = self.entries.get(kind, {}).get(ResourceRole.NEXT_PAGE_BUTTON)
            page = self.store.by_key(inner_key)
            if identifier is None or page is None:
                continue
            count = len(resolve(page.doc, identifier))
            if count > 1:
                self.conflict_queue.append({
                    "kind": kind,
                    "page": page,
                    "identifier": identifier,
                    "count": count,
                })
        self._next_conflict()

    def _next_conflict(self) -> None:
        if self.conflict_queue:
            self.pending_conflict = self.conflict_queue.pop(0)
            return
        self.pending_conflict = None
        self.step = WorkflowStep.DONE
        self.blueprint = self._assemble()

    def _decide_conflict(self, several: bool) -> dict:
        question = self.pending_conflict
        kind: PageKind = question["kind"]
        identifier: ResourceIdentifier = question["identifier"]
        if several:
            resolved = replace(
                identifier,
                conflict=ConflictRecord(resolved_count=question["count"], chosen_index=2),
            )
            self.entries[kind][ResourceRole.NEXT_PAGE_BUTTON] = resolved
        self.events.append({
            "event": "conflict-check",
            "page_kind": kind.value,
            "count": question["count"],
            "several": several,
        })
        self._next_conflict()
        result = {"conflict_recorded": several, "page_kind": kind.value}
        result.update(self.describe())
        return result

    # -- blueprint ------------------------------------------------------------------

    def _assemble(self) -> ForumBlueprint:
        home = self.store.by_key("home")
        login = self.store.by_key("login")
        parsed = urlparse(home.source_url)
        base_url = f"{parsed.scheme}://{parsed.netloc}" if parsed.netloc else home.source_url
        page_urls = {PageKind.HOME_PAGE: home.source_url}
        if login is not None:
            page_urls[PageKind.LOGIN_PAGE] = login.source_url
        return ForumBlueprint(
            forum_id=self.forum_id,
            base_url=base_url,
            entries=self.entries,
            sections_of_interest=tuple(self.sections_of_interest),
            page_urls=page_urls,
        )

    def partial_blueprint_dict(self) -> dict:
        data = blueprint_to_dict(
            self.blueprint if self.blueprint is not None else self._assemble()
        )
        if self.step is not WorkflowStep.DONE:
            data["incomplete"] = True
            data["missing_roles"] = [
                f"{kind.value}/{role.value}"
                for kind, role in self._assemble().missing_roles()
            ]
        return data

    def describe(self) -> dict:
        role = self.pending_role()
        page = self.current_page()
        return {
            "session_id": self.session_id,
            "forum_id": self.forum_id,
            "workflow_step": self.step.value,
            "pending_role": role.value if role else None,
            "expected_page_id": page.page_id if page else None,
            "pending_identifier": (
                _identifier_json(self.pending, self.pending_count)
                if self.pending is not None
                else None
            ),
            "pending_question": (
                {
                    "kind": "next-button-conflict",
                    "page_kind": self.pending_conflict["kind"].value,
                    "count": self.pending_conflict["count"],
                }
                if self.pending_conflict is not None
                else None
            ),
            "prompt": self.prompt(),
            "sections_of_interest": list(self.sections_of_interest),
            "trained": {
                kind.value: sorted(role.value for role in roles)
                for kind, roles in self.entries.items()
            },
            "pages": {
                p.key: {"page_id": p.page_id, "source_url": p.source_url}
                for p in self.store.pages.values()
            },
            "complete": self.step is WorkflowStep.DONE,
        }


# -- HTTP service ---------------------------------------------------------------------


class TrainerService:
    """Request handling detached from sockets, for direct use in tests."""

    def __init__(
        self,
        forum_id: str,
        page_sources: Mapping[str, str],
        store_dir: Path,
        browser: Optional[BrowserSession] = None,
        credentials: Optional[Tuple[str, str]] = None,
        blueprint_path: Optional[Path] = None,
        ui_dir: Optional[Path] = None,
    ):
        unknown = set(page_sources) - set(PAGE_KEYS)
        if unknown:
            raise ConfigError(f"unknown page keys: {sorted(unknown)}")
        missing = [key for key in REQUIRED_PAGE_KEYS if key not in page_sources]
        if missing:
            raise ConfigError(f"missing required pages: {missing}")
        self.store = PageStore(Path(store_dir), browser)
        self.credentials = credentials
        self._authed = False
        # Pages behind the login wall wait until the login roles are
        # trained; file sources never need a session.
        self._deferred: Dict[str, str] = {}
        for key in PAGE_KEYS:
            if key not in page_sources:
                continue
            if browser is not None and key not in ("login", "home"):
                self._deferred[key] = page_sources[key]
            else:
                self.store.save(key, page_sources[key])
        self.session = TrainingSession(forum_id, self.store)
        self.blueprint_path = Path(blueprint_path) if blueprint_path else None
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self._blueprint_written = False
        for page in self.store.pages.values():
            self._snapshot(page)

    def _snapshot(self, page: StoredPage) -> None:
        self.store.write_instrumented(
            page,
            instrument_page(
                page.original, page.page_id, self.session.session_id,
                self.session.prompt(),
            ),
        )

    # -- request entry points ------------------------------------------------------

    def handle_get(self, path: str) -> Tuple[int, str, bytes]:
        if path == "/session":
            with self.session.lock:
                return self._json(200, self.session.describe())
        if path.startswith("/page/"):
            return self._get_page(path[len("/page/"):])
        if path.startswith("/collector/"):
            return self._get_collector(path[len("/collector/"):])
        if path == "/highlight":
            return self._get_highlight()
        if path.startswith("/asset/"):
            return self._get_asset(path[len("/asset/"):])
        if path.startswith("/ui/") and self.ui_dir is not None:
            return self._get_ui_file(path[len("/ui/"):])
        fallback = self.store.find_asset(path)
        if fallback is not None:
            body, content_type = fallback
            return 200, content_type or self._guess_type(path), body
        return self._json(404, {"error": f"no route for {path}"})

    def handle_post(self, path: str, payload: dict) -> Tuple[int, str, bytes]:
        if payload.get("session_id") != self.session.session_id:
            return self._json(409, {"error": "unknown session_id"})
        try:
            with self.session.lock:
                if path == "/label":
                    result = self.session.receive_label(payload)
                elif path == "/decision":
                    result = self.session.receive_decision(payload)
                else:
                    return self._json(404, {"error": f"no route for {path}"})
                self._ensure_authed_pages()
                self._maybe_write_blueprint()
        except _ApiError as exc:
            return self._json(exc.status, {"error": exc.message})
        return self._json(200, result)

    # -- deferred page saving ---------------------------------------------------------

    def _ensure_authed_pages(self) -> None:
        if not self._deferred or self.session.step is WorkflowStep.LOGIN:
            return
        try:
            if self.credentials is not None and not self._authed:
                self._login_live()
                self._authed = True
            for key in PAGE_KEYS:
                if key not in self._deferred:
                    continue
                page = self.store.save(key, self._deferred[key])
                del self._deferred[key]
                self._snapshot(page)
        except QuietcrawlError as exc:
            raise _ApiError(
                422, f"saving pages behind the login failed: {exc}"
            ) from None

    def _login_live(self) -> None:
        """Log the browser in using the identifiers just trained."""
        login_page = self.store.by_key("login")
        result = self.store.browser.navigate(login_page.source_url)
        doc = result.document()
        entries = self.session.entries.get(PageKind.LOGIN_PAGE, {})
        fields: Dict[str, str] = {}
        username_node = None
        for role, value in (
            (ResourceRole.USERNAME_FIELD, self.credentials[0]),
            (ResourceRole.PASSWORD_FIELD, self.credentials[1]),
        ):
            identifier = entries.get(role)
            if identifier is None:
                raise _ApiError(409, f"{role.value} is not trained yet")
            nodes = resolve(doc, identifier)
            if len(nodes) != 1:
                raise _ApiError(422, f"{role.value} resolved {len(nodes)} nodes at login")
            name = nodes[0].attrs.get("name")
            if not name:
                raise _ApiError(422, f"{role.value} input has no name attribute")
            fields[name] = value
            if role is ResourceRole.USERNAME_FIELD:
                username_node = nodes[0]
        form = next((a for a in username_node.ancestors() if a.tag == "form"), None)
        if form is None:
            raise _ApiError(422, "login fields are not inside a form")
        submitted = self.store.browser.submit_form(form, fields, page_url=result.final_url)
        still_login = resolve(
            submitted.document(), entries[ResourceRole.PASSWORD_FIELD]
        )
        if still_login:
            raise _ApiError(422, "login was not accepted; check the credentials")

    # -- GET helpers -----------------------------------------------------------------

    def _get_page(self, page_id: str) -> Tuple[int, str, bytes]:
        page = self.store.pages.get(page_id)
        if page is None:
            return self._json(404, {"error": f"unknown page {page_id}"})
        with self.session.lock:
            html = instrument_page(
                page.original, page.page_id, self.session.session_id,
                self.session.prompt(),
            )
        return 200, "text/html; charset=utf-8", html.encode("utf-8")

    def _get_collector(self, page_id: str) -> Tuple[int, str, bytes]:
        page = self.store.pages.get(page_id)
        if page is None:
            return self._json(404, {"error": f"unknown page {page_id}"})
        html = collector_page(page.page_id, self.session.session_id)
        return 200, "text/html; charset=utf-8", html.encode("utf-8")

    def _get_highlight(self) -> Tuple[int, str, bytes]:
        with self.session.lock:
            if self.session.pending_conflict is not None:
                question = self.session.pending_conflict
                html, _ = highlight_page(
                    question["page"].original,
                    question["page"].page_id,
                    question["identifier"],
                    self.session.prompt(),
                )
                return 200, "text/html; charset=utf-8", html.encode("utf-8")
            if self.session.pending is None:
                return self._json(404, {"error": "nothing pending review"})
            page = self.session.current_page()
            html, _ = highlight_page(
                page.original, page.page_id, self.session.pending,
                self.session.prompt(),
            )
        return 200, "text/html; charset=utf-8", html.encode("utf-8")

    def _get_asset(self, rest: str) -> Tuple[int, str, bytes]:
        page_id, _, asset_key = rest.partition("/")
        page = self.store.pages.get(page_id)
        if page is None:
            return self._json(404, {"error": f"unknown page {page_id}"})
        hit = page.assets.get(asset_key)
        if hit is None:
            return self._json(404, {"error": f"no stored asset {asset_key}"})
        body, content_type = hit
        return 200, content_type or self._guess_type(asset_key), body

    def _get_ui_file(self, name: str) -> Tuple[int, str, bytes]:
        target = (self.ui_dir / name).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            return self._json(404, {"error": f"no ui file {name}"})
        return 200, self._guess_type(name), target.read_bytes()

    @staticmethod
    def _guess_type(name: str) -> str:
        return mimetypes.guess_type(name)[0] or "application/octet-stream"

    @staticmethod
    def _json(status: int, payload: dict) -> Tuple[int, str, bytes]:
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        return status, "application/json; charset=utf-8", body

    # -- blueprint output --------------------------------------------------------------

    def _maybe_write_blueprint(self) -> None:
        if (
            self.session.blueprint is not None
            and not self._blueprint_written
            and self.blueprint_path is not None
        ):
            save_blueprint(self.session.blueprint, self.blueprint_path)
            self._blueprint_written = True

    def write_partial(self) -> Optional[Path]:
        """Persist whatever was collected; used on interrupt."""
        if self.blueprint_path is None:
            return None
        data = self.session.partial_blueprint_dict()
        self.blueprint_path.parent.mkdir(parents=True, exist_ok=True)
        self.blueprint_path.write_text(
            json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        return self.blueprint_path


class _TrainerHandler(BaseHTTPRequestHandler):
    service: TrainerService  # set by the server factory

    def do_GET(self) -> None:  # noqa: N802 (stdlib casing)
        status, content_type, body = self.service.handle_get(self.path)
        self._reply(status, content_type, body)

    def do_POST(self) -> None:  # noqa: N802
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length) if length else b""
        try:
            payload = json.loads(raw.decode("utf-8")) if raw else {}
            if not isinstance(payload, dict):
                raise ValueError("body must be a JSON object")
        except (ValueError, UnicodeDecodeError) as exc:
            status, content_type, body = TrainerService._json(
                400, {"error": f"bad JSON body: {exc}"}
            )
        else:
            status, content_type, body = self.service.handle_post(self.path, payload)
        self._reply(status, content_type, body)

    def _reply(self, status: int, content_type: str, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, format: str, *args) -> None:  # quiet by default
        pass


class TrainerServer:
    """Loopback HTTP front for a TrainerService."""

    def __init__(self, service: TrainerService, host: str = "127.0.0.1", port: int = 0):
        handler = type("BoundTrainerHandler", (_TrainerHandler,), {"service": service})
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        self.service = service

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "TrainerServer":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()
