"""Domain types: page kinds, resource identifiers, blueprints, crawl state.

The blueprint is the knowledge base training produces and crawling
consumes: for every page kind it maps abstract resource roles (thread
link, next-page button, post wrapper, ...) to a concrete identifier
that can be resolved against a live page.  Crawl state remembers which
threads were read and how far, so revisits only touch what changed.

Everything here is JSON round-trippable and validated on load; a schema
violation names the offending field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple
from urllib.parse import parse_qsl, urlencode, urlsplit, urlunsplit

from . import xpath
from .errors import BlueprintSchemaError

BLUEPRINT_VERSION = 1

# Query parameters that only track campaigns and never select content.
_TRACKING_EXACT = frozenset({"fbclid", "gclid", "mc_cid", "mc_eid"})


def _is_tracking_param(name: str) -> bool:
    low = name.lower()
    return low.startswith("utm_") or low in _TRACKING_EXACT


class PageKind(str, Enum):
    LOGIN_PAGE = "LoginPage"
    HOME_PAGE = "HomePage"
    SECTION_INDEX = "SectionIndex"
    THREAD_PAGE = "ThreadPage"


class ResourceRole(str, Enum):
    USERNAME_FIELD = "UsernameField"
    PASSWORD_FIELD = "PasswordField"
    LOGIN_SUBMIT = "LoginSubmit"
    SECTION_LINK = "SectionLink"
    THREAD_LINK = "ThreadLink"
    NEXT_PAGE_BUTTON = "NextPageButton"
    POST_WRAPPER = "PostWrapper"
    POST_AUTHOR = "PostAuthor"
    POST_DATE = "PostDate"
    POST_BODY = "PostBody"
    # Optional: per-thread reply counter on the section index.  Lets the
    # crawler spot updated threads without opening them.
    THREAD_REPLIES = "ThreadReplies"


class Technique(str, Enum):
    """How an identifier was generalized, in fallback order."""

    EXACT_XPATH = "ExactXPath"
    PARENT_XPATH = "ParentXPath"
    SINGLE_CLASS = "SingleClass"
    DOUBLE_CLASS = "DoubleClass"


# Roles a blueprint must cover before a crawl will accept it.
REQUIRED_ROLES: Dict[PageKind, Tuple[ResourceRole, ...]] = {
    PageKind.LOGIN_PAGE: (
        ResourceRole.USERNAME_FIELD,
        ResourceRole.PASSWORD_FIELD,
        ResourceRole.LOGIN_SUBMIT,
    ),
    PageKind.SECTION_INDEX: (
        ResourceRole.THREAD_LINK,
        ResourceRole.NEXT_PAGE_BUTTON,
    ),
    PageKind.THREAD_PAGE: (
        ResourceRole.POST_WRAPPER,
        ResourceRole.POST_AUTHOR,
        ResourceRole.POST_DATE,
        ResourceRole.POST_BODY,
        ResourceRole.NEXT_PAGE_BUTTON,
    ),
}


@dataclass(frozen=True, slots=True)
class ConflictRecord:
    """Outcome of the next-button ambiguity check.

    Some platforms give the forward and back pagination buttons the same
    class, so the trained identifier resolves several elements on inner
    pages.  ``chosen_index`` (1-based) says which resolved element is
    the real forward button.
    """

    resolved_count: int
    chosen_index: int

    def __post_init__(self) -> None:
        if self.resolved_count < 1:
            raise ValueError("resolved_count must be >= 1")
        if not 1 <= self.chosen_index <= self.resolved_count:
            raise ValueError("chosen_index must lie in [1, resolved_count]")


@dataclass(frozen=True, slots=True)
class ResourceIdentifier:
    """A trained, resolvable pointer to a page resource.

    Attributes:
        technique: Generalization strategy that produced the selector.
        selector: XPath string for the XPath techniques, one class token
            for SingleClass, two space-separated tokens for DoubleClass.
        expects_many: Whether resolving many nodes is the normal case
            (thread links, post details) or a conflict (buttons, fields).
        conflict: Present when training observed a multi-node resolution
            for a single-node role and the operator disambiguated it.
    """

    technique: Technique
    selector: str
    expects_many: bool = False
    conflict: Optional[ConflictRecord] = None

    def __post_init__(self) -> None:
        if not self.selector or not self.selector.strip():
            raise ValueError("selector must be non-empty")
        if self.technique in (Technique.EXACT_XPATH, Technique.PARENT_XPATH):
            xpath.validate(self.selector)
        elif self.technique is Technique.SINGLE_CLASS:
            if len(self.selector.split()) != 1:
                raise ValueError("SingleClass selector must be exactly one class token")
        elif self.technique is Technique.DOUBLE_CLASS:
            tokens = self.selector.split()
            if len(tokens) != 2 or tokens[0] == tokens[1]:
                raise ValueError("DoubleClass selector must be two distinct class tokens")


@dataclass(frozen=True)
class ForumBlueprint:
    """Everything the crawler needs to know about one forum's structure."""

    forum_id: str
    base_url: str
    entries: Mapping[PageKind, Mapping[ResourceRole, ResourceIdentifier]]
    sections_of_interest: Tuple[str, ...] = ()
    page_urls: Mapping[PageKind, str] = field(default_factory=dict)
    version: int = BLUEPRINT_VERSION

    def __post_init__(self) -> None:
        # Defensive copies; page kinds with no trained roles are dropped
        # so equality and serialization agree.
        object.__setattr__(
            self, "entries", {k: dict(v) for k, v in self.entries.items() if v}
        )
        object.__setattr__(self, "page_urls", dict(self.page_urls))
        object.__setattr__(self, "sections_of_interest", tuple(self.sections_of_interest))

    def identifier_for(self, kind: PageKind, role: ResourceRole) -> Optional[ResourceIdentifier]:
        return self.entries.get(kind, {}).get(role)

    def missing_roles(self) -> List[Tuple[PageKind, ResourceRole]]:
        missing = []
        for kind, roles in REQUIRED_ROLES.items():
            present = self.entries.get(kind, {})
            for role in roles:
                if role not in present:
                    missing.append((kind, role))
        return missing

    def is_complete(self) -> bool:
        return not self.missing_roles()

    def identifier_count(self) -> int:
        return sum(len(roles) for roles in self.entries.values())


def blueprint_to_dict(blueprint: ForumBlueprint) -> dict:
    entries = {}
    for kind in PageKind:
        roles = blueprint.entries.get(kind)
        if not roles:
            continue
        entries[kind.value] = {}
        for role in ResourceRole:
            ident = roles.get(role)
            if ident is None:
                continue
            payload = {
                "technique": ident.technique.value,
                "selector": ident.selector,
                "expects_many": ident.expects_many,
            }
            if ident.conflict is not None:
                payload["conflict"] = {
                    "resolved_count": ident.conflict.resolved_count,
                    "chosen_index": ident.conflict.chosen_index,
                }
            entries[kind.value][role.value] = payload
    data = {
        "version": blueprint.version,
        "forum_id": blueprint.forum_id,
        "base_url": blueprint.base_url,
        "sections_of_interest": list(blueprint.sections_of_interest),
        "entries": entries,
    }
    if blueprint.page_urls:
        data["page_urls"] = {k.value: v for k, v in blueprint.page_urls.items()}
    return data


def _expect(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise BlueprintSchemaError(path, message)


def blueprint_from_dict(data: object) -> ForumBlueprint:
    _expect(isinstance(data, dict), "$", "blueprint must be a JSON object")
    assert isinstance(data, dict)
    version = data.get("version")
    _expect(isinstance(version, int), "version", "must be an integer")
    _expect(version == BLUEPRINT_VERSION, "version", f"unsupported version {version!r}")
    forum_id = data.get("forum_id")
    _expect(isinstance(forum_id, str) and bool(forum_id), "forum_id", "must be a non-empty string")
    base_url = data.get("base_url")
    _expect(isinstance(base_url, str) and bool(base_url), "base_url", "must be a non-empty string")
    sections = data.get("sections_of_interest", [])
    _expect(isinstance(sections, list), "sections_of_interest", "must be a list")
    for i, section in enumerate(sections):
        _expect(isinstance(section, str), f"sections_of_interest[{i}]", "must be a string")
    raw_entries = data.get("entries")
    _expect(isinstance(raw_entries, dict), "entries", "must be an object")
    assert isinstance(raw_entries, dict)

    entries: Dict[PageKind, Dict[ResourceRole, ResourceIdentifier]] = {}
    for kind_key, raw_roles in raw_entries.items():
        kind_path = f"entries.{kind_key}"
        try:
            kind = PageKind(kind_key)
        except ValueError:
            raise BlueprintSchemaError(kind_path, "unknown page kind") from None
        _expect(isinstance(raw_roles, dict), kind_path, "must be an object")
        entries[kind] = {}
        for role_key, raw_ident in raw_roles.items():
            role_path = f"{kind_path}.{role_key}"
            try:
                role = ResourceRole(role_key)
            except ValueError:
                raise BlueprintSchemaError(role_path, "unknown resource role") from None
            entries[kind][role] = _identifier_from_dict(raw_ident, role_path)

    page_urls: Dict[PageKind, str] = {}
    raw_page_urls = data.get("page_urls", {})
    _expect(isinstance(raw_page_urls, dict), "page_urls", "must be an object")
    for kind_key, url in raw_page_urls.items():
        try:
            kind = PageKind(kind_key)
        except ValueError:
            raise BlueprintSchemaError(f"page_urls.{kind_key}", "unknown page kind") from None
        _expect(isinstance(url, str), f"page_urls.{kind_key}", "must be a string")
        page_urls[kind] = url

    return ForumBlueprint(
        forum_id=forum_id,
        base_url=base_url,
        entries=entries,
        sections_of_interest=tuple(sections),
        page_urls=page_urls,
        version=version,
    )


def _identifier_from_dict(raw: object, path: str) -> ResourceIdentifier:
    _expect(isinstance(raw, dict), path, "must be an object")
    assert isinstance(raw, dict)
    technique_key = raw.get("technique")
    try:
        technique = Technique(technique_key)
    except ValueError:
        raise BlueprintSchemaError(f"{path}.technique", f"unknown technique {technique_key!r}") from None
    selector = raw.get("selector")
    _expect(isinstance(selector, str) and bool(selector), f"{path}.selector", "must be a non-empty string")
    expects_many = raw.get("expects_many", False)
    _expect(isinstance(expects_many, bool), f"{path}.expects_many", "must be a boolean")
    conflict = None
    if "conflict" in raw and raw["conflict"] is not None:
        raw_conflict = raw["conflict"]
        _expect(isinstance(raw_conflict, dict), f"{path}.conflict", "must be an object")
        count = raw_conflict.get("resolved_count")
        chosen = raw_conflict.get("chosen_index")
        _expect(isinstance(count, int), f"{path}.conflict.resolved_count", "must be an integer")
        _expect(isinstance(chosen, int), f"{path}.conflict.chosen_index", "must be an integer")
        try:
            conflict = ConflictRecord(resolved_count=count, chosen_index=chosen)
        except ValueError as exc:
            raise BlueprintSchemaError(f"{path}.conflict", str(exc)) from None
    try:
        return ResourceIdentifier(
            technique=technique,
            selector=selector,
            expects_many=expects_many,
            conflict=conflict,
        )
    except Exception as exc:
        raise BlueprintSchemaError(f"{path}.selector", str(exc)) from None


def save_blueprint(blueprint: ForumBlueprint, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(blueprint_to_dict(blueprint), indent=2, sort_keys=True) + "\n")


def load_blueprint(path: Path) -> ForumBlueprint:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise BlueprintSchemaError("$", f"not valid JSON: {exc}") from None
    return blueprint_from_dict(data)


def normalize_url(url: str) -> str:
    """Canonical thread identity: casefold host, strip fragments and
    tracking params, sort the query string."""
    parts = urlsplit(url)
    query_pairs = [
        (k, v)
        for k, v in parse_qsl(parts.query, keep_blank_values=True)
        if not _is_tracking_param(k)
    ]
    query_pairs.sort()
    return urlunsplit(
        (
            parts.scheme.lower(),
            parts.netloc.lower(),
            parts.path or "/",
            urlencode(query_pairs),
            "",
        )
    )


@dataclass(frozen=True, slots=True)
class ThreadRecord:
    """What the crawler remembers about one thread between sessions."""

    url: str
    title: str
    section: str
    last_seen_post_count: int = 0
    last_visit: Optional[str] = None  # ISO-8601 UTC

    def __post_init__(self) -> None:
        if self.last_seen_post_count < 0:
            raise ValueError("last_seen_post_count must be >= 0")


@dataclass(frozen=True)
class CrawlState:
    """Per-forum visit ledger, keyed by canonical thread URL."""

    forum_id: str
    threads: Mapping[str, ThreadRecord] = field(default_factory=dict)

    def record_for(self, url: str) -> Optional[ThreadRecord]:
        return self.threads.get(normalize_url(url))


def should_visit(thread_url: str, observed_post_count: Optional[int], state: CrawlState) -> bool:
    """A thread is worth opening when it is new or grew since last visit.

    ``observed_post_count`` is what the section index reports; ``None``
    means the index carries no counter, in which case a seen thread is
    revisited (its pages must be probed to find out).
    """
    record = state.record_for(thread_url)
    if record is None:
        return True
    if observed_post_count is None:
        return True
    return observed_post_count > record.last_seen_post_count


def update_thread_state(
    state: CrawlState,
    thread_url: str,
    *,
    title: str = "",
    section: str = "",
    post_count: int = 0,
    visited_at: Optional[str] = None,
) -> CrawlState:
    """Fold one visit into the state, returning a new state.

    Post counts never decrease and visit times never move backwards:
    a shrinking forum (deleted posts) keeps the historical high-water
    mark rather than re-reading old content.
    """
    url = normalize_url(thread_url)
    previous = state.threads.get(url)
    if previous is not None:
        post_count = max(post_count, previous.last_seen_post_count)
        title = title or previous.title
        section = section or previous.section
        if visited_at is not None and previous.last_visit is not None:
            visited_at = max(visited_at, previous.last_visit)
        elif visited_at is None:
            visited_at = previous.last_visit
    record = ThreadRecord(
        url=url,
        title=title,
        section=section,
        last_seen_post_count=post_count,
        last_visit=visited_at,
    )
    threads = dict(state.threads)
    threads[url] = record
    return replace(state, threads=threads)


def state_to_dict(state: CrawlState) -> dict:
    return {
        "forum_id": state.forum_id,
        "threads": [
            {
                "url": record.url,
                "title": record.title,
                "section": record.section,
                "last_seen_post_count": record.last_seen_post_count,
                "last_visit": record.last_visit,
            }
            for _, record in sorted(state.threads.items())
        ],
    }


def state_from_dict(data: object) -> CrawlState:
    _expect(isinstance(data, dict), "$", "state must be a JSON object")
    assert isinstance(data, dict)
    forum_id = data.get("forum_id")
    _expect(isinstance(forum_id, str) and bool(forum_id), "forum_id", "must be a non-empty string")
    raw_threads = data.get("threads", [])
    _expect(isinstance(raw_threads, list), "threads", "must be a list")
    threads: Dict[str, ThreadRecord] = {}
    for i, raw in enumerate(raw_threads):
        path = f"threads[{i}]"
        _expect(isinstance(raw, dict), path, "must be an object")
        url = raw.get("url")
        _expect(isinstance(url, str) and bool(url), f"{path}.url", "must be a non-empty string")
        count = raw.get("last_seen_post_count", 0)
        _expect(isinstance(count, int) and count >= 0, f"{path}.last_seen_post_count", "must be a non-negative integer")
        visit = raw.get("last_visit")
        _expect(visit is None or isinstance(visit, str), f"{path}.last_visit", "must be a string or null")
        threads[url] = ThreadRecord(
            url=url,
            title=str(raw.get("title", "")),
            section=str(raw.get("section", "")),
            last_seen_post_count=count,
            last_visit=visit,
        )
    return CrawlState(forum_id=forum_id, threads=threads)


def save_state(state: CrawlState, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(state_to_dict(state), indent=2, sort_keys=True) + "\n")


def load_state(path: Path) -> CrawlState:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise BlueprintSchemaError("$", f"not valid JSON: {exc}") from None
    return state_from_dict(data)


@dataclass(frozen=True, slots=True)
class PostRecord:
    """One extracted post.

    Detail fields are ``None`` when the page did not yield them; a
    missing author is recorded as missing, never borrowed from a
    neighbouring post.  ``date_text`` keeps the forum's display string
    untouched because date formats vary per platform and locale.
    """

    thread_url: str
    page_index: int  # 1-based within the thread
    position_in_page: int  # 1-based within the page
    author: Optional[str] = None
    date_text: Optional[str] = None
    body: Optional[str] = None

    @property
    def word_count(self) -> int:
        return len(self.body.split()) if self.body else 0

    def to_dict(self) -> dict:
        return {
            "thread_url": self.thread_url,
            "page_index": self.page_index,
            "position_in_page": self.position_in_page,
            "author": self.author,
            "date_text": self.date_text,
            "body": self.body,
            "word_count": self.word_count,
        }


def append_posts_jsonl(posts: Iterable[PostRecord], path: Path) -> int:
    """Append records to a JSON-lines file, returning how many were written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    written = 0
    with path.open("a", encoding="utf-8") as handle:
        for post in posts:
            handle.write(json.dumps(post.to_dict(), sort_keys=True) + "\n")
            written += 1
    return written
