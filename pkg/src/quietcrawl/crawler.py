"""Session-driven forum crawler.

One call to :meth:`Crawler.run_session` performs a human-shaped visit:
open the homepage, sign in, then work through the sections of interest
opening only threads that are new or have grown, reading them page by
page.  Every navigation is preceded by a delay sized to what a person
would have spent on the page just read, the plan's pauses stretch those
delays, and the session stops at the planned end even mid-section (the
visit ledger makes the next session pick up the difference).

Extraction never guesses: post details resolve page-wide and are then
assigned to the wrapper that contains them, so a displaced author drops
out instead of attaching to a neighbouring post.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Dict, List, Optional, Tuple
from urllib.parse import urljoin

from .behavior import BehaviorModel, SessionPlan
from .clock import Clock
from .dom import Document, Node
from .errors import (
    ConfigError,
    LoginFailed,
    MalformedPage,
    StructuralDrift,
    TransportError,
)
from .fetch import BrowserSession, FetchResult
from .inference import resolve
from .model import (
    CrawlState,
    ForumBlueprint,
    PageKind,
    PostRecord,
    ResourceIdentifier,
    ResourceRole,
    append_posts_jsonl,
    normalize_url,
    should_visit,
    update_thread_state,
)

_MIN_DELAY_S = 3.0

ProgressFn = Callable[[str], None]


@dataclass(frozen=True, slots=True)
class TimelineEntry:
    ts: datetime
    url: str
    kind: str  # page | subresource


@dataclass
class CrawlReport:
    """Outcome of one session, auditable against the server's own log."""

    session_plan: Optional[SessionPlan]
    pages_visited: int = 0
    threads_opened: int = 0
    threads_skipped_unchanged: int = 0
    posts_extracted: int = 0
    extraction_misses: Dict[str, int] = field(default_factory=dict)
    request_timeline: List[TimelineEntry] = field(default_factory=list)
    structural_drift_urls: List[str] = field(default_factory=list)
    thread_errors: List[str] = field(default_factory=list)
    completed: bool = True

    def to_dict(self) -> dict:
        plan = None
        if self.session_plan is not None:
            plan = {
                "start": self.session_plan.start.isoformat(),
                "end": self.session_plan.end.isoformat(),
                "skipped": self.session_plan.skipped,
                "forced": self.session_plan.forced,
                "pauses": [
                    {"offset_s": p.offset_s, "duration_s": p.duration_s}
                    for p in self.session_plan.pauses
                ],
            }
        return {
            "session_plan": plan,
            "pages_visited": self.pages_visited,
            "threads_opened": self.threads_opened,
            "threads_skipped_unchanged": self.threads_skipped_unchanged,
            "posts_extracted": self.posts_extracted,
            "extraction_misses": dict(self.extraction_misses),
            "structural_drift_urls": list(self.structural_drift_urls),
            "thread_errors": list(self.thread_errors),
            "completed": self.completed,
            "request_timeline": [
                {"ts": e.ts.isoformat(), "url": e.url, "kind": e.kind}
                for e in self.request_timeline
            ],
        }


@dataclass(frozen=True, slots=True)
class _ThreadLead:
    """A thread row as the section index presents it."""

    url: str
    title: str
    observed_post_count: Optional[int]


def extract_posts(
    doc: Document,
    blueprint: ForumBlueprint,
    thread_url: str,
    page_index: int,
) -> Tuple[List[PostRecord], Dict[str, int]]:
    """Posts on one thread page, with per-role miss counts.

    Details (author, date, body) are resolved over the whole page and
    mapped into post wrappers by containment.  A detail outside every
    wrapper is dropped; a wrapper lacking a detail yields None for it.
    """
    wrappers = _resolve_role(doc, blueprint, PageKind.THREAD_PAGE, ResourceRole.POST_WRAPPER)
    misses: Dict[str, int] = {}
    if not wrappers:
        return [], misses

    detail_roles = (
        (ResourceRole.POST_AUTHOR, "author"),
        (ResourceRole.POST_DATE, "date_text"),
        (ResourceRole.POST_BODY, "body"),
    )
    assigned: Dict[str, Dict[int, Node]] = {}
    for role, field_name in detail_roles:
        nodes = _resolve_role(doc, blueprint, PageKind.THREAD_PAGE, role)
        per_wrapper: Dict[int, Node] = {}
        for node in nodes:
            for index, wrapper in enumerate(wrappers):
                if wrapper.contains(node):
                    per_wrapper.setdefault(index, node)
                    break
        assigned[field_name] = per_wrapper

    records: List[PostRecord] = []
    for index in range(len(wrappers)):
        values: Dict[str, Optional[str]] = {}
        for role, field_name in detail_roles:
            node = assigned[field_name].get(index)
            if node is None:
                values[field_name] = None
                misses[role.value] = misses.get(role.value, 0) + 1
            else:
                values[field_name] = node.normalized_text
        records.append(PostRecord(
            thread_url=thread_url,
            page_index=page_index,
            position_in_page=index + 1,
            author=values["author"],
            date_text=values["date_text"],
            body=values["body"],
        ))
    return records, misses


def _resolve_role(
    doc: Document, blueprint: ForumBlueprint, kind: PageKind, role: ResourceRole
) -> List[Node]:
    identifier = blueprint.identifier_for(kind, role)
    if identifier is None:
        return []
    return resolve(doc, identifier)


def next_page_target(
    doc: Document,
    identifier: Optional[ResourceIdentifier],
    current_url: str,
    visited: set,
) -> Optional[str]:
    """URL behind the next-page control, or None when the walk is done.

    A recorded training conflict picks the chosen element out of the
    full match set; a single match is followed only if its target was
    not already fetched (on final pages the surviving button is the
    back one, and its target is always behind us).
    """
    if identifier is None:
        return None
    nodes = resolve(doc, identifier)
    if not nodes:
        return None
    conflict = identifier.conflict
    if conflict is not None and len(nodes) == conflict.resolved_count:
        node = nodes[conflict.chosen_index - 1]
    elif len(nodes) == 1:
        node = nodes[0]
    else:
        # Unexpected multiplicity: fall back to the first fresh target.
        node = next(
            (
                n for n in nodes
                if n.attrs.get("href")
                and normalize_url(urljoin(current_url, n.attrs["href"])) not in visited
            ),
            None,
        )
        if node is None:
            return None
    href = node.attrs.get("href")
    if not href:
        raise MalformedPage(f"pagination control on {current_url} has no href")
    target = urljoin(current_url, href)
    if normalize_url(target) in visited:
        return None
    return target


class Crawler:
    def __init__(
        self,
        blueprint: ForumBlueprint,
        state: CrawlState,
        session: BrowserSession,
        behavior: BehaviorModel,
        credentials: Tuple[str, str],
        clock: Optional[Clock] = None,
        posts_path: Optional[str] = None,
        progress: Optional[ProgressFn] = None,
    ) -> None:
        if not blueprint.is_complete():
            missing = ", ".join(
                f"{kind.value}/{role.value}" for kind, role in blueprint.missing_roles()
            )
            raise ConfigError(f"blueprint is incomplete, missing: {missing}")
        self.blueprint = blueprint
        self.state = state
        self.session = session
        self.behavior = behavior
        self.credentials = credentials
        self.clock = clock if clock is not None else Clock()
        self.posts_path = posts_path
        self._progress = progress

        # Session-scoped fields reset by run_session.
        self._report = CrawlReport(session_plan=None)
        self._deadline: Optional[datetime] = None
        self._pauses: List = []
        self._session_started: Optional[datetime] = None

    # -- logging ---------------------------------------------------------------

    def _log(self, event: str, url: str = "") -> None:
        if self._progress is not None:
            stamp = self.clock.now().isoformat()
            self._progress(f"{stamp} {event} {url}".rstrip())

    # -- pacing ------------------------------------------------------------------

    def _elapsed(self) -> float:
        assert self._session_started is not None
        return (self.clock.now() - self._session_started).total_seconds()

    def _sleep_with_pauses(self, delay: float) -> None:
        total = max(delay, _MIN_DELAY_S)
        while self._pauses and self._pauses[0].offset_s <= self._elapsed() + total:
            pause = self._pauses.pop(0)
            total += pause.duration_s
            self._log("pause", f"{pause.duration_s:.0f}s")
        self.clock.sleep(total)

    def _out_of_time(self) -> bool:
        return self._deadline is not None and self.clock.now() >= self._deadline

    # -- navigation --------------------------------------------------------------

    def _record_fetch(self, result: FetchResult) -> None:
        now = self.clock.now()
        self._report.request_timeline.append(
            TimelineEntry(ts=now, url=result.final_url, kind="page")
        )
        self._report.pages_visited += 1
        for sub in result.subresources:
            if sub.from_cache and sub.status == 200:
                continue  # pure cache hit, no request on the wire
            self._report.request_timeline.append(
                TimelineEntry(ts=now, url=sub.url, kind="subresource")
            )

    def _open(self, url: str) -> FetchResult:
        result = self.session.navigate(url)
        self._record_fetch(result)
        self._log("page", result.final_url)
        return result

    # -- login ---------------------------------------------------------------------

    def _login(self) -> None:
        login_url = self.blueprint.page_urls.get(PageKind.LOGIN_PAGE)
        if not login_url:
            raise ConfigError("blueprint has no login page URL")
        login_url = urljoin(self.blueprint.base_url, login_url)
        result = self._open(login_url)
        doc = result.document()

        fields: Dict[str, str] = {}
        username_node: Optional[Node] = None
        for role, value in (
            (ResourceRole.USERNAME_FIELD, self.credentials[0]),
            (ResourceRole.PASSWORD_FIELD, self.credentials[1]),
        ):
            nodes = _resolve_role(doc, self.blueprint, PageKind.LOGIN_PAGE, role)
            if len(nodes) != 1:
                raise StructuralDrift(
                    f"{role.value} resolved {len(nodes)} nodes on the login page"
                )
            name = nodes[0].attrs.get("name")
            if not name:
                raise MalformedPage(f"{role.value} input has no name attribute")
            fields[name] = value
            if role == ResourceRole.USERNAME_FIELD:
                username_node = nodes[0]

        assert username_node is not None
        form = next(
            (a for a in username_node.ancestors() if a.tag == "form"), None
        )
        if form is None:
            raise MalformedPage("login fields are not inside a form")

        self._sleep_with_pauses(self.behavior.reading_delay([]))
        submitted = self.session.submit_form(form, fields, page_url=result.final_url)
        self._record_fetch(submitted)
        self._log("login", submitted.final_url)

        after = submitted.document()
        still_login = _resolve_role(
            after, self.blueprint, PageKind.LOGIN_PAGE, ResourceRole.PASSWORD_FIELD
        )
        if still_login:
            raise LoginFailed("credentials were not accepted")

    # -- section and thread walks -----------------------------------------------------

    def _thread_leads(self, doc: Document, page_url: str) -> List[_ThreadLead]:
        links = _resolve_role(doc, self.blueprint, PageKind.SECTION_INDEX, ResourceRole.THREAD_LINK)
        counters = _resolve_role(doc, self.blueprint, PageKind.SECTION_INDEX, ResourceRole.THREAD_REPLIES)
        leads: List[_ThreadLead] = []
        for index, link in enumerate(links):
            href = link.attrs.get("href")
            if not href:
                continue
            observed: Optional[int] = None
            if len(counters) == len(links):
                observed = _parse_replies(counters[index])
            leads.append(_ThreadLead(
                url=urljoin(page_url, href),
                title=link.normalized_text,
                observed_post_count=observed,
            ))
        return leads

    def _crawl_thread(self, lead: _ThreadLead, section_url: str) -> bool:
        """Walk one thread; returns False when the session ran out of time."""
        record = self.state.record_for(lead.url)
        already_seen = record.last_seen_post_count if record else 0
        self._report.threads_opened += 1
        canonical = normalize_url(lead.url)

        visited: set = set()
        url = lead.url
        page_index = 0
        seen_in_thread = 0
        next_identifier = self.blueprint.identifier_for(
            PageKind.THREAD_PAGE, ResourceRole.NEXT_PAGE_BUTTON
        )
        while url is not None:
            try:
                result = self._open(url)
            except TransportError as exc:
                self._log("thread-error", f"{url} {exc}")
                self._report.thread_errors.append(f"{url}: {exc}")
                self._sleep_with_pauses(self.behavior.reading_delay([]))
                break
            page_index += 1
            visited.add(normalize_url(result.final_url))
            doc = result.document()
            records, misses = extract_posts(doc, self.blueprint, lead.url, page_index)
            if not records:
                self._log("structural-drift", result.final_url)
                self._report.structural_drift_urls.append(result.final_url)
                self._sleep_with_pauses(self.behavior.reading_delay([]))
                break
            for role, count in misses.items():
                self._report.extraction_misses[role] = (
                    self._report.extraction_misses.get(role, 0) + count
                )

            fresh = [
                r for r in records
                if seen_in_thread + r.position_in_page > already_seen
            ]
            seen_in_thread += len(records)
            if fresh and self.posts_path:
                append_posts_jsonl(fresh, self.posts_path)
            self._report.posts_extracted += len(fresh)

            target = next_page_target(doc, next_identifier, result.final_url, visited)

            # Reading time covers only what was actually new on the page.
            self._sleep_with_pauses(
                self.behavior.reading_delay([r.word_count for r in fresh])
            )

            if seen_in_thread > already_seen:
                self.state = update_thread_state(
                    self.state,
                    lead.url,
                    title=lead.title,
                    section=section_url,
                    post_count=seen_in_thread,
                    visited_at=self.clock.now().isoformat(),
                )
            if target is None:
                return True
            if self._out_of_time():
                self._log("plan-end", result.final_url)
                return False
            url = target
        return True

    def _crawl_section(self, section_url: str) -> bool:
        """Walk one section; returns False when the session ran out of time."""
        visited: set = set()
        url = section_url
        next_identifier = self.blueprint.identifier_for(
            PageKind.SECTION_INDEX, ResourceRole.NEXT_PAGE_BUTTON
        )
        while url is not None:
            result = self._open(url)
            page_url = result.final_url
            visited.add(normalize_url(page_url))
            doc = result.document()
            leads = self._thread_leads(doc, page_url)
            self._sleep_with_pauses(self.behavior.reading_delay([]))

            for lead in leads:
                if not should_visit(lead.url, lead.observed_post_count, self.state):
                    self._report.threads_skipped_unchanged += 1
                    continue
                if self._out_of_time():
                    self._log("plan-end", page_url)
                    return False
                if not self._crawl_thread(lead, section_url):
                    return False
                # Back to the cached index page before the next click.
                self.session.back_to(page_url)

            target = next_page_target(doc, next_identifier, page_url, visited)
            if target is None:
                return True
            if self._out_of_time():
                self._log("plan-end", page_url)
                return False
            url = target
        return True

    # -- the session entry point ---------------------------------------------------------

    def run_session(self, plan: SessionPlan) -> CrawlReport:
        self._report = CrawlReport(session_plan=plan)
        if plan.skipped:
            self._log("session-skipped", plan.start.isoformat())
            return self._report

        self._deadline = plan.end
        self._pauses = list(plan.pauses)
        self._session_started = self.clock.now()
        self._log("session-start", self.blueprint.base_url)

        home_url = urljoin(
            self.blueprint.base_url,
            self.blueprint.page_urls.get(PageKind.HOME_PAGE, ""),
        )
        result = self._open(home_url)
        self._sleep_with_pauses(self.behavior.reading_delay([]))
        self._login()
        self._sleep_with_pauses(self.behavior.reading_delay([]))

        completed = True
        for section_url in self.blueprint.sections_of_interest:
            if self._out_of_time():
                completed = False
                break
            absolute = urljoin(self.blueprint.base_url, section_url)
            if not self._crawl_section(absolute):
                completed = False
                break

        self._report.completed = completed
        self._log("session-end", "complete" if completed else "cut-short")
        return self._report


def _parse_replies(node: Node) -> Optional[int]:
    match = re.search(r"\d+", node.normalized_text)
    if not match:
        return None
    # The index shows replies; the thread itself has one more post.
    return int(match.group()) + 1
