"""Synthetic forums for training, crawling and log-analysis tests.

Four page skins patterned after common forum platforms, each hiding the
structural trap that family is known for:

* ``mybb``: the first post of every thread wraps the author name in an
  extra styling tag, so a structural XPath trained on plain posts
  misses it and the parent-level selector has to take over.
* ``ipb``: one author element is rendered outside its post wrapper
  (more displacements can be injected for fuzzing).
* ``xenforo``: forward and back pagination buttons share one class, so
  an identifier trained on page 1 resolves two elements on inner pages.
* ``vbulletin``: post wrappers and post bodies share an id prefix
  (``post_101`` / ``post_message_101``), so the id scan over-matches
  two-fold and only a class selector isolates the wrappers.

Content is generated deterministically per family: the same fixture is
byte-identical across processes. Threads can grow between crawl
sessions via :meth:`ForumFixture.add_posts`.

Role targets carry a ``data-gt`` attribute naming what they are
(``author:10101``, ``nav:next``...). Identifier inference never reads
attributes other than ``id`` and ``class``, so the marker is inert; it
exists so scripted operators and assertions can find ground truth
without duplicating the renderer.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from html import escape
from typing import Dict, Iterator, List, Optional, Tuple

from ..dom import Document, Node
from ..model import PageKind, ResourceRole, Technique

FIXTURE_FAMILIES = ("mybb", "ipb", "xenforo", "vbulletin")

USERNAME = "walker"
PASSWORD = "correct-horse"

_NAMES = [
    "quasar", "redoct", "mavet", "silkworm", "drossel", "nullpath",
    "harbor", "vexille", "ostro", "lampyris", "cinder", "widget",
    "parsec", "gullwing",
]

_WORDS = (
    "the quick unsigned ledger spins over a brittle mirror while local "
    "vendors trade spare keys under fluorescent light and nobody writes "
    "down which entry was settled first because the queue drains itself "
    "every other night leaving only checksums behind"
).split()

_TITLES = [
    "Spare parts inventory", "Key rotation schedule", "Mirror sync notes",
    "Quiet hours policy", "Old ledger cleanup", "Vendor vetting",
    "Checksum mismatch", "Queue drain report", "Entry dispute",
    "Backup cadence", "Handle migration", "Archive requests",
]

_MONTHS = [
    "January", "February", "March", "April", "May", "June", "July",
    "August", "September", "October", "November", "December",
]

# 1x1 transparent PNG, served for every image path.
PNG_BYTES = bytes.fromhex(
    "89504e470d0a1a0a0000000d49484452000000010000000108060000001f15c489"
    "0000000d4944415478da63fcffff3f030005fe02fea35881840000000049454e44ae426082"
)

JS_BYTES = b"/* decorative niceties; the site works without scripts */\n"


@dataclass
class FixturePost:
    pid: int
    author: str
    date_text: str
    body: str
    has_attachment: bool = False


@dataclass
class FixtureThread:
    tid: int
    section_id: int
    title: str
    posts: List[FixturePost] = field(default_factory=list)


@dataclass(frozen=True, slots=True)
class FixtureSection:
    sid: int
    title: str
    of_interest: bool


@dataclass(frozen=True, slots=True)
class Displacement:
    """An author element rendered outside its post wrapper.

    ``header`` puts the element into the page-top notice area, ``sibling``
    between the victim's wrapper and the next one.
    """

    tid: int
    pid: int
    flavor: str


@dataclass(frozen=True, slots=True)
class RolePlan:
    """Scripted-operator recipe for training one role.

    ``clicks`` name the exemplar elements by their data-gt markers;
    wrapper roles use pasted ``snippets`` instead. ``page_targets`` are
    the markers a correct identifier must cover on the training page,
    and the expected technique/selector encode the documented right
    answer the operator holds out for.
    """

    kind: PageKind
    role: ResourceRole
    expects_many: bool
    clicks: Tuple[str, ...] = ()
    snippets: Tuple[str, ...] = ()
    page_targets: Tuple[str, ...] = ()
    expected_technique: Optional[Technique] = None
    expected_selector: Optional[str] = None
    expected_conflict: bool = False


def node_by_gt(doc: Document, value: str) -> Node:
    matches = [n for n in doc.nodes if n.attrs.get("data-gt") == value]
    if len(matches) != 1:
        raise LookupError(f"data-gt={value!r}: {len(matches)} matches")
    return matches[0]


def nodes_by_gt_prefix(doc: Document, prefix: str) -> List[Node]:
    return [
        n for n in doc.nodes
        if n.attrs.get("data-gt", "").startswith(prefix)
    ]


def plan_accepts(doc: Document, plan: RolePlan, identifier, resolved: List[Node]) -> bool:
    """Scripted-operator verdict on a candidate identifier.

    Accepts only the documented right answer for the fixture: technique
    (and selector, where pinned) must match the plan, the resolution
    must cover every ground-truth target on the page, and the counts
    must agree.
    """
    if plan.expected_technique is not None and identifier.technique != plan.expected_technique:
        return False
    if plan.expected_selector is not None and identifier.selector != plan.expected_selector:
        return False
    targets = [node_by_gt(doc, value) for value in plan.page_targets]
    if len(resolved) != len(targets):
        return False
    return all(
        any(node is target or node.contains(target) for node in resolved)
        for target in targets
    )


def _slug(title: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", title.lower()).strip("-")


def _minute_stamp(counter: int) -> Tuple[int, int, int, int]:
    """(day, month, hour, minute) for the counter-th post of the forum."""
    base = counter * 37
    minute = base % 60
    hour = 9 + (base // 60) % 11
    day = 1 + (base // (60 * 11)) % 27
    month = 2 + (base // (60 * 11 * 27)) % 3
    return day, month, hour, minute


class ForumFixture:
    """One synthetic forum: content model plus skin-specific rendering."""

    def __init__(self, family: str):
        if family not in FIXTURE_FAMILIES:
            raise ValueError(f"unknown fixture family {family!r}")
        self.family = family
        self.skin: _Skin = _SKINS[family]()
        self.sections: List[FixtureSection] = [
            FixtureSection(2, "Protocol Watch", True),
            FixtureSection(3, "Trade Floor", True),
            FixtureSection(4, "Lounge", False),
        ]
        self.threads: Dict[int, FixtureThread] = {}
        self.displacements: List[Displacement] = []
        self._rng = random.Random(f"fixture:{family}")
        self._post_counter = 0
        self._build_content()
        if family == "ipb":
            # The shipped hard case: thread 102's second post renders
            # its author into the page notice area.  Thread 101 stays
            # clean because training happens there.
            victim = self.threads[102].posts[1]
            self.displacements.append(Displacement(102, victim.pid, "header"))

    # -- content generation ------------------------------------------------

    def _build_content(self) -> None:
        per_section = {"mybb": 10, "ipb": 8, "xenforo": 8, "vbulletin": 6}[self.family]
        tid = 100
        for section in self.sections:
            count = per_section if section.of_interest else 3
            for _ in range(count):
                tid += 1
                self.threads[tid] = self._make_thread(tid, section.sid)
        # The training thread must span three pages: page 2 then carries
        # both pagination directions, which the conflict check needs.
        first = self.threads[101]
        while len(first.posts) < 2 * self.posts_per_page + 2:
            first.posts.append(self._make_post(first.tid, len(first.posts)))

    def _make_thread(self, tid: int, section_id: int) -> FixtureThread:
        thread = FixtureThread(
            tid=tid,
            section_id=section_id,
            title=f"{_TITLES[tid % len(_TITLES)]} {tid}",
        )
        for index in range(3 + self._rng.randrange(8)):
            thread.posts.append(self._make_post(tid, index))
        return thread

    def _make_post(self, tid: int, index: int) -> FixturePost:
        self._post_counter += 1
        pid = tid * 100 + index + 1
        author = _NAMES[(tid + index * 3) % len(_NAMES)]
        day, month, hour, minute = _minute_stamp(self._post_counter)
        date_text = self.skin.format_date(day, month, hour, minute)
        filler_len = 12 + self._rng.randrange(50)
        start = self._rng.randrange(len(_WORDS))
        filler = " ".join(_WORDS[(start + k) % len(_WORDS)] for k in range(filler_len))
        body = f"Archived note {tid}.{index + 1} for the record. {filler}."
        return FixturePost(
            pid=pid,
            author=author,
            date_text=date_text,
            body=body,
            has_attachment=(index % 3 == 2),
        )

    # -- mutation hooks ----------------------------------------------------

    def add_posts(self, tid: int, count: int) -> None:
        thread = self.threads[tid]
        for _ in range(count):
            thread.posts.append(self._make_post(tid, len(thread.posts)))

    def displace_author(self, tid: int, position: int, flavor: str = "header") -> None:
        """Render the author of the 1-based ``position``-th post outside
        its wrapper."""
        if flavor not in ("header", "sibling"):
            raise ValueError("flavor must be 'header' or 'sibling'")
        pid = self.threads[tid].posts[position - 1].pid
        self.displacements.append(Displacement(tid, pid, flavor))

    def clear_displacements(self) -> None:
        self.displacements = []

    def displacement_for(self, pid: int) -> Optional[Displacement]:
        for disp in self.displacements:
            if disp.pid == pid:
                return disp
        return None

    # -- derived ground truth ------------------------------------------------

    @property
    def posts_per_page(self) -> int:
        return self.skin.posts_per_page

    @property
    def threads_per_page(self) -> int:
        return self.skin.threads_per_page

    def section(self, sid: int) -> FixtureSection:
        return next(s for s in self.sections if s.sid == sid)

    def interesting_sections(self) -> List[FixtureSection]:
        return [s for s in self.sections if s.of_interest]

    def interesting_threads(self) -> List[FixtureThread]:
        interesting = {s.sid for s in self.interesting_sections()}
        return [t for t in self.threads.values() if t.section_id in interesting]

    def section_threads(self, sid: int) -> List[FixtureThread]:
        return [t for t in self.threads.values() if t.section_id == sid]

    def section_page_count(self, sid: int) -> int:
        n = len(self.section_threads(sid))
        return max(1, -(-n // self.threads_per_page))

    def section_page_threads(self, sid: int, page: int) -> List[FixtureThread]:
        lo = (page - 1) * self.threads_per_page
        return self.section_threads(sid)[lo:lo + self.threads_per_page]

    def thread_page_count(self, tid: int) -> int:
        n = len(self.threads[tid].posts)
        return max(1, -(-n // self.posts_per_page))

    def thread_page_posts(self, tid: int, page: int) -> List[FixturePost]:
        lo = (page - 1) * self.posts_per_page
        return self.threads[tid].posts[lo:lo + self.posts_per_page]

    def snippet_for(self, tid: int, position: int) -> str:
        """Text unique to the given post (1-based position in thread)."""
        return f"Archived note {tid}.{position} for the record"

    def expected_author(self, pid: int, tid: int) -> Optional[str]:
        """Author the crawler should report: None when displaced."""
        if self.displacement_for(pid) is not None:
            return None
        for post in self.threads[tid].posts:
            if post.pid == pid:
                return post.author
        raise KeyError(pid)

    # -- URL scheme ----------------------------------------------------------

    def home_path(self) -> str:
        return self.skin.home_path

    def login_path(self) -> str:
        return self.skin.login_path

    def login_post_path(self) -> str:
        return self.skin.login_post_path

    def section_path(self, sid: int, page: int = 1) -> str:
        return self.skin.section_path(self, sid, page)

    def thread_path(self, tid: int, page: int = 1) -> str:
        return self.skin.thread_path(self, tid, page)

    def bogus_thread_path(self, tid: int) -> str:
        """A thread-shaped path for an id that does not exist (404s)."""
        sample = min(self.threads)
        return self.skin.thread_path(self, sample, 1).replace(str(sample), str(tid))

    def thread_id_pattern(self) -> str:
        """Regex with one group capturing the thread id in a request path."""
        return self.skin.thread_id_pattern

    def thread_id_from_path(self, path: str) -> Optional[int]:
        match = re.search(self.skin.thread_id_pattern, path)
        return int(match.group(1)) if match else None

    def training_pages(self) -> Dict[str, str]:
        """Paths of the pages one training session works through."""
        return {
            "login": self.login_path(),
            "home": self.home_path(),
            "section": self.section_path(2, 1),
            "section_inner": self.section_path(2, 2),
            "thread": self.thread_path(101, 1),
            "thread_inner": self.thread_path(101, 2),
        }

    # -- rendering -----------------------------------------------------------

    def render_path(self, path_and_query: str, method: str = "GET") -> Optional[str]:
        """Page HTML for a request path, None when nothing routes there."""
        path, _, raw_query = path_and_query.partition("?")
        query: Dict[str, str] = {}
        for pair in raw_query.split("&"):
            if "=" in pair:
                key, _, value = pair.partition("=")
                query[key] = value
        return self.skin.render(self, path, query, method)

    def render_login(self, error: bool = False) -> str:
        return self.skin.login(self, error)

    def asset_bytes(self, path: str) -> Optional[Tuple[bytes, str]]:
        if path.startswith("/css/") and path.endswith(".css"):
            name = path.rsplit("/", 1)[-1]
            body = f"/* {name} */ body {{ font-family: sans-serif; margin: 0; }}\n"
            return body.encode(), "text/css"
        if path.startswith("/js/") and path.endswith(".js"):
            return JS_BYTES, "application/javascript"
        if path.startswith(("/images/", "/attachments/")) and path.endswith(".png"):
            return PNG_BYTES, "image/png"
        return None

    # -- scripted training ----------------------------------------------------

    def exemplar_plans(self) -> List[RolePlan]:
        return self.skin.exemplar_plans(self)

    def expected_technique(self, kind: PageKind, role: ResourceRole) -> Technique:
        for plan in self.exemplar_plans():
            if plan.kind == kind and plan.role == role:
                assert plan.expected_technique is not None
                return plan.expected_technique
        raise KeyError((kind, role))


def build_fixture(family: str) -> ForumFixture:
    return ForumFixture(family)


# -- skins -------------------------------------------------------------------


class _Skin:
    """Rendering and URL scheme for one platform family."""

    family: str
    posts_per_page: int
    threads_per_page: int
    home_path: str
    login_path: str
    login_post_path: str
    thread_id_pattern: str
    page_css: str
    user_field: str
    pass_field: str

    def format_date(self, day: int, month: int, hour: int, minute: int) -> str:
        raise NotImplementedError

    def section_path(self, fixture: ForumFixture, sid: int, page: int) -> str:
        raise NotImplementedError

    def thread_path(self, fixture: ForumFixture, tid: int, page: int) -> str:
        raise NotImplementedError

    def render(
        self, fixture: ForumFixture, path: str, query: Dict[str, str], method: str
    ) -> Optional[str]:
        raise NotImplementedError

    def login(self, fixture: ForumFixture, error: bool) -> str:
        raise NotImplementedError

    def exemplar_plans(self, fixture: ForumFixture) -> List[RolePlan]:
        raise NotImplementedError

    def _head(self, title: str) -> str:
        return (
            "<!DOCTYPE html>\n<html>\n<head>\n"
            '<meta charset="utf-8">\n'
            f"<title>{escape(title)}</title>\n"
            '<link rel="stylesheet" href="/css/global.css">\n'
            f'<link rel="stylesheet" href="/css/{self.page_css}">\n'
            '<script src="/js/common.js"></script>\n'
            "</head>\n<body>\n"
        )

    @staticmethod
    def _tail() -> str:
        return "</body>\n</html>\n"

    @staticmethod
    def _query_int(query: Dict[str, str], key: str, default: int = 0) -> int:
        try:
            return int(query.get(key, default))
        except ValueError:
            return default

    # Shared plan pieces: exemplar markers common to every family.

    @staticmethod
    def _section_link_plan(fixture: ForumFixture, expected: Technique) -> RolePlan:
        return RolePlan(
            kind=PageKind.HOME_PAGE,
            role=ResourceRole.SECTION_LINK,
            expects_many=True,
            clicks=("section:2", "section:3"),
            page_targets=tuple(f"section:{s.sid}" for s in fixture.sections),
            expected_technique=expected,
        )

    @staticmethod
    def _thread_list_plans(
        fixture: ForumFixture,
        link_expected: Technique,
        replies_expected: Technique,
        link_selector: Optional[str] = None,
        replies_selector: Optional[str] = None,
    ) -> List[RolePlan]:
        tids = [t.tid for t in fixture.section_page_threads(2, 1)]
        return [
            RolePlan(
                kind=PageKind.SECTION_INDEX,
                role=ResourceRole.THREAD_LINK,
                expects_many=True,
                clicks=(f"thread:{tids[0]}", f"thread:{tids[1]}"),
                page_targets=tuple(f"thread:{t}" for t in tids),
                expected_technique=link_expected,
                expected_selector=link_selector,
            ),
            RolePlan(
                kind=PageKind.SECTION_INDEX,
                role=ResourceRole.THREAD_REPLIES,
                expects_many=True,
                clicks=(f"replies:{tids[0]}", f"replies:{tids[1]}"),
                page_targets=tuple(f"replies:{t}" for t in tids),
                expected_technique=replies_expected,
                expected_selector=replies_selector,
            ),
        ]

    @staticmethod
    def _thread_detail_plans(
        fixture: ForumFixture,
        wrapper_expected: Technique,
        wrapper_selector: Optional[str],
        author_expected: Technique,
        author_clicks: int = 2,
    ) -> List[RolePlan]:
        pids = [p.pid for p in fixture.thread_page_posts(101, 1)]
        return [
            RolePlan(
                kind=PageKind.THREAD_PAGE,
                role=ResourceRole.POST_WRAPPER,
                expects_many=True,
                snippets=(fixture.snippet_for(101, 1), fixture.snippet_for(101, 2)),
                page_targets=tuple(f"wrapper:{p}" for p in pids),
                expected_technique=wrapper_expected,
                expected_selector=wrapper_selector,
            ),
            RolePlan(
                kind=PageKind.THREAD_PAGE,
                role=ResourceRole.POST_AUTHOR,
                expects_many=True,
                clicks=tuple(f"author:{p}" for p in pids[:author_clicks]),
                page_targets=tuple(f"author:{p}" for p in pids),
                expected_technique=author_expected,
            ),
            RolePlan(
                kind=PageKind.THREAD_PAGE,
                role=ResourceRole.POST_DATE,
                expects_many=True,
                clicks=(f"date:{pids[0]}", f"date:{pids[1]}"),
                page_targets=tuple(f"date:{p}" for p in pids),
                expected_technique=Technique.EXACT_XPATH,
            ),
            RolePlan(
                kind=PageKind.THREAD_PAGE,
                role=ResourceRole.POST_BODY,
                expects_many=True,
                clicks=(f"body:{pids[0]}", f"body:{pids[1]}"),
                page_targets=tuple(f"body:{p}" for p in pids),
                expected_technique=Technique.EXACT_XPATH,
            ),
        ]

    @staticmethod
    def _login_plans(expected: Dict[ResourceRole, Technique]) -> List[RolePlan]:
        return [
            RolePlan(
                kind=PageKind.LOGIN_PAGE,
                role=role,
                expects_many=False,
                clicks=(marker,),
                page_targets=(marker,),
                expected_technique=expected[role],
            )
            for role, marker in (
                (ResourceRole.USERNAME_FIELD, "login:user"),
                (ResourceRole.PASSWORD_FIELD, "login:pass"),
                (ResourceRole.LOGIN_SUBMIT, "login:submit"),
            )
        ]

    @staticmethod
    def _next_plan(
        kind: PageKind,
        expected: Technique,
        selector: Optional[str] = None,
        conflict: bool = False,
    ) -> RolePlan:
        return RolePlan(
            kind=kind,
            role=ResourceRole.NEXT_PAGE_BUTTON,
            expects_many=False,
            clicks=("nav:next",),
            page_targets=("nav:next",),
            expected_technique=expected,
            expected_selector=selector,
            expected_conflict=conflict,
        )


class _MybbSkin(_Skin):
    """Hard case: the first post styles the author name with an extra
    tag inside the username span, so only the parent-level selector
    covers every author."""

    family = "mybb"
    posts_per_page = 4
    threads_per_page = 6
    home_path = "/index.php"
    login_path = "/member.php?action=login"
    login_post_path = "/member.php?action=do_login"
    thread_id_pattern = r"showthread\.php\?(?:[^ ]*&)?tid=(\d+)"
    page_css = "board.css"
    user_field = "username"
    pass_field = "password"

    def format_date(self, day: int, month: int, hour: int, minute: int) -> str:
        return f"{_MONTHS[month - 1][:3]} {day} 2019, {hour:02d}:{minute:02d}"

    def section_path(self, fixture: ForumFixture, sid: int, page: int) -> str:
        path = f"/forumdisplay.php?fid={sid}"
        return path if page == 1 else f"{path}&page={page}"

    def thread_path(self, fixture: ForumFixture, tid: int, page: int) -> str:
        path = f"/showthread.php?tid={tid}"
        return path if page == 1 else f"{path}&page={page}"

    def render(self, fixture, path, query, method):
        if path == "/index.php":
            return self._frame("Bastion Board", self._home(fixture))
        if path == "/member.php" and query.get("action") == "login":
            return self.login(fixture, False)
        if path == "/forumdisplay.php":
            sid = self._query_int(query, "fid")
            if any(s.sid == sid for s in fixture.sections):
                page = max(1, self._query_int(query, "page", 1))
                return self._frame(
                    fixture.section(sid).title, self._section(fixture, sid, page)
                )
        if path == "/showthread.php":
            tid = self._query_int(query, "tid")
            if tid in fixture.threads:
                page = max(1, self._query_int(query, "page", 1))
                return self._frame(
                    fixture.threads[tid].title, self._thread(fixture, tid, page)
                )
        return None

    def _frame(self, title: str, content: str) -> str:
        return (
            self._head(title)
            + '<div id="container">\n'
            + '<div id="header"><img src="/images/mybb_logo.png" alt="Bastion Board">'
            + '<div class="menu"><a href="/index.php">Board index</a>'
            + '<a href="/member.php?action=login">Log in</a></div></div>\n'
            + content
            + '<div id="footer">Powered by community software</div>\n'
            + "</div>\n"
            + self._tail()
        )

    def login(self, fixture, error):
        notice = '<div class="login_error">Wrong username or password.</div>' if error else ""
        icons = "".join(
            f'<img src="/images/icon_{i}.png" alt="">' for i in range(1, 10)
        )
        content = (
            '<div id="content">\n<div class="login_box">\n'
            + notice
            + '<form action="/member.php?action=do_login" method="post">\n'
            '<div class="form_row"><label>Username</label>'
            '<input type="text" name="username" id="login_user" data-gt="login:user"></div>\n'
            '<div class="form_row"><label>Password</label>'
            '<input type="password" name="password" id="login_pass" data-gt="login:pass"></div>\n'
            '<div class="form_row"><button type="submit" data-gt="login:submit">Log in</button></div>\n'
            "</form>\n</div>\n"
            f'<div class="login_icons">{icons}</div>\n'
            "</div>\n"
        )
        return self._frame("Log in", content)

    def _home(self, fixture: ForumFixture) -> str:
        rows = []
        for section in fixture.sections:
            count = len(fixture.section_threads(section.sid))
            rows.append(
                '<div class="forum_row"><img class="forum_icon" src="/images/folder.png">'
                '<div class="forum_info">'
                f'<a class="forum_link" href="/forumdisplay.php?fid={section.sid}"'
                f' data-gt="section:{section.sid}">{escape(section.title)}</a>'
                '<span class="forum_desc">Long-running discussions.</span></div>'
                f'<span class="forum_stats">{count} threads</span></div>'
            )
            rows.append("\n")
        return (
            '<div id="content">\n<div class="forum_list">\n'
            + "".join(rows)
            + "</div>\n</div>\n"
        )

    def _pagenav(self, pages: int, page: int, href) -> str:
        parts = ['<div class="pagenav">']
        if page > 1:
            parts.append(
                f'<a id="prev_page" data-gt="nav:prev" href="{href(page - 1)}">&laquo; Prev</a>'
            )
        parts.append(f'<span class="pagecur">Page {page} of {pages}</span>')
        if page < pages:
            parts.append(
                f'<a id="next_page" data-gt="nav:next" href="{href(page + 1)}">Next &raquo;</a>'
            )
        parts.append("</div>\n")
        return "".join(parts)

    def _section(self, fixture: ForumFixture, sid: int, page: int) -> str:
        rows = []
        for thread in fixture.section_page_threads(sid, page):
            rows.append(
                '<div class="thread_row"><img class="thread_icon" src="/images/folder.png">'
                '<div class="thread_info">'
                f'<a class="thread_title" href="{self.thread_path(fixture, thread.tid, 1)}"'
                f' data-gt="thread:{thread.tid}">{escape(thread.title)}</a>'
                f'<span class="thread_author">by {thread.posts[0].author}</span></div>'
                f'<span class="replies_num" data-gt="replies:{thread.tid}">{len(thread.posts) - 1}</span>'
                f'<span class="views_num">{thread.tid * 7 % 400 + 30}</span></div>'
            )
            rows.append("\n")
        nav = self._pagenav(
            fixture.section_page_count(sid), page,
            lambda p: self.section_path(fixture, sid, p),
        )
        return (
            '<div id="content">\n<div class="thread_list">\n'
            + "".join(rows)
            + "</div>\n"
            + nav
            + "</div>\n"
        )

    def _thread(self, fixture: ForumFixture, tid: int, page: int) -> str:
        thread = fixture.threads[tid]
        blocks = []
        for offset, post in enumerate(fixture.thread_page_posts(tid, page)):
            first_of_thread = page == 1 and offset == 0
            name_link = f'<a href="/member.php?action=profile&amp;uid=7" data-gt="author:{post.pid}">{post.author}</a>'
            if first_of_thread:
                name_link = f"<strong>{name_link}</strong>"
            attach = (
                f'<img class="post_image" src="/attachments/{post.pid}.png">'
                if post.has_attachment
                else ""
            )
            blocks.append(
                f'<div id="post_{post.pid}" class="classic_post" data-gt="wrapper:{post.pid}">\n'
                f'<div class="post_author"><img class="avatar" src="/images/avatars/{post.author}.png">'
                f'<span class="post_username">{name_link}</span>'
                '<span class="post_stars">&#9733;&#9733;</span></div>\n'
                f'<div class="post_head"><span class="post_date" data-gt="date:{post.pid}">{post.date_text}</span></div>\n'
                f'<div id="pid_{post.pid}" class="post_body" data-gt="body:{post.pid}">{escape(post.body)}{attach}</div>\n'
                "</div>\n"
            )
        nav = self._pagenav(
            fixture.thread_page_count(tid), page,
            lambda p: self.thread_path(fixture, tid, p),
        )
        return (
            '<div id="content">\n'
            f'<h1 class="thread_subject">{escape(thread.title)}</h1>\n'
            '<div class="posts">\n'
            + "".join(blocks)
            + "</div>\n"
            + nav
            + "</div>\n"
        )

    def exemplar_plans(self, fixture: ForumFixture) -> List[RolePlan]:
        plans = self._login_plans({
            ResourceRole.USERNAME_FIELD: Technique.EXACT_XPATH,
            ResourceRole.PASSWORD_FIELD: Technique.EXACT_XPATH,
            ResourceRole.LOGIN_SUBMIT: Technique.EXACT_XPATH,
        })
        plans.append(self._section_link_plan(fixture, Technique.EXACT_XPATH))
        plans.extend(self._thread_list_plans(
            fixture, Technique.EXACT_XPATH, Technique.EXACT_XPATH,
        ))
        plans.append(self._next_plan(
            PageKind.SECTION_INDEX, Technique.EXACT_XPATH, '//*[@id="next_page"]',
        ))
        plans.extend(self._thread_detail_plans(
            fixture,
            wrapper_expected=Technique.EXACT_XPATH,
            wrapper_selector='//*[starts-with(@id,"post_")]',
            author_expected=Technique.PARENT_XPATH,
            author_clicks=3,
        ))
        plans.append(self._next_plan(
            PageKind.THREAD_PAGE, Technique.EXACT_XPATH, '//*[@id="next_page"]',
        ))
        return plans


class _IpbSkin(_Skin):
    """Hard case: a displaced author element.  Pagination anchors live in
    fixed back/forward containers, so their absolute paths stay stable
    across pages."""

    family = "ipb"
    posts_per_page = 5
    threads_per_page = 5
    home_path = "/index.php"
    login_path = "/login"
    login_post_path = "/login"
    thread_id_pattern = r"/topic/(\d+)-"
    page_css = "community.css"
    user_field = "ips_username"
    pass_field = "ips_password"

    def format_date(self, day: int, month: int, hour: int, minute: int) -> str:
        return f"{day:02d} {_MONTHS[month - 1]} 2019 - {hour:02d}:{minute:02d}"

    def section_path(self, fixture: ForumFixture, sid: int, page: int) -> str:
        base = f"/forum/{sid}-{_slug(fixture.section(sid).title)}/"
        if page == 1:
            return base
        return f"{base}?st={(page - 1) * self.threads_per_page}"

    def thread_path(self, fixture: ForumFixture, tid: int, page: int) -> str:
        base = f"/topic/{tid}-{_slug(fixture.threads[tid].title)}/"
        if page == 1:
            return base
        return f"{base}?st={(page - 1) * self.posts_per_page}"

    def render(self, fixture, path, query, method):
        if path == "/index.php":
            return self._frame("Undertow Community", self._home(fixture))
        if path == "/login":
            return self.login(fixture, False)
        match = re.fullmatch(r"/forum/(\d+)-[a-z0-9-]*/", path)
        if match:
            sid = int(match.group(1))
            if any(s.sid == sid for s in fixture.sections):
                page = self._query_int(query, "st") // self.threads_per_page + 1
                return self._frame(
                    fixture.section(sid).title, self._section(fixture, sid, page)
                )
        match = re.fullmatch(r"/topic/(\d+)-[a-z0-9-]*/", path)
        if match:
            tid = int(match.group(1))
            if tid in fixture.threads:
                page = self._query_int(query, "st") // self.posts_per_page + 1
                return self._frame(
                    fixture.threads[tid].title, self._thread(fixture, tid, page)
                )
        return None

    def _frame(self, title: str, content: str) -> str:
        return (
            self._head(title)
            + '<div id="ipbwrapper">\n'
            + '<div id="branding"><img src="/images/ipb_logo.png" alt="Undertow"></div>\n'
            + '<div id="primary_nav"><ul class="nav_list"><li><a href="/index.php">Forums</a></li>'
            + '<li><a href="/login">Sign in</a></li></ul></div>\n'
            + content
            + '<div id="board_footer">Community software licensed to Undertow.</div>\n'
            + "</div>\n"
            + self._tail()
        )

    def login(self, fixture, error):
        notice = '<div class="login_error">Sign-in failed, check your details.</div>' if error else ""
        content = (
            '<div id="login_panel">\n'
            + notice
            + '<form action="/login" method="post">\n'
            '<ul class="input_list">\n'
            '<li><label>Sign-in name</label>'
            '<input type="text" name="ips_username" class="input_text" data-gt="login:user"></li>\n'
            '<li><label>Password</label>'
            '<input type="password" name="ips_password" class="input_text" data-gt="login:pass"></li>\n'
            "</ul>\n"
            '<input type="submit" class="input_submit" value="Sign in" data-gt="login:submit">\n'
            "</form>\n</div>\n"
        )
        return self._frame("Sign in", content)

    def _home(self, fixture: ForumFixture) -> str:
        items = []
        for section in fixture.sections:
            items.append(
                '<li class="forum_item"><div class="forum_details">'
                f'<a class="forum_name" href="{self.section_path(fixture, section.sid, 1)}"'
                f' data-gt="section:{section.sid}">{escape(section.title)}</a>'
                '<p class="forum_desc">Member discussions.</p></div>'
                f'<span class="forum_topics">{len(fixture.section_threads(section.sid))} topics</span></li>'
            )
            items.append("\n")
        return (
            '<div id="board_index">\n<ul class="category_list">\n'
            + "".join(items)
            + "</ul>\n</div>\n"
        )

    def _pagination(self, pages: int, page: int, href) -> str:
        back = forward = ""
        if page > 1:
            back = f'<a data-gt="nav:prev" href="{href(page - 1)}">Back</a>'
        if page < pages:
            forward = f'<a data-gt="nav:next" href="{href(page + 1)}">Forward</a>'
        # Both containers always render so sibling positions never move.
        return (
            '<div class="list_pagination">'
            f'<div class="pag_back">{back}</div>'
            f'<div class="pag_forward">{forward}</div>'
            "</div>\n"
        )

    def _section(self, fixture: ForumFixture, sid: int, page: int) -> str:
        rows = []
        for thread in fixture.section_page_threads(sid, page):
            rows.append(
                '<li class="topic_row"><div class="topic_details">'
                f'<a class="topic_title" href="{self.thread_path(fixture, thread.tid, 1)}"'
                f' data-gt="thread:{thread.tid}">{escape(thread.title)}</a>'
                f'<span class="topic_starter">by {thread.posts[0].author}</span></div>'
                f'<span class="topic_replies" data-gt="replies:{thread.tid}">{len(thread.posts) - 1} replies</span>'
                f'<span class="topic_views">{thread.tid * 11 % 500 + 40} views</span></li>'
            )
            rows.append("\n")
        nav = self._pagination(
            fixture.section_page_count(sid), page,
            lambda p: self.section_path(fixture, sid, p),
        )
        return (
            '<div id="forum_view">\n'
            f'<h1 class="forum_title">{escape(fixture.section(sid).title)}</h1>\n'
            + nav
            + '<ol class="topic_list">\n'
            + "".join(rows)
            + "</ol>\n</div>\n"
        )

    def _thread(self, fixture: ForumFixture, tid: int, page: int) -> str:
        thread = fixture.threads[tid]
        notices: List[str] = []
        items: List[str] = []
        for post in fixture.thread_page_posts(tid, page):
            disp = fixture.displacement_for(post.pid)
            author_span = (
                f'<span class="entry_author"><a href="/user/7-{post.author}/"'
                f' data-gt="author:{post.pid}">{post.author}</a></span>'
            )
            in_place = author_span if disp is None else ""
            attach = (
                f'<img class="entry_image" src="/attachments/{post.pid}.png">'
                if post.has_attachment
                else ""
            )
            items.append(
                f'<li class="post_block" data-gt="wrapper:{post.pid}">\n'
                f'<div class="author_block">{in_place}'
                f'<img class="pb_avatar" src="/images/avatars/{post.author}.png"></div>\n'
                f'<div class="post_meta"><span class="post_date" data-gt="date:{post.pid}">{post.date_text}</span></div>\n'
                f'<div class="entry_content" data-gt="body:{post.pid}">{escape(post.body)}{attach}</div>\n'
                "</li>\n"
            )
            if disp is not None and disp.flavor == "header":
                notices.append(author_span)
            elif disp is not None and disp.flavor == "sibling":
                items.append(author_span + "\n")
        nav = self._pagination(
            fixture.thread_page_count(tid), page,
            lambda p: self.thread_path(fixture, tid, p),
        )
        return (
            '<div id="topic_view">\n'
            f'<h1 class="topic_head_title">{escape(thread.title)}</h1>\n'
            f'<div class="page_notices">{"".join(notices)}</div>\n'
            + nav
            + '<ol class="post_list">\n'
            + "".join(items)
            + "</ol>\n</div>\n"
        )

    def exemplar_plans(self, fixture: ForumFixture) -> List[RolePlan]:
        plans = self._login_plans({
            ResourceRole.USERNAME_FIELD: Technique.EXACT_XPATH,
            ResourceRole.PASSWORD_FIELD: Technique.EXACT_XPATH,
            ResourceRole.LOGIN_SUBMIT: Technique.EXACT_XPATH,
        })
        plans.append(self._section_link_plan(fixture, Technique.EXACT_XPATH))
        plans.extend(self._thread_list_plans(
            fixture, Technique.EXACT_XPATH, Technique.EXACT_XPATH,
        ))
        plans.append(self._next_plan(PageKind.SECTION_INDEX, Technique.EXACT_XPATH))
        plans.extend(self._thread_detail_plans(
            fixture,
            wrapper_expected=Technique.EXACT_XPATH,
            wrapper_selector=None,
            author_expected=Technique.EXACT_XPATH,
        ))
        plans.append(self._next_plan(PageKind.THREAD_PAGE, Technique.EXACT_XPATH))
        return plans


class _XenforoSkin(_Skin):
    """Hard case: one shared class for both pagination directions.  On
    first pages only the forward button exists, so training succeeds and
    the inner-page check then finds two matches."""

    family = "xenforo"
    posts_per_page = 4
    threads_per_page = 3
    home_path = "/"
    login_path = "/login/"
    login_post_path = "/login/login"
    thread_id_pattern = r"/threads/[^/ ]*\.(\d+)/"
    page_css = "structure.css"
    user_field = "login"
    pass_field = "password"

    def format_date(self, day: int, month: int, hour: int, minute: int) -> str:
        return f"{_MONTHS[month - 1][:3]} {day}, 2019 at {hour:02d}:{minute:02d}"

    def section_path(self, fixture: ForumFixture, sid: int, page: int) -> str:
        base = f"/forums/{_slug(fixture.section(sid).title)}.{sid}/"
        return base if page == 1 else f"{base}page-{page}"

    def thread_path(self, fixture: ForumFixture, tid: int, page: int) -> str:
        base = f"/threads/{_slug(fixture.threads[tid].title)}.{tid}/"
        return base if page == 1 else f"{base}page-{page}"

    def render(self, fixture, path, query, method):
        if path == "/":
            return self._frame("The Relay", self._home(fixture))
        if path == "/login/":
            return self.login(fixture, False)
        match = re.fullmatch(r"/forums/[a-z0-9-]*\.(\d+)/(?:page-(\d+))?", path)
        if match:
            sid = int(match.group(1))
            if any(s.sid == sid for s in fixture.sections):
                page = int(match.group(2) or 1)
                return self._frame(
                    fixture.section(sid).title, self._section(fixture, sid, page)
                )
        match = re.fullmatch(r"/threads/[a-z0-9-]*\.(\d+)/(?:page-(\d+))?", path)
        if match:
            tid = int(match.group(1))
            if tid in fixture.threads:
                page = int(match.group(2) or 1)
                return self._frame(
                    fixture.threads[tid].title, self._thread(fixture, tid, page)
                )
        return None

    def _frame(self, title: str, content: str) -> str:
        return (
            self._head(title)
            + '<div class="p-pageWrapper">\n'
            + '<div class="p-header"><img class="p-header-logo" src="/images/xf_logo.png" alt="The Relay"></div>\n'
            + content
            + '<div class="p-footer">Hosted with care.</div>\n'
            + "</div>\n"
            + self._tail()
        )

    def login(self, fixture, error):
        notice = '<div class="blockMessage">The name or password is wrong.</div>' if error else ""
        content = (
            '<div class="p-body">\n'
            + notice
            + '<form action="/login/login" method="post" class="block">\n'
            '<dl class="formRow"><dt>Your name</dt>'
            '<dd><input type="text" name="login" data-gt="login:user"></dd></dl>\n'
            '<dl class="formRow"><dt>Password</dt>'
            '<dd><input type="password" name="password" data-gt="login:pass"></dd></dl>\n'
            '<dl class="formRow"><dt></dt>'
            '<dd><button type="submit" class="button--login" data-gt="login:submit">Log in</button></dd></dl>\n'
            "</form>\n</div>\n"
        )
        return self._frame("Log in", content)

    def _home(self, fixture: ForumFixture) -> str:
        nodes = []
        for section in fixture.sections:
            nodes.append(
                '<div class="node node--forum"><div class="node-main">'
                f'<h3 class="node-title"><a href="{self.section_path(fixture, section.sid, 1)}"'
                f' data-gt="section:{section.sid}">{escape(section.title)}</a></h3>'
                '<div class="node-description">Ongoing work.</div></div>'
                f'<div class="node-stats">{len(fixture.section_threads(section.sid))} threads</div></div>'
            )
            nodes.append("\n")
        return (
            '<div class="p-body">\n<div class="block block--category">\n'
            + "".join(nodes)
            + "</div>\n</div>\n"
        )

    def _page_nav(self, pages: int, page: int, href) -> str:
        parts = ['<div class="pageNav">']
        if page > 1:
            parts.append(
                f'<a class="pageNav-jump" data-gt="nav:prev" href="{href(page - 1)}">&lt; Prev</a>'
            )
        for number in range(1, pages + 1):
            parts.append(f'<a class="pageNav-page" href="{href(number)}">{number}</a>')
        if page < pages:
            parts.append(
                f'<a class="pageNav-jump" data-gt="nav:next" href="{href(page + 1)}">Next &gt;</a>'
            )
        parts.append("</div>\n")
        return "".join(parts)

    def _section(self, fixture: ForumFixture, sid: int, page: int) -> str:
        items = []
        for thread in fixture.section_page_threads(sid, page):
            items.append(
                '<div class="structItem structItem--thread">'
                '<div class="structItem-cell structItem-cell--main">'
                f'<div class="structItem-title"><a href="{self.thread_path(fixture, thread.tid, 1)}"'
                f' data-gt="thread:{thread.tid}">{escape(thread.title)}</a></div>'
                f'<div class="structItem-minor"><span class="structItem-by">{thread.posts[0].author}</span></div></div>'
                '<div class="structItem-cell structItem-cell--meta">'
                f'<span class="structItem-replies" data-gt="replies:{thread.tid}">Replies: {len(thread.posts) - 1}</span>'
                f'<span class="structItem-views">Views: {thread.tid * 13 % 700 + 50}</span></div></div>'
            )
            items.append("\n")
        nav = self._page_nav(
            fixture.section_page_count(sid), page,
            lambda p: self.section_path(fixture, sid, p),
        )
        return (
            '<div class="p-body">\n'
            f'<h1 class="p-title">{escape(fixture.section(sid).title)}</h1>\n'
            + nav
            + '<div class="structItemContainer">\n'
            + "".join(items)
            + "</div>\n</div>\n"
        )

    def _thread(self, fixture: ForumFixture, tid: int, page: int) -> str:
        thread = fixture.threads[tid]
        items = []
        for post in fixture.thread_page_posts(tid, page):
            attach = (
                f'<img class="bbImage" src="/attachments/{post.pid}.png">'
                if post.has_attachment
                else ""
            )
            items.append(
                f'<li id="post-{post.pid}" class="message" data-gt="wrapper:{post.pid}">\n'
                '<div class="message-cell message-cell--user">'
                f'<img class="message-avatar" src="/images/avatars/{post.author}.png">'
                f'<a class="message-name" href="/members/{post.author}.7/" data-gt="author:{post.pid}">{post.author}</a></div>\n'
                '<div class="message-cell message-cell--main">'
                f'<div class="message-attribution"><time class="message-date" data-gt="date:{post.pid}">{post.date_text}</time></div>'
                f'<div class="message-body" data-gt="body:{post.pid}">{escape(post.body)}{attach}</div></div>\n'
                "</li>\n"
            )
        nav = self._page_nav(
            fixture.thread_page_count(tid), page,
            lambda p: self.thread_path(fixture, tid, p),
        )
        return (
            '<div class="p-body">\n'
            f'<h1 class="p-title">{escape(thread.title)}</h1>\n'
            + nav
            + '<ol class="message-list">\n'
            + "".join(items)
            + "</ol>\n</div>\n"
        )

    def exemplar_plans(self, fixture: ForumFixture) -> List[RolePlan]:
        plans = self._login_plans({
            ResourceRole.USERNAME_FIELD: Technique.EXACT_XPATH,
            ResourceRole.PASSWORD_FIELD: Technique.EXACT_XPATH,
            ResourceRole.LOGIN_SUBMIT: Technique.EXACT_XPATH,
        })
        plans.append(self._section_link_plan(fixture, Technique.EXACT_XPATH))
        plans.extend(self._thread_list_plans(
            fixture, Technique.EXACT_XPATH, Technique.EXACT_XPATH,
        ))
        plans.append(self._next_plan(
            PageKind.SECTION_INDEX, Technique.SINGLE_CLASS, "pageNav-jump",
            conflict=True,
        ))
        plans.extend(self._thread_detail_plans(
            fixture,
            wrapper_expected=Technique.EXACT_XPATH,
            wrapper_selector='//*[starts-with(@id,"post-")]',
            author_expected=Technique.EXACT_XPATH,
        ))
        plans.append(self._next_plan(
            PageKind.THREAD_PAGE, Technique.SINGLE_CLASS, "pageNav-jump",
            conflict=True,
        ))
        return plans


class _VbulletinSkin(_Skin):
    """Hard case: wrapper ids ``post_N`` collide with body ids
    ``post_message_N``, so the id scan resolves twice the post count and
    the wrapper falls back to its class."""

    family = "vbulletin"
    posts_per_page = 4
    threads_per_page = 4
    home_path = "/forum.php"
    login_path = "/login.php"
    login_post_path = "/login.php?do=login"
    thread_id_pattern = r"showthread\.php\?(?:[^ ]*&)?t=(\d+)"
    page_css = "bulletin.css"
    user_field = "vb_login_username"
    pass_field = "vb_login_password"

    def format_date(self, day: int, month: int, hour: int, minute: int) -> str:
        return f"{month:02d}-{day:02d}-2019, {hour:02d}:{minute:02d}"

    def section_path(self, fixture: ForumFixture, sid: int, page: int) -> str:
        path = f"/forumdisplay.php?f={sid}"
        return path if page == 1 else f"{path}&page={page}"

    def thread_path(self, fixture: ForumFixture, tid: int, page: int) -> str:
        path = f"/showthread.php?t={tid}"
        return path if page == 1 else f"{path}&page={page}"

    def render(self, fixture, path, query, method):
        if path == "/forum.php":
            return self._frame("The Stacks", self._home(fixture))
        if path == "/login.php" and "do" not in query:
            return self.login(fixture, False)
        if path == "/forumdisplay.php":
            sid = self._query_int(query, "f")
            if any(s.sid == sid for s in fixture.sections):
                page = max(1, self._query_int(query, "page", 1))
                return self._frame(
                    fixture.section(sid).title, self._section(fixture, sid, page)
                )
        if path == "/showthread.php":
            tid = self._query_int(query, "t")
            if tid in fixture.threads:
                page = max(1, self._query_int(query, "page", 1))
                return self._frame(
                    fixture.threads[tid].title, self._thread(fixture, tid, page)
                )
        return None

    def _frame(self, title: str, content: str) -> str:
        return (
            self._head(title)
            + '<div id="vbwrap">\n'
            + '<div id="vbheader"><img src="/images/vb_logo.png" alt="The Stacks"></div>\n'
            + content
            + '<div id="vbfooter">All times are server time.</div>\n'
            + "</div>\n"
            + self._tail()
        )

    def login(self, fixture, error):
        notice = '<div class="login_error">You have entered an invalid username or password.</div>' if error else ""
        content = (
            '<div id="login_form_box">\n'
            + notice
            + '<form action="/login.php?do=login" method="post">\n'
            '<div class="fieldrow"><label>User Name</label>'
            '<input type="text" name="vb_login_username" id="navbar_username" data-gt="login:user"></div>\n'
            '<div class="fieldrow"><label>Password</label>'
            '<input type="password" name="vb_login_password" id="navbar_password" data-gt="login:pass"></div>\n'
            '<input type="submit" class="loginbutton" value="Log in" data-gt="login:submit">\n'
            "</form>\n</div>\n"
        )
        return self._frame("Log in", content)

    def _home(self, fixture: ForumFixture) -> str:
        items = []
        for section in fixture.sections:
            items.append(
                '<li class="forumbit"><div class="foruminfo">'
                f'<a class="forumtitle" href="/forumdisplay.php?f={section.sid}"'
                f' data-gt="section:{section.sid}">{escape(section.title)}</a>'
                '<p class="forumdesc">Archive of member talk.</p></div>'
                f'<div class="forumlastpost">{len(fixture.section_threads(section.sid))} threads</div></li>'
            )
            items.append("\n")
        return (
            '<div id="forumhome">\n<ul class="forumbits">\n'
            + "".join(items)
            + "</ul>\n</div>\n"
        )

    def _pagenav(self, pages: int, page: int, href, cls: str = "pagenav_vb") -> str:
        parts = [f'<div class="{cls}"><span class="pageinfo">'
                 f"Page {page} of {pages}</span>"]
        if page > 1:
            parts.append(
                f'<a id="pagination_prev" data-gt="nav:prev" href="{href(page - 1)}">&lt;</a>'
            )
        if page < pages:
            parts.append(
                f'<a id="pagination_next" data-gt="nav:next" href="{href(page + 1)}">&gt;</a>'
            )
        parts.append("</div>")
        return "".join(parts)

    def _section(self, fixture: ForumFixture, sid: int, page: int) -> str:
        rows = []
        for thread in fixture.section_page_threads(sid, page):
            rows.append(
                '<li class="threadbit"><div class="threadinfo">'
                f'<a class="threadtitle" id="thread_title_{thread.tid}"'
                f' href="{self.thread_path(fixture, thread.tid, 1)}"'
                f' data-gt="thread:{thread.tid}">{escape(thread.title)}</a>'
                f'<span class="threadauthor">{thread.posts[0].author}</span></div>'
                f'<span class="threadreplies" id="replies_{thread.tid}" data-gt="replies:{thread.tid}">{len(thread.posts) - 1}</span>'
                f'<span class="threadviews">{thread.tid * 5 % 300 + 20}</span></li>'
            )
            rows.append("\n")
        nav = self._pagenav(
            fixture.section_page_count(sid), page,
            lambda p: self.section_path(fixture, sid, p),
        )
        return (
            '<div id="threadlist">\n'
            f'<h1 class="forumtitle_head">{escape(fixture.section(sid).title)}</h1>\n'
            '<ul class="threadbits">\n'
            + "".join(rows)
            + "</ul>\n"
            + nav
            + "\n</div>\n"
        )

    def _thread(self, fixture: ForumFixture, tid: int, page: int) -> str:
        thread = fixture.threads[tid]
        blocks = [
            self._pagenav(
                fixture.thread_page_count(tid), page,
                lambda p: self.thread_path(fixture, tid, p),
                cls="threadnav",
            )
            + "\n"
        ]
        for post in fixture.thread_page_posts(tid, page):
            attach = (
                f'<img class="attachimage" src="/attachments/{post.pid}.png">'
                if post.has_attachment
                else ""
            )
            blocks.append(
                f'<div id="post_{post.pid}" class="postbit" data-gt="wrapper:{post.pid}">\n'
                f'<div class="posthead"><span class="postdate" data-gt="date:{post.pid}">{post.date_text}</span></div>\n'
                '<div class="userinfo">'
                f'<a class="bigusername" href="/member.php?u=7" data-gt="author:{post.pid}">{post.author}</a>'
                f'<img class="postavatar" src="/images/avatars/{post.author}.png"></div>\n'
                f'<p id="post_message_{post.pid}" class="postcontent" data-gt="body:{post.pid}">{escape(post.body)}{attach}</p>\n'
                "</div>\n"
            )
        return (
            '<div id="thread_main">\n'
            f'<h1 class="vb_thread_title">{escape(thread.title)}</h1>\n'
            '<div id="posts">\n'
            + "".join(blocks)
            + "</div>\n</div>\n"
        )

    def exemplar_plans(self, fixture: ForumFixture) -> List[RolePlan]:
        plans = self._login_plans({
            ResourceRole.USERNAME_FIELD: Technique.EXACT_XPATH,
            ResourceRole.PASSWORD_FIELD: Technique.EXACT_XPATH,
            ResourceRole.LOGIN_SUBMIT: Technique.EXACT_XPATH,
        })
        plans.append(self._section_link_plan(fixture, Technique.EXACT_XPATH))
        plans.extend(self._thread_list_plans(
            fixture,
            Technique.EXACT_XPATH,
            Technique.EXACT_XPATH,
            link_selector='//*[starts-with(@id,"thread_title_")]',
            replies_selector='//*[starts-with(@id,"replies_")]',
        ))
        plans.append(self._next_plan(
            PageKind.SECTION_INDEX, Technique.EXACT_XPATH, '//*[@id="pagination_next"]',
        ))
        plans.extend(self._thread_detail_plans(
            fixture,
            wrapper_expected=Technique.SINGLE_CLASS,
            wrapper_selector="postbit",
            author_expected=Technique.EXACT_XPATH,
        ))
        plans.append(self._next_plan(
            PageKind.THREAD_PAGE, Technique.EXACT_XPATH, '//*[@id="pagination_next"]',
        ))
        return plans


_SKINS = {
    "mybb": _MybbSkin,
    "ipb": _IpbSkin,
    "xenforo": _XenforoSkin,
    "vbulletin": _VbulletinSkin,
}
