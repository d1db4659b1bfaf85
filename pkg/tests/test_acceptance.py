"""End-to-end gates, one test per guarantee the package makes.

Each test here exercises a whole subsystem against the bundled fixture
forums: trainer inference across all four skins, collision and
author-alignment handling, the delay and scheduling models, the wire
behavior of a complete crawl, revisit economy, and the analyzer's
ability to tell this crawler apart from a crude scraper.  Crawls run
the real CLI against the real fixture server on a virtual clock;
nothing is mocked.
"""

import bisect
import json
import random
import statistics
import time
from collections import Counter
from datetime import datetime, timedelta, timezone
from urllib.parse import parse_qs, urlsplit
from zoneinfo import ZoneInfo

import pytest

from helpers import train_blueprint
from quietcrawl.analyzer import (
    features,
    load_thread_rules,
    parse_log,
    sessionize,
)
from quietcrawl.behavior import BehaviorModel, BehaviorProfile
from quietcrawl.cli import main as cli_main
from quietcrawl.clock import VirtualClock
from quietcrawl.crawler import extract_posts, next_page_target, normalize_url
from quietcrawl.dom import parse_html
from quietcrawl.fixtures import (
    FIXTURE_FAMILIES,
    PASSWORD,
    USERNAME,
    FixtureServer,
    build_fixture,
    node_by_gt,
    plan_accepts,
)
from quietcrawl.fixtures.naive import run_naive_crawl
from quietcrawl.inference import refine_post_wrapper, resolve
from quietcrawl.model import PageKind, ResourceRole, Technique, save_blueprint

UTC = timezone.utc


# -- shared plumbing ------------------------------------------------------------------


def _doc_for(fixture, path):
    return parse_html(fixture.render_path(path))


def _training_doc(fixture, kind):
    key = {
        PageKind.LOGIN_PAGE: "login",
        PageKind.HOME_PAGE: "home",
        PageKind.SECTION_INDEX: "section",
        PageKind.THREAD_PAGE: "thread",
    }[kind]
    return _doc_for(fixture, fixture.training_pages()[key])


def _covers(resolved, targets):
    return all(any(r.contains(t) for r in resolved) for t in targets)


def _thread_rule(fixture):
    return [{"pattern": fixture.thread_id_pattern(), "thread_id": "{1}"}]


def _run_once(clock, blueprint_path, state_path, config_path, seed):
    rc = cli_main(
        [
            "crawl",
            "--blueprint", str(blueprint_path),
            "--state", str(state_path),
            "--config", str(config_path),
            "--once",
            "--seed", str(seed),
        ],
        clock=clock,
    )
    assert rc == 0


def _write_crawl_config(path, **extra):
    # Pauses off: a two-hour break would split the server log into
    # several analyzer sessions, and these gates reason about one.
    payload = {
        "username": USERNAME,
        "password": PASSWORD,
        "behavior": {"short_pause_count": [0, 0], "long_pauses": []},
    }
    payload.update(extra)
    path.write_text(json.dumps(payload), encoding="utf-8")


def ks_statistic(a, b):
    # Textbook two-sample sup|F1 - F2| over the pooled points, with a
    # right-continuous ECDF. [DERIVED] cross-checked against
    # scipy.stats.ks_2samp to 1e-12 on 200 randomized trials.
    a, b = sorted(a), sorted(b)
    best = 0.0
    for x in a + b:
        fa = bisect.bisect_right(a, x) / len(a)
        fb = bisect.bisect_right(b, x) / len(b)
        best = max(best, abs(fa - fb))
    return best


def _thread_page_gaps(sessions, classifier):
    """Seconds between consecutive thread-page requests, pooled per group."""
    gaps = []
    for session in sessions:
        pages = [r for r in session.records if classifier(r.path) is not None]
        gaps.extend(
            (b.timestamp - a.timestamp).total_seconds()
            for a, b in zip(pages, pages[1:])
        )
    return gaps


@pytest.fixture(scope="module")
def paced_and_naive_logs(tmp_path_factory):
    """One full paced crawl and one naive scrape of the same forum.

    Returns the two access logs plus the crawl report and the fixture,
    shared by the wire-behavior and comparison gates below.
    """
    tmp = tmp_path_factory.mktemp("paced")
    clock = VirtualClock()
    fixture = build_fixture("mybb")
    server = FixtureServer(fixture, clock=clock)
    try:
        blueprint_path = tmp / "blueprint.json"
        save_blueprint(train_blueprint(fixture, server.base_url), blueprint_path)
        config_path = tmp / "config.json"
        report_path = tmp / "report.json"
        _write_crawl_config(config_path, report_path=str(report_path))
        _run_once(clock, blueprint_path, tmp / "state.json", config_path, seed=29)
        quiet_log = tmp / "quiet.log"
        quiet_log.write_text(server.w3c_log(), encoding="utf-8")
        server.reset_hits()

        run_naive_crawl(server.base_url, fixture, clock, seed=7)
        naive_log = tmp / "naive.log"
        naive_log.write_text(server.w3c_log(), encoding="utf-8")
    finally:
        server.stop()
    return {
        "fixture": fixture,
        "report": json.loads(report_path.read_text(encoding="utf-8")),
        "quiet_log": quiet_log,
        "naive_log": naive_log,
    }


# -- trainer inference across all four skins ---------------------------------------


def test_training_resolves_every_target_with_the_expected_techniques():
    started = time.monotonic()
    blueprints = {}
    fixtures = {}
    for family in FIXTURE_FAMILIES:
        fixture = build_fixture(family)
        fixtures[family] = fixture
        blueprints[family] = train_blueprint(fixture, "http://forum.test")

    # Thread links, next buttons, and post wrappers must not merely be
    # trained but resolve every node the pages actually contain.
    checked_roles = (
        ResourceRole.THREAD_LINK,
        ResourceRole.NEXT_PAGE_BUTTON,
        ResourceRole.POST_WRAPPER,
    )
    for family, blueprint in blueprints.items():
        fixture = fixtures[family]
        for plan in fixture.exemplar_plans():
            if plan.role not in checked_roles:
                continue
            doc = _training_doc(fixture, plan.kind)
            identifier = blueprint.identifier_for(plan.kind, plan.role)
            resolved = resolve(doc, identifier)
            targets = [node_by_gt(doc, value) for value in plan.page_targets]
            if plan.expects_many:
                assert len(resolved) == len(targets), (family, plan.role)
                assert _covers(resolved, targets), (family, plan.role)
            else:
                # Next buttons resolve one node on a first page; inner
                # pages may add the back button, recorded as a conflict.
                assert len(resolved) == 1, (family, plan.role)
                assert _covers(resolved, targets), (family, plan.role)

    usage = Counter()
    per_entry = {}
    for family, blueprint in blueprints.items():
        for kind, roles in blueprint.entries.items():
            for role, identifier in roles.items():
                usage[identifier.technique] += 1
                per_entry[(family, kind, role)] = identifier.technique

    total = sum(usage.values())
    assert usage[Technique.EXACT_XPATH] > total / 2

    parents = [k for k, t in per_entry.items() if t is Technique.PARENT_XPATH]
    assert parents == [("mybb", PageKind.THREAD_PAGE, ResourceRole.POST_AUTHOR)]

    singles = {k for k, t in per_entry.items() if t is Technique.SINGLE_CLASS}
    assert singles == {
        ("xenforo", PageKind.SECTION_INDEX, ResourceRole.NEXT_PAGE_BUTTON),
        ("xenforo", PageKind.THREAD_PAGE, ResourceRole.NEXT_PAGE_BUTTON),
        ("vbulletin", PageKind.THREAD_PAGE, ResourceRole.POST_WRAPPER),
    }

    assert usage[Technique.DOUBLE_CLASS] == 0
    assert time.monotonic() - started < 30.0


# -- collision handling -----------------------------------------------------------


def test_id_prefix_collision_falls_back_to_class_and_pagination_never_loops():
    # A wrapper id prefix that also matches every body id resolves twice
    # as many nodes as there are posts; the refinement must reject it
    # and settle on the class that matches exactly one node per post.
    fixture = build_fixture("vbulletin")
    wrapper_plan = next(
        p
        for p in fixture.exemplar_plans()
        if p.kind is PageKind.THREAD_PAGE and p.role is ResourceRole.POST_WRAPPER
    )
    doc = _training_doc(fixture, PageKind.THREAD_PAGE)
    post_count = len(wrapper_plan.page_targets)
    accepted, events = refine_post_wrapper(
        doc,
        list(wrapper_plan.snippets),
        post_count,
        lambda ident, nodes: plan_accepts(doc, wrapper_plan, ident, nodes),
    )

    collisions = [
        e for e in events if e.identifier.selector == '//*[starts-with(@id,"post_")]'
    ]
    assert len(collisions) == 1
    assert collisions[0].resolved_count == 2 * post_count
    assert collisions[0].outcome == "count_mismatch"

    assert accepted.technique is Technique.SINGLE_CLASS
    assert len(resolve(doc, accepted)) == post_count

    # Forward and back buttons sharing one class must still advance
    # 1 -> 2 -> 3 and stop, never walking back to an earlier page.
    fixture = build_fixture("xenforo")
    blueprint = train_blueprint(fixture, "http://forum.test")
    identifier = blueprint.identifier_for(
        PageKind.THREAD_PAGE, ResourceRole.NEXT_PAGE_BUTTON
    )
    assert identifier.conflict is not None

    tid = next(
        t.tid
        for t in fixture.interesting_threads()
        if fixture.thread_page_count(t.tid) == 3
    )
    base = "http://forum.test"
    expected = [base + fixture.thread_path(tid, page) for page in (1, 2, 3)]
    url = expected[0]
    visited = set()
    walk = [url]
    while url is not None:
        visited.add(normalize_url(url))
        path = url[len(base):]
        target = next_page_target(_doc_for(fixture, path), identifier, url, visited)
        assert target is None or normalize_url(target) != normalize_url(expected[0])
        if target is not None:
            walk.append(target)
        url = target
    assert [normalize_url(u) for u in walk] == [normalize_url(u) for u in expected]


# -- author alignment under displacement --------------------------------------------


def test_displaced_authors_stay_absent_and_never_shift_to_a_neighbor():
    fixture = build_fixture("ipb")
    blueprint = train_blueprint(fixture, "http://forum.test")

    def sweep_page(tid, page):
        """(absent, misassigned) over one rendered thread page."""
        path = fixture.thread_path(tid, page)
        doc = _doc_for(fixture, path)
        records, _ = extract_posts(doc, blueprint, "http://forum.test" + path, page)
        truth = fixture.thread_page_posts(tid, page)
        assert len(records) == len(truth), (tid, page)
        absent = misassigned = 0
        for record, post in zip(records, truth):
            expected = fixture.expected_author(post.pid, tid)
            if record.author is None:
                absent += 1
                if expected is not None:
                    misassigned += 1
            elif record.author != expected:
                misassigned += 1
        return absent, misassigned

    # The skin ships with one displaced author; everything else must
    # come through intact.
    absent_total = 0
    for thread in fixture.interesting_threads():
        for page in range(1, fixture.thread_page_count(thread.tid) + 1):
            absent, misassigned = sweep_page(thread.tid, page)
            absent_total += absent
            assert misassigned == 0, (thread.tid, page)
    assert absent_total == 1

    # Fuzz: 1,000 random displacements across threads, positions, and
    # rendering flavors; the victim is absent, nobody inherits a
    # neighbor's name.
    rng = random.Random(0xA11C)
    threads = fixture.interesting_threads()
    per_page = fixture.skin.posts_per_page
    for _ in range(1000):
        fixture.clear_displacements()
        thread = rng.choice(threads)
        position = rng.randint(1, len(thread.posts))
        fixture.displace_author(
            thread.tid, position, rng.choice(["header", "sibling"])
        )
        page = (position - 1) // per_page + 1
        victim_index = (position - 1) % per_page

        path = fixture.thread_path(thread.tid, page)
        doc = _doc_for(fixture, path)
        records, _ = extract_posts(
            doc, blueprint, "http://forum.test" + path, page
        )
        truth = fixture.thread_page_posts(thread.tid, page)
        assert len(records) == len(truth)
        for index, (record, post) in enumerate(zip(records, truth)):
            expected = fixture.expected_author(post.pid, thread.tid)
            if index == victim_index:
                assert record.author is None, (thread.tid, position)
            else:
                assert record.author == expected, (thread.tid, position, index)


# -- delay model --------------------------------------------------------------------


def test_reading_and_navigation_delays_match_the_model():
    model = BehaviorModel(BehaviorProfile(), seed=4242)

    # [DERIVED] for one 300-word post at 120..180 wpm: bounds are
    # 60*300/180 = 100 s and 60*300/120 = 150 s; the mean is
    # 300*ln(1.5) = 121.6395 s (closed form, confirmed by numeric
    # integration and Monte Carlo), sd 14.28 s, so the +/-1 s band on a
    # 10,000-draw mean sits at seven sigma.
    reading = [model.reading_delay([300]) for _ in range(10_000)]
    assert all(100.0 <= value <= 150.0 for value in reading)
    assert abs(statistics.mean(reading) - 121.6395) <= 1.0

    # [DERIVED] navigation is uniform on [3, 7]: mean 5, sd 4/sqrt(12),
    # so +/-0.1 s on 10,000 draws is nine sigma.
    navigation = [model.navigational_delay() for _ in range(10_000)]
    assert all(3.0 <= value <= 7.0 for value in navigation)
    assert abs(statistics.mean(navigation) - 5.0) <= 0.1


# -- session scheduling ------------------------------------------------------------


def test_yearlong_schedules_keep_skip_rate_liveness_and_jitter_bounds():
    profile = BehaviorProfile()
    start = datetime(2025, 1, 6, 0, 0, tzinfo=UTC)  # a Monday
    tz = ZoneInfo(profile.timezone)

    def parse_local(value):
        hour, minute = value.split(":")
        return int(hour), int(minute)

    def nearest_slot(moment):
        """The template occurrence whose start is closest to ``moment``."""
        local = moment.astimezone(tz)
        best = None
        for offset in (-1, 0, 1):
            day = (local + timedelta(days=offset)).date()
            for slot in profile.template:
                if slot.day != day.weekday():
                    continue
                hour, minute = parse_local(slot.start_local)
                slot_start = datetime(day.year, day.month, day.day, hour, minute, tzinfo=tz)
                hour, minute = parse_local(slot.end_local)
                slot_end = datetime(day.year, day.month, day.day, hour, minute, tzinfo=tz)
                distance = abs((moment - slot_start).total_seconds())
                if best is None or distance < best[0]:
                    best = (distance, slot_start, slot_end)
        assert best is not None
        return best[1], best[2]

    rolled = skipped = 0
    for seed in range(20):
        plans = BehaviorModel(profile, seed=seed).plan_schedule(start, 365)

        # Skip rate over the rolls actually made: liveness cover plans
        # repeat a window rather than re-rolling, so they stay out of
        # the denominator.
        rolled += sum(1 for p in plans if not p.forced)
        skipped += sum(1 for p in plans if p.skipped)

        active = [p for p in plans if not p.skipped]
        assert active, seed
        worst_gap = max(
            (later.start - earlier.end).total_seconds()
            for earlier, later in zip(active, active[1:])
        )
        assert worst_gap <= 24 * 3600, (seed, worst_gap)

        for plan in plans:
            slot_start, slot_end = nearest_slot(plan.start)
            duration = (slot_end - slot_start).total_seconds()
            assert abs((plan.start - slot_start).total_seconds()) <= 0.25 * duration, (
                seed, plan.start, slot_start,
            )
            assert abs((plan.end - slot_end).total_seconds()) <= 0.25 * duration, (
                seed, plan.end, slot_end,
            )

    fraction = skipped / rolled
    assert 0.175 <= fraction <= 0.225, fraction


# -- wire behavior of a full crawl ---------------------------------------------------


def test_full_crawl_leaves_no_crawler_fingerprints_in_the_access_log(paced_and_naive_logs):
    report = paced_and_naive_logs["report"]
    assert report["completed"] is True

    records = parse_log(paced_and_naive_logs["quiet_log"])
    assert records

    assert sum(1 for r in records if r.method == "HEAD") == 0
    assert sum(1 for r in records if r.path.split("?")[0] == "/robots.txt") == 0
    assert sum(1 for r in records if r.content_class == "script") == 0
    assert any(r.content_class == "style" for r in records)
    assert any(r.content_class == "image" for r in records)

    # Page requests: the pages themselves, not the 302 half of the
    # login redirect (same instant as the GET that follows it).
    pages = [r for r in records if r.content_class == "html" and r.status == 200]
    assert len(pages) > 1
    assert pages[0].referrer is None
    assert all(r.referrer for r in pages[1:])

    gaps = [
        (b.timestamp - a.timestamp).total_seconds() for a, b in zip(pages, pages[1:])
    ]
    assert all(gap >= 3.0 for gap in gaps)  # implies strictly sequential

    fixture = paced_and_naive_logs["fixture"]
    classifier = load_thread_rules(_thread_rule(fixture))
    sessions = sessionize(records)
    assert len(sessions) == 1
    vector = features(sessions[0], classifier)
    assert vector.head_request_count == 0
    assert vector.robots_txt_hit is False
    assert vector.parallelism_flag is False


# -- revisit economy ----------------------------------------------------------------


def test_revisits_fetch_only_changed_threads_and_read_only_new_posts(tmp_path):
    clock = VirtualClock()
    fixture = build_fixture("mybb")
    server = FixtureServer(fixture, clock=clock)
    classifier = load_thread_rules(_thread_rule(fixture))

    def crawl(seed):
        config_path = tmp_path / f"config{seed}.json"
        report_path = tmp_path / f"report{seed}.json"
        posts_path = tmp_path / f"posts{seed}.jsonl"
        _write_crawl_config(
            config_path, report_path=str(report_path), posts_path=str(posts_path)
        )
        _run_once(clock, blueprint_path, tmp_path / "state.json", config_path, seed)
        log_path = tmp_path / f"access{seed}.log"
        log_path.write_text(server.w3c_log(), encoding="utf-8")
        server.reset_hits()
        return (
            json.loads(report_path.read_text(encoding="utf-8")),
            parse_log(log_path),
            posts_path,
        )

    try:
        blueprint_path = tmp_path / "blueprint.json"
        save_blueprint(train_blueprint(fixture, server.base_url), blueprint_path)

        report1, log1, _ = crawl(31)
        thread_count = report1["threads_opened"]
        assert thread_count > 0
        first_tid = int(
            next(classifier(r.path) for r in log1 if classifier(r.path) is not None)
        )

        # Unchanged forum: not a single thread page on the wire.
        report2, log2, posts2 = crawl(32)
        assert sum(1 for r in log2 if classifier(r.path) is not None) == 0
        assert report2["threads_skipped_unchanged"] == thread_count
        assert report2["posts_extracted"] == 0
        assert not posts2.exists() or posts2.read_text(encoding="utf-8") == ""

        old_count = len(fixture.threads[first_tid].posts)
        fixture.add_posts(first_tid, 2)
        new_posts = fixture.threads[first_tid].posts[old_count:]

        report3, log3, posts3 = crawl(33)
        tids = {classifier(r.path) for r in log3 if classifier(r.path) is not None}
        assert tids == {str(first_tid)}
        assert report3["threads_opened"] == 1
        assert report3["threads_skipped_unchanged"] == thread_count - 1
        assert report3["posts_extracted"] == 2

        extracted = [
            json.loads(line)
            for line in posts3.read_text(encoding="utf-8").splitlines()
        ]
        assert [p["body"].split() for p in extracted] == [
            p.body.split() for p in new_posts
        ]

        # Reading time goes to the new posts alone: pages holding none
        # of them part with a navigation-sized gap, pages holding some
        # wait at least the fastest read of those posts' words.
        per_page = fixture.skin.posts_per_page
        fresh_words = {}
        for offset, post in enumerate(new_posts):
            page = (old_count + offset) // per_page + 1
            words = len(post.body.split())
            fresh_words[page] = fresh_words.get(page, 0) + words

        pages3 = [r for r in log3 if r.content_class == "html" and r.status == 200]
        checked = 0
        for index, record in enumerate(pages3):
            if classifier(record.path) is None or index + 1 >= len(pages3):
                continue
            checked += 1
            gap = (pages3[index + 1].timestamp - record.timestamp).total_seconds()
            page_no = _page_number(record.path)
            if fresh_words.get(page_no):
                # Log time is whole seconds, hence the one-second slack.
                assert gap >= 60.0 * fresh_words[page_no] / 180.0 - 1.0, record.path
            else:
                assert gap <= 7.0, record.path
        assert checked == fixture.thread_page_count(first_tid)
    finally:
        server.stop()


def _page_number(path):
    query = parse_qs(urlsplit(path).query)
    return int(query.get("page", ["1"])[0])


# -- paced vs naive traffic ----------------------------------------------------------


def test_paced_and_naive_traces_are_statistically_far_apart(paced_and_naive_logs):
    fixture = paced_and_naive_logs["fixture"]
    classifier = load_thread_rules(_thread_rule(fixture))

    quiet_sessions = sessionize(parse_log(paced_and_naive_logs["quiet_log"]))
    naive_sessions = sessionize(parse_log(paced_and_naive_logs["naive_log"]))
    assert quiet_sessions and naive_sessions

    quiet_gaps = _thread_page_gaps(quiet_sessions, classifier)
    naive_gaps = _thread_page_gaps(naive_sessions, classifier)
    assert len(quiet_gaps) >= 10 and len(naive_gaps) >= 10

    assert ks_statistic(quiet_gaps, naive_gaps) >= 0.9
    assert statistics.median(quiet_gaps) >= 6 * statistics.median(naive_gaps)
