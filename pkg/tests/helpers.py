"""Shared test plumbing: a scripted operator that trains a full blueprint.

The fixtures carry their own exemplar plans (which nodes the operator
would click, which candidate they would accept), so a complete training
session can run unattended.  Crawler and end-to-end tests use the
resulting blueprint instead of hand-writing selectors.
"""

from dataclasses import replace
from urllib.parse import urljoin

from quietcrawl.dom import parse_html
from quietcrawl.fixtures import ForumFixture, node_by_gt, plan_accepts
from quietcrawl.inference import (
    candidate_identifiers,
    detect_next_button_conflict,
    refine_post_wrapper,
    resolve,
)
from quietcrawl.model import ForumBlueprint, PageKind, ResourceRole

PAGE_KEY = {
    PageKind.LOGIN_PAGE: "login",
    PageKind.HOME_PAGE: "home",
    PageKind.SECTION_INDEX: "section",
    PageKind.THREAD_PAGE: "thread",
}

INNER_KEY = {
    PageKind.SECTION_INDEX: "section_inner",
    PageKind.THREAD_PAGE: "thread_inner",
}


def train_role(fixture, plan, doc):
    """Run the scripted operator over the candidate stream for one role."""
    if plan.snippets:
        identifier, events = refine_post_wrapper(
            doc,
            list(plan.snippets),
            len(plan.page_targets),
            lambda ident, nodes: plan_accepts(doc, plan, ident, nodes),
        )
        return identifier, events
    exemplars = [node_by_gt(doc, value) for value in plan.clicks]
    for identifier in candidate_identifiers(doc, exemplars, plan.expects_many):
        if plan_accepts(doc, plan, identifier, resolve(doc, identifier)):
            return identifier, []
    raise AssertionError(f"{fixture.family}: no candidate accepted for {plan.role}")


def train_blueprint(fixture: ForumFixture, base_url: str) -> ForumBlueprint:
    """Train every role against the fixture's own pages.

    Next-button identifiers are checked against the inner pages the way
    a training session would, attaching a conflict record when both
    directions share a selector.
    """
    docs = {
        key: parse_html(fixture.render_path(path))
        for key, path in fixture.training_pages().items()
    }
    entries = {}
    for plan in fixture.exemplar_plans():
        doc = docs[PAGE_KEY[plan.kind]]
        identifier, _ = train_role(fixture, plan, doc)
        if plan.role is ResourceRole.NEXT_PAGE_BUTTON:
            conflict = detect_next_button_conflict(
                identifier, docs[INNER_KEY[plan.kind]], lambda count, nodes: True
            )
            if conflict is not None:
                identifier = replace(identifier, conflict=conflict)
        entries.setdefault(plan.kind, {})[plan.role] = identifier
    sections = tuple(
        urljoin(base_url, fixture.section_path(s.sid))
        for s in fixture.interesting_sections()
    )
    page_urls = {
        PageKind.HOME_PAGE: urljoin(base_url, fixture.home_path()),
        PageKind.LOGIN_PAGE: urljoin(base_url, fixture.login_path()),
    }
    return ForumBlueprint(
        forum_id=fixture.family,
        base_url=base_url,
        entries=entries,
        sections_of_interest=sections,
        page_urls=page_urls,
    )
