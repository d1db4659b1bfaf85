"""Technique fallback order, wrapper refinement, conflict detection."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quietcrawl.dom import parse_html
from quietcrawl.errors import (
    AmbiguousSnippet,
    NoTechniqueFits,
    RefinementExhausted,
    SnippetNotFound,
)
from quietcrawl.inference import (
    candidate_identifiers,
    detect_next_button_conflict,
    exemplars_from_snippets,
    infer,
    refine_post_wrapper,
    resolve,
    shared_id_prefix,
)
from quietcrawl.model import ResourceIdentifier, Technique


def first_named(doc, tag, text):
    return next(n for n in doc.nodes if n.tag == tag and n.normalized_text == text)


class TestExactXPath:
    def test_unique_id_becomes_id_selector(self):
        doc = parse_html('<form><input id="login" name="u"></form>')
        node = doc.find_by_id("login")[0]
        ident = infer(doc, [node], expects_many=False)
        assert ident.technique is Technique.EXACT_XPATH
        assert ident.selector == '//*[@id="login"]'
        assert resolve(doc, ident) == [node]

    def test_without_id_falls_back_to_absolute_path(self):
        doc = parse_html("<div><a>one</a><a>two</a></div>")
        node = first_named(doc, "a", "two")
        ident = infer(doc, [node], expects_many=False)
        assert ident.technique is Technique.EXACT_XPATH
        assert ident.selector == "/html[1]/body[1]/div[1]/a[2]"

    def test_duplicate_id_skips_id_selector(self):
        doc = parse_html('<div><a id="x">one</a><a id="x">two</a></div>')
        node = first_named(doc, "a", "two")
        ident = infer(doc, [node], expects_many=False)
        assert ident.selector == "/html[1]/body[1]/div[1]/a[2]"

    def test_multiple_exemplars_generalize_structurally(self):
        doc = parse_html(
            "<div><ul>"
            "<li><a href='/t1'>t1</a></li>"
            "<li><a href='/t2'>t2</a></li>"
            "<li><a href='/t3'>t3</a></li>"
            "</ul></div>"
        )
        links = [n for n in doc.nodes if n.tag == "a"]
        ident = infer(doc, links[:2], expects_many=True)
        assert ident.technique is Technique.EXACT_XPATH
        assert resolve(doc, ident) == links  # extends to the unclicked third link

    def test_shared_id_prefix_trims_digits(self):
        doc = parse_html(
            '<div><div id="post_101">a</div><div id="post_102">b</div>'
            '<div id="post_110">c</div></div>'
        )
        posts = [n for n in doc.nodes if n.id]
        assert shared_id_prefix(posts[:2]) == "post_"
        ident = infer(doc, posts[:2], expects_many=True)
        assert ident.selector == '//*[starts-with(@id,"post_")]'
        assert len(resolve(doc, ident)) == 3


class TestParentXPath:
    def test_styled_first_author_falls_to_parent(self):
        # First post wraps the author link in an extra <strong>; plain
        # structural generalization cannot cover it, one level up can.
        doc = parse_html(
            "<div id='posts'>"
            "<div class='post'><div class='who'><strong><a>alice</a></strong></div><p>p1</p></div>"
            "<div class='post'><div class='who'><a>bob</a></div><p>p2</p></div>"
            "<div class='post'><div class='who'><a>carol</a></div><p>p3</p></div>"
            "</div>"
        )
        authors = [n for n in doc.nodes if n.tag == "a"]
        ident = infer(doc, authors, expects_many=True)
        assert ident.technique is Technique.PARENT_XPATH
        resolved = resolve(doc, ident)
        assert len(resolved) == 3
        assert all(any(r.contains(a) for r in resolved) for a in authors)

    def test_parent_selector_resolves_container_level(self):
        doc = parse_html(
            "<div><span><b><i>deep</i></b></span>"
            "<span><i>flat1</i></span><span><i>flat2</i></span></div>"
        )
        exemplars = [
            first_named(doc, "i", "deep"),
            first_named(doc, "i", "flat1"),
            first_named(doc, "i", "flat2"),
        ]
        ident = infer(doc, exemplars, expects_many=True)
        assert ident.technique is Technique.PARENT_XPATH
        resolved = resolve(doc, ident)
        # The resolution is the span containers, not the i targets.
        assert all(n.tag == "span" for n in resolved)
        assert all(any(r.contains(e) for r in resolved) for e in exemplars)


class TestClassTechniques:
    def test_single_class_most_frequent_token(self):
        doc = parse_html(
            "<div>"
            "<span class='date small'>d1</span>"
            "<b><span class='date'>d2</span></b>"
            "<i><span class='date big'>d3</span></i>"
            "</div>"
        )
        spans = [n for n in doc.nodes if n.tag == "span"]
        candidates = list(candidate_identifiers(doc, spans, expects_many=True))
        single = [c for c in candidates if c.technique is Technique.SINGLE_CLASS]
        assert single and single[0].selector == "date"

    def test_classless_exemplars_use_parent_as_wrapper(self):
        doc = parse_html(
            "<div><td class='cell'><a>x</a></td><th class='cell'><a>y</a></th></div>"
        )
        anchors = [n for n in doc.nodes if n.tag == "a"]
        candidates = list(candidate_identifiers(doc, anchors, expects_many=True))
        single = [c for c in candidates if c.technique is Technique.SINGLE_CLASS]
        assert single and single[0].selector == "cell"

    def test_double_class_after_single_class_rejection(self):
        # Exemplars share "msg compact" but sit at structurally different
        # depths; lone-class decoys make the single class over-match.
        doc = parse_html(
            "<div>"
            "<p class='compact msg'>one</p>"
            "<blockquote><p class='msg compact'>two</p></blockquote>"
            "<p class='msg'>decoy-a</p>"
            "<span class='compact'>decoy-b</span>"
            "</div>"
        )
        exemplars = [first_named(doc, "p", "one"), first_named(doc, "p", "two")]
        candidates = list(candidate_identifiers(doc, exemplars, expects_many=True))
        techniques = [c.technique for c in candidates]
        assert Technique.DOUBLE_CLASS in techniques
        double = candidates[techniques.index(Technique.DOUBLE_CLASS)]
        assert set(double.selector.split()) == {"compact", "msg"}
        assert len(resolve(doc, double)) == 2

    def test_no_technique_fits(self):
        doc = parse_html(
            "<div><p><u>one</u></p><blockquote><section><u>two</u></section></blockquote></div>"
        )
        exemplars = [first_named(doc, "u", "one"), first_named(doc, "u", "two")]
        with pytest.raises(NoTechniqueFits):
            infer(doc, exemplars, expects_many=False)


class TestFallbackOrdering:
    def test_candidates_come_in_technique_order(self):
        doc = parse_html(
            "<div class='nav'>"
            "<a class='page'>1</a><a class='page'>2</a>"
            "<a class='jump'>Next</a>"
            "</div>"
        )
        next_btn = first_named(doc, "a", "Next")
        candidates = list(candidate_identifiers(doc, [next_btn], expects_many=False))
        techniques = [c.technique for c in candidates]
        assert techniques == sorted(
            techniques,
            key=[
                Technique.EXACT_XPATH,
                Technique.PARENT_XPATH,
                Technique.SINGLE_CLASS,
                Technique.DOUBLE_CLASS,
            ].index,
        )
        # Rejecting the exact path surfaces the parent, then the class.
        assert techniques[0] is Technique.EXACT_XPATH
        assert Technique.SINGLE_CLASS in techniques
        single = candidates[techniques.index(Technique.SINGLE_CLASS)]
        assert single.selector == "jump"

    def test_inference_is_deterministic(self):
        markup = (
            "<div><div class='post'><a>u1</a></div><div class='post'><a>u2</a></div></div>"
        )
        first = parse_html(markup)
        second = parse_html(markup)
        exemplars_a = [n for n in first.nodes if n.tag == "a"]
        exemplars_b = [n for n in second.nodes if n.tag == "a"]
        run_a = [(c.technique, c.selector) for c in candidate_identifiers(first, exemplars_a, True)]
        run_b = [(c.technique, c.selector) for c in candidate_identifiers(second, exemplars_b, True)]
        assert run_a == run_b


VBULLETIN_LIKE = """
<html><body>
<div class="header">Forum</div>
<div class="threadview">
  <div class="pagenav"><a class="jump">Next</a></div>
  <div id="post_101" class="postbit">
    <div class="userinfo"><a class="username">alice</a><span class="date">01-02, 10:11</span></div>
    <p id="post_message_101" class="postcontent">the first reply body text</p>
  </div>
  <div id="post_102" class="postbit">
    <div class="userinfo"><a class="username">bob</a><span class="date">01-02, 11:30</span></div>
    <p id="post_message_102" class="postcontent">a second distinct body here</p>
  </div>
  <div id="post_103" class="postbit">
    <div class="userinfo"><a class="username">carol</a><span class="date">01-03, 09:01</span></div>
    <p id="post_message_103" class="postcontent">third and final message text</p>
  </div>
</div>
</body></html>
"""


class TestWrapperRefinement:
    def snippets(self):
        return ["first reply body", "second distinct body", "final message text"]

    def accept_full_posts(self, identifier, nodes):
        # A believable operator: accept only if the highlight includes
        # the author names, i.e. the candidate wraps whole posts.
        return all(
            name in node.normalized_text
            for name, node in zip(["alice", "bob", "carol"], nodes)
        )

    def test_id_prefix_collision_falls_back_to_class(self):
        doc = parse_html(VBULLETIN_LIKE)
        ident, events = refine_post_wrapper(
            doc, self.snippets(), post_count=3, decide=self.accept_full_posts
        )
        assert ident.technique is Technique.SINGLE_CLASS
        assert ident.selector == "postbit"
        assert len(resolve(doc, ident)) == 3
        # The id scan saw both id families (post_ and post_message_): 2N
        # nodes for N posts, auto-rejected on the count.
        prefix_events = [
            e for e in events if e.identifier.selector == '//*[starts-with(@id,"post_")]'
        ]
        assert prefix_events and prefix_events[0].resolved_count == 6
        assert prefix_events[0].outcome == "count_mismatch"

    def test_single_parent_step_reaches_wrapper(self):
        doc = parse_html(VBULLETIN_LIKE)
        _, events = refine_post_wrapper(
            doc, self.snippets(), post_count=3, decide=self.accept_full_posts
        )
        # Deepest snippet holders are the message paragraphs; their ids
        # generalize but the operator refuses body-only wrappers, and one
        # parent step lands on the postbit.
        rejected = [e for e in events if e.outcome == "rejected"]
        assert any(
            e.identifier.selector == '//*[starts-with(@id,"post_message_")]' for e in rejected
        )
        accepted = [e for e in events if e.outcome == "accepted"]
        assert [e.identifier.selector for e in accepted] == ["postbit"]

    def test_snippet_not_found(self):
        doc = parse_html(VBULLETIN_LIKE)
        with pytest.raises(SnippetNotFound):
            refine_post_wrapper(doc, ["never written"], post_count=3, decide=lambda i, n: True)

    def test_ambiguous_snippet(self):
        doc = parse_html(
            "<div><p id='a1'>thanks for this</p><p id='a2'>thanks for this</p></div>"
        )
        with pytest.raises(AmbiguousSnippet):
            exemplars_from_snippets(doc, ["thanks for this"])

    def test_refinement_exhausted_at_root(self):
        doc = parse_html(VBULLETIN_LIKE)
        with pytest.raises(RefinementExhausted):
            refine_post_wrapper(
                doc, self.snippets(), post_count=3, decide=lambda i, n: False
            )

    def test_wrong_post_count_cannot_accept_wrapper(self):
        doc = parse_html(VBULLETIN_LIKE)
        with pytest.raises(RefinementExhausted):
            refine_post_wrapper(
                doc, self.snippets(), post_count=4, decide=self.accept_full_posts
            )


class TestConflictDetection:
    def page(self, with_prev):
        prev = '<a class="jump">Prev</a>' if with_prev else ""
        return parse_html(
            f'<div class="pagenav">{prev}<a class="jump">Next</a></div>'
        )

    def ident(self):
        return ResourceIdentifier(Technique.SINGLE_CLASS, "jump", expects_many=False)

    def test_two_matches_reported_as_conflict(self):
        asked = []

        def ask(count, nodes):
            asked.append(count)
            return True

        record = detect_next_button_conflict(self.ident(), self.page(with_prev=True), ask)
        assert asked == [2]
        assert record is not None
        assert (record.resolved_count, record.chosen_index) == (2, 2)

    def test_operator_says_one_element(self):
        record = detect_next_button_conflict(
            self.ident(), self.page(with_prev=True), lambda c, n: False
        )
        assert record is None

    def test_single_match_never_asks(self):
        def ask(count, nodes):  # pragma: no cover - must not run
            raise AssertionError("should not ask")

        assert detect_next_button_conflict(self.ident(), self.page(with_prev=False), ask) is None


@given(
    post_count=st.integers(min_value=2, max_value=8),
    picked=st.data(),
)
@settings(max_examples=40)
def test_generalization_always_covers_exemplars(post_count, picked):
    # Uniform repeating structure: any subset of author nodes must be
    # covered by whatever identifier inference lands on.
    rows = "".join(
        f"<div class='post'><div class='meta'><a>user{i}</a></div><p>body {i}</p></div>"
        for i in range(post_count)
    )
    doc = parse_html(f"<div id='posts'>{rows}</div>")
    authors = [n for n in doc.nodes if n.tag == "a"]
    size = picked.draw(st.integers(min_value=1, max_value=post_count))
    exemplars = authors[:size]
    ident = infer(doc, exemplars, expects_many=True)
    resolved = resolve(doc, ident)
    assert all(any(r.contains(a) for r in resolved) for a in exemplars)
