"""Parser behaviour: recovery rules, XPaths, text handling."""

from quietcrawl.dom import parse_html, serialize


def test_simple_tree_and_xpath():
    doc = parse_html(
        "<html><body><div id='top'><a href='/x'>one</a><a href='/y'>two</a></div>"
        "<div><span>deep</span></div></body></html>"
    )
    second_link = doc.find_by_id("top")[0].element_children[1]
    assert second_link.absolute_xpath() == "/html[1]/body[1]/div[1]/a[2]"
    assert second_link.structural_xpath() == "/html/body/div/a"
    span = doc.nodes[-1]
    assert span.tag == "span"
    assert span.absolute_xpath() == "/html[1]/body[1]/div[2]/span[1]"


def test_missing_shell_is_synthesized():
    doc = parse_html("<div>content</div><p>more</p>")
    assert doc.root.tag == "html"
    body = doc.root.element_children[0]
    assert body.tag == "body"
    assert [n.tag for n in body.element_children] == ["div", "p"]


def test_implicit_close_of_list_items_and_paragraphs():
    doc = parse_html("<ul><li>a<li>b<li>c</ul><p>one<p>two")
    items = [n for n in doc.nodes if n.tag == "li"]
    assert [n.full_text for n in items] == ["a", "b", "c"]
    # Each li is a sibling, not nested.
    assert all(n.parent.tag == "ul" for n in items)
    paragraphs = [n for n in doc.nodes if n.tag == "p"]
    assert [n.full_text for n in paragraphs] == ["one", "two"]


def test_void_elements_do_not_nest():
    doc = parse_html("<div><img src='a.png'><br><span>after</span></div>")
    div = next(n for n in doc.nodes if n.tag == "div")
    assert [n.tag for n in div.element_children] == ["img", "br", "span"]


def test_stray_end_tag_is_ignored():
    doc = parse_html("<div><span>x</span></b></div><p>y</p>")
    assert [n.tag for n in doc.nodes if n.tag in ("div", "p", "span")] == ["div", "span", "p"]


def test_unclosed_tags_close_at_eof():
    doc = parse_html("<div><span>dangling")
    span = next(n for n in doc.nodes if n.tag == "span")
    assert span.full_text == "dangling"


def test_duplicate_attributes_first_wins():
    doc = parse_html("<div class='a' class='b'>x</div>")
    div = next(n for n in doc.nodes if n.tag == "div")
    assert div.classes == ("a",)


def test_text_interleaving_preserved():
    doc = parse_html("<p>Hello <b>small</b> world</p>")
    p = next(n for n in doc.nodes if n.tag == "p")
    assert p.normalized_text == "Hello small world"
    assert p.direct_text == "Hello  world"


def test_deepest_text_matches_pin_the_tightest_element():
    doc = parse_html("<div><p>alpha <em>beta</em> gamma</p></div>")
    assert [n.tag for n in doc.deepest_text_matches("beta")] == ["em"]
    assert [n.tag for n in doc.deepest_text_matches("alpha beta gamma")] == ["p"]
    assert doc.deepest_text_matches("missing entirely") == []


def test_doc_order_is_preorder():
    doc = parse_html("<div><a>1</a><span><a>2</a></span></div><a>3</a>")
    anchors = [n for n in doc.nodes if n.tag == "a"]
    assert [a.full_text for a in anchors] == ["1", "2", "3"]
    assert anchors[0].doc_order < anchors[1].doc_order < anchors[2].doc_order


def test_serialize_escapes_text_but_not_script():
    doc = parse_html("<div data-x='a&quot;b'>a &lt; b</div><script>if (a < b) {}</script>")
    html = serialize(doc.root)
    assert 'data-x="a&quot;b"' in html
    assert "a &lt; b" in html
    assert "if (a < b) {}" in html


def test_entities_are_decoded():
    doc = parse_html("<p>fish &amp; chips</p>")
    p = next(n for n in doc.nodes if n.tag == "p")
    assert p.full_text == "fish & chips"
