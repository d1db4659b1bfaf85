"""Fetch engine behaves like a browser, not like a scraping script."""

import json
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from quietcrawl.clock import VirtualClock
from quietcrawl.dom import parse_html
from quietcrawl.errors import MalformedPage, TransportError
from quietcrawl.fetch import BrowserSession, FetchConfig
from quietcrawl.fixtures import PASSWORD, USERNAME, FixtureServer, build_fixture

GOLDEN = Path(__file__).parent / "data" / "navigate_headers.golden"


@pytest.fixture()
def served():
    fixture = build_fixture("mybb")
    server = FixtureServer(fixture, clock=VirtualClock())
    yield fixture, server
    server.stop()


def find_login_form(fixture):
    doc = parse_html(fixture.render_login())
    return next(n for n in doc.nodes if n.tag == "form")


def do_login(session, fixture, server):
    form = find_login_form(fixture)
    return session.submit_form(
        form,
        {fixture.skin.user_field: USERNAME, fixture.skin.pass_field: PASSWORD},
        page_url=server.base_url + fixture.login_path(),
    )


def test_navigations_use_get_and_referrer_chain(served):
    fixture, server = served
    with BrowserSession() as session:
        first = session.navigate(server.base_url + fixture.home_path())
        second = session.navigate(server.base_url + fixture.login_path())
    assert first.referrer_sent is None
    assert second.referrer_sent == server.base_url + fixture.home_path()
    page_hits = [h for h in server.hits if h.stem.endswith(".php")]
    assert all(h.method == "GET" for h in page_hits)
    login_hit = next(h for h in server.hits if h.query == "action=login")
    assert login_hit.referrer == server.base_url + fixture.home_path()
    home_hit = next(h for h in server.hits if h.stem == "/index.php")
    assert home_hit.referrer is None


def test_subresources_fetched_with_page_referrer_but_never_scripts(served):
    fixture, server = served
    with BrowserSession() as session:
        result = session.navigate(server.base_url + fixture.login_path())
    kinds = {r.kind for r in result.subresources}
    assert kinds == {"style", "image"}
    assert len(result.subresources) == 12
    asset_hits = [h for h in server.hits if h.stem.startswith(("/css/", "/images/"))]
    assert len(asset_hits) == 12
    page_url = server.base_url + fixture.login_path()
    assert all(h.referrer == page_url for h in asset_hits)
    assert not any(h.stem.startswith("/js/") for h in server.hits)
    assert not any(h.method == "HEAD" for h in server.hits)


def test_fresh_cache_serves_repeat_assets_without_network(served):
    fixture, server = served
    clock = VirtualClock()
    with BrowserSession(clock=clock) as session:
        session.navigate(server.base_url + fixture.login_path())
        server.reset_hits()
        again = session.navigate(server.base_url + fixture.login_path())
    assert all(r.from_cache for r in again.subresources)
    assert not any(h.stem.startswith(("/css/", "/images/")) for h in server.hits)


def test_stale_cache_revalidates_with_conditional_get(served):
    fixture, server = served
    clock = VirtualClock()
    with BrowserSession(clock=clock) as session:
        session.navigate(server.base_url + fixture.login_path())
        clock.sleep(3601)  # older than the asset max-age
        server.reset_hits()
        again = session.navigate(server.base_url + fixture.login_path())
    assert all(r.from_cache and r.status == 304 for r in again.subresources)
    asset_hits = [h for h in server.hits if h.stem.startswith(("/css/", "/images/"))]
    assert len(asset_hits) == 12
    assert all(h.status == 304 for h in asset_hits)


def test_always_revalidate_mode_skips_freshness(served):
    fixture, server = served
    config = FetchConfig(cache_mode="always-revalidate")
    with BrowserSession(config=config, clock=VirtualClock()) as session:
        session.navigate(server.base_url + fixture.login_path())
        server.reset_hits()
        session.navigate(server.base_url + fixture.login_path())
    asset_hits = [h for h in server.hits if h.stem.startswith(("/css/", "/images/"))]
    assert asset_hits and all(h.status == 304 for h in asset_hits)


def test_login_form_posts_and_follows_redirect(served):
    fixture, server = served
    with BrowserSession() as session:
        session.navigate(server.base_url + fixture.login_path())
        result = do_login(session, fixture, server)
        assert result.status == 200
        assert result.final_url == server.base_url + fixture.home_path()
        post_hit = next(h for h in server.hits if h.method == "POST")
        assert post_hit.referrer == server.base_url + fixture.login_path()
        # The authenticated content page now opens instead of redirecting.
        page = session.navigate(server.base_url + fixture.thread_path(101, 1))
        assert "Archived note 101.1" in page.body


def test_get_form_lands_in_query_string(served):
    fixture, server = served
    html = '<form action="/index.php" method="get"><input name="q" value=""></form>'
    form = next(n for n in parse_html(html).nodes if n.tag == "form")
    with BrowserSession() as session:
        result = session.submit_form(
            form, {"q": "spare parts"}, page_url=server.base_url + "/index.php"
        )
    assert result.final_url.endswith("/index.php?q=spare+parts")
    hit = next(h for h in server.hits if h.query)
    assert hit.method == "GET"
    assert hit.query == "q=spare+parts"


def test_form_without_action_is_rejected():
    html = "<form method='post'><input name='a'></form>"
    form = next(n for n in parse_html(html).nodes if n.tag == "form")
    with BrowserSession() as session:
        with pytest.raises(MalformedPage):
            session.submit_form(form, {}, page_url="http://example.invalid/")


def test_error_statuses_raise_transport_error(served):
    fixture, server = served
    with BrowserSession() as session:
        session.navigate(server.base_url + fixture.login_path())
        do_login(session, fixture, server)
        with pytest.raises(TransportError):
            session.navigate(server.base_url + "/missing.php")


def test_redirect_loop_is_cut_off():
    class LoopHandler(BaseHTTPRequestHandler):
        def do_GET(self):
            self.send_response(302)
            self.send_header("Location", "/loop")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def log_message(self, *args):
            pass

    httpd = ThreadingHTTPServer(("127.0.0.1", 0), LoopHandler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    try:
        url = f"http://127.0.0.1:{httpd.server_address[1]}/loop"
        with BrowserSession() as session:
            with pytest.raises(TransportError, match="redirect"):
                session.navigate(url)
    finally:
        httpd.shutdown()
        httpd.server_close()


def test_cookie_file_round_trip(served, tmp_path):
    fixture, server = served
    cookie_file = tmp_path / "cookies.json"
    with BrowserSession(cookie_path=str(cookie_file)) as session:
        session.navigate(server.base_url + fixture.login_path())
        do_login(session, fixture, server)
    records = json.loads(cookie_file.read_text())
    assert any(r["name"] == "sid" for r in records)
    sid = next(r for r in records if r["name"] == "sid")
    assert set(sid) == {"name", "value", "domain", "path", "expiry"}

    # A fresh session resuming from the file is already authenticated.
    with BrowserSession(cookie_path=str(cookie_file)) as resumed:
        page = resumed.navigate(server.base_url + fixture.thread_path(101, 1))
        assert page.status == 200
        assert "Archived note" in page.body


def test_robots_txt_is_never_requested(served):
    fixture, server = served
    with BrowserSession() as session:
        session.navigate(server.base_url + fixture.home_path())
        session.navigate(server.base_url + fixture.login_path())
        do_login(session, fixture, server)
        session.navigate(server.base_url + fixture.section_path(2, 1))
    assert not any(h.stem == "/robots.txt" for h in server.hits)


def _capture_raw_request(handler):
    """Accept one connection, return its raw request head bytes."""
    captured = {}

    def serve(sock):
        conn, _ = sock.accept()
        data = b""
        while b"\r\n\r\n" not in data:
            chunk = conn.recv(4096)
            if not chunk:
                break
            data += chunk
        captured["head"] = data.split(b"\r\n\r\n", 1)[0]
        conn.sendall(
            b"HTTP/1.1 200 OK\r\nContent-Length: 0\r\nConnection: close\r\n\r\n"
        )
        conn.close()

    sock = socket.create_server(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    thread = threading.Thread(target=serve, args=(sock,), daemon=True)
    thread.start()
    handler(port)
    thread.join(timeout=5)
    sock.close()
    return captured["head"].replace(f":{port}".encode(), b":PORT")


def test_navigation_header_block_matches_golden():
    def drive(port):
        with BrowserSession() as session:
            session.navigate(f"http://127.0.0.1:{port}/index.php")

    head = _capture_raw_request(drive)
    expected = GOLDEN.read_bytes().rstrip(b"\n")
    assert head == expected, (
        "header block drifted:\n" + head.decode(errors="replace")
    )
