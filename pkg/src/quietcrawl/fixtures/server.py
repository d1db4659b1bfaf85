"""HTTP server for the synthetic forums.

Serves one :class:`ForumFixture` on an ephemeral localhost port with
cookie-gated content pages, cacheable assets and a W3C extended access
log.  Timestamps come from an injectable clock, so a crawl running on
virtual time produces a log whose pacing reflects the simulated delays
rather than wall time.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import List, Optional
from urllib.parse import parse_qs, urlsplit

from ..clock import Clock
from .forums import PASSWORD, USERNAME, ForumFixture

W3C_FIELDS = (
    "date time c-ip cs-method cs-uri-stem cs-uri-query sc-status "
    "cs(Referer) cs(User-Agent) cs(Cookie)"
)

ROBOTS_BODY = b"User-agent: *\nDisallow: /login\nDisallow: /member.php\n"

_LAST_MODIFIED = "Mon, 04 Mar 2019 09:00:00 GMT"


@dataclass(frozen=True, slots=True)
class ServerHit:
    """One handled request, as the access log will record it."""

    date: str
    time: str
    client_ip: str
    method: str
    stem: str
    query: str
    status: int
    referrer: Optional[str]
    user_agent: Optional[str]
    cookie: Optional[str]

    def w3c_line(self) -> str:
        def field(value: Optional[str]) -> str:
            if not value:
                return "-"
            return value.replace(" ", "+")

        return " ".join([
            self.date,
            self.time,
            self.client_ip,
            self.method,
            self.stem or "/",
            self.query or "-",
            str(self.status),
            field(self.referrer),
            field(self.user_agent),
            field(self.cookie),
        ])


class FixtureServer:
    """Threaded server bound to 127.0.0.1 on an ephemeral port."""

    def __init__(
        self,
        fixture: ForumFixture,
        clock: Optional[Clock] = None,
        log_path: Optional[str] = None,
        host: str = "127.0.0.1",
        port: int = 0,
    ) -> None:
        self.fixture = fixture
        self.clock = clock if clock is not None else Clock()
        self.log_path = log_path
        self.hits: List[ServerHit] = []
        self._hits_lock = threading.Lock()
        self._idle = threading.Condition(self._hits_lock)
        self._inflight = 0
        self._session_lock = threading.Lock()
        self._sessions: set = set()
        self._session_counter = 0

        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def do_GET(self) -> None:
                server._handle(self, "GET")

            def do_HEAD(self) -> None:
                server._handle(self, "HEAD")

            def do_POST(self) -> None:
                server._handle(self, "POST")

            def log_message(self, format: str, *args) -> None:
                pass  # access logging goes through ServerHit records

        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)
        if self.log_path:
            self.write_log(self.log_path)

    def __enter__(self) -> "FixtureServer":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- log access ---------------------------------------------------------

    def quiesce(self, timeout: float = 5.0) -> None:
        """Block until every request already received has been logged.

        A client can read a response before the handler thread records
        the hit; readers of ``hits`` call this first to close that gap.
        """
        with self._idle:
            self._idle.wait_for(lambda: self._inflight == 0, timeout=timeout)

    def w3c_log(self) -> str:
        self.quiesce()
        with self._hits_lock:
            hits = list(self.hits)
        lines = [
            "#Software: fixture-forum",
            "#Version: 1.0",
            f"#Fields: {W3C_FIELDS}",
        ]
        lines.extend(hit.w3c_line() for hit in hits)
        return "\n".join(lines) + "\n"

    def write_log(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.w3c_log())

    def reset_hits(self) -> None:
        with self._hits_lock:
            self.hits = []

    def valid_session_cookies(self) -> set:
        with self._session_lock:
            return set(self._sessions)

    # -- request handling -----------------------------------------------------

    def _record(self, handler: BaseHTTPRequestHandler, status: int) -> None:
        stamp = self.clock.now()
        stem, _, query = handler.path.partition("?")
        hit = ServerHit(
            date=stamp.strftime("%Y-%m-%d"),
            time=stamp.strftime("%H:%M:%S"),
            client_ip=handler.client_address[0],
            method=handler.command,
            stem=stem,
            query=query,
            status=status,
            referrer=handler.headers.get("Referer"),
            user_agent=handler.headers.get("User-Agent"),
            cookie=handler.headers.get("Cookie"),
        )
        with self._hits_lock:
            self.hits.append(hit)

    def _authed(self, handler: BaseHTTPRequestHandler) -> bool:
        header = handler.headers.get("Cookie", "")
        for part in header.split(";"):
            name, _, value = part.strip().partition("=")
            if name == "sid" and value in self.valid_session_cookies():
                return True
        return False

    def _new_session(self) -> str:
        with self._session_lock:
            self._session_counter += 1
            token = hashlib.md5(
                f"{self.fixture.family}:{self._session_counter}".encode()
            ).hexdigest()[:16]
            self._sessions.add(token)
            return token

    def _handle(self, handler: BaseHTTPRequestHandler, method: str) -> None:
        with self._idle:
            self._inflight += 1
        try:
            try:
                status = self._dispatch(handler, method)
            except BrokenPipeError:
                return
            self._record(handler, status)
        finally:
            with self._idle:
                self._inflight -= 1
                if self._inflight == 0:
                    self._idle.notify_all()

    def _dispatch(self, handler: BaseHTTPRequestHandler, method: str) -> int:
        fixture = self.fixture
        parts = urlsplit(handler.path)
        stem = parts.path
        path_and_query = handler.path

        if stem == "/robots.txt":
            return self._send(handler, method, 200, ROBOTS_BODY, "text/plain")

        asset = fixture.asset_bytes(stem)
        if asset is not None:
            body, ctype = asset
            etag = '"' + hashlib.md5(body).hexdigest()[:16] + '"'
            if handler.headers.get("If-None-Match") == etag:
                handler.send_response(304)
                handler.send_header("ETag", etag)
                handler.send_header("Cache-Control", "max-age=3600")
                handler.send_header("Content-Length", "0")
                handler.end_headers()
                return 304
            extra = {
                "ETag": etag,
                "Cache-Control": "max-age=3600",
                "Last-Modified": _LAST_MODIFIED,
            }
            return self._send(handler, method, 200, body, ctype, extra)

        if method == "POST":
            return self._handle_post(handler, path_and_query)

        public = {
            fixture.home_path(),
            fixture.login_path(),
            fixture.login_path().partition("?")[0],
        }
        needs_auth = path_and_query not in public and stem not in public
        if needs_auth and not self._authed(handler):
            handler.send_response(302)
            handler.send_header("Location", fixture.login_path())
            handler.send_header("Content-Length", "0")
            handler.end_headers()
            return 302

        html = fixture.render_path(path_and_query, method)
        if html is None:
            return self._send(handler, method, 404, b"not found", "text/plain")
        extra = {"Cache-Control": "private, no-cache"}
        return self._send(handler, method, 200, html.encode(), "text/html; charset=utf-8", extra)

    def _handle_post(self, handler: BaseHTTPRequestHandler, path_and_query: str) -> int:
        fixture = self.fixture
        if path_and_query != fixture.login_post_path():
            return self._send(handler, "POST", 404, b"not found", "text/plain")
        length = int(handler.headers.get("Content-Length", "0"))
        body = handler.rfile.read(length).decode() if length else ""
        form = {k: v[0] for k, v in parse_qs(body).items()}
        skin = fixture.skin
        ok = (
            form.get(skin.user_field) == USERNAME
            and form.get(skin.pass_field) == PASSWORD
        )
        if ok:
            token = self._new_session()
            handler.send_response(302)
            handler.send_header("Location", fixture.home_path())
            handler.send_header("Set-Cookie", f"sid={token}; Path=/; HttpOnly")
            handler.send_header("Content-Length", "0")
            handler.end_headers()
            return 302
        html = fixture.render_login(error=True).encode()
        return self._send(handler, "POST", 200, html, "text/html; charset=utf-8")

    def _send(
        self,
        handler: BaseHTTPRequestHandler,
        method: str,
        status: int,
        body: bytes,
        content_type: str,
        extra: Optional[dict] = None,
    ) -> int:
        handler.send_response(status)
        handler.send_header("Content-Type", content_type)
        handler.send_header("Content-Length", str(len(body)))
        for key, value in (extra or {}).items():
            handler.send_header(key, value)
        handler.end_headers()
        if method != "HEAD":
            handler.wfile.write(body)
        return status
