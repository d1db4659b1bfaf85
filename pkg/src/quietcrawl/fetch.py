"""Browser-faithful page fetching.

A :class:`BrowserSession` navigates like an interactive browser rather
than a scraping script: plain GET requests (never HEAD) with a stable
browser header set, a Referer tracking the previous navigation, the
page's stylesheets and images fetched afterwards with the page as their
referrer, scripts left alone, and HTTP caching honored so repeat visits
revalidate instead of re-downloading.  robots.txt is deliberately never
requested; a browser does not ask for it either.

Navigations are strictly sequential.  Only the subresources of a single
page are fetched in parallel, capped at a small per-page budget like a
browser's per-host connection pool.
"""

from __future__ import annotations

import json
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple
from urllib.parse import urlencode, urljoin

import requests

from .clock import Clock
from .dom import Document, Node, parse_html
from .errors import MalformedPage, TransportError

DEFAULT_USER_AGENT = (
    "Mozilla/5.0 (X11; Linux x86_64; rv:60.0) Gecko/20100101 Firefox/60.0"
)

_PAGE_ACCEPT = "text/html,application/xhtml+xml,application/xml;q=0.9,*/*;q=0.8"
_STYLE_ACCEPT = "text/css,*/*;q=0.1"
_IMAGE_ACCEPT = "image/webp,*/*"
_SCRIPT_ACCEPT = "*/*"

_MAX_REDIRECTS = 10

_MAX_AGE = re.compile(r"max-age=(\d+)")


@dataclass(frozen=True, slots=True)
class FetchConfig:
    user_agent: str = DEFAULT_USER_AGENT
    fetch_styles: bool = True
    fetch_images: bool = True
    fetch_scripts: bool = False
    honor_cache: bool = True
    cache_mode: str = "standard"  # standard | always-revalidate
    proxy: Optional[str] = None
    max_subresource_parallelism: int = 4

    def __post_init__(self) -> None:
        if self.cache_mode not in ("standard", "always-revalidate"):
            raise ValueError(f"unknown cache_mode {self.cache_mode!r}")
        if self.max_subresource_parallelism < 1:
            raise ValueError("max_subresource_parallelism must be >= 1")


@dataclass(frozen=True, slots=True)
class SubresourceResult:
    url: str
    kind: str  # style | image | script
    status: int
    from_cache: bool


@dataclass
class FetchResult:
    final_url: str
    status: int
    headers: Dict[str, str]
    body: str
    subresources: List[SubresourceResult] = field(default_factory=list)
    referrer_sent: Optional[str] = None
    from_cache: bool = False

    def document(self) -> Document:
        return parse_html(self.body)


@dataclass
class _CacheEntry:
    body: bytes
    content_type: str
    etag: Optional[str]
    last_modified: Optional[str]
    fresh_until: Optional[float]


def _freshness(headers: Mapping[str, str], now: float) -> Optional[float]:
    control = headers.get("Cache-Control", "")
    if "no-store" in control or "no-cache" in control:
        return None
    match = _MAX_AGE.search(control)
    if match:
        return now + int(match.group(1))
    return None


class BrowserSession:
    """One logical browser profile: cookie jar, cache, referrer state."""

    def __init__(
        self,
        config: Optional[FetchConfig] = None,
        clock: Optional[Clock] = None,
        cookie_path: Optional[str] = None,
    ) -> None:
        self.config = config if config is not None else FetchConfig()
        self.clock = clock if clock is not None else Clock()
        self._session = requests.Session()
        # All headers are supplied per request, in a fixed order.
        self._session.headers.clear()
        if self.config.proxy:
            self._session.proxies = {
                "http": self.config.proxy,
                "https": self.config.proxy,
            }
        self._cache: Dict[str, _CacheEntry] = {}
        self._last_page_url: Optional[str] = None
        self._nav_lock = threading.Lock()
        self._cookie_path = cookie_path
        if cookie_path:
            try:
                self.load_cookies(cookie_path)
            except FileNotFoundError:
                pass

    # -- public API -----------------------------------------------------------

    @property
    def current_url(self) -> Optional[str]:
        return self._last_page_url

    def back_to(self, url: str) -> None:
        """Move the location without a request, like the back button
        restoring a cached page.  Affects only the next Referer."""
        self._last_page_url = url

    def navigate(self, url: str) -> FetchResult:
        """Load a page the way a link click would."""
        with self._nav_lock:
            referrer = self._last_page_url
            result = self._request_page("GET", url, referrer=referrer)
            self._last_page_url = result.final_url
            result.subresources = self._fetch_subresources(result)
            if self._cookie_path:
                self.save_cookies(self._cookie_path)
            return result

    def submit_form(
        self, form: Node, fields: Mapping[str, str], page_url: str
    ) -> FetchResult:
        """Submit a form node from the page at ``page_url``.

        Field defaults come from the form's named inputs and the given
        ``fields`` overlay them, like typing into the rendered form.
        The form's own method decides GET (query string) versus POST
        (urlencoded body).
        """
        action = form.attrs.get("action")
        if not action:
            raise MalformedPage("form has no action attribute")
        method = form.attrs.get("method", "get").strip().lower()
        values: Dict[str, str] = {}
        for node in form.iter_subtree():
            if node.tag in ("input", "textarea") and node.attrs.get("name"):
                values[node.attrs["name"]] = node.attrs.get("value", "")
        values.update(fields)
        target = urljoin(page_url, action)

        with self._nav_lock:
            if method == "get":
                separator = "&" if "?" in target else "?"
                url = target + separator + urlencode(values)
                result = self._request_page("GET", url, referrer=page_url)
            elif method == "post":
                result = self._request_page(
                    "POST", target, referrer=page_url, form_values=values
                )
            else:
                raise MalformedPage(f"unsupported form method {method!r}")
            self._last_page_url = result.final_url
            result.subresources = self._fetch_subresources(result)
            if self._cookie_path:
                self.save_cookies(self._cookie_path)
            return result

    def save_cookies(self, path: str) -> None:
        records = []
        for cookie in self._session.cookies:
            records.append({
                "name": cookie.name,
                "value": cookie.value,
                "domain": cookie.domain,
                "path": cookie.path,
                "expiry": cookie.expires,
            })
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(records, handle, indent=2)
            handle.write("\n")

    def load_cookies(self, path: str) -> None:
        with open(path, "r", encoding="utf-8") as handle:
            records = json.load(handle)
        for record in records:
            cookie = requests.cookies.create_cookie(
                name=record["name"],
                value=record["value"],
                domain=record.get("domain", ""),
                path=record.get("path", "/"),
                expires=record.get("expiry"),
            )
            self._session.cookies.set_cookie(cookie)

    def close(self) -> None:
        self._session.close()

    def __enter__(self) -> "BrowserSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- request plumbing -------------------------------------------------------

    def _page_headers(self, referrer: Optional[str]) -> Dict[str, str]:
        headers = {
            "User-Agent": self.config.user_agent,
            "Accept": _PAGE_ACCEPT,
            "Accept-Language": "en-US,en;q=0.5",
            "Accept-Encoding": "gzip, deflate",
            "Connection": "keep-alive",
            "Upgrade-Insecure-Requests": "1",
        }
        if referrer:
            headers["Referer"] = referrer
        return headers

    def _subresource_headers(self, accept: str, referrer: str) -> Dict[str, str]:
        return {
            "User-Agent": self.config.user_agent,
            "Accept": accept,
            "Accept-Language": "en-US,en;q=0.5",
            "Accept-Encoding": "gzip, deflate",
            "Connection": "keep-alive",
            "Referer": referrer,
        }

    def _request_page(
        self,
        method: str,
        url: str,
        referrer: Optional[str],
        form_values: Optional[Mapping[str, str]] = None,
    ) -> FetchResult:
        current_method = method
        current_url = url
        body = form_values
        for _ in range(_MAX_REDIRECTS + 1):
            headers = self._page_headers(referrer)
            try:
                response = self._session.request(
                    current_method,
                    current_url,
                    headers=headers,
                    data=body if current_method == "POST" else None,
                    allow_redirects=False,
                    timeout=30,
                )
            except requests.RequestException as exc:
                raise TransportError(f"{current_method} {current_url}: {exc}") from exc
            if response.status_code in (301, 302, 303, 307, 308):
                location = response.headers.get("Location")
                if not location:
                    raise TransportError(
                        f"redirect without Location from {current_url}"
                    )
                next_url = urljoin(current_url, location)
                if response.status_code in (301, 302, 303) and current_method == "POST":
                    current_method = "GET"
                    body = None
                current_url = next_url
                continue
            if not 200 <= response.status_code < 300:
                raise TransportError(
                    f"{current_method} {current_url} returned {response.status_code}"
                )
            return FetchResult(
                final_url=current_url,
                status=response.status_code,
                headers=dict(response.headers),
                body=response.text,
                referrer_sent=referrer,
            )
        raise TransportError(f"more than {_MAX_REDIRECTS} redirects from {url}")

    # -- subresources -----------------------------------------------------------

    def _collect_subresources(self, result: FetchResult) -> List[Tuple[str, str]]:
        wanted: List[Tuple[str, str]] = []
        seen: set = set()
        doc = result.document()
        for node in doc.nodes:
            url: Optional[str] = None
            kind: Optional[str] = None
            if (
                node.tag == "link"
                and node.attrs.get("rel") == "stylesheet"
                and node.attrs.get("href")
            ):
                url, kind = node.attrs["href"], "style"
            elif node.tag == "img" and node.attrs.get("src"):
                url, kind = node.attrs["src"], "image"
            elif node.tag == "script" and node.attrs.get("src"):
                url, kind = node.attrs["src"], "script"
            if url is None or url.startswith("data:"):
                continue
            if kind == "style" and not self.config.fetch_styles:
                continue
            if kind == "image" and not self.config.fetch_images:
                continue
            if kind == "script" and not self.config.fetch_scripts:
                continue
            absolute = urljoin(result.final_url, url)
            if absolute in seen:
                continue
            seen.add(absolute)
            assert kind is not None
            wanted.append((absolute, kind))
        return wanted

    def _fetch_subresources(self, result: FetchResult) -> List[SubresourceResult]:
        wanted = self._collect_subresources(result)
        if not wanted:
            return []
        page_url = result.final_url
        workers = min(self.config.max_subresource_parallelism, len(wanted))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(self._fetch_one_subresource, url, kind, page_url)
                for url, kind in wanted
            ]
            return [f.result() for f in futures]

    def _fetch_one_subresource(
        self, url: str, kind: str, page_url: str
    ) -> SubresourceResult:
        accept = {
            "style": _STYLE_ACCEPT,
            "image": _IMAGE_ACCEPT,
            "script": _SCRIPT_ACCEPT,
        }[kind]
        entry = self._cache.get(url) if self.config.honor_cache else None
        if (
            entry is not None
            and self.config.cache_mode == "standard"
            and entry.fresh_until is not None
            and self.clock.time() < entry.fresh_until
        ):
            return SubresourceResult(url=url, kind=kind, status=200, from_cache=True)

        headers = self._subresource_headers(accept, page_url)
        if entry is not None:
            if entry.etag:
                headers["If-None-Match"] = entry.etag
            if entry.last_modified:
                headers["If-Modified-Since"] = entry.last_modified
        try:
            response = self._session.get(
                url, headers=headers, allow_redirects=True, timeout=30
            )
        except requests.RequestException:
            return SubresourceResult(url=url, kind=kind, status=0, from_cache=False)

        if response.status_code == 304 and entry is not None:
            entry.fresh_until = _freshness(response.headers, self.clock.time())
            return SubresourceResult(url=url, kind=kind, status=304, from_cache=True)
        if response.status_code == 200 and self.config.honor_cache:
            # Bodies are kept even without validators; an entry that can
            # never revalidate still serves page saving (asset_body).
            self._cache[url] = _CacheEntry(
                body=response.content,
                content_type=response.headers.get("Content-Type", ""),
                etag=response.headers.get("ETag"),
                last_modified=response.headers.get("Last-Modified"),
                fresh_until=_freshness(response.headers, self.clock.time()),
            )
        return SubresourceResult(
            url=url, kind=kind, status=response.status_code, from_cache=False
        )

    # -- offline page saving ------------------------------------------------------

    def page_subresources(self, result: FetchResult) -> List[Tuple[str, str]]:
        """(absolute URL, kind) pairs the page at ``result`` pulls in."""
        return self._collect_subresources(result)

    def asset_body(self, url: str, kind: str, referrer: str) -> Tuple[int, bytes, str]:
        """(status, bytes, content type) of one subresource.

        Served from the session cache when the page fetch already pulled
        it; otherwise fetched once with the matching Accept header.  A
        transport failure reports status 0 rather than raising, so one
        broken asset does not abort a page save.
        """
        entry = self._cache.get(url)
        if entry is not None:
            return 200, entry.body, entry.content_type
        accept = {
            "style": _STYLE_ACCEPT,
            "image": _IMAGE_ACCEPT,
            "script": _SCRIPT_ACCEPT,
        }.get(kind, "*/*")
        try:
            response = self._session.get(
                url,
                headers=self._subresource_headers(accept, referrer),
                allow_redirects=True,
                timeout=30,
            )
        except requests.RequestException:
            return 0, b"", ""
        content_type = response.headers.get("Content-Type", "")
        if response.status_code == 200 and self.config.honor_cache:
            self._cache[url] = _CacheEntry(
                body=response.content,
                content_type=content_type,
                etag=response.headers.get("ETag"),
                last_modified=response.headers.get("Last-Modified"),
                fresh_until=_freshness(response.headers, self.clock.time()),
            )
        return response.status_code, response.content, content_type
