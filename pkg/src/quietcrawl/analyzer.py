"""Crawler-detection features from web-server access logs.

The stealth check runs from the server's side of the fence: parse the
access log, rebuild visitor sessions, and compute the request-pattern
features an alert administrator would look at (request rate, HTML/image
ratio, HEAD usage, robots.txt probes, referrer gaps, error rates, the
day/night profile).  Groups of sessions are then compared metric by
metric so a crawler run can be held against human traffic or against a
cruder scraper.

Definitions pinned here and in the tests:

* image requests counted by the HTML/image ratio are ``.png .jpg .jpeg``
  only; other picture formats classify as images but stay out of the
  ratio.
* switching factor = adjacent request pairs that cross between text
  ({html}) and media ({image, style}) divided by (requests - 1); pairs
  touching script/other classes never count as a switch.
* night window is 00:00-06:00 in the log's own clock.
* parallelism_flag is raised when two thread-page requests land within
  the log's one-second resolution (gap < 1 s).
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
import statistics
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import ConfigError

log = logging.getLogger(__name__)

SESSION_GAP_S = 1800.0
NIGHT_END_HOUR = 6

_RATIO_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
_IMAGE_SUFFIXES = _RATIO_IMAGE_SUFFIXES + (".gif", ".webp", ".ico", ".bmp", ".svg")
_HTML_SUFFIXES = (".php", ".html", ".htm", ".asp", ".aspx", ".jsp")

ThreadClassifier = Callable[[str], Optional[str]]


def content_class_for(path: str, mime: Optional[str] = None) -> str:
    """Deterministic content class from the path, MIME as a tiebreaker."""
    if mime:
        base = mime.split(";")[0].strip().lower()
        if base in ("text/html", "application/xhtml+xml"):
            return "html"
        if base.startswith("image/"):
            return "image"
        if base == "text/css":
            return "style"
        if base in ("text/javascript", "application/javascript"):
            return "script"
    stem = path.split("?", 1)[0].lower()
    if stem.endswith(_IMAGE_SUFFIXES):
        return "image"
    if stem.endswith(".css"):
        return "style"
    if stem.endswith(".js"):
        return "script"
    last = stem.rsplit("/", 1)[-1]
    if stem.endswith(_HTML_SUFFIXES) or stem.endswith("/") or "." not in last:
        return "html"
    return "other"


@dataclass(frozen=True, slots=True)
class LogRecord:
    timestamp: datetime  # naive, in the log's own clock
    ip: str
    method: str
    path: str  # stem with the query string rejoined
    status: int
    referrer: Optional[str]
    user_agent: Optional[str]
    cookie: Optional[str]
    content_class: str

    @property
    def client_id(self) -> str:
        return self.cookie if self.cookie else self.ip


@dataclass(frozen=True)
class TrafficSession:
    client_id: str
    records: Tuple[LogRecord, ...]

    @property
    def start(self) -> datetime:
        return self.records[0].timestamp

    @property
    def end(self) -> datetime:
        return self.records[-1].timestamp


# -- log parsing -----------------------------------------------------------------

_DEFAULT_W3C_FIELDS = (
    "date time c-ip cs-method cs-uri-stem cs-uri-query sc-status "
    "cs(Referer) cs(User-Agent) cs(Cookie)"
).split()

# Fields whose spaces the W3C writer encodes as '+'.
_PLUS_ENCODED = {"cs(Referer)", "cs(User-Agent)", "cs(Cookie)"}

_COMMON_LOG_RE = re.compile(
    r'^(?P<ip>\S+) \S+ \S+ \[(?P<ts>[^\]]+)\] "(?P<method>[A-Z]+) (?P<path>\S+)'
    r'(?: HTTP/[\d.]+)?" (?P<status>\d{3}) (?:\S+)'
    r'(?: "(?P<referrer>[^"]*)" "(?P<agent>[^"]*)")?\s*$'
)


def parse_log(path, format: str = "w3c_extended") -> List[LogRecord]:
    """One record per well-formed line; malformed lines are skipped.

    More than 10% malformed data lines aborts the parse, because that
    points at the wrong ``format`` rather than at log noise.
    """
    if format not in ("w3c_extended", "common_log"):
        raise ConfigError(f"unknown log format: {format!r}")
    text = Path(path).read_text(encoding="utf-8", errors="replace")
    records: List[LogRecord] = []
    malformed = 0
    total = 0
    fields = list(_DEFAULT_W3C_FIELDS)
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if format == "w3c_extended" and line.startswith("#Fields:"):
                fields = line[len("#Fields:"):].split()
            continue
        total += 1
        if format == "w3c_extended":
            record = _parse_w3c_line(line, fields)
        else:
            record = _parse_common_line(line)
        if record is None:
            malformed += 1
            log.warning("%s:%d: skipping malformed log line", path, line_no)
        else:
            records.append(record)
    if total and malformed / total > 0.10:
        raise ConfigError(
            f"{malformed} of {total} lines malformed; wrong log format?"
        )
    return records


def _parse_w3c_line(line: str, fields: Sequence[str]) -> Optional[LogRecord]:
    values = line.split(" ")
    if len(values) != len(fields):
        return None
    row: Dict[str, Optional[str]] = {}
    for name, value in zip(fields, values):
        if value == "-":
            row[name] = None
        elif name in _PLUS_ENCODED:
            row[name] = value.replace("+", " ")
        else:
            row[name] = value
    try:
        timestamp = datetime.strptime(
            f"{row['date']} {row['time']}", "%Y-%m-%d %H:%M:%S"
        )
        status = int(row["sc-status"] or "")
    except (KeyError, TypeError, ValueError):
        return None
    stem = row.get("cs-uri-stem")
    ip = row.get("c-ip")
    method = row.get("cs-method")
    if not stem or not ip or not method:
        return None
    query = row.get("cs-uri-query")
    path = f"{stem}?{query}" if query else stem
    return LogRecord(
        timestamp=timestamp,
        ip=ip,
        method=method,
        path=path,
        status=status,
        referrer=row.get("cs(Referer)"),
        user_agent=row.get("cs(User-Agent)"),
        cookie=row.get("cs(Cookie)"),
        content_class=content_class_for(stem),
    )


def _parse_common_line(line: str) -> Optional[LogRecord]:
    match = _COMMON_LOG_RE.match(line)
    if match is None:
        return None
    try:
        timestamp = datetime.strptime(
            match.group("ts").split(" ")[0], "%d/%b/%Y:%H:%M:%S"
        )
    except ValueError:
        return None
    referrer = match.group("referrer")
    agent = match.group("agent")
    path = match.group("path")
    return LogRecord(
        timestamp=timestamp,
        ip=match.group("ip"),
        method=match.group("method"),
        path=path,
        status=int(match.group("status")),
        referrer=None if referrer in (None, "", "-") else referrer,
        user_agent=None if agent in (None, "", "-") else agent,
        cookie=None,
        content_class=content_class_for(path),
    )


# -- sessions ---------------------------------------------------------------------

def cookie_value(raw: Optional[str], name: str) -> Optional[str]:
    if not raw:
        return None
    for part in raw.split(";"):
        key, sep, value = part.strip().partition("=")
        if sep and key == name and value:
            return value
    return None


def sessionize(
    records: Sequence[LogRecord],
    cookie_key: Optional[str] = None,
    gap_s: float = SESSION_GAP_S,
) -> List[TrafficSession]:
    """Group by visitor and split on inactivity.

    With ``cookie_key`` the session cookie is the visitor identity, so a
    client whose IP rotates mid-visit still forms one session; records
    lacking the cookie fall back to their IP.  Without it only the IP
    is used.  Any silence longer than ``gap_s`` starts a new session.
    """
    groups: Dict[str, List[LogRecord]] = {}
    for record in records:
        key: Optional[str] = None
        if cookie_key is not None:
            key = cookie_value(record.cookie, cookie_key)
        if key is None:
            key = record.ip
        groups.setdefault(key, []).append(record)

    sessions: List[TrafficSession] = []
    for key, group in groups.items():
        ordered = sorted(group, key=lambda r: r.timestamp)
        current: List[LogRecord] = [ordered[0]]
        for record in ordered[1:]:
            gap = (record.timestamp - current[-1].timestamp).total_seconds()
            if gap > gap_s:
                sessions.append(TrafficSession(key, tuple(current)))
                current = []
            current.append(record)
        sessions.append(TrafficSession(key, tuple(current)))
    sessions.sort(key=lambda s: (s.start, s.client_id))
    return sessions


# -- thread classification -----------------------------------------------------------

_GROUP_REF = re.compile(r"\{(\d+)\}")


def load_thread_rules(source) -> ThreadClassifier:
    """Build a path → thread-identity classifier from JSON rules.

    ``source`` is a file path or an already-loaded list of
    ``{"pattern": regex, "thread_id": template}`` objects; ``{1}`` in
    the template expands to the pattern's first capture group.  The
    first matching rule wins.
    """
    if isinstance(source, (str, Path)):
        try:
            data = json.loads(Path(source).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read thread rules: {exc}") from None
    else:
        data = source
    if not isinstance(data, list):
        raise ConfigError("thread rules must be a JSON list")
    compiled: List[Tuple[re.Pattern, str]] = []
    for i, rule in enumerate(data):
        if not isinstance(rule, dict) or "pattern" not in rule or "thread_id" not in rule:
            raise ConfigError(f"thread rule {i} needs 'pattern' and 'thread_id'")
        try:
            compiled.append((re.compile(rule["pattern"]), str(rule["thread_id"])))
        except re.error as exc:
            raise ConfigError(f"thread rule {i}: bad pattern: {exc}") from None

    def classify(path: str) -> Optional[str]:
        for pattern, template in compiled:
            match = pattern.search(path)
            if match:
                return _GROUP_REF.sub(
                    lambda m: match.group(int(m.group(1))) or "", template
                )
        return None

    return classify


# -- features ----------------------------------------------------------------------

def _cell(value) -> object:
    if value is None:
        return ""
    if isinstance(value, float) and math.isinf(value):
        return "Infinite"
    return value


@dataclass(frozen=True)
class FeatureVector:
    """Detection features of one session; None marks an absent value."""

    client_id: str
    session_start: Optional[datetime]
    request_count: int
    page_request_count: int
    mean_inter_request_s: Optional[float]
    median_inter_request_s: Optional[float]
    html_image_ratio: Optional[float]  # math.inf when no ratio images
    requests_per_thread: Mapping[str, int] = field(default_factory=dict)
    head_request_count: int = 0
    robots_txt_hit: bool = False
    missing_referrer_fraction: Optional[float] = None
    error_4xx_fraction: Optional[float] = None
    switching_factor: Optional[float] = None
    night_fraction: Optional[float] = None
    parallelism_flag: bool = False

    @property
    def requests_per_thread_mean(self) -> Optional[float]:
        if not self.requests_per_thread:
            return None
        return statistics.mean(self.requests_per_thread.values())

    def to_row(self) -> Dict[str, object]:
        return {
            "client_id": self.client_id,
            "session_start": self.session_start.isoformat() if self.session_start else "",
            "request_count": self.request_count,
            "page_request_count": self.page_request_count,
            "mean_inter_request_s": _cell(self.mean_inter_request_s),
            "median_inter_request_s": _cell(self.median_inter_request_s),
            "html_image_ratio": _cell(self.html_image_ratio),
            "requests_per_thread_mean": _cell(self.requests_per_thread_mean),
            "head_request_count": self.head_request_count,
            "robots_txt_hit": self.robots_txt_hit,
            "missing_referrer_fraction": _cell(self.missing_referrer_fraction),
            "error_4xx_fraction": _cell(self.error_4xx_fraction),
            "switching_factor": _cell(self.switching_factor),
            "night_fraction": _cell(self.night_fraction),
            "parallelism_flag": self.parallelism_flag,
        }


FEATURE_COLUMNS = list(
    FeatureVector(
        client_id="", session_start=None, request_count=0, page_request_count=0,
        mean_inter_request_s=None, median_inter_request_s=None, html_image_ratio=None,
    ).to_row().keys()
)


def features(session: TrafficSession, thread_classifier: ThreadClassifier) -> FeatureVector:
    """Every detection feature of one session.

    Inter-request times and requests-per-thread consider only calls to
    thread pages (what ``thread_classifier`` recognizes); the remaining
    features run over all requests.
    """
    records = session.records
    n = len(records)
    if n == 0:
        return FeatureVector(
            client_id=session.client_id,
            session_start=None,
            request_count=0,
            page_request_count=0,
            mean_inter_request_s=None,
            median_inter_request_s=None,
            html_image_ratio=None,
        )

    pages = [r for r in records if thread_classifier(r.path) is not None]
    gaps = [
        (b.timestamp - a.timestamp).total_seconds()
        for a, b in zip(pages, pages[1:])
    ]
    per_thread: Dict[str, int] = {}
    for record in pages:
        thread = thread_classifier(record.path)
        assert thread is not None
        per_thread[thread] = per_thread.get(thread, 0) + 1

    html_count = sum(1 for r in records if r.content_class == "html")
    ratio_images = sum(
        1 for r in records
        if r.path.split("?", 1)[0].lower().endswith(_RATIO_IMAGE_SUFFIXES)
    )
    switches = 0
    text = {"html"}
    media = {"image", "style"}
    for a, b in zip(records, records[1:]):
        one, two = a.content_class, b.content_class
        if (one in text and two in media) or (one in media and two in text):
            switches += 1

    return FeatureVector(
        client_id=session.client_id,
        session_start=session.start,
        request_count=n,
        page_request_count=len(pages),
        mean_inter_request_s=statistics.mean(gaps) if gaps else None,
        median_inter_request_s=statistics.median(gaps) if gaps else None,
        html_image_ratio=(html_count / ratio_images) if ratio_images else math.inf,
        requests_per_thread=dict(sorted(per_thread.items())),
        head_request_count=sum(1 for r in records if r.method == "HEAD"),
        robots_txt_hit=any(
            r.path.split("?", 1)[0] == "/robots.txt" for r in records
        ),
        missing_referrer_fraction=sum(1 for r in records if not r.referrer) / n,
        error_4xx_fraction=sum(1 for r in records if 400 <= r.status < 500) / n,
        switching_factor=(switches / (n - 1)) if n > 1 else 0.0,
        night_fraction=sum(
            1 for r in records if r.timestamp.hour < NIGHT_END_HOUR
        ) / n,
        parallelism_flag=any(gap < 1.0 for gap in gaps),
    )


# -- group comparison ---------------------------------------------------------------

# Metric name → extractor over a FeatureVector; booleans become rates so
# every metric is a real-valued sample.
COMPARISON_METRICS: List[Tuple[str, Callable[[FeatureVector], Optional[float]]]] = [
    ("mean_inter_request_s", lambda v: v.mean_inter_request_s),
    ("median_inter_request_s", lambda v: v.median_inter_request_s),
    ("html_image_ratio", lambda v: v.html_image_ratio),
    ("requests_per_thread_mean", lambda v: v.requests_per_thread_mean),
    ("head_request_count", lambda v: float(v.head_request_count)),
    ("robots_txt_hit", lambda v: float(v.robots_txt_hit)),
    ("missing_referrer_fraction", lambda v: v.missing_referrer_fraction),
    ("error_4xx_fraction", lambda v: v.error_4xx_fraction),
    ("switching_factor", lambda v: v.switching_factor),
    ("night_fraction", lambda v: v.night_fraction),
    ("parallelism_flag", lambda v: float(v.parallelism_flag)),
]


@dataclass(frozen=True)
class GroupSummary:
    label: str
    n: int
    minimum: Optional[float]
    q1: Optional[float]
    median: Optional[float]
    q3: Optional[float]
    maximum: Optional[float]
    low_confidence: bool


@dataclass(frozen=True)
class PairDistance:
    a: str
    b: str
    ks_statistic: Optional[float]
    p_value: Optional[float]


@dataclass(frozen=True)
class MetricComparison:
    metric: str
    groups: Tuple[GroupSummary, ...]
    pairs: Tuple[PairDistance, ...]


@dataclass(frozen=True)
class ComparisonReport:
    metrics: Tuple[MetricComparison, ...]
    group_sizes: Mapping[str, int]

    def metric(self, name: str) -> MetricComparison:
        for item in self.metrics:
            if item.metric == name:
                return item
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "group_sizes": dict(self.group_sizes),
            "metrics": {
                m.metric: {
                    "groups": {
                        g.label: {
                            "n": g.n,
                            "min": _cell(g.minimum),
                            "q1": _cell(g.q1),
                            "median": _cell(g.median),
                            "q3": _cell(g.q3),
                            "max": _cell(g.maximum),
                            "low_confidence": g.low_confidence,
                        }
                        for g in m.groups
                    },
                    "pairs": [
                        {
                            "a": p.a,
                            "b": p.b,
                            "ks_statistic": _cell(p.ks_statistic),
                            "p_value": _cell(p.p_value),
                        }
                        for p in m.pairs
                    ],
                }
                for m in self.metrics
            },
        }


def _five_numbers(sample: List[float]) -> Tuple[float, float, float, float, float]:
    import numpy

    with numpy.errstate(invalid="ignore"):
        values = numpy.percentile(
            numpy.asarray(sample, dtype=float), [0, 25, 50, 75, 100]
        )
    cleaned = []
    for value in values:
        # Interpolating between two infinite sample points yields nan;
        # the percentile itself sits at that infinity.
        if math.isnan(value) and math.inf in sample:
            value = math.inf
        cleaned.append(float(value))
    return tuple(cleaned)


def compare(groups: Mapping[str, Sequence[FeatureVector]]) -> ComparisonReport:
    """Per-metric five-number summaries plus pairwise KS distances.

    Groups with fewer than two sessions are flagged low-confidence;
    their numbers still print but carry no distributional weight.
    """
    if len(groups) < 2:
        raise ConfigError("compare needs at least two groups")
    from scipy import stats

    labels = sorted(groups)
    metrics: List[MetricComparison] = []
    for name, extract in COMPARISON_METRICS:
        samples: Dict[str, List[float]] = {}
        for label in labels:
            samples[label] = [
                value for value in (extract(v) for v in groups[label])
                if value is not None
            ]
        summaries = []
        for label in labels:
            sample = samples[label]
            if sample:
                mn, q1, med, q3, mx = _five_numbers(sample)
            else:
                mn = q1 = med = q3 = mx = None
            summaries.append(GroupSummary(
                label=label,
                n=len(sample),
                minimum=mn, q1=q1, median=med, q3=q3, maximum=mx,
                low_confidence=len(groups[label]) < 2,
            ))
        pairs = []
        for i, a in enumerate(labels):
            for b in labels[i + 1:]:
                if samples[a] and samples[b]:
                    result = stats.ks_2samp(samples[a], samples[b])
                    pairs.append(PairDistance(
                        a=a, b=b,
                        ks_statistic=float(result.statistic),
                        p_value=float(result.pvalue),
                    ))
                else:
                    pairs.append(PairDistance(a=a, b=b, ks_statistic=None, p_value=None))
        metrics.append(MetricComparison(name, tuple(summaries), tuple(pairs)))
    return ComparisonReport(
        metrics=tuple(metrics),
        group_sizes={label: len(groups[label]) for label in labels},
    )


# -- report files ------------------------------------------------------------------

def write_features_csv(groups: Mapping[str, Sequence[FeatureVector]], path) -> None:
    """One row per session, stable ordering: group label, then session start."""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=["group"] + FEATURE_COLUMNS)
        writer.writeheader()
        for label in sorted(groups):
            for vector in groups[label]:
                row = {"group": label}
                row.update(vector.to_row())
                writer.writerow(row)


def write_comparison_csv(report: ComparisonReport, path) -> None:
    columns = [
        "kind", "metric", "group_or_pair", "n",
        "min", "q1", "median", "q3", "max",
        "ks_statistic", "p_value", "low_confidence",
    ]
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        for metric in report.metrics:
            for g in metric.groups:
                writer.writerow({
                    "kind": "summary",
                    "metric": metric.metric,
                    "group_or_pair": g.label,
                    "n": g.n,
                    "min": _cell(g.minimum),
                    "q1": _cell(g.q1),
                    "median": _cell(g.median),
                    "q3": _cell(g.q3),
                    "max": _cell(g.maximum),
                    "low_confidence": g.low_confidence,
                })
            for p in metric.pairs:
                writer.writerow({
                    "kind": "ks",
                    "metric": metric.metric,
                    "group_or_pair": f"{p.a}|{p.b}",
                    "ks_statistic": _cell(p.ks_statistic),
                    "p_value": _cell(p.p_value),
                })


def write_comparison_json(report: ComparisonReport, path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def render_comparison_figures(
    groups: Mapping[str, Sequence[FeatureVector]], out_dir
) -> List[Path]:
    """One boxplot per metric, written as PNG files next to the CSVs."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = sorted(groups)
    written: List[Path] = []
    for name, extract in COMPARISON_METRICS:
        samples = []
        for label in labels:
            values = [
                value for value in (extract(v) for v in groups[label])
                if value is not None and not (isinstance(value, float) and math.isinf(value))
            ]
            samples.append(values)
        if not any(samples):
            continue
        figure, axis = plt.subplots(figsize=(6, 4))
        axis.boxplot(samples, tick_labels=labels)
        axis.set_title(name)
        axis.set_ylabel(name)
        figure.tight_layout()
        target = out / f"{name}.png"
        figure.savefig(target)
        plt.close(figure)
        written.append(target)
    return written
