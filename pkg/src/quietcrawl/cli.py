"""Command line front end.

Five subcommands cover the whole workflow:

  train          host the operator console and write a blueprint
  crawl          run browsing sessions against a trained forum
  schedule       print upcoming session plans without touching the network
  analyze        turn server access logs into detection-feature reports
  fixture-serve  run a bundled synthetic forum for end-to-end drills

Every command takes ``--seed``; with equal inputs and an injected clock
two runs produce byte-identical state and report files.  Crawl-side
settings live in one JSON config file (see ``load_run_config``).

Exit codes: 0 success, 2 usage, 3 configuration, 4 transport,
5 structural drift.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field, fields as dataclass_fields, replace
from datetime import timedelta
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .analyzer import (
    compare,
    features,
    load_thread_rules,
    parse_log,
    render_comparison_figures,
    sessionize,
    write_comparison_csv,
    write_comparison_json,
    write_features_csv,
)
from .behavior import BehaviorModel, BehaviorProfile, profile_from_dict
from .clock import Clock
from .crawler import Crawler, CrawlReport
from .errors import (
    BlueprintSchemaError,
    ConfigError,
    QuietcrawlError,
    StructuralDrift,
    TransportError,
)
from .fetch import BrowserSession, FetchConfig
from .model import CrawlState, load_blueprint, load_state, save_state
from .trainer import TrainerServer, TrainerService, WorkflowStep

_TRAIN_POLL_S = 0.2


# -- run configuration ---------------------------------------------------------


@dataclass(frozen=True, slots=True)
class RunConfig:
    """Crawl settings merged from one JSON config file.

    ``seed`` feeds every random draw; the ``--seed`` flag overrides it.
    ``fetch`` and ``behavior`` are nested objects with the field names
    of FetchConfig and BehaviorProfile.
    """

    seed: Optional[int] = None
    fetch: FetchConfig = field(default_factory=FetchConfig)
    behavior: BehaviorProfile = field(default_factory=BehaviorProfile)
    username: Optional[str] = None
    password: Optional[str] = None
    posts_path: Optional[str] = None
    report_path: Optional[str] = None
    cookie_path: Optional[str] = None


def load_run_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    known = {f.name for f in dataclass_fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    fetch_data = data.get("fetch", {})
    if not isinstance(fetch_data, dict):
        raise ConfigError("fetch must be a JSON object")
    fetch_known = {f.name for f in dataclass_fields(FetchConfig)}
    bad = sorted(set(fetch_data) - fetch_known)
    if bad:
        raise ConfigError(f"unknown fetch keys: {', '.join(bad)}")
    try:
        fetch = FetchConfig(**fetch_data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad fetch settings: {exc}") from None

    behavior_data = data.get("behavior", {})
    if not isinstance(behavior_data, dict):
        raise ConfigError("behavior must be a JSON object")
    behavior = profile_from_dict(behavior_data)

    seed = data.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    for key in ("username", "password", "posts_path", "report_path", "cookie_path"):
        value = data.get(key)
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"{key} must be a string")

    return RunConfig(
        seed=seed,
        fetch=fetch,
        behavior=behavior,
        username=data.get("username"),
        password=data.get("password"),
        posts_path=data.get("posts_path"),
        report_path=data.get("report_path"),
        cookie_path=data.get("cookie_path"),
    )


# -- shared helpers ------------------------------------------------------------


def _parse_listen(value: str) -> Tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"--listen wants HOST:PORT, got {value!r}")
    try:
        return host, int(port)
    except ValueError:
        raise ConfigError(f"--listen port must be an integer, got {port!r}") from None


def _write_json(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _report_payload(report: CrawlReport, seed: Optional[int]) -> dict:
    payload = {"seed": seed}
    payload.update(report.to_dict())
    return payload


def _session_line(report: CrawlReport) -> str:
    plan = report.session_plan
    if plan is not None and plan.skipped:
        return f"session {plan.start.isoformat()} skipped"
    return (
        f"session done: pages={report.pages_visited}"
        f" threads={report.threads_opened}"
        f" unchanged={report.threads_skipped_unchanged}"
        f" posts={report.posts_extracted}"
        f" drift={len(report.structural_drift_urls)}"
    )


# -- train ---------------------------------------------------------------------


def cmd_train(args, clock: Clock) -> int:
    pages: Dict[str, str] = {}
    for pair in args.pages:
        key, sep, source = pair.partition("=")
        if not sep or not key or not source:
            raise ConfigError(f"--pages wants KEY=SOURCE pairs, got {pair!r}")
        if key in pages:
            raise ConfigError(f"duplicate page key {key!r}")
        pages[key] = source

    credentials = None
    if args.credentials is not None:
        user, sep, password = args.credentials.partition(":")
        if not sep or not user:
            raise ConfigError("--credentials wants USER:PASSWORD")
        credentials = (user, password)

    host, port = _parse_listen(args.listen)
    live = any(src.startswith(("http://", "https://")) for src in pages.values())
    browser = BrowserSession(clock=clock) if live else None
    try:
        service = TrainerService(
            args.forum_id,
            pages,
            store_dir=args.store_dir,
            browser=browser,
            credentials=credentials,
            blueprint_path=args.blueprint,
            ui_dir=args.ui_dir,
        )
        server = TrainerServer(service, host=host, port=port)
        try:
            print(f"operator console: {server.base_url}", flush=True)
            print("training ends when the workflow reaches Done", flush=True)
            while True:
                with service.session.lock:
                    done = service.session.step is WorkflowStep.DONE
                if done:
                    break
                time.sleep(_TRAIN_POLL_S)
        except KeyboardInterrupt:
            partial = service.write_partial()
            print(f"interrupted; partial blueprint saved to {partial}", flush=True)
            return 3
        finally:
            server.stop()
    finally:
        if browser is not None:
            browser.close()
    print(f"blueprint written to {args.blueprint}", flush=True)
    return 0


# -- crawl ---------------------------------------------------------------------


def cmd_crawl(args, clock: Clock) -> int:
    run = load_run_config(args.config)
    seed = args.seed if args.seed is not None else run.seed
    if args.max_sessions is not None:
        if args.once:
            raise ConfigError("--max-sessions only applies to --daemon")
        if args.max_sessions < 1:
            raise ConfigError("--max-sessions must be >= 1")
    if run.username is None or run.password is None:
        raise ConfigError("crawling needs username and password in the config")

    blueprint = load_blueprint(args.blueprint)
    state_path = Path(args.state)
    if state_path.exists():
        state = load_state(state_path)
    else:
        state = CrawlState(forum_id=blueprint.forum_id)

    behavior = BehaviorModel(run.behavior, seed=seed)
    session = BrowserSession(config=run.fetch, clock=clock, cookie_path=run.cookie_path)
    reports: List[CrawlReport] = []
    crawler: Optional[Crawler] = None
    try:
        progress = (lambda line: print(line, flush=True)) if args.verbose else None
        crawler = Crawler(
            blueprint,
            state,
            session,
            behavior,
            credentials=(run.username, run.password),
            clock=clock,
            posts_path=run.posts_path,
            progress=progress,
        )
        if args.once:
            # One immediate session: take the next planned slot but run it
            # now, never skipped, keeping its drawn duration and pauses.
            plan = behavior.next_session(clock.now())
            now = clock.now()
            plan = replace(
                plan,
                start=now,
                end=now + timedelta(seconds=plan.duration_s),
                skipped=False,
            )
            reports.append(crawler.run_session(plan))
        else:
            while args.max_sessions is None or len(reports) < args.max_sessions:
                plan = behavior.next_session(clock.now())
                wait_s = (plan.start - clock.now()).total_seconds()
                if wait_s > 0:
                    clock.sleep(wait_s)
                report = crawler.run_session(plan)
                reports.append(report)
                save_state(crawler.state, state_path)
                if run.report_path:
                    _write_json(
                        run.report_path,
                        [_report_payload(r, seed) for r in reports],
                    )
                print(_session_line(report), flush=True)
    except KeyboardInterrupt:
        print("stopping", flush=True)
    finally:
        if crawler is not None:
            save_state(crawler.state, state_path)
        session.close()

    if args.once and reports:
        if run.report_path:
            _write_json(run.report_path, _report_payload(reports[0], seed))
            print(f"report: {run.report_path}", flush=True)
        print(_session_line(reports[0]), flush=True)
    return 0


# -- schedule ------------------------------------------------------------------


def cmd_schedule(args, clock: Clock) -> int:
    run = load_run_config(args.config)
    seed = args.seed if args.seed is not None else run.seed
    behavior = BehaviorModel(run.behavior, seed=seed)
    plans = behavior.plan_schedule(clock.now(), args.days)
    for plan in plans:
        status = "skipped" if plan.skipped else ("forced" if plan.forced else "active")
        print(
            f"{plan.start.isoformat()}  {plan.end.isoformat()}"
            f"  {status}  pauses={len(plan.pauses)}",
            flush=True,
        )
    active = sum(1 for plan in plans if not plan.skipped)
    print(
        f"{len(plans)} slot(s), {active} active, over {args.days} day(s), seed={seed}",
        flush=True,
    )
    return 0


# -- analyze -------------------------------------------------------------------


def cmd_analyze(args, clock: Clock) -> int:
    if args.groups is not None and len(args.groups) != len(args.logs):
        raise ConfigError("--groups needs exactly one label per log file")
    labels = args.groups if args.groups is not None else [Path(p).stem for p in args.logs]

    classifier = load_thread_rules(args.rules if args.rules else [])
    groups: Dict[str, List] = {}
    for label, log_path in zip(labels, args.logs):
        bucket = groups.setdefault(label, [])
        records = parse_log(log_path, format=args.format)
        for traffic in sessionize(records, cookie_key=args.cookie_key):
            bucket.append(features(traffic, classifier))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    write_features_csv(groups, out / "features.csv")
    written.append(out / "features.csv")
    if len(groups) >= 2:
        report = compare(groups)
        write_comparison_csv(report, out / "comparison.csv")
        write_comparison_json(report, out / "comparison.json")
        written += [out / "comparison.csv", out / "comparison.json"]
        written += render_comparison_figures(groups, out / "figures")

    manifest = {
        "seed": args.seed,
        "format": args.format,
        "logs": list(args.logs),
        "groups": {label: len(vectors) for label, vectors in groups.items()},
        "rules": args.rules,
    }
    _write_json(out / "run.json", manifest)
    written.append(out / "run.json")

    for path in written:
        print(f"wrote {path}", flush=True)
    total = sum(len(vectors) for vectors in groups.values())
    print(f"{total} session(s) across {len(groups)} group(s)", flush=True)
    return 0


# -- fixture-serve -------------------------------------------------------------


def cmd_fixture_serve(args, clock: Clock) -> int:
    from .fixtures import FIXTURE_FAMILIES, PASSWORD, USERNAME, FixtureServer, build_fixture

    if args.fixture not in FIXTURE_FAMILIES:
        raise ConfigError(
            f"unknown fixture {args.fixture!r}; pick one of {', '.join(FIXTURE_FAMILIES)}"
        )
    host, port = _parse_listen(args.listen)
    fixture = build_fixture(args.fixture)
    server = FixtureServer(fixture, clock=clock, log_path=args.log, host=host, port=port)
    print(f"{args.fixture} forum at {server.base_url}", flush=True)
    print(f"login: {USERNAME} / {PASSWORD}", flush=True)
    if args.log:
        print(f"access log: {args.log}", flush=True)
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


# -- wiring --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quietcrawl",
        description="operator-trained forum crawler with a human browsing profile",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="host the operator console, write a blueprint")
    train.add_argument("--forum-id", required=True)
    train.add_argument(
        "--pages",
        nargs="+",
        required=True,
        metavar="KEY=SOURCE",
        help="page sources, KEY in login/home/section/thread[/section_inner/thread_inner];"
        " SOURCE is a live URL or a saved HTML file",
    )
    train.add_argument("--listen", default="127.0.0.1:0", metavar="HOST:PORT")
    train.add_argument("--store-dir", default="trainer-store")
    train.add_argument("--blueprint", default="blueprint.json")
    train.add_argument("--credentials", default=None, metavar="USER:PASSWORD")
    train.add_argument("--ui-dir", default=None, help="directory with operator console scripts")
    train.add_argument("--seed", type=int, default=None)
    train.set_defaults(func=cmd_train)

    crawl = sub.add_parser("crawl", help="run browsing sessions from a blueprint")
    crawl.add_argument("--blueprint", required=True)
    crawl.add_argument("--state", required=True)
    crawl.add_argument("--config", required=True)
    mode = crawl.add_mutually_exclusive_group(required=True)
    mode.add_argument("--once", action="store_true", help="run a single immediate session")
    mode.add_argument("--daemon", action="store_true", help="keep following the schedule")
    crawl.add_argument("--max-sessions", type=int, default=None, help="stop the daemon after N sessions")
    crawl.add_argument("--verbose", action="store_true")
    crawl.add_argument("--seed", type=int, default=None)
    crawl.set_defaults(func=cmd_crawl)

    schedule = sub.add_parser("schedule", help="preview session plans, no network")
    schedule.add_argument("--config", required=True)
    schedule.add_argument("--days", type=int, required=True)
    schedule.add_argument("--seed", type=int, default=None)
    schedule.set_defaults(func=cmd_schedule)

    analyze = sub.add_parser("analyze", help="compute detection features from access logs")
    analyze.add_argument("--logs", nargs="+", required=True)
    analyze.add_argument("--groups", nargs="+", default=None, help="one label per log; repeats merge")
    analyze.add_argument("--rules", default=None, help="thread-identity rules JSON")
    analyze.add_argument("--format", choices=("w3c_extended", "common_log"), default="w3c_extended")
    analyze.add_argument("--cookie-key", default=None)
    analyze.add_argument("--out", required=True, help="directory for report files")
    analyze.add_argument("--seed", type=int, default=None)
    analyze.set_defaults(func=cmd_analyze)

    serve = sub.add_parser("fixture-serve", help="run a synthetic forum fixture")
    serve.add_argument("--fixture", required=True)
    serve.add_argument("--listen", default="127.0.0.1:0", metavar="HOST:PORT")
    serve.add_argument("--log", default=None, help="write an access log here on shutdown")
    serve.add_argument("--seed", type=int, default=None)
    serve.set_defaults(func=cmd_fixture_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None, clock: Optional[Clock] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    active_clock = clock if clock is not None else Clock()
    try:
        return args.func(args, active_clock)
    except (ConfigError, BlueprintSchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr, flush=True)
        return 3
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr, flush=True)
        return 4
    except StructuralDrift as exc:
        print(f"structural drift: {exc}", file=sys.stderr, flush=True)
        return 5
    except QuietcrawlError as exc:
        print(f"error: {exc}", file=sys.stderr, flush=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
