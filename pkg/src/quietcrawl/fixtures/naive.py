"""A deliberately crude scraper for side-by-side log comparisons.

It does everything the paced crawler avoids: fetches robots.txt, probes
with HEAD, sends no Referer, skips every subresource, hammers thread
pages with sub-second gaps, and trips over missing thread ids.  Running
it against a fixture server produces the "naive" half of an analyzer
comparison.
"""

import random
from typing import Optional

import requests

from ..clock import Clock
from .forums import PASSWORD, USERNAME, ForumFixture


def run_naive_crawl(
    base_url: str,
    fixture: ForumFixture,
    clock: Clock,
    seed: Optional[int] = 7,
    bursts: int = 3,
    burst_gap_s: float = 3600.0,
) -> int:
    """Scrape every interesting thread in rapid bursts; returns request count.

    Bursts are separated by more than the analyzer's session gap so each
    shows up as its own session in the server log.
    """
    rng = random.Random(seed)
    session = requests.Session()
    made = 0

    def get(path: str) -> requests.Response:
        nonlocal made
        made += 1
        return session.get(base_url + path, allow_redirects=True, timeout=10)

    for burst in range(bursts):
        session.head(base_url + "/robots.txt", timeout=10)
        get("/robots.txt")
        get(fixture.home_path())
        session.post(
            base_url + fixture.login_post_path(),
            data={
                fixture.skin.user_field: USERNAME,
                fixture.skin.pass_field: PASSWORD,
            },
            timeout=10,
        )
        made += 2

        for thread in fixture.interesting_threads():
            for page in range(1, fixture.thread_page_count(thread.tid) + 1):
                get(fixture.thread_path(thread.tid, page))
                clock.sleep(rng.uniform(0.05, 0.45))
            if rng.random() < 0.2:
                # Guessing at ids beyond the real range earns a 404.
                get(fixture.bogus_thread_path(9000 + thread.tid))
        clock.sleep(burst_gap_s + 60.0 * burst)
    return made
