"""Injectable time sources.

Everything in the crawler that reads the time or sleeps goes through a
``Clock`` so tests (and the bundled fixture server) can run on virtual
time.  ``VirtualClock.sleep`` advances instantly, which keeps full-crawl
tests honest about pacing without paying for it in wall-clock seconds.
"""

from __future__ import annotations

import threading
import time as _time
from datetime import datetime, timezone


class Clock:
    """Real time.  ``now()`` is timezone-aware UTC."""

    def now(self) -> datetime:
        return datetime.now(timezone.utc)

    def time(self) -> float:
        return _time.time()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            _time.sleep(seconds)


class VirtualClock(Clock):
    """Deterministic clock that advances only via ``sleep``.

    Thread-safe: the fixture server logs timestamps from the same
    instance the crawler is sleeping on.
    """

    def __init__(self, start: datetime | None = None) -> None:
        self._lock = threading.Lock()
        base = start if start is not None else datetime(2019, 3, 4, 12, 0, tzinfo=timezone.utc)
        if base.tzinfo is None:
            base = base.replace(tzinfo=timezone.utc)
        self._epoch = base.timestamp()

    def now(self) -> datetime:
        return datetime.fromtimestamp(self.time(), tz=timezone.utc)

    def time(self) -> float:
        with self._lock:
            return self._epoch

    def sleep(self, seconds: float) -> None:
        if seconds <= 0:
            return
        with self._lock:
            self._epoch += seconds
