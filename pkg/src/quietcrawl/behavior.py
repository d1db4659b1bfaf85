"""Human pacing model: delays, session windows, pauses.

The crawler never decides timing itself; it asks this model.  Delays
between navigations mimic a person skimming an index page or reading a
thread at a per-post reading speed, sessions land inside a weekly
routine template with per-day jitter, some planned sessions are skipped
altogether, and sessions contain coffee-length pauses plus any
configured longer breaks (dinner being the classic).

All randomness flows through one seedable ``random.Random`` so a run is
reproducible end to end.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from datetime import date, datetime, time, timedelta, timezone
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ConfigError

_DAY_NAMES = {
    "mon": 0, "tue": 1, "wed": 2, "thu": 3, "fri": 4, "sat": 5, "sun": 6,
}


def _parse_day(value) -> int:
    if isinstance(value, int):
        if 0 <= value <= 6:
            return value
        raise ConfigError(f"weekday out of range: {value}")
    key = str(value).strip().lower()[:3]
    if key in _DAY_NAMES:
        return _DAY_NAMES[key]
    raise ConfigError(f"unknown weekday {value!r}")


def _parse_local_time(value: str) -> time:
    try:
        hour, _, minute = value.partition(":")
        return time(int(hour), int(minute))
    except (ValueError, AttributeError):
        raise ConfigError(f"bad local time {value!r}, expected HH:MM") from None


def _tzinfo(name: str):
    if name.upper() in ("UTC", "Z"):
        return timezone.utc
    if name and name[0] in "+-":
        sign = 1 if name[0] == "+" else -1
        body = name[1:]
        hours, _, minutes = body.partition(":")
        try:
            delta = timedelta(hours=int(hours), minutes=int(minutes or 0))
        except ValueError:
            raise ConfigError(f"bad timezone offset {name!r}") from None
        return timezone(sign * delta)
    try:
        from zoneinfo import ZoneInfo

        return ZoneInfo(name)
    except Exception:
        raise ConfigError(f"unknown timezone {name!r}") from None


@dataclass(frozen=True, slots=True)
class TemplateSlot:
    """One recurring availability window, in profile-local time."""

    day: int  # 0 = Monday ... 6 = Sunday
    start_local: str
    end_local: str

    def __post_init__(self) -> None:
        start = _parse_local_time(self.start_local)
        end = _parse_local_time(self.end_local)
        if end <= start:
            raise ConfigError(
                f"slot end {self.end_local} not after start {self.start_local}"
            )


@dataclass(frozen=True, slots=True)
class LongPause:
    """A fixed daily break (e.g. dinner) applied when a session spans it."""

    start_local: str
    duration_minutes: float


@dataclass(frozen=True, slots=True)
class Pause:
    offset_s: float  # from session start
    duration_s: float


@dataclass(frozen=True, slots=True)
class SessionPlan:
    start: datetime  # UTC
    end: datetime  # UTC
    skipped: bool
    pauses: Tuple[Pause, ...] = ()
    # Set on a plan inserted by the 24h-liveness rule to cover a skipped
    # slot; the skip roll stays recorded on the plan it hit.
    forced: bool = False

    @property
    def duration_s(self) -> float:
        return (self.end - self.start).total_seconds()


# Evenings on workdays, three blocks on weekend days.
DEFAULT_TEMPLATE: Tuple[TemplateSlot, ...] = tuple(
    [TemplateSlot(day, "17:30", "22:00") for day in range(0, 5)]
    + [
        slot
        for day in (5, 6)
        for slot in (
            TemplateSlot(day, "10:00", "12:30"),
            TemplateSlot(day, "14:30", "18:00"),
            TemplateSlot(day, "20:00", "23:30"),
        )
    ]
)

DEFAULT_LONG_PAUSES: Tuple[LongPause, ...] = (LongPause("19:00", 120.0),)


@dataclass(frozen=True, slots=True)
class BehaviorProfile:
    timezone: str = "UTC"
    words_per_minute: Tuple[float, float] = (120.0, 180.0)
    navigation_delay_s: Tuple[float, float] = (3.0, 7.0)
    skip_probability: float = 0.2
    jitter_fraction: float = 0.15
    template: Tuple[TemplateSlot, ...] = DEFAULT_TEMPLATE
    short_pause_count: Tuple[int, int] = (1, 3)
    short_pause_minutes: Tuple[float, float] = (5.0, 30.0)
    long_pauses: Tuple[LongPause, ...] = DEFAULT_LONG_PAUSES

    def __post_init__(self) -> None:
        if not 0 <= self.skip_probability < 1:
            raise ConfigError("skip_probability must be in [0, 1)")
        if self.words_per_minute[0] <= 0 or self.words_per_minute[1] < self.words_per_minute[0]:
            raise ConfigError("words_per_minute must be a positive (low, high) pair")
        if self.navigation_delay_s[0] < 0 or self.navigation_delay_s[1] < self.navigation_delay_s[0]:
            raise ConfigError("navigation_delay_s must be an ordered pair")
        _tzinfo(self.timezone)  # validate eagerly


def profile_from_dict(data: Dict) -> BehaviorProfile:
    """Build a profile from the ``behavior`` section of a config file."""
    kwargs: Dict = {}
    if "timezone" in data:
        kwargs["timezone"] = data["timezone"]
    for key in ("words_per_minute", "navigation_delay_s", "short_pause_minutes"):
        if key in data:
            pair = data[key]
            kwargs[key] = (float(pair[0]), float(pair[1]))
    if "short_pause_count" in data:
        pair = data["short_pause_count"]
        kwargs["short_pause_count"] = (int(pair[0]), int(pair[1]))
    for key in ("skip_probability", "jitter_fraction"):
        if key in data:
            kwargs[key] = float(data[key])
    if "template" in data:
        slots = []
        for item in data["template"]:
            try:
                slots.append(TemplateSlot(
                    day=_parse_day(item["day"]),
                    start_local=item["start_local"],
                    end_local=item["end_local"],
                ))
            except KeyError as exc:
                raise ConfigError(f"template slot missing {exc}") from None
        kwargs["template"] = tuple(slots)
    if "long_pauses" in data:
        pauses = []
        for item in data["long_pauses"]:
            try:
                pauses.append(LongPause(
                    start_local=item["start_local"],
                    duration_minutes=float(item["duration_minutes"]),
                ))
            except KeyError as exc:
                raise ConfigError(f"long pause missing {exc}") from None
        kwargs["long_pauses"] = tuple(pauses)
    return BehaviorProfile(**kwargs)


class BehaviorModel:
    """Seedable source of all pacing decisions."""

    def __init__(
        self,
        profile: Optional[BehaviorProfile] = None,
        rng: Optional[random.Random] = None,
        seed=None,
    ) -> None:
        self.profile = profile if profile is not None else BehaviorProfile()
        if rng is not None:
            self.rng = rng
        else:
            self.rng = random.Random(seed)
        self._tz = _tzinfo(self.profile.timezone)

    # -- delays -----------------------------------------------------------------

    def navigational_delay(self) -> float:
        low, high = self.profile.navigation_delay_s
        return self.rng.uniform(low, high)

    def reading_delay(self, post_word_counts: Sequence[int]) -> float:
        """Seconds a person would spend on a page with these posts.

        Every post gets its own reading speed draw; a page with no new
        posts costs only a navigational glance.
        """
        if not post_word_counts:
            return self.navigational_delay()
        low, high = self.profile.words_per_minute
        total = 0.0
        for words in post_word_counts:
            wpm = self.rng.uniform(low, high)
            total += 60.0 * words / wpm
        return total

    # -- session planning ---------------------------------------------------------

    def _occurrences_after(self, now_utc: datetime, horizon_days: int = 14):
        """Template slot occurrences with start strictly after ``now_utc``."""
        local_now = now_utc.astimezone(self._tz)
        found = []
        for offset in range(horizon_days + 1):
            day = local_now.date() + timedelta(days=offset)
            for slot in self.profile.template:
                if slot.day != day.weekday():
                    continue
                start = datetime.combine(day, _parse_local_time(slot.start_local), tzinfo=self._tz)
                end = datetime.combine(day, _parse_local_time(slot.end_local), tzinfo=self._tz)
                if start > local_now:
                    found.append((start.astimezone(timezone.utc), end.astimezone(timezone.utc)))
        found.sort()
        return found

    def next_session(self, now: datetime) -> SessionPlan:
        """Plan the next session after ``now`` (UTC).

        The slot is jittered at both ends independently, may be marked
        skipped, and an active session gets its pauses drawn up front.
        """
        if not self.profile.template:
            raise ConfigError("behavior template has no slots")
        if now.tzinfo is None:
            now = now.replace(tzinfo=timezone.utc)
        occurrences = self._occurrences_after(now)
        if not occurrences:
            raise ConfigError("no template slot occurs within the planning horizon")
        slot_start, slot_end = occurrences[0]
        duration = (slot_end - slot_start).total_seconds()
        jitter = self.profile.jitter_fraction
        start = slot_start + timedelta(seconds=self.rng.uniform(-jitter, jitter) * duration)
        end = slot_end + timedelta(seconds=self.rng.uniform(-jitter, jitter) * duration)
        if end <= start:
            end = start + timedelta(seconds=duration * 0.25)
        if start <= now:
            start = now + timedelta(seconds=1)
            if end <= start:
                end = start + timedelta(seconds=duration * 0.25)
        skipped = self.rng.random() < self.profile.skip_probability
        pauses = () if skipped else self._draw_pauses(start, end)
        return SessionPlan(start=start, end=end, skipped=skipped, pauses=pauses)

    def plan_schedule(self, start: datetime, days: int) -> List[SessionPlan]:
        """Plans covering ``days`` days, never going dark a whole day.

        Skip rolls always stand as drawn.  When honoring one would leave
        more than 24 hours with no active session while slots were
        available, an additional forced plan for the same window follows
        the skipped one, so the skip stays on record and the day is
        still covered.
        """
        if days < 1:
            raise ConfigError("schedule must cover at least one day")
        if start.tzinfo is None:
            start = start.replace(tzinfo=timezone.utc)
        horizon = start + timedelta(days=days)
        plans: List[SessionPlan] = []
        cursor = start
        last_active_end = start
        while True:
            plan = self.next_session(cursor)
            if plan.start >= horizon:
                break
            plans.append(plan)
            if plan.skipped:
                # The next slot's start can itself jitter late, so the
                # liveness check must hold for its worst case too.
                upcoming = self._occurrences_after(plan.end)
                if upcoming:
                    next_start, next_end = upcoming[0]
                    margin = timedelta(
                        seconds=self.profile.jitter_fraction
                        * (next_end - next_start).total_seconds()
                    )
                    breaches = (
                        next_start + margin > last_active_end + timedelta(hours=24)
                    )
                else:
                    breaches = True
                if breaches:
                    fill = replace(
                        plan, skipped=False, forced=True,
                        pauses=self._draw_pauses(plan.start, plan.end),
                    )
                    plans.append(fill)
                    last_active_end = fill.end
            else:
                last_active_end = plan.end
            cursor = plan.end
        return plans

    def _draw_pauses(self, start: datetime, end: datetime) -> Tuple[Pause, ...]:
        duration = (end - start).total_seconds()
        pauses: List[Pause] = []

        # Configured daily breaks that land inside the session, clipped
        # to its end.
        local_start = start.astimezone(self._tz)
        for item in self.profile.long_pauses:
            for day_offset in (0, 1):
                day = local_start.date() + timedelta(days=day_offset)
                at = datetime.combine(day, _parse_local_time(item.start_local), tzinfo=self._tz)
                offset = (at - start).total_seconds()
                if 0 <= offset < duration:
                    length = min(item.duration_minutes * 60.0, duration - offset)
                    pauses.append(Pause(offset_s=offset, duration_s=length))

        low_n, high_n = self.profile.short_pause_count
        count = self.rng.randint(low_n, high_n)
        low_m, high_m = self.profile.short_pause_minutes
        for _ in range(count):
            length = self.rng.uniform(low_m * 60.0, high_m * 60.0)
            if length >= duration:
                continue
            placed = False
            for _attempt in range(50):
                offset = self.rng.uniform(0.0, duration - length)
                candidate = Pause(offset_s=offset, duration_s=length)
                if not any(_overlaps(candidate, other) for other in pauses):
                    pauses.append(candidate)
                    placed = True
                    break
            if not placed:
                continue  # session too crowded, drop this pause
        pauses.sort(key=lambda p: p.offset_s)
        return tuple(pauses)


def _overlaps(a: Pause, b: Pause) -> bool:
    return a.offset_s < b.offset_s + b.duration_s and b.offset_s < a.offset_s + a.duration_s
