"""Pacing model: delay distributions, session planning, pauses."""

import random
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quietcrawl.behavior import (
    DEFAULT_TEMPLATE,
    BehaviorModel,
    BehaviorProfile,
    LongPause,
    TemplateSlot,
    profile_from_dict,
)
from quietcrawl.errors import ConfigError

MONDAY_NOON = datetime(2019, 3, 4, 12, 0, tzinfo=timezone.utc)


def model(seed=11, **profile_kwargs) -> BehaviorModel:
    return BehaviorModel(profile=BehaviorProfile(**profile_kwargs), seed=seed)


# -- reading and navigation delays ------------------------------------------------


def test_reading_delay_300_words_stays_in_derived_bounds():
    m = model()
    draws = [m.reading_delay([300]) for _ in range(400)]
    assert all(100.0 <= d <= 150.0 for d in draws)  # [DERIVED] 60*300/180 .. 60*300/120
    mean = sum(draws) / len(draws)
    # [DERIVED] E = 300*ln(1.5) = 121.6395, 400-sample 4-sigma band +/-2.86
    assert abs(mean - 121.6395) < 3.0


def test_reading_delay_sums_per_post_draws():
    m = model(seed=5)
    draws = [m.reading_delay([100, 200, 300]) for _ in range(400)]
    assert all(200.0 <= d <= 300.0 for d in draws)  # [DERIVED] bounds
    mean = sum(draws) / len(draws)
    assert abs(mean - 243.2791) < 4.0  # [DERIVED] sum of per-post means


def test_reading_delay_empty_page_is_a_navigational_glance():
    m = model(seed=7)
    draws = [m.reading_delay([]) for _ in range(200)]
    assert all(3.0 <= d <= 7.0 for d in draws)


def test_navigational_delay_bounds_and_mean():
    m = model(seed=3)
    draws = [m.navigational_delay() for _ in range(400)]
    assert all(3.0 <= d <= 7.0 for d in draws)
    assert abs(sum(draws) / len(draws) - 5.0) < 0.3


def test_same_seed_reproduces_everything():
    a = BehaviorModel(seed=42)
    b = BehaviorModel(seed=42)
    assert [a.navigational_delay() for _ in range(5)] == [
        b.navigational_delay() for _ in range(5)
    ]
    assert a.reading_delay([120, 40]) == b.reading_delay([120, 40])
    assert a.next_session(MONDAY_NOON) == b.next_session(MONDAY_NOON)


@given(st.lists(st.integers(min_value=1, max_value=5000), min_size=1, max_size=40),
       st.integers(min_value=0, max_value=2**32))
@settings(max_examples=60, deadline=None)
def test_reading_delay_bounded_by_slowest_and_fastest_reader(words, seed):
    m = BehaviorModel(seed=seed)
    delay = m.reading_delay(words)
    low = sum(60.0 * w / 180.0 for w in words)
    high = sum(60.0 * w / 120.0 for w in words)
    assert low <= delay <= high


# -- session planning --------------------------------------------------------------


def test_next_session_lands_on_next_template_slot_with_jitter():
    m = model(seed=1)
    plan = m.next_session(MONDAY_NOON)
    # Monday slot is 17:30-22:00 UTC; jitter is at most 15% of 4.5h.
    slack = timedelta(seconds=0.15 * 4.5 * 3600)
    assert abs(plan.start - MONDAY_NOON.replace(hour=17, minute=30)) <= slack
    assert abs(plan.end - MONDAY_NOON.replace(hour=22, minute=0)) <= slack
    assert plan.start < plan.end
    assert plan.start.tzinfo == timezone.utc


def test_next_session_shifts_template_to_utc():
    m = model(seed=1, timezone="+02:00", jitter_fraction=0.0, skip_probability=0.0)
    plan = m.next_session(MONDAY_NOON)
    assert plan.start == MONDAY_NOON.replace(hour=15, minute=30)
    assert plan.end == MONDAY_NOON.replace(hour=20, minute=0)


def test_next_session_skips_slots_already_started():
    m = model(seed=1, jitter_fraction=0.0, skip_probability=0.0)
    during_monday_slot = MONDAY_NOON.replace(hour=18)
    plan = m.next_session(during_monday_slot)
    # Tuesday evening, not the Monday slot the clock is inside of.
    assert plan.start == datetime(2019, 3, 5, 17, 30, tzinfo=timezone.utc)


def test_empty_template_is_a_config_error():
    m = model(template=())
    with pytest.raises(ConfigError):
        m.next_session(MONDAY_NOON)


def test_skip_fraction_matches_profile():
    m = model(seed=99)
    skipped = sum(1 for _ in range(1000) if m.next_session(MONDAY_NOON).skipped)
    assert abs(skipped / 1000 - 0.2) < 0.05


def test_skipped_sessions_have_no_pauses():
    m = model(seed=0, skip_probability=0.999)
    plan = m.next_session(MONDAY_NOON)
    assert plan.skipped
    assert plan.pauses == ()


def test_pauses_fit_inside_session_without_overlap():
    m = model(seed=21)
    for _ in range(50):
        plan = m.next_session(MONDAY_NOON)
        if plan.skipped:
            continue
        duration = plan.duration_s
        previous_end = 0.0
        for pause in plan.pauses:
            assert pause.offset_s >= 0.0
            assert pause.offset_s >= previous_end  # sorted and disjoint
            assert pause.offset_s + pause.duration_s <= duration + 1e-6
            previous_end = pause.offset_s + pause.duration_s


def test_configured_dinner_break_lands_at_its_local_time():
    m = model(
        seed=4,
        jitter_fraction=0.0,
        skip_probability=0.0,
        short_pause_count=(0, 0),
        long_pauses=(LongPause("19:00", 120.0),),
    )
    plan = m.next_session(MONDAY_NOON)  # 17:30-22:00 session
    assert len(plan.pauses) == 1
    dinner = plan.pauses[0]
    assert dinner.offset_s == pytest.approx(1.5 * 3600)
    assert dinner.duration_s == pytest.approx(2 * 3600)


def test_weekends_have_three_slots():
    m = model(seed=2, jitter_fraction=0.0, skip_probability=0.0)
    saturday = datetime(2019, 3, 9, 0, 30, tzinfo=timezone.utc)
    starts = []
    cursor = saturday
    for _ in range(3):
        plan = m.next_session(cursor)
        starts.append(plan.start)
        cursor = plan.end
    assert [s.strftime("%H:%M") for s in starts] == ["10:00", "14:30", "20:00"]
    assert all(s.date() == saturday.date() for s in starts)


def test_schedule_never_goes_dark_a_full_day():
    for seed in range(20):
        m = BehaviorModel(seed=seed)
        plans = m.plan_schedule(MONDAY_NOON, days=7)
        assert plans
        last_active_end = MONDAY_NOON
        for plan in plans:
            assert plan.start >= last_active_end - timedelta(seconds=1)
            if not plan.skipped:
                assert plan.start - last_active_end <= timedelta(hours=24)
                last_active_end = plan.end
        assert any(not p.skipped for p in plans)


def test_schedule_active_plans_do_not_overlap():
    m = BehaviorModel(seed=8)
    plans = m.plan_schedule(MONDAY_NOON, days=7)
    for earlier, later in zip(plans, plans[1:]):
        assert earlier.start <= later.start
    active = [p for p in plans if not p.skipped]
    for earlier, later in zip(active, active[1:]):
        assert earlier.end <= later.start


def test_schedule_covers_breaching_skips_with_forced_twins():
    # A forced plan reuses the window of the skipped plan it covers, so
    # the skip stays on record while the day is not lost.
    found = 0
    for seed in range(20):
        plans = BehaviorModel(seed=seed).plan_schedule(MONDAY_NOON, days=14)
        for earlier, later in zip(plans, plans[1:]):
            if later.forced:
                found += 1
                assert earlier.skipped
                assert later.start == earlier.start
                assert later.end == earlier.end
                assert not later.skipped
                assert later.pauses
        assert not any(p.forced and p.skipped for p in plans)
    assert found > 0


def test_schedule_pooled_skip_fraction():
    total = 0
    skipped = 0
    for seed in range(20):
        m = BehaviorModel(seed=seed)
        plans = m.plan_schedule(MONDAY_NOON, days=7)
        total += len(plans)
        skipped += sum(1 for p in plans if p.skipped)
    # Forced twins dilute the denominator a little, so the pooled rate
    # sits just under the configured 0.2.
    assert 0.15 < skipped / total <= 0.25


# -- profile parsing ----------------------------------------------------------------


def test_profile_from_dict_round_trip():
    profile = profile_from_dict({
        "timezone": "+01:00",
        "words_per_minute": [100, 160],
        "navigation_delay_s": [2, 5],
        "skip_probability": 0.1,
        "jitter_fraction": 0.05,
        "template": [
            {"day": "wed", "start_local": "09:00", "end_local": "11:00"},
            {"day": 6, "start_local": "20:00", "end_local": "22:00"},
        ],
        "long_pauses": [{"start_local": "10:00", "duration_minutes": 15}],
    })
    assert profile.template[0].day == 2
    assert profile.template[1].day == 6
    assert profile.words_per_minute == (100.0, 160.0)
    assert profile.long_pauses[0].duration_minutes == 15.0


def test_profile_rejects_bad_values():
    with pytest.raises(ConfigError):
        profile_from_dict({"timezone": "Mars/Olympus"})
    with pytest.raises(ConfigError):
        profile_from_dict({"template": [
            {"day": "mon", "start_local": "22:00", "end_local": "21:00"}
        ]})
    with pytest.raises(ConfigError):
        BehaviorProfile(skip_probability=1.5)
    with pytest.raises(ConfigError):
        profile_from_dict({"template": [{"day": "noday", "start_local": "09:00", "end_local": "10:00"}]})


def test_default_template_covers_every_day():
    days = {slot.day for slot in DEFAULT_TEMPLATE}
    assert days == set(range(7))
