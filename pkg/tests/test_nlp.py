from datetime import datetime, timedelta

import pytest
from hypothesis import assume, given, settings, strategies as st

from iotmesh.errors import BadPayload, InvalidTime, NoActivity
from iotmesh.nlp import (
    WEEKDAYS,
    ReferenceClock,
    TemporalExtraction,
    extract_body,
    parse_clause,
    parse_reminders,
    resolve_date_and_recurrence,
    resolve_time,
    split_clauses,
)

from conftest import WORKED_NOW, WORKED_TEXT

REF = ReferenceClock(WORKED_NOW)


def test_split_worked_example():
    assert split_clauses(WORKED_TEXT) == [
        "Remind me to take the medicine every day after lunch",
        "remind me to practice REMEDES on Sundays nights",
    ]


def test_split_nothing():
    assert split_clauses("hello there") == []


def test_split_also():
    assert len(split_clauses("Remind me to stretch. Also, remind me to hydrate.")) == 2


def test_split_and_remind_me():
    assert split_clauses("remind me to eat and remind me to sleep") == ["remind me to eat", "remind me to sleep"]


@pytest.mark.parametrize(
    "clause,body",
    [
        ("Remind me to take the medicine every day after lunch", "take the medicine"),
        ("remind me to practice REMEDES on Sundays nights", "practice REMEDES"),
        ("remind me to call mom tomorrow at 7:30 pm", "call mom"),
        ("remind me to visit the doctor on March 3rd", "visit the doctor"),
        ("remind me to water plants every day in the morning", "water plants"),
    ],
)
def test_extract_body(clause, body):
    assert extract_body(clause) == body


def test_extract_body_empty():
    with pytest.raises(NoActivity):
        extract_body("remind me to every day")


@pytest.mark.parametrize(
    "clause,hm",
    [
        ("remind me to take the medicine every day after lunch", (14, 0)),
        ("remind me to practice REMEDES on Sundays nights", (20, 0)),
        ("remind me to eat at 7:30 pm", (19, 30)),
        ("remind me to eat at 12 am", (0, 0)),
        ("remind me to eat at 12 pm", (12, 0)),
        ("remind me to eat at 18", (18, 0)),
        ("remind me to eat in the evening at 7 am", (7, 0)),
        ("remind me to eat at noon", (12, 0)),
        ("remind me to eat in the afternoon", (15, 0)),
        ("remind me to read", (9, 0)),
    ],
)
def test_resolve_time(clause, hm):
    assert resolve_time(clause) == hm


@pytest.mark.parametrize("clause", ["remind me to eat at 25:00", "remind me to eat at 10:75", "remind me to eat at 13 pm"])
def test_resolve_time_invalid(clause):
    with pytest.raises(InvalidTime):
        resolve_time(clause)


def test_dates_for_worked_clauses():
    assert resolve_date_and_recurrence(
        "Remind me to take the medicine every day after lunch", REF, (14, 0)
    ) == (2017, 10, 18, True, 1)
    assert resolve_date_and_recurrence(
        "remind me to practice REMEDES on Sundays nights", REF, (20, 0)
    ) == (2017, 10, 22, True, 7)


def test_every_day_already_past_starts_tomorrow():
    e = parse_clause("remind me to stretch every day at 8 am", REF)
    assert (e.year, e.month, e.day, e.hour) == (2017, 10, 19, 8)
    assert e.recurring and e.repeat_interval == 1


def test_every_weekday_today_if_still_ahead():
    wednesday = ReferenceClock(datetime(2017, 10, 18, 10, 0))
    e = parse_clause("remind me to swim every wednesday at 6 pm", wednesday)
    assert (e.day, e.recurring, e.repeat_interval) == (18, True, 7)
    e = parse_clause("remind me to swim every wednesday at 6 am", wednesday)
    assert e.day == 25


def test_tomorrow_and_month_day():
    assert parse_clause("remind me to shop tomorrow", REF).day == 19
    e = parse_clause("remind me to pay rent on March 3rd", REF)
    assert (e.year, e.month, e.day, e.recurring) == (2018, 3, 3, False)
    e = parse_clause("remind me to vote on november 7", REF)
    assert (e.year, e.month, e.day) == (2017, 11, 7)


def test_no_date_phrase():
    assert parse_clause("remind me to rest at 11", REF).day == 18
    assert parse_clause("remind me to rest at 9", REF).day == 19
    assert parse_clause("remind me to rest at 10", REF).day == 19  # strictly ahead only


def test_parse_worked_example():
    assert [e.to_payload() for e in parse_reminders(WORKED_TEXT, REF)] == [
        {"year": 2017, "month": 10, "day": 18, "hour": 14, "minute": 0, "body": "take the medicine",
         "recurring": True, "repeat_unit": "DAYS", "repeat_interval": 1},
        {"year": 2017, "month": 10, "day": 22, "hour": 20, "minute": 0, "body": "practice REMEDES",
         "recurring": True, "repeat_unit": "DAYS", "repeat_interval": 7},
    ]


def test_parse_empty():
    assert parse_reminders("", REF) == []


def test_water_plants():
    (e,) = parse_reminders("Remind me to water plants every day in the morning", REF)
    assert (e.year, e.month, e.day, e.hour, e.minute) == (2017, 10, 19, 9, 0)
    assert e.body == "water plants" and e.repeat_interval == 1


def test_bad_clauses_skipped():
    out = parse_reminders("Remind me to every day. Remind me to eat at 25:00. Remind me to sleep at night", REF)
    assert [e.body for e in out] == ["sleep"]


def test_extraction_invariants():
    with pytest.raises(ValueError):
        TemporalExtraction(2017, 2, 30, 9, 0, "x", False)
    with pytest.raises(ValueError):
        TemporalExtraction(2017, 2, 3, 9, 0, "x", True)
    with pytest.raises(ValueError):
        TemporalExtraction(2017, 2, 3, 9, 0, "", False)
    with pytest.raises(BadPayload):
        TemporalExtraction.from_payload({"year": 2017})


def test_payload_round_trip():
    for e in parse_reminders(WORKED_TEXT, REF):
        assert TemporalExtraction.from_payload(e.to_payload()) == e


# -- properties -------------------------------------------------------------

refs = st.datetimes(min_value=datetime(2000, 1, 1), max_value=datetime(2090, 12, 31)).map(
    lambda d: d.replace(second=0, microsecond=0)
)
bodies = st.lists(st.sampled_from(["take", "the", "pills", "walk", "dog", "call", "Anna", "REMEDES", "practice"]),
                  min_size=1, max_size=4).map(" ".join)
times = st.sampled_from(["", " after lunch", " at night", " in the morning", " at noon", " in the evening",
                         " at 7:30 pm", " at 6 am", " at 23:59", " at 0:00", " in the afternoon"])
dates = st.one_of(
    st.sampled_from(["", " every day", " daily", " tomorrow", " on March 3rd", " on december 31", " on feb 29"]),
    st.sampled_from(WEEKDAYS).map(lambda d: f" on {d.capitalize()}s"),
    st.sampled_from(WEEKDAYS).map(lambda d: f" every {d}"),
)


@st.composite
def clauses(draw):
    parts = [draw(dates), draw(times)]
    if draw(st.booleans()):
        parts.reverse()
    return "Remind me to " + draw(bodies) + "".join(parts), parts


@given(clauses(), refs)
@settings(max_examples=400, deadline=None)
def test_outputs_valid_and_never_in_past(clause_parts, now):
    clause, _ = clause_parts
    out = parse_reminders(clause, ReferenceClock(now))
    assert len(out) == 1
    e = out[0]
    assert e.when >= now
    assert e.body and e.recurring == (e.repeat_unit is not None) == (e.repeat_interval is not None)
    assert parse_reminders(clause, ReferenceClock(now)) == out


@given(st.sampled_from(WEEKDAYS), st.booleans(), times, refs, bodies)
@settings(max_examples=300, deadline=None)
def test_weekly_rule(day, plural, t, now, body):
    phrase = f" on {day}s" if plural else f" every {day}"
    (e,) = parse_reminders(f"remind me to {body}{phrase}{t}", ReferenceClock(now))
    assert e.when.weekday() == WEEKDAYS.index(day)
    assert 0 <= (e.when.date() - now.date()).days <= 7
    assert e.recurring and e.repeat_interval == 7


@given(st.text(max_size=80), refs)
@settings(max_examples=300, deadline=None)
def test_arbitrary_text_never_crashes(text, now):
    for e in parse_reminders(text, ReferenceClock(now)):
        assert e.when >= now


@given(st.lists(clauses(), min_size=1, max_size=4), refs)
@settings(max_examples=100, deadline=None)
def test_clause_order_preserved(many, now):
    text = ". ".join(c for c, _ in many)
    out = parse_reminders(text, ReferenceClock(now))
    assert [e.body for e in out] == [parse_clause(c, ReferenceClock(now)).body for c, _ in many]
