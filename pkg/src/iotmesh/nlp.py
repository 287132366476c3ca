"""Rule-based extraction of reminders from English phrases.

``parse_reminders("Remind me to take the medicine every day after lunch",
ReferenceClock(datetime(2017, 10, 18, 10, 0)))`` yields one
:class:`TemporalExtraction` for 2017-10-18 14:00, recurring daily.

The pipeline is: split the text into "remind me" clauses, strip temporal
phrases to get the activity body, resolve a time of day from a small lexicon
(explicit ``at H[:MM] [am|pm]`` wins), then resolve the first occurrence and
recurrence against a reference "now".
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from typing import Any

from iotmesh.errors import BadPayload, InvalidTime, NoActivity

log = logging.getLogger(__name__)

WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")
MONTHS = {
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5, "june": 6,
    "july": 7, "august": 8, "september": 9, "october": 10, "november": 11, "december": 12,
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "jun": 6, "jul": 7, "aug": 8,
    "sep": 9, "sept": 9, "oct": 10, "nov": 11, "dec": 12,
}
DEFAULT_TIME = (9, 0)
REPEAT_DAYS = "DAYS"

_I = re.IGNORECASE
_WD = "|".join(WEEKDAYS)
_MO = "|".join(sorted(MONTHS, key=len, reverse=True))

_SPLIT_RE = re.compile(r"\.\s+|[!?]+|\bfurthermore\s*,|\balso\s*,|\band\s+(?=remind\s+me\b)", _I)
_REMIND_RE = re.compile(r"\bremind\s+me\b", _I)
_BODY_RE = re.compile(r"\bremind\s+me\s+to\b(.*)", _I | re.DOTALL)

_EVERY_DAY_RE = re.compile(r"\b(?:every\s+day|everyday|daily)\b", _I)
_WEEKLY_RE = re.compile(rf"\b(?:on\s+)?({_WD})s\b|\bevery\s+({_WD})s?\b", _I)
_ONE_WEEKDAY_RE = re.compile(rf"\b(?:on\s+)?({_WD})\b", _I)
_TOMORROW_RE = re.compile(r"\btomorrow\b", _I)
_MONTH_DAY_RE = re.compile(rf"\b(?:on\s+)?({_MO})\.?\s+(\d{{1,2}})(?:st|nd|rd|th)?\b", _I)
_AT_TIME_RE = re.compile(r"\bat\s+(\d{1,2})(?::(\d{2}))?(?!\d)(?:\s*([ap])\.?m\b\.?)?", _I)

# first match wins, in this order
_TIME_LEXICON: tuple[tuple[re.Pattern[str], tuple[int, int]], ...] = (
    (re.compile(r"\bafter\s+lunch\b", _I), (14, 0)),
    (re.compile(r"\bnights?\b", _I), (20, 0)),
    (re.compile(r"\bmornings?\b", _I), (9, 0)),
    (re.compile(r"\bnoon\b", _I), (12, 0)),
    (re.compile(r"\bafternoons?\b", _I), (15, 0)),
    (re.compile(r"\bevenings?\b", _I), (18, 0)),
)

_TEMPORAL_PHRASES = (
    _EVERY_DAY_RE,
    re.compile(rf"\b(?:on\s+|every\s+)?(?:{_WD})s?\b", _I),
    _TOMORROW_RE,
    _MONTH_DAY_RE,
    _AT_TIME_RE,
    re.compile(r"\bafter\s+lunch\b", _I),
    re.compile(r"\b(?:at\s+|every\s+)?nights?\b", _I),
    re.compile(r"\b(?:in\s+the\s+|this\s+|every\s+)?mornings?\b", _I),
    re.compile(r"\b(?:at\s+)?noon\b", _I),
    re.compile(r"\b(?:in\s+the\s+|this\s+|every\s+)?afternoons?\b", _I),
    re.compile(r"\b(?:in\s+the\s+|this\s+|every\s+)?evenings?\b", _I),
)

_EDGE_PUNCT = " \t\r\n.,;:"


@dataclass(frozen=True)
class ReferenceClock:
    now: datetime


@dataclass(frozen=True)
class TemporalExtraction:
    year: int
    month: int
    day: int
    hour: int
    minute: int
    body: str
    recurring: bool = False
    repeat_unit: str | None = None
    repeat_interval: int | None = None

    def __post_init__(self) -> None:
        date(self.year, self.month, self.day)
        if not (0 <= self.hour <= 23 and 0 <= self.minute <= 59):
            raise ValueError(f"invalid time {self.hour}:{self.minute}")
        if not self.body:
            raise ValueError("body must be non-empty")
        has_repeat = self.repeat_unit is not None and self.repeat_interval is not None
        if self.recurring != has_repeat:
            raise ValueError("recurring must be set iff repeat_unit and repeat_interval are present")
        if has_repeat and (self.repeat_unit != REPEAT_DAYS or self.repeat_interval < 1):
            raise ValueError(f"unsupported repeat {self.repeat_unit} {self.repeat_interval}")

    @property
    def when(self) -> datetime:
        return datetime(self.year, self.month, self.day, self.hour, self.minute)

    def to_payload(self) -> dict[str, Any]:
        return {
            "year": self.year,
            "month": self.month,
            "day": self.day,
            "hour": self.hour,
            "minute": self.minute,
            "body": self.body,
            "recurring": self.recurring,
            "repeat_unit": self.repeat_unit,
            "repeat_interval": self.repeat_interval,
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> TemporalExtraction:
        try:
            return cls(
                year=payload["year"],
                month=payload["month"],
                day=payload["day"],
                hour=payload["hour"],
                minute=payload["minute"],
                body=payload["body"],
                recurring=bool(payload.get("recurring", False)),
                repeat_unit=payload.get("repeat_unit"),
                repeat_interval=payload.get("repeat_interval"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BadPayload(f"bad extraction record: {exc}") from exc


def split_clauses(text: str) -> list[str]:
    clauses = []
    for part in _SPLIT_RE.split(text):
        part = part.strip(_EDGE_PUNCT)
        if part and _REMIND_RE.search(part):
            clauses.append(part)
    return clauses


def extract_body(clause: str) -> str:
    m = _BODY_RE.search(clause)
    if m is None:
        raise NoActivity(f"no 'remind me to' in {clause!r}")
    body = m.group(1)
    for pattern in _TEMPORAL_PHRASES:
        body = pattern.sub(" ", body)
    body = " ".join(body.split()).strip(_EDGE_PUNCT)
    if not body:
        raise NoActivity(f"no activity left in {clause!r}")
    return body


def resolve_time(clause: str) -> tuple[int, int]:
    m = _AT_TIME_RE.search(clause)
    if m is not None:
        hour, minute = int(m.group(1)), int(m.group(2) or 0)
        meridiem = (m.group(3) or "").lower()
        if minute > 59:
            raise InvalidTime(f"invalid minute in {m.group(0)!r}")
        if meridiem:
            if not 1 <= hour <= 12:
                raise InvalidTime(f"invalid hour in {m.group(0)!r}")
            hour = hour % 12 + (12 if meridiem == "p" else 0)
        elif hour > 23:
            raise InvalidTime(f"invalid hour in {m.group(0)!r}")
        return hour, minute
    for pattern, hm in _TIME_LEXICON:
        if pattern.search(clause):
            return hm
    return DEFAULT_TIME


def _now(ref: ReferenceClock | datetime) -> datetime:
    return ref.now if isinstance(ref, ReferenceClock) else ref


def _weekday_index(name: str) -> int:
    return WEEKDAYS.index(name.lower())


def _today_or_tomorrow(now: datetime, hm: tuple[int, int]) -> date:
    today = now.date()
    return today if datetime.combine(today, time(*hm)) > now else today + timedelta(days=1)


def _next_weekday(now: datetime, weekday: int, hm: tuple[int, int]) -> date:
    today = now.date()
    ahead = (weekday - today.weekday()) % 7
    if ahead == 0 and not datetime.combine(today, time(*hm)) > now:
        ahead = 7
    return today + timedelta(days=ahead)


def _next_month_day(now: datetime, month: int, day: int, hm: tuple[int, int]) -> date | None:
    # Feb 29 may need several years to come round again
    for year in range(now.year, now.year + 9):
        try:
            candidate = date(year, month, day)
        except ValueError:
            continue
        if datetime.combine(candidate, time(*hm)) > now:
            return candidate
    return None


def resolve_date_and_recurrence(
    clause: str, ref: ReferenceClock | datetime, resolved_time: tuple[int, int]
) -> tuple[int, int, int, bool, int | None]:
    """Return ``(year, month, day, recurring, repeat_interval_days)``."""
    now = _now(ref)
    hm = resolved_time
    if _EVERY_DAY_RE.search(clause):
        d = _today_or_tomorrow(now, hm)
        return d.year, d.month, d.day, True, 1
    m = _WEEKLY_RE.search(clause)
    if m is not None:
        d = _next_weekday(now, _weekday_index(m.group(1) or m.group(2)), hm)
        return d.year, d.month, d.day, True, 7
    m = _ONE_WEEKDAY_RE.search(clause)
    if m is not None:
        d = _next_weekday(now, _weekday_index(m.group(1)), hm)
        return d.year, d.month, d.day, False, None
    if _TOMORROW_RE.search(clause):
        d = now.date() + timedelta(days=1)
        return d.year, d.month, d.day, False, None
    for m in _MONTH_DAY_RE.finditer(clause):
        d = _next_month_day(now, MONTHS[m.group(1).lower()], int(m.group(2)), hm)
        if d is not None:
            return d.year, d.month, d.day, False, None
    d = _today_or_tomorrow(now, hm)
    return d.year, d.month, d.day, False, None


def parse_clause(clause: str, ref: ReferenceClock | datetime) -> TemporalExtraction:
    body = extract_body(clause)
    hour, minute = resolve_time(clause)
    year, month, day, recurring, interval = resolve_date_and_recurrence(clause, ref, (hour, minute))
    return TemporalExtraction(
        year, month, day, hour, minute, body,
        recurring=recurring,
        repeat_unit=REPEAT_DAYS if recurring else None,
        repeat_interval=interval,
    )


def parse_reminders(text: str, ref: ReferenceClock | datetime) -> list[TemporalExtraction]:
    """One extraction per "remind me" clause; unusable clauses are logged and skipped."""
    out = []
    for clause in split_clauses(text):
        try:
            out.append(parse_clause(clause, ref))
        except (NoActivity, InvalidTime) as exc:
            log.warning("skipping reminder clause %r: %s", clause, exc)
    return out
