"""Embedded append-only activity store.

Every mutation appends one JSON line holding the full activity record and is
fsynced before returning; on open the file is replayed and the last record per
id wins.  A torn final line (crash mid-write) is ignored.  Once the log holds
more than twice as many lines as live records it is compacted by rewriting it
atomically.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import threading
from dataclasses import asdict, dataclass, replace
from datetime import date, datetime
from pathlib import Path
from typing import Any

log = logging.getLogger(__name__)


class Status(enum.Enum):
    PENDING = "PENDING"
    FIRED = "FIRED"


@dataclass(frozen=True)
class Activity:
    activity_id: int
    year: int
    month: int
    day: int
    hour: int
    minute: int
    body: str
    recurring: bool = False
    repeat_interval_days: int | None = None
    status: Status = Status.PENDING

    def __post_init__(self) -> None:
        date(self.year, self.month, self.day)
        if self.recurring and not (self.repeat_interval_days and self.repeat_interval_days > 0):
            raise ValueError("recurring activity needs a positive repeat interval")

    @property
    def when(self) -> datetime:
        return datetime(self.year, self.month, self.day, self.hour, self.minute)

    @property
    def on_date(self) -> date:
        return date(self.year, self.month, self.day)

    def to_record(self) -> dict[str, Any]:
        rec = asdict(self)
        rec["status"] = self.status.value
        return rec

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> Activity:
        return cls(**{**rec, "status": Status(rec["status"])})


class ActivityStore:
    def __init__(self, path: str | Path | None = None, compact_min_lines: int = 64):
        self.path = Path(path) if path is not None else None
        self.compact_min_lines = compact_min_lines
        self._activities: dict[int, Activity] = {}
        self._next_id = 1
        self._lines = 0
        self._lock = threading.RLock()
        if self.path is not None and self.path.exists():
            self._replay()

    def _replay(self) -> None:
        lines = self.path.read_bytes().split(b"\n")
        for lineno, raw in enumerate(lines, 1):
            if not raw.strip():
                continue
            try:
                activity = Activity.from_record(json.loads(raw))
            except (ValueError, TypeError, KeyError) as exc:
                if lineno == len(lines):
                    log.warning("store: ignoring torn trailing record in %s", self.path)
                    continue
                raise ValueError(f"{self.path}:{lineno}: corrupt record: {exc}") from exc
            self._activities[activity.activity_id] = activity
            self._next_id = max(self._next_id, activity.activity_id + 1)
            self._lines += 1
        if lines and lines[-1].strip():
            # drop the torn tail so later appends start on a fresh line
            self._rewrite()

    def _append(self, activity: Activity) -> None:
        self._activities[activity.activity_id] = activity
        if self.path is None:
            return
        line = json.dumps(activity.to_record(), sort_keys=True) + "\n"
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        self._lines += 1
        if self._lines >= self.compact_min_lines and self._lines > 2 * len(self._activities):
            self.compact()

    def _rewrite(self) -> None:
        tmp = self.path.with_name(self.path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for activity in sorted(self._activities.values(), key=lambda a: a.activity_id):
                fh.write(json.dumps(activity.to_record(), sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.path)
        self._lines = len(self._activities)

    def compact(self) -> None:
        with self._lock:
            if self.path is not None:
                self._rewrite()

    def add(
        self,
        year: int,
        month: int,
        day: int,
        hour: int,
        minute: int,
        body: str,
        recurring: bool = False,
        repeat_interval_days: int | None = None,
    ) -> Activity:
        with self._lock:
            activity = Activity(
                self._next_id, year, month, day, hour, minute, body, recurring, repeat_interval_days
            )
            self._next_id += 1
            self._append(activity)
            return activity

    def mark_fired(self, activity_id: int) -> Activity:
        with self._lock:
            current = self._activities[activity_id]
            if current.status is Status.FIRED:
                raise ValueError(f"activity {activity_id} already fired")
            activity = replace(current, status=Status.FIRED)
            self._append(activity)
            return activity

    def get(self, activity_id: int) -> Activity:
        with self._lock:
            return self._activities[activity_id]

    def all(self) -> list[Activity]:
        with self._lock:
            return sorted(self._activities.values(), key=lambda a: a.activity_id)

    def pending(self) -> list[Activity]:
        return [a for a in self.all() if a.status is Status.PENDING]

    def __len__(self) -> int:
        with self._lock:
            return len(self._activities)

    @property
    def log_lines(self) -> int:
        return self._lines
