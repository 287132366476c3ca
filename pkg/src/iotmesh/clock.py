"""Injectable clock shared by the calendar app and the simulated nodes."""

from __future__ import annotations

import enum
import threading
import time
from datetime import datetime, timedelta

EPOCH = datetime(1970, 1, 1)


class ClockMode(enum.Enum):
    WALL = "wall"
    SIMULATED = "simulated"


class SimClock:
    """Naive local-time clock.

    In ``SIMULATED`` mode time moves only through :meth:`advance`,
    :meth:`advance_to` or :meth:`sleep`, so scenarios replay identically no
    matter how fast the host runs.  ``WALL`` mode reads the system clock.
    """

    def __init__(self, start: datetime | None = None, mode: ClockMode = ClockMode.SIMULATED):
        if mode is ClockMode.SIMULATED and start is None:
            raise ValueError("a simulated clock needs a start time")
        self.mode = mode
        self._current = start
        self._lock = threading.Lock()

    @classmethod
    def wall(cls) -> SimClock:
        return cls(mode=ClockMode.WALL)

    def now(self) -> datetime:
        if self.mode is ClockMode.WALL:
            return datetime.now().replace(microsecond=0)
        with self._lock:
            return self._current

    @property
    def current(self) -> datetime:
        return self.now()

    def now_ms(self) -> int:
        """Milliseconds since 1970-01-01 in the clock's own (naive) time base."""
        if self.mode is ClockMode.WALL:
            delta = datetime.now() - EPOCH
        else:
            delta = self.now() - EPOCH
        return delta // timedelta(milliseconds=1)

    def advance(self, delta: timedelta) -> datetime:
        if delta < timedelta(0):
            raise ValueError("simulated time cannot move backwards")
        if self.mode is ClockMode.WALL:
            raise RuntimeError("cannot advance a wall clock")
        with self._lock:
            self._current = self._current + delta
            return self._current

    def advance_to(self, target: datetime) -> datetime:
        if self.mode is ClockMode.WALL:
            raise RuntimeError("cannot advance a wall clock")
        with self._lock:
            if target < self._current:
                raise ValueError(f"cannot move clock backwards from {self._current} to {target}")
            self._current = target
            return target

    def sleep(self, seconds: float) -> None:
        if self.mode is ClockMode.WALL:
            time.sleep(seconds)
        else:
            self.advance(timedelta(seconds=seconds))
