"""The two calendar applications: storing activities and firing reminders."""

from __future__ import annotations

import logging
import threading
from datetime import timedelta
from typing import Any

from iotmesh import remedes, robot, services
from iotmesh.client import PeerConnection
from iotmesh.clock import ClockMode, SimClock
from iotmesh.errors import IotMeshError
from iotmesh.logs import log_event
from iotmesh.nlp import TemporalExtraction
from iotmesh.store import Activity, ActivityStore, Status

log = logging.getLogger(__name__)

REMEDES_KEYWORD = "remedes"
REMEDES_PROMPT = "It's time to practice REMEDES!"


def reminder_sentence(body: str) -> str:
    return f"Remember, you must {body}"


def summary_sentence(mean_ms: float) -> str:
    return f"Your mean reaction time was {round(mean_ms)} milliseconds"


def due_activities(store: ActivityStore, clock: SimClock) -> list[Activity]:
    now = clock.now()
    due = [a for a in store.pending() if a.when <= now]
    return sorted(due, key=lambda a: (a.when, a.activity_id))


def schedule_next(activity: Activity, store: ActivityStore) -> Activity:
    nxt = activity.on_date + timedelta(days=activity.repeat_interval_days)
    return store.add(
        nxt.year, nxt.month, nxt.day, activity.hour, activity.minute,
        activity.body, activity.recurring, activity.repeat_interval_days,
    )


class ExerciseTimedOut(IotMeshError):
    pass


class CalendarApp:
    def __init__(
        self,
        conn: PeerConnection,
        store: ActivityStore,
        clock: SimClock,
        *,
        poll_interval_s: float = 1.0,
        exercise_deadline_s: float = 600.0,
    ):
        self.conn = conn
        self.store = store
        self.clock = clock
        self.poll_interval_s = poll_interval_s
        self.exercise_deadline_s = exercise_deadline_s
        self._tick_lock = threading.Lock()

    # -- application 1: store activities ------------------------------------

    def store_activity_flow(self) -> list[Activity]:
        audio = self.conn.call(robot.RECORD)
        text = self.conn.call(services.SPEECH_RECOGNITION, audio)["text"]
        reply = self.conn.call(services.REMINDER, {"text": text, "now": self.clock.now().isoformat()})
        stored = []
        for raw in reply.get("extractions", []):
            e = TemporalExtraction.from_payload(raw)
            stored.append(
                self.store.add(e.year, e.month, e.day, e.hour, e.minute, e.body, e.recurring, e.repeat_interval)
            )
        log_event(log, logging.INFO, "activities.stored", count=len(stored))
        return stored

    # -- application 2: reminder loop ---------------------------------------

    def due_activities(self) -> list[Activity]:
        return due_activities(self.store, self.clock)

    def schedule_next(self, activity: Activity) -> Activity:
        return schedule_next(activity, self.store)

    def _run_exercise(self) -> dict[str, Any]:
        exercise_id = self.conn.call(remedes.START)["exercise_id"]
        deadline = self.clock.now() + timedelta(seconds=self.exercise_deadline_s)
        while True:
            result = self.conn.call(remedes.RESULTS, {"exercise_id": exercise_id})
            if result.get("completed"):
                return result
            if self.clock.now() >= deadline:
                raise ExerciseTimedOut(f"exercise {exercise_id} did not complete")
            self.clock.sleep(self.poll_interval_s)

    def fire(self, activity: Activity) -> bool:
        """Deliver one due reminder.  Returns False (activity stays PENDING) on failure."""
        if self.store.get(activity.activity_id).status is not Status.PENDING:
            return False
        try:
            if REMEDES_KEYWORD in activity.body.lower():
                self.conn.call(robot.SPEAK, {"text": REMEDES_PROMPT})
                result = self._run_exercise()
                if result.get("mean_ms") is not None:
                    self.conn.call(robot.SPEAK, {"text": summary_sentence(result["mean_ms"])})
                self.conn.publish(remedes.RESULTS_TOPIC, result)
            else:
                self.conn.call(robot.SPEAK, {"text": reminder_sentence(activity.body)})
        except IotMeshError as exc:
            log_event(log, logging.ERROR, "activity.fire_failed", activity=activity.activity_id, error=exc)
            return False
        self.store.mark_fired(activity.activity_id)
        log_event(log, logging.INFO, "activity.fired", activity=activity.activity_id, body=activity.body)
        if activity.recurring:
            nxt = self.schedule_next(activity)
            log_event(log, logging.INFO, "activity.scheduled", activity=nxt.activity_id, when=nxt.when.isoformat())
        return True

    def tick(self) -> list[Activity]:
        """Fire everything due now, in scheduled order; returns what fired."""
        with self._tick_lock:
            return [a for a in self.due_activities() if self.fire(a)]

    def reminder_loop(self, tick_interval_s: float, stop: threading.Event) -> None:
        """Tick until ``stop`` is set.  Wall-clock mode only; simulated runs call :meth:`tick`."""
        if self.clock.mode is ClockMode.SIMULATED:
            raise RuntimeError("simulated clocks are driven one tick per advance")
        while not stop.is_set():
            self.tick()
            stop.wait(tick_interval_s)
