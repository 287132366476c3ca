"""Scripted scenario replay on a simulated clock.

A scenario file is a YAML list of steps, each either a bare step name or a
one-key mapping::

    - start_clock: "2017-10-18T10:00"     # optional, must come first
    - enqueue_utterance: "Remind me to ..."
    - store_activity                       # run the store-activity flow once
    - advance_clock: {to: "2017-10-18T14:00"}   # or {minutes: 5}; one tick follows
    - expect_speech: "Remember"            # substring, or {text: ..., exact: true}
    - expect_event: {topic: remedes.results, key: completed, value: true, count: 1}
    - expect_store_count: 3
    - expect_activity: {date: "2017-10-19", time: "14:00", body: ..., status: PENDING}

Execution stops at the first failed expectation.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import yaml

from iotmesh.clock import SimClock
from iotmesh.stack import Stack

DEFAULT_START = datetime(2017, 10, 18, 10, 0)
EVENT_WAIT_S = 2.0

STEP_KINDS = (
    "start_clock",
    "enqueue_utterance",
    "store_activity",
    "advance_clock",
    "tick",
    "expect_speech",
    "expect_event",
    "expect_store_count",
    "expect_activity",
)


class ScenarioError(ValueError):
    pass


@dataclass
class Step:
    kind: str
    arg: Any = None


@dataclass
class ScenarioReport:
    lines: list[str] = field(default_factory=list)
    failed: bool = False

    @property
    def exit_code(self) -> int:
        return 1 if self.failed else 0


def _datetime(value: Any) -> datetime:
    if isinstance(value, datetime):
        return value
    try:
        return datetime.fromisoformat(str(value))
    except ValueError:
        raise ScenarioError(f"not an ISO 8601 datetime: {value!r}") from None


def parse_steps(raw: Any) -> list[Step]:
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise ScenarioError("a scenario is a YAML list of steps")
    steps = []
    for i, item in enumerate(raw):
        if isinstance(item, str):
            kind, arg = item, None
        elif isinstance(item, dict) and len(item) == 1:
            (kind, arg), = item.items()
        else:
            raise ScenarioError(f"step {i + 1}: expected a step name or a one-key mapping")
        if kind not in STEP_KINDS:
            raise ScenarioError(f"step {i + 1}: unknown step {kind!r}")
        if kind == "start_clock" and i != 0:
            raise ScenarioError("start_clock must be the first step")
        steps.append(Step(kind, arg))
    return steps


def load_scenario(path: str | Path) -> list[Step]:
    if str(path) == "example":
        text = resources.files("iotmesh").joinpath("data/worked_example.scenario").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    try:
        return parse_steps(yaml.safe_load(text))
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse scenario: {exc}") from exc


def _wait_for(predicate: Callable[[], bool], timeout: float) -> bool:
    deadline = time.monotonic() + timeout
    while True:
        if predicate():
            return True
        if time.monotonic() >= deadline:
            return False
        time.sleep(0.01)


class ScenarioRunner:
    def __init__(self, steps: list[Step], *, sockets: bool = False, echo: Callable[[str], None] | None = print):
        self.steps = steps
        self.sockets = sockets
        self.echo = echo
        self.events: list[tuple[str, dict[str, Any]]] = []
        self._events_lock = threading.Lock()
        self.stack: Stack | None = None

    def _say(self, report: ScenarioReport, line: str) -> None:
        report.lines.append(line)
        if self.echo is not None:
            self.echo(line)

    def _topics(self) -> set[str]:
        return {s.arg["topic"] for s in self.steps if s.kind == "expect_event" and isinstance(s.arg, dict)}

    def run(self) -> ScenarioReport:
        start = DEFAULT_START
        steps = self.steps
        first = 1
        if steps and steps[0].kind == "start_clock":
            start = _datetime(steps[0].arg)
            steps = steps[1:]
            first = 2
        clock = SimClock(start)
        report = ScenarioReport()
        with Stack(clock, sockets=self.sockets) as stack:
            self.stack = stack
            doctor = stack.peer()
            for topic in sorted(self._topics()):
                doctor.subscribe(topic, lambda payload, topic=topic: self._record_event(topic, payload))
            for n, step in enumerate(steps, first):
                ok, detail = self._execute(stack, step)
                if step.kind.startswith("expect_"):
                    self._say(report, f"{'PASS' if ok else 'FAIL'} {n} {step.kind} {detail}")
                if not ok:
                    report.failed = True
                    if not step.kind.startswith("expect_"):
                        self._say(report, f"FAIL {n} {step.kind} {detail}")
                    break
        return report

    def _record_event(self, topic: str, payload: dict[str, Any]) -> None:
        with self._events_lock:
            self.events.append((topic, payload))

    def _execute(self, stack: Stack, step: Step) -> tuple[bool, str]:
        kind, arg = step.kind, step.arg
        try:
            if kind == "enqueue_utterance":
                stack.robot.agent.enqueue_utterance(str(arg))
                return True, ""
            if kind == "store_activity":
                stored = stack.app.store_activity_flow()
                return True, f"stored={len(stored)}"
            if kind == "advance_clock":
                self._advance(stack.clock, arg)
                fired = stack.app.tick()
                return True, f"fired={len(fired)}"
            if kind == "tick":
                stack.app.tick()
                return True, ""
            if kind == "expect_speech":
                return self._expect_speech(stack, arg)
            if kind == "expect_event":
                return self._expect_event(arg)
            if kind == "expect_store_count":
                count = len(stack.store)
                return count == int(arg), f"expected={arg} actual={count}"
            if kind == "expect_activity":
                return self._expect_activity(stack, arg)
        except Exception as exc:  # noqa: BLE001 - reported as a failed step
            return False, f"error={type(exc).__name__}: {exc}"
        raise ScenarioError(f"unhandled step {kind}")

    @staticmethod
    def _advance(clock: SimClock, arg: Any) -> None:
        if not isinstance(arg, dict):
            raise ScenarioError("advance_clock takes {to: ISO} or {days|hours|minutes|seconds: n}")
        if "to" in arg:
            clock.advance_to(_datetime(arg["to"]))
            return
        units = {k: arg[k] for k in ("days", "hours", "minutes", "seconds") if k in arg}
        if not units or len(units) != len(arg):
            raise ScenarioError(f"bad advance_clock argument {arg!r}")
        clock.advance(timedelta(**units))

    @staticmethod
    def _expect_speech(stack: Stack, arg: Any) -> tuple[bool, str]:
        if isinstance(arg, dict):
            text, exact = str(arg["text"]), bool(arg.get("exact", False))
        else:
            text, exact = str(arg), False
        spoken = stack.robot.agent.spoken()
        ok = (text in spoken) if exact else any(text in line for line in spoken)
        return ok, repr(text)

    def _expect_event(self, arg: dict[str, Any]) -> tuple[bool, str]:
        topic, key, value = arg["topic"], arg.get("key"), arg.get("value")
        want = arg.get("count")

        def matching() -> int:
            with self._events_lock:
                return sum(1 for t, p in self.events if t == topic and (key is None or p.get(key) == value))

        if want is None:
            ok = _wait_for(lambda: matching() >= 1, EVENT_WAIT_S)
        else:
            _wait_for(lambda: matching() >= int(want), EVENT_WAIT_S)
            time.sleep(0.05)  # let any surplus delivery land before counting
            ok = matching() == int(want)
        return ok, f"topic={topic} {key}={value!r} matched={matching()}"

    @staticmethod
    def _expect_activity(stack: Stack, arg: dict[str, Any]) -> tuple[bool, str]:
        want_date = arg["date"] if isinstance(arg["date"], date) else date.fromisoformat(str(arg["date"]))
        for a in stack.store.all():
            if a.on_date != want_date:
                continue
            if "time" in arg and f"{a.hour:02d}:{a.minute:02d}" != str(arg["time"]):
                continue
            if "body" in arg and a.body != arg["body"]:
                continue
            if "status" in arg and a.status.value != arg["status"]:
                continue
            return True, f"activity={a.activity_id} {a.when.isoformat()} {a.body!r}"
        return False, f"no activity matching {arg}"


def run_scenario(path: str | Path, *, sockets: bool = False, echo: Callable[[str], None] | None = print) -> ScenarioReport:
    return ScenarioRunner(load_scenario(path), sockets=sockets, echo=echo).run()
