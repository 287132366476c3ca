"""Simulated NAO robot, layered like the R4A stack.

``RobotResources`` plays the low-level agent (the speech log and microphone
queue), ``RobotAgent`` the robot-aware API over it, and ``RobotNode`` the
server layer that exposes that API on the router.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from datetime import datetime
from typing import Any

from iotmesh.client import PeerConnection
from iotmesh.clock import SimClock
from iotmesh.errors import BadPayload, NoUtterance
from iotmesh.services import AudioPayload

SPEAK = "nao.speak"
RECORD = "nao.record"
ENQUEUE = "nao.sim.enqueue"


@dataclass(frozen=True)
class SpokenLine:
    at: datetime
    text: str


class RobotResources:
    def __init__(self) -> None:
        self.lock = threading.Lock()
        self.speech_log: list[SpokenLine] = []
        self.utterance_queue: deque[AudioPayload] = deque()


class RobotAgent:
    def __init__(self, resources: RobotResources | None = None, clock: SimClock | None = None):
        self.resources = resources or RobotResources()
        self.clock = clock or SimClock.wall()

    @property
    def speech_log(self) -> list[SpokenLine]:
        with self.resources.lock:
            return list(self.resources.speech_log)

    def spoken(self) -> list[str]:
        return [line.text for line in self.speech_log]

    def speak(self, payload: dict[str, Any]) -> dict[str, Any]:
        text = payload.get("text")
        if not isinstance(text, str) or not text:
            raise BadPayload("speak needs a non-empty 'text'")
        with self.resources.lock:
            self.resources.speech_log.append(SpokenLine(self.clock.now(), text))
        return {"spoken": True}

    def record(self, payload: dict[str, Any] | None = None) -> dict[str, Any]:
        payload = payload or {}
        with self.resources.lock:
            if not self.resources.utterance_queue:
                raise NoUtterance("nothing to record: utterance queue is empty")
            audio = self.resources.utterance_queue.popleft()
        out = audio.to_payload()
        if "duration_s" in payload:
            duration = payload["duration_s"]
            if isinstance(duration, bool) or not isinstance(duration, (int, float)) or duration < 0:
                raise BadPayload("'duration_s' must be a number >= 0")
            out["duration_s"] = duration
        return out

    def enqueue_utterance(self, text: str) -> int:
        with self.resources.lock:
            self.resources.utterance_queue.append(AudioPayload(text))
            return len(self.resources.utterance_queue)

    def queue_length(self) -> int:
        with self.resources.lock:
            return len(self.resources.utterance_queue)


class RobotNode:
    def __init__(self, conn: PeerConnection, agent: RobotAgent | None = None):
        self.conn = conn
        self.agent = agent or RobotAgent()

    def _enqueue(self, payload: dict[str, Any]) -> dict[str, Any]:
        text = payload.get("text")
        if not isinstance(text, str):
            raise BadPayload("enqueue needs a string 'text'")
        return {"queued": self.agent.enqueue_utterance(text)}

    def start(self) -> None:
        self.conn.register(SPEAK, self.agent.speak)
        self.conn.register(RECORD, self.agent.record)
        self.conn.register(ENQUEUE, self._enqueue)
