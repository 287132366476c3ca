"""Hardware-node stand-in hosting the speech-recognition and reminder services."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import Any

from iotmesh.client import PeerConnection
from iotmesh.clock import SimClock
from iotmesh.errors import BadPayload
from iotmesh.nlp import ReferenceClock, parse_reminders

SPEECH_RECOGNITION = "rpi.speech_recognition"
REMINDER = "rpi.reminder"

DEFAULT_AUDIO_SOURCE = "nao.mic.sim"


@dataclass(frozen=True)
class AudioPayload:
    """A simulated sound file that carries its own transcript."""

    transcript: str
    duration_s: float = 0.0
    source: str = DEFAULT_AUDIO_SOURCE

    def to_payload(self) -> dict[str, Any]:
        return {"transcript": self.transcript, "duration_s": self.duration_s, "source": self.source}

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> AudioPayload:
        transcript = payload.get("transcript")
        if not isinstance(transcript, str):
            raise BadPayload("audio payload needs a string 'transcript'")
        duration = payload.get("duration_s", 0.0)
        if isinstance(duration, bool) or not isinstance(duration, (int, float)) or not math.isfinite(duration) or duration < 0:
            raise BadPayload("'duration_s' must be a finite number >= 0")
        source = payload.get("source", DEFAULT_AUDIO_SOURCE)
        if not isinstance(source, str):
            raise BadPayload("'source' must be a string")
        return cls(transcript, float(duration), source)


def sr_transcribe(payload: dict[str, Any]) -> dict[str, Any]:
    # perfect recognition: the transcript is the answer
    audio = AudioPayload.from_payload(payload)
    return {"text": audio.transcript}


def reminder_service(payload: dict[str, Any], clock: SimClock | None = None) -> dict[str, Any]:
    text = payload.get("text")
    if not isinstance(text, str):
        raise BadPayload("reminder request needs a string 'text'")
    now_raw = payload.get("now")
    if now_raw is None:
        now = clock.now() if clock is not None else datetime.now().replace(second=0, microsecond=0)
    else:
        try:
            now = datetime.fromisoformat(now_raw)
        except (TypeError, ValueError):
            raise BadPayload(f"'now' is not an ISO 8601 datetime: {now_raw!r}") from None
        if now.tzinfo is not None:
            raise BadPayload("'now' must be a local (naive) datetime")
    return {"extractions": [e.to_payload() for e in parse_reminders(text, ReferenceClock(now))]}


class ServicesNode:
    def __init__(self, conn: PeerConnection, clock: SimClock | None = None):
        self.conn = conn
        self.clock = clock
        self.registrations: list[int] = []

    def start(self) -> None:
        self.registrations.append(self.conn.register(SPEECH_RECOGNITION, sr_transcribe))
        self.registrations.append(self.conn.register(REMINDER, lambda p: reminder_service(p, self.clock)))
