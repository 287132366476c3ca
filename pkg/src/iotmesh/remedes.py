"""Simulated reflex-measurement system: pads, master controller, routine.

A routine is simulated as a discrete-event timeline.  Starting an exercise
computes every step up front from the seeded reaction model; progress is then
read off the injected clock, so ``get_results`` during the run sees exactly the
steps whose pad has already been deactivated.
"""

from __future__ import annotations

import enum
import math
import random
import threading
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Any, Protocol

import yaml

from iotmesh.client import PeerConnection
from iotmesh.clock import SimClock
from iotmesh.errors import BadPayload, ExerciseInProgress, NoExercisesYet, NoSuchExercise, NoSuchPad, PadBusy

START = "remedes.exercise.start"
RESULTS = "remedes.exercise.results"
RESULTS_TOPIC = "remedes.results"

REACTION_FLOOR_MS = 80


class PadState(enum.Enum):
    IDLE = "IDLE"
    ACTIVE = "ACTIVE"
    DONE = "DONE"


class Color(enum.Enum):
    RED = "RED"
    GREEN = "GREEN"
    BLUE = "BLUE"
    WHITE = "WHITE"


class Stimulus(enum.Enum):
    VISUAL = "VISUAL"
    AUDIO = "AUDIO"


@dataclass
class Pad:
    pad_id: int
    state: PadState = PadState.IDLE
    color: Color | None = None
    distance_threshold_cm: float = 20.0
    activated_at: int | None = None
    deactivated_at: int | None = None

    def activate(self, color: Color, distance_threshold_cm: float, at_ms: int) -> None:
        if self.state is not PadState.IDLE:
            raise PadBusy(f"pad {self.pad_id} is {self.state.value}")
        self.state = PadState.ACTIVE
        self.color = color
        self.distance_threshold_cm = distance_threshold_cm
        self.activated_at = at_ms
        self.deactivated_at = None

    def deactivate(self, at_ms: int) -> None:
        if self.state is not PadState.ACTIVE:
            raise PadBusy(f"pad {self.pad_id} is not active")
        if at_ms < self.activated_at:
            raise ValueError("deactivation before activation")
        self.state = PadState.DONE
        self.deactivated_at = at_ms

    def reset(self) -> None:
        if self.state is PadState.ACTIVE:
            raise PadBusy(f"pad {self.pad_id} is still active")
        self.state = PadState.IDLE


@dataclass(frozen=True)
class ReactionModel:
    base_ms: float = 400.0
    spread_ms: float = 100.0

    def __post_init__(self) -> None:
        if not self.base_ms > 0 or not self.spread_ms >= 0:
            raise ValueError("reaction model needs base_ms > 0 and spread_ms >= 0")


@dataclass(frozen=True)
class ExerciseConfig:
    pad_sequence: tuple[int, ...]
    stimulus: Stimulus = Stimulus.VISUAL
    colors: tuple[Color, ...] = ()
    distance_threshold_cm: tuple[float, ...] = ()
    trigger_delay_ms: tuple[int, ...] = ()
    seed: int = 0
    reaction_model: ReactionModel = ReactionModel()

    def __post_init__(self) -> None:
        n = len(self.pad_sequence)
        if n < 1:
            raise ValueError("pad_sequence must not be empty")
        for name in ("colors", "distance_threshold_cm", "trigger_delay_ms"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have one entry per step")
        if any(d <= 0 for d in self.distance_threshold_cm):
            raise ValueError("distance thresholds must be > 0")
        if any(d < 0 for d in self.trigger_delay_ms):
            raise ValueError("trigger delays must be >= 0")

    @classmethod
    def from_dict(cls, raw: dict[str, Any], base: ExerciseConfig | None = None) -> ExerciseConfig:
        """Build a config; keys missing from ``raw`` fall back to ``base``."""
        known = {"pad_sequence", "stimulus", "colors", "distance_threshold_cm", "trigger_delay_ms", "seed", "reaction_model"}
        unknown = set(raw) - known
        if unknown:
            raise BadPayload(f"unknown exercise keys: {', '.join(sorted(unknown))}")
        try:
            seq = raw.get("pad_sequence", base.pad_sequence if base else None)
            if seq is None:
                raise BadPayload("pad_sequence is required")
            seq = tuple(int(p) for p in seq)
            n = len(seq)

            def per_step(key: str, convert: Any, default: Any) -> tuple:
                value = raw.get(key)
                if value is None:
                    if base is not None and len(getattr(base, key)) == n:
                        return getattr(base, key)
                    value = default
                if isinstance(value, (list, tuple)):
                    if len(value) == 0:
                        raise BadPayload(f"{key} must not be empty")
                    # shorter lists cycle, e.g. four colors over ten steps
                    return tuple(convert(value[i % len(value)]) for i in range(n))
                return tuple(convert(value) for _ in range(n))

            model_raw = raw.get("reaction_model")
            model = ReactionModel(**model_raw) if model_raw is not None else (base.reaction_model if base else ReactionModel())
            return cls(
                pad_sequence=seq,
                stimulus=Stimulus(raw.get("stimulus", base.stimulus.value if base else "VISUAL")),
                colors=per_step("colors", Color, [c.value for c in Color]),
                distance_threshold_cm=per_step("distance_threshold_cm", float, 20.0),
                trigger_delay_ms=per_step("trigger_delay_ms", int, 500),
                seed=int(raw.get("seed", base.seed if base else 0)),
                reaction_model=model,
            )
        except BadPayload:
            raise
        except (TypeError, ValueError) as exc:
            raise BadPayload(f"bad exercise config: {exc}") from exc

    def to_dict(self) -> dict[str, Any]:
        return {
            "pad_sequence": list(self.pad_sequence),
            "stimulus": self.stimulus.value,
            "colors": [c.value for c in self.colors],
            "distance_threshold_cm": list(self.distance_threshold_cm),
            "trigger_delay_ms": list(self.trigger_delay_ms),
            "seed": self.seed,
            "reaction_model": {"base_ms": self.reaction_model.base_ms, "spread_ms": self.reaction_model.spread_ms},
        }


def load_exercise_config(path: str | None = None) -> ExerciseConfig:
    """Load an exercise YAML file, or the shipped predetermined one."""
    if path is None:
        text = resources.files("iotmesh").joinpath("data/remedes_default.yaml").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return ExerciseConfig.from_dict(yaml.safe_load(text) or {})


@dataclass(frozen=True)
class StepRecord:
    pad_id: int
    reaction_ms: int
    activated_at: int
    deactivated_at: int


@dataclass(frozen=True)
class PadEvent:
    at_ms: int
    pad_id: int
    state: PadState


@dataclass
class ExerciseResult:
    exercise_id: int
    per_step: list[StepRecord] = field(default_factory=list)
    completed: bool = False

    @property
    def mean_ms(self) -> float | None:
        return sum(s.reaction_ms for s in self.per_step) / len(self.per_step) if self.per_step else None

    @property
    def min_ms(self) -> int | None:
        return min((s.reaction_ms for s in self.per_step), default=None)

    @property
    def max_ms(self) -> int | None:
        return max((s.reaction_ms for s in self.per_step), default=None)

    def to_payload(self) -> dict[str, Any]:
        return {
            "exercise_id": self.exercise_id,
            "per_step": [{"pad_id": s.pad_id, "reaction_ms": s.reaction_ms} for s in self.per_step],
            "mean_ms": self.mean_ms,
            "min_ms": self.min_ms,
            "max_ms": self.max_ms,
            "completed": self.completed,
        }


class UniformSource(Protocol):
    def uniform(self, a: float, b: float) -> float: ...


def simulate_reaction(pad: Pad, rng: UniformSource, model: ReactionModel) -> int:
    """Draw the simulated hand motion and deactivate ``pad`` when it lands."""
    if pad.state is not PadState.ACTIVE:
        raise PadBusy(f"pad {pad.pad_id} is not active")
    u = rng.uniform(-1.0, 1.0)
    reaction_ms = max(REACTION_FLOOR_MS, math.floor(model.base_ms + model.spread_ms * u + 0.5))
    pad.deactivate(pad.activated_at + reaction_ms)
    return reaction_ms


class RoutineAborted(PadBusy):
    def __init__(self, cause: Exception, partial: ExerciseResult):
        super().__init__(str(cause))
        self.uri = getattr(cause, "uri", self.uri)
        self.partial = partial


@dataclass
class _Exercise:
    result: ExerciseResult
    started_at: int
    finished_at: int


class MasterController:
    def __init__(self, n_pads: int = 4, clock: SimClock | None = None, default_config: ExerciseConfig | None = None):
        self.pads = {i: Pad(i) for i in range(n_pads)}
        self.clock = clock or SimClock.wall()
        self.default_config = default_config or load_exercise_config()
        self.event_log: list[PadEvent] = []
        self._exercises: dict[int, _Exercise] = {}
        self._lock = threading.Lock()

    def _pad(self, pad_id: int) -> Pad:
        try:
            return self.pads[pad_id]
        except KeyError:
            raise NoSuchPad(f"no pad {pad_id}") from None

    def activate_pad(
        self,
        pad_id: int,
        color: Color = Color.RED,
        distance_threshold_cm: float = 20.0,
        trigger_delay_ms: int = 0,
        at_ms: int | None = None,
    ) -> Pad:
        pad = self._pad(pad_id)
        start = self.clock.now_ms() if at_ms is None else at_ms
        pad.activate(color, distance_threshold_cm, start + trigger_delay_ms)
        self.event_log.append(PadEvent(pad.activated_at, pad_id, PadState.ACTIVE))
        return pad

    def run_routine(self, cfg: ExerciseConfig, exercise_id: int = 0, start_ms: int = 0) -> ExerciseResult:
        """Run every step back to back on simulated milliseconds."""
        rng = random.Random(cfg.seed)
        result = ExerciseResult(exercise_id)
        t = start_ms
        for k, pad_id in enumerate(cfg.pad_sequence):
            try:
                pad = self.activate_pad(
                    pad_id, cfg.colors[k], cfg.distance_threshold_cm[k], cfg.trigger_delay_ms[k], at_ms=t
                )
            except (NoSuchPad, PadBusy) as exc:
                raise RoutineAborted(exc, result) from exc
            reaction_ms = simulate_reaction(pad, rng, cfg.reaction_model)
            self.event_log.append(PadEvent(pad.deactivated_at, pad_id, PadState.DONE))
            result.per_step.append(StepRecord(pad_id, reaction_ms, pad.activated_at, pad.deactivated_at))
            t = pad.deactivated_at
            pad.reset()
        result.completed = True
        return result

    # -- endpoints -----------------------------------------------------------

    def _running(self, now: int) -> bool:
        return any(ex.finished_at > now for ex in self._exercises.values())

    def start_exercise(self, payload: dict[str, Any] | None = None) -> dict[str, Any]:
        payload = payload or {}
        cfg = ExerciseConfig.from_dict(payload, base=self.default_config) if payload else self.default_config
        for pad_id in cfg.pad_sequence:
            self._pad(pad_id)
        with self._lock:
            now = self.clock.now_ms()
            if self._running(now):
                raise ExerciseInProgress("an exercise is already running")
            exercise_id = len(self._exercises) + 1
            try:
                result = self.run_routine(cfg, exercise_id, start_ms=now)
            except RoutineAborted as exc:
                self._exercises[exercise_id] = _Exercise(exc.partial, now, now)
                raise
            finished = result.per_step[-1].deactivated_at
            self._exercises[exercise_id] = _Exercise(result, now, finished)
        return {"exercise_id": exercise_id}

    def get_results(self, exercise_id: int | None = None) -> ExerciseResult:
        with self._lock:
            if not self._exercises:
                raise NoExercisesYet("no exercise has been started")
            if exercise_id is None:
                exercise_id = max(self._exercises)
            ex = self._exercises.get(exercise_id)
            if ex is None:
                raise NoSuchExercise(f"no exercise {exercise_id}")
            now = self.clock.now_ms()
        if ex.finished_at <= now:
            return ex.result
        done = [s for s in ex.result.per_step if s.deactivated_at <= now]
        return replace(ex.result, per_step=done, completed=False)


class RemedesNode:
    def __init__(self, conn: PeerConnection, controller: MasterController | None = None):
        self.conn = conn
        self.controller = controller or MasterController()

    def _results(self, payload: dict[str, Any]) -> dict[str, Any]:
        exercise_id = payload.get("exercise_id")
        if exercise_id is not None and (isinstance(exercise_id, bool) or not isinstance(exercise_id, int)):
            raise BadPayload("'exercise_id' must be an integer")
        return self.controller.get_results(exercise_id).to_payload()

    def start(self) -> None:
        self.conn.register(START, self.controller.start_exercise)
        self.conn.register(RESULTS, self._results)
