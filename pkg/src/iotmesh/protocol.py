"""Message model and newline-delimited wire codec.

A frame is one UTF-8 line holding a compact JSON array ``[code, *fields]``
followed by ``"\\n"``.  Field order per kind is fixed by :data:`LAYOUT`, and
objects are serialized with sorted keys so equal messages always produce
identical bytes.

URIs are checked structurally here (non-empty strings).  The naming rules of
:func:`validate_uri` are applied by the router so that a bad topic can still be
carried to it and answered with ``err.invalid_uri``.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field, fields
from typing import Any

from iotmesh.errors import InvalidMessage, MalformedFrame, UnknownKind

MAX_ID = 2**53 - 1
MAX_URI_LENGTH = 256

_URI_RE = re.compile(r"[a-z0-9_]+(?:\.[a-z0-9_]+)*")


class Kind(enum.IntEnum):
    HELLO = 1
    WELCOME = 2
    ABORT = 3
    GOODBYE = 6
    ERROR = 8
    PUBLISH = 16
    PUBLISHED = 17
    SUBSCRIBE = 32
    SUBSCRIBED = 33
    UNSUBSCRIBE = 34
    UNSUBSCRIBED = 35
    EVENT = 36
    CALL = 48
    RESULT = 50
    REGISTER = 64
    REGISTERED = 65
    UNREGISTER = 66
    UNREGISTERED = 67
    INVOCATION = 68
    YIELD = 70


# Wire order of the fields following the numeric code.  Every listed field is
# mandatory for its kind; fields not listed must be left at their defaults.
LAYOUT: dict[Kind, tuple[str, ...]] = {
    Kind.HELLO: ("realm", "details"),
    Kind.WELCOME: ("session_id", "details"),
    Kind.ABORT: ("details", "uri"),
    Kind.GOODBYE: ("details", "uri"),
    Kind.ERROR: ("request_kind", "request_id", "details", "uri", "payload"),
    Kind.PUBLISH: ("request_id", "details", "uri", "payload"),
    Kind.PUBLISHED: ("request_id", "publication_id"),
    Kind.SUBSCRIBE: ("request_id", "details", "uri"),
    Kind.SUBSCRIBED: ("request_id", "subscription_id"),
    Kind.UNSUBSCRIBE: ("request_id", "subscription_id"),
    Kind.UNSUBSCRIBED: ("request_id",),
    Kind.EVENT: ("subscription_id", "publication_id", "details", "payload"),
    Kind.CALL: ("request_id", "details", "uri", "payload"),
    Kind.RESULT: ("request_id", "details", "payload"),
    Kind.REGISTER: ("request_id", "details", "uri"),
    Kind.REGISTERED: ("request_id", "registration_id"),
    Kind.UNREGISTER: ("request_id", "registration_id"),
    Kind.UNREGISTERED: ("request_id",),
    Kind.INVOCATION: ("request_id", "registration_id", "details", "payload"),
    Kind.YIELD: ("request_id", "details", "payload"),
}

# Kinds an ERROR frame may answer.
ERROR_REQUEST_KINDS = frozenset(
    {Kind.SUBSCRIBE, Kind.UNSUBSCRIBE, Kind.PUBLISH, Kind.REGISTER, Kind.UNREGISTER, Kind.CALL, Kind.INVOCATION}
)

_ID_FIELDS = ("request_id", "session_id", "subscription_id", "registration_id", "publication_id")
_MAP_FIELDS = ("details", "payload")
_STR_FIELDS = ("uri", "realm")


def validate_uri(s: object) -> bool:
    """True iff ``s`` is a dotted lowercase URI such as ``remedes.exercise.start``."""
    return isinstance(s, str) and 0 < len(s) <= MAX_URI_LENGTH and _URI_RE.fullmatch(s) is not None


def _check_value(value: Any, where: str) -> None:
    if value is None or isinstance(value, (bool, int, str)):
        if isinstance(value, str):
            try:
                value.encode("utf-8")
            except UnicodeEncodeError as exc:
                raise InvalidMessage(f"{where}: string is not encodable as UTF-8") from exc
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvalidMessage(f"{where}: non-finite float")
        return
    if isinstance(value, list):
        for i, item in enumerate(value):
            _check_value(item, f"{where}[{i}]")
        return
    if isinstance(value, dict):
        _check_map(value, where)
        return
    raise InvalidMessage(f"{where}: unsupported type {type(value).__name__}")


def _check_map(value: Any, where: str) -> None:
    if not isinstance(value, dict):
        raise InvalidMessage(f"{where}: expected a map")
    for key, item in value.items():
        if not isinstance(key, str):
            raise InvalidMessage(f"{where}: non-string key {key!r}")
        _check_value(key, where)
        _check_value(item, f"{where}.{key}")


def _check_id(value: Any, name: str) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidMessage(f"{name}: expected an integer id")
    if not 1 <= value <= MAX_ID:
        raise InvalidMessage(f"{name}: id {value} out of range")


@dataclass(frozen=True)
class Message:
    """One protocol frame.  Construction validates the kind/field table."""

    kind: Kind
    request_id: int | None = None
    uri: str | None = None
    payload: dict[str, Any] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)
    realm: str | None = None
    session_id: int | None = None
    subscription_id: int | None = None
    registration_id: int | None = None
    publication_id: int | None = None
    request_kind: Kind | None = None

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        try:
            kind = Kind(self.kind)
        except ValueError as exc:
            raise InvalidMessage(f"unknown kind {self.kind!r}") from exc
        if kind is not self.kind:
            object.__setattr__(self, "kind", kind)
        layout = LAYOUT[kind]
        for f in fields(self):
            name = f.name
            if name == "kind":
                continue
            value = getattr(self, name)
            if name not in layout:
                empty = value == {} if name in _MAP_FIELDS else value is None
                if not empty:
                    raise InvalidMessage(f"{kind.name}: field {name!r} not allowed")
                continue
            if value is None:
                raise InvalidMessage(f"{kind.name}: missing mandatory field {name!r}")
            if name in _ID_FIELDS:
                _check_id(value, name)
            elif name in _MAP_FIELDS:
                _check_map(value, name)
            elif name in _STR_FIELDS:
                if not isinstance(value, str) or not value:
                    raise InvalidMessage(f"{kind.name}: {name!r} must be a non-empty string")
                _check_value(value, name)
            elif name == "request_kind":
                if isinstance(value, bool) or not isinstance(value, int) or value not in ERROR_REQUEST_KINDS:
                    raise InvalidMessage(f"ERROR: request_kind {value!r} is not a request kind")
                if not isinstance(value, Kind):
                    object.__setattr__(self, "request_kind", Kind(value))

    def replace(self, **changes: Any) -> Message:
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return Message(**values)


def _dumps(value: Any) -> str:
    return json.dumps(value, separators=(",", ":"), sort_keys=True, ensure_ascii=False, allow_nan=False)


def canonical(payload: Any) -> bytes:
    """Canonical serialization used for frames and for payload comparison."""
    return _dumps(payload).encode("utf-8")


def encode(msg: Message) -> bytes:
    msg.validate()
    row: list[Any] = [int(msg.kind)]
    for name in LAYOUT[msg.kind]:
        value = getattr(msg, name)
        row.append(int(value) if name == "request_kind" else value)
    return (_dumps(row) + "\n").encode("utf-8")


def _reject_constant(token: str) -> Any:
    raise ValueError(f"non-finite number {token}")


def decode(line: bytes | str) -> Message:
    if isinstance(line, bytes):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedFrame("frame is not valid UTF-8") from exc
    else:
        text = line
    if text.endswith("\n"):
        text = text[:-1]
    if "\n" in text:
        raise MalformedFrame("frame contains an interior newline")
    try:
        row = json.loads(text, parse_constant=_reject_constant)
    except ValueError as exc:
        raise MalformedFrame(f"bad frame syntax: {exc}") from exc
    if not isinstance(row, list) or not row:
        raise MalformedFrame("frame must be a non-empty array")
    code = row[0]
    if isinstance(code, bool) or not isinstance(code, int):
        raise MalformedFrame("frame must start with an integer kind code")
    try:
        kind = Kind(code)
    except ValueError as exc:
        raise UnknownKind(f"unknown kind code {code}") from exc
    layout = LAYOUT[kind]
    if len(row) - 1 != len(layout):
        raise InvalidMessage(f"{kind.name}: expected {len(layout)} fields, got {len(row) - 1}")
    values = dict(zip(layout, row[1:]))
    if "request_kind" in values:
        rk = values["request_kind"]
        if isinstance(rk, bool) or not isinstance(rk, int) or rk not in ERROR_REQUEST_KINDS:
            raise InvalidMessage(f"ERROR: request_kind {rk!r} is not a request kind")
        values["request_kind"] = Kind(rk)
    return Message(kind, **values)
