"""Exception hierarchy shared by the router, the peer SDK and the nodes.

Errors that cross the wire carry an ``err.*`` URI.  A callee raising an
:class:`ApplicationError` subclass has that URI forwarded to the caller, where
:func:`error_from_uri` turns it back into the matching exception class.
"""

from __future__ import annotations

from typing import Any


class IotMeshError(Exception):
    """Base class for every error raised by this package."""


# -- protocol ---------------------------------------------------------------


class ProtocolError(IotMeshError):
    pass


class MalformedFrame(ProtocolError):
    pass


class UnknownKind(ProtocolError):
    pass


class InvalidMessage(ProtocolError):
    pass


# -- configuration ------------------------------------------------------------


class ConfigError(IotMeshError):
    pass


class ConfigNotFound(ConfigError):
    pass


class ConfigParse(ConfigError):
    pass


class ConfigInvalid(ConfigError):
    def __init__(self, key: str, reason: str):
        super().__init__(f"{key}: {reason}")
        self.key = key
        self.reason = reason


# -- session / transport ------------------------------------------------------


class ConnectFailed(IotMeshError):
    pass


class RealmRejected(IotMeshError):
    pass


class ConnectionClosed(IotMeshError):
    pass


# -- errors carried over the wire -----------------------------------------


class ApplicationError(IotMeshError):
    """An error with a routable ``err.*`` URI.

    Subclasses pin ``uri``; instances of the base class carry whatever URI the
    remote side sent.
    """

    uri = "err.application"

    def __init__(self, message: str = "", *, uri: str | None = None, payload: dict[str, Any] | None = None):
        super().__init__(message or (uri or self.uri))
        if uri is not None:
            self.uri = uri
        self.message = message
        self.payload = dict(payload or {})

    def to_payload(self) -> dict[str, Any]:
        out = dict(self.payload)
        if self.message:
            out.setdefault("message", self.message)
        return out


class InvalidUri(ApplicationError):
    uri = "err.invalid_uri"


class NoSuchProcedure(ApplicationError):
    uri = "err.no_such_procedure"


class CalleeGone(ApplicationError):
    uri = "err.callee_gone"


class Timeout(ApplicationError):
    uri = "err.timeout"


class AlreadyExists(ApplicationError):
    uri = "err.procedure_already_exists"


class NoSuchRegistration(ApplicationError):
    uri = "err.no_such_registration"


class NoSuchSubscription(ApplicationError):
    uri = "err.no_such_subscription"


class HandlerFailed(ApplicationError):
    uri = "err.handler_failed"


class BadPayload(ApplicationError):
    uri = "err.bad_payload"


class NoUtterance(ApplicationError):
    uri = "err.no_utterance"


class NoActivity(ApplicationError):
    uri = "err.no_activity"


class InvalidTime(ApplicationError):
    uri = "err.invalid_time"


class PadBusy(ApplicationError):
    uri = "err.pad_busy"


class NoSuchPad(ApplicationError):
    uri = "err.no_such_pad"


class ExerciseInProgress(ApplicationError):
    uri = "err.exercise_in_progress"


class NoSuchExercise(ApplicationError):
    uri = "err.no_such_exercise"


class NoExercisesYet(ApplicationError):
    uri = "err.no_exercises_yet"


_BY_URI: dict[str, type[ApplicationError]] = {
    cls.uri: cls
    for cls in (
        InvalidUri,
        NoSuchProcedure,
        CalleeGone,
        Timeout,
        AlreadyExists,
        NoSuchRegistration,
        NoSuchSubscription,
        HandlerFailed,
        BadPayload,
        NoUtterance,
        NoActivity,
        InvalidTime,
        PadBusy,
        NoSuchPad,
        ExerciseInProgress,
        NoSuchExercise,
        NoExercisesYet,
    )
}


def error_from_uri(uri: str, payload: dict[str, Any] | None = None) -> ApplicationError:
    payload = dict(payload or {})
    message = str(payload.get("message", ""))
    cls = _BY_URI.get(uri)
    if cls is None:
        return ApplicationError(message, uri=uri, payload=payload)
    return cls(message, payload=payload)
