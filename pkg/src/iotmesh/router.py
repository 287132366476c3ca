"""Session management, broker (pub/sub) and dealer (RPC) for the hub.

The router never blocks on a peer: every outbound message goes through the
session's ``send`` callable, which the transport layer backs with a queue.
All table mutations and the sends they trigger happen under one lock, so a
publish observes a single linearized table state and per-subscriber EVENT
order follows publish order.
"""

from __future__ import annotations

import itertools
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

from iotmesh.config import DEFAULT_CALL_TIMEOUT_S, RouterConfig
from iotmesh.logs import log_event
from iotmesh.protocol import Kind, Message, validate_uri

log = logging.getLogger(__name__)

ERR_NO_SUCH_REALM = "err.no_such_realm"
ERR_PROTOCOL_VIOLATION = "err.protocol_violation"
ERR_INVALID_URI = "err.invalid_uri"
ERR_NO_SUCH_SUBSCRIPTION = "err.no_such_subscription"
ERR_PROCEDURE_ALREADY_EXISTS = "err.procedure_already_exists"
ERR_NO_SUCH_REGISTRATION = "err.no_such_registration"
ERR_NO_SUCH_PROCEDURE = "err.no_such_procedure"
ERR_CALLEE_GONE = "err.callee_gone"
ERR_TIMEOUT = "err.timeout"

CLOSE_NORMAL = "close.normal"
CLOSE_GOODBYE_AND_OUT = "close.goodbye_and_out"

SendFn = Callable[[Message], None]


@dataclass(eq=False)
class Session:
    session_id: int
    realm: str
    send: SendFn
    subscriptions: set[int] = field(default_factory=set)
    registrations: set[int] = field(default_factory=set)
    closed: bool = False


@dataclass
class RealmTables:
    name: str
    # topic -> [(subscription_id, session_id)] in subscription order
    topics: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    subscriptions: dict[int, tuple[str, int]] = field(default_factory=dict)
    # procedure -> (registration_id, session_id)
    procedures: dict[str, tuple[int, int]] = field(default_factory=dict)
    registrations: dict[int, tuple[str, int]] = field(default_factory=dict)


@dataclass
class _PendingCall:
    invocation_id: int
    caller: Session
    caller_request_id: int
    callee: Session
    procedure: str
    deadline: float


def _error(request: Message, uri: str, message: str = "") -> Message:
    payload = {"message": message} if message else {}
    return Message(Kind.ERROR, request_kind=request.kind, request_id=request.request_id, uri=uri, payload=payload)


class Router:
    def __init__(
        self,
        realms: Iterable[str],
        call_timeout_s: float = DEFAULT_CALL_TIMEOUT_S,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.realms = {name: RealmTables(name) for name in realms}
        if not self.realms:
            raise ValueError("router needs at least one realm")
        self.call_timeout_s = call_timeout_s
        self._clock = clock
        self._lock = threading.RLock()
        self._sessions: dict[int, Session] = {}
        self._pending: dict[int, _PendingCall] = {}
        self._ids = {
            name: itertools.count(1)
            for name in ("session", "subscription", "registration", "publication", "invocation")
        }
        self._sweeper: threading.Thread | None = None
        self._stop = threading.Event()

    @classmethod
    def from_config(cls, cfg: RouterConfig) -> Router:
        return cls(cfg.realms, call_timeout_s=cfg.call_timeout_s)

    def _next(self, space: str) -> int:
        return next(self._ids[space])

    # -- sessions ------------------------------------------------------------

    def session(self, session_id: int) -> Session:
        return self._sessions[session_id]

    @property
    def sessions(self) -> dict[int, Session]:
        with self._lock:
            return dict(self._sessions)

    def open_session(self, hello: Message, send: SendFn = lambda m: None) -> Message:
        """Answer a HELLO with WELCOME (session created) or ABORT."""
        if hello.kind is not Kind.HELLO:
            return Message(Kind.ABORT, uri=ERR_PROTOCOL_VIOLATION, details={"message": "expected HELLO"})
        with self._lock:
            if hello.realm not in self.realms:
                log_event(log, logging.INFO, "session.rejected", realm=hello.realm)
                return Message(Kind.ABORT, uri=ERR_NO_SUCH_REALM, details={"realm": hello.realm})
            sid = self._next("session")
            self._sessions[sid] = Session(sid, hello.realm, send)
        log_event(log, logging.INFO, "session.open", session=sid, realm=hello.realm)
        return Message(Kind.WELCOME, session_id=sid, details={"realm": hello.realm})

    def close_session(self, s: Session) -> None:
        with self._lock:
            if s.closed:
                return
            s.closed = True
            tables = self.realms[s.realm]
            for sub_id in list(s.subscriptions):
                self._drop_subscription(tables, sub_id)
            for reg_id in list(s.registrations):
                self._drop_registration(tables, reg_id)
            for inv_id, pending in list(self._pending.items()):
                if pending.callee is s:
                    del self._pending[inv_id]
                    self._reply_error(pending, ERR_CALLEE_GONE, "callee disconnected")
                elif pending.caller is s:
                    del self._pending[inv_id]
            self._sessions.pop(s.session_id, None)
        log_event(log, logging.INFO, "session.close", session=s.session_id)

    # -- dispatch ------------------------------------------------------------

    def handle(self, s: Session, m: Message) -> None:
        """Route one inbound message, sending any direct reply to ``s``."""
        with self._lock:
            if s.closed:
                return
            reply: Message | None
            if m.kind is Kind.SUBSCRIBE:
                reply = self.handle_subscribe(s, m)
            elif m.kind is Kind.UNSUBSCRIBE:
                reply = self.handle_unsubscribe(s, m)
            elif m.kind is Kind.PUBLISH:
                reply = self.handle_publish(s, m)
            elif m.kind is Kind.REGISTER:
                reply = self.handle_register(s, m)
            elif m.kind is Kind.UNREGISTER:
                reply = self.handle_unregister(s, m)
            elif m.kind is Kind.CALL:
                reply = self.handle_call(s, m)
            elif m.kind is Kind.YIELD:
                reply = self.handle_yield(s, m)
            elif m.kind is Kind.ERROR and m.request_kind is Kind.INVOCATION:
                reply = self.handle_invocation_error(s, m)
            elif m.kind is Kind.GOODBYE:
                s.send(Message(Kind.GOODBYE, uri=CLOSE_GOODBYE_AND_OUT))
                self.close_session(s)
                return
            else:
                s.send(Message(Kind.ABORT, uri=ERR_PROTOCOL_VIOLATION, details={"message": f"unexpected {m.kind.name}"}))
                self.close_session(s)
                return
            if reply is not None:
                s.send(reply)

    # -- broker --------------------------------------------------------------

    def handle_subscribe(self, s: Session, m: Message) -> Message:
        if not validate_uri(m.uri):
            return _error(m, ERR_INVALID_URI, f"invalid topic {m.uri!r}")
        with self._lock:
            tables = self.realms[s.realm]
            subscribers = tables.topics.setdefault(m.uri, [])
            for sub_id, sid in subscribers:
                if sid == s.session_id:
                    return Message(Kind.SUBSCRIBED, request_id=m.request_id, subscription_id=sub_id)
            sub_id = self._next("subscription")
            subscribers.append((sub_id, s.session_id))
            tables.subscriptions[sub_id] = (m.uri, s.session_id)
            s.subscriptions.add(sub_id)
        return Message(Kind.SUBSCRIBED, request_id=m.request_id, subscription_id=sub_id)

    def handle_unsubscribe(self, s: Session, m: Message) -> Message:
        with self._lock:
            if m.subscription_id not in s.subscriptions:
                return _error(m, ERR_NO_SUCH_SUBSCRIPTION)
            self._drop_subscription(self.realms[s.realm], m.subscription_id)
        return Message(Kind.UNSUBSCRIBED, request_id=m.request_id)

    def _drop_subscription(self, tables: RealmTables, sub_id: int) -> None:
        topic, sid = tables.subscriptions.pop(sub_id)
        remaining = [row for row in tables.topics[topic] if row[0] != sub_id]
        if remaining:
            tables.topics[topic] = remaining
        else:
            del tables.topics[topic]
        session = self._sessions.get(sid)
        if session is not None:
            session.subscriptions.discard(sub_id)

    def handle_publish(self, s: Session, m: Message) -> Message:
        if not validate_uri(m.uri):
            return _error(m, ERR_INVALID_URI, f"invalid topic {m.uri!r}")
        with self._lock:
            pub_id = self._next("publication")
            delivered = 0
            for sub_id, sid in self.realms[s.realm].topics.get(m.uri, ()):
                if sid == s.session_id:
                    continue
                self._sessions[sid].send(
                    Message(
                        Kind.EVENT,
                        subscription_id=sub_id,
                        publication_id=pub_id,
                        details={"topic": m.uri},
                        payload=m.payload,
                    )
                )
                delivered += 1
        log_event(log, logging.DEBUG, "publish", session=s.session_id, topic=m.uri, receivers=delivered)
        return Message(Kind.PUBLISHED, request_id=m.request_id, publication_id=pub_id)

    # -- dealer --------------------------------------------------------------

    def handle_register(self, s: Session, m: Message) -> Message:
        if not validate_uri(m.uri):
            return _error(m, ERR_INVALID_URI, f"invalid procedure {m.uri!r}")
        with self._lock:
            tables = self.realms[s.realm]
            if m.uri in tables.procedures:
                return _error(m, ERR_PROCEDURE_ALREADY_EXISTS, f"{m.uri} is already registered")
            reg_id = self._next("registration")
            tables.procedures[m.uri] = (reg_id, s.session_id)
            tables.registrations[reg_id] = (m.uri, s.session_id)
            s.registrations.add(reg_id)
        log_event(log, logging.INFO, "register", session=s.session_id, procedure=m.uri)
        return Message(Kind.REGISTERED, request_id=m.request_id, registration_id=reg_id)

    def handle_unregister(self, s: Session, m: Message) -> Message:
        with self._lock:
            if m.registration_id not in s.registrations:
                return _error(m, ERR_NO_SUCH_REGISTRATION)
            self._drop_registration(self.realms[s.realm], m.registration_id)
        return Message(Kind.UNREGISTERED, request_id=m.request_id)

    def _drop_registration(self, tables: RealmTables, reg_id: int) -> None:
        procedure, sid = tables.registrations.pop(reg_id)
        del tables.procedures[procedure]
        session = self._sessions.get(sid)
        if session is not None:
            session.registrations.discard(reg_id)

    def handle_call(self, s: Session, m: Message) -> Message | None:
        """Forward a CALL as INVOCATION; the RESULT is sent later to the caller."""
        if not validate_uri(m.uri):
            return _error(m, ERR_INVALID_URI, f"invalid procedure {m.uri!r}")
        timeout_s = self.call_timeout_s
        requested = m.details.get("timeout")
        if isinstance(requested, (int, float)) and not isinstance(requested, bool) and requested > 0:
            timeout_s = requested / 1000.0
        with self._lock:
            row = self.realms[s.realm].procedures.get(m.uri)
            if row is None:
                return _error(m, ERR_NO_SUCH_PROCEDURE, f"no procedure {m.uri}")
            reg_id, callee_id = row
            callee = self._sessions[callee_id]
            inv_id = self._next("invocation")
            self._pending[inv_id] = _PendingCall(
                inv_id, s, m.request_id, callee, m.uri, self._clock() + timeout_s
            )
            callee.send(
                Message(
                    Kind.INVOCATION,
                    request_id=inv_id,
                    registration_id=reg_id,
                    details={"procedure": m.uri},
                    payload=m.payload,
                )
            )
        self._ensure_sweeper()
        return None

    def handle_yield(self, s: Session, m: Message) -> None:
        with self._lock:
            pending = self._pending.get(m.request_id)
            if pending is None or pending.callee is not s:
                return None
            del self._pending[m.request_id]
            if not pending.caller.closed:
                pending.caller.send(Message(Kind.RESULT, request_id=pending.caller_request_id, payload=m.payload))
        return None

    def handle_invocation_error(self, s: Session, m: Message) -> None:
        with self._lock:
            pending = self._pending.get(m.request_id)
            if pending is None or pending.callee is not s:
                return None
            del self._pending[m.request_id]
            if not pending.caller.closed:
                pending.caller.send(
                    Message(
                        Kind.ERROR,
                        request_kind=Kind.CALL,
                        request_id=pending.caller_request_id,
                        uri=m.uri,
                        payload=m.payload,
                    )
                )
        return None

    def _reply_error(self, pending: _PendingCall, uri: str, message: str) -> None:
        if pending.caller.closed:
            return
        pending.caller.send(
            Message(
                Kind.ERROR,
                request_kind=Kind.CALL,
                request_id=pending.caller_request_id,
                uri=uri,
                payload={"message": message},
            )
        )

    @property
    def pending_calls(self) -> int:
        with self._lock:
            return len(self._pending)

    def expire_calls(self, now: float | None = None) -> int:
        """Answer every call past its deadline with ``err.timeout``."""
        now = self._clock() if now is None else now
        expired = 0
        with self._lock:
            for inv_id, pending in list(self._pending.items()):
                if pending.deadline <= now:
                    del self._pending[inv_id]
                    self._reply_error(pending, ERR_TIMEOUT, f"{pending.procedure} timed out")
                    expired += 1
        if expired:
            log_event(log, logging.WARNING, "call.timeout", count=expired)
        return expired

    def _ensure_sweeper(self) -> None:
        if self._sweeper is not None:
            return
        with self._lock:
            if self._sweeper is None and not self._stop.is_set():
                self._sweeper = threading.Thread(target=self._sweep, name="router-sweeper", daemon=True)
                self._sweeper.start()

    def _sweep(self) -> None:
        while not self._stop.wait(0.02):
            self.expire_calls()

    def shutdown(self) -> None:
        self._stop.set()
        for s in list(self.sessions.values()):
            self.close_session(s)
        if self._sweeper is not None:
            self._sweeper.join(timeout=1)

    # -- introspection -------------------------------------------------------

    def table_rows_for(self, session_id: int) -> list[tuple[str, str, int]]:
        """Every routing-table row that references ``session_id``."""
        rows = []
        with self._lock:
            for tables in self.realms.values():
                for topic, subs in tables.topics.items():
                    rows += [(tables.name, topic, sub) for sub, sid in subs if sid == session_id]
                for sub, (topic, sid) in tables.subscriptions.items():
                    if sid == session_id:
                        rows.append((tables.name, topic, sub))
                for proc, (reg, sid) in tables.procedures.items():
                    if sid == session_id:
                        rows.append((tables.name, proc, reg))
            rows += [("pending", p.procedure, i) for i, p in self._pending.items()
                     if session_id in (p.caller.session_id, p.callee.session_id)]
        return rows
