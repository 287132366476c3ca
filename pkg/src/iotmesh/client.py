"""Peer-side SDK: one :class:`PeerConnection` per node or application.

Three calling styles are offered on the same connection: blocking
:meth:`PeerConnection.call`, callback-based :meth:`PeerConnection.call_async`
and event-driven :meth:`PeerConnection.subscribe`.

A single reader thread owns the socket.  Subscription and registration
handlers are installed by that thread as soon as the acknowledgement arrives,
so no EVENT or INVOCATION following it can be missed.  Events are delivered on
one dispatch thread (serial, in arrival order); invocations run on a worker
pool so a handler may itself issue calls.
"""

from __future__ import annotations

import itertools
import logging
import queue
import threading
from concurrent.futures import Future, ThreadPoolExecutor
from typing import Any, Callable

from iotmesh.config import Endpoint, parse_endpoint
from iotmesh.errors import (
    ApplicationError,
    ConnectFailed,
    ConnectionClosed,
    HandlerFailed,
    IotMeshError,
    RealmRejected,
    error_from_uri,
)
from iotmesh.logs import log_event
from iotmesh.protocol import Kind, Message, decode, encode
from iotmesh.router import ERR_NO_SUCH_REALM, Router
from iotmesh.transport import Channel, loopback_connect, tcp_connect

log = logging.getLogger(__name__)

Payload = dict[str, Any]
Handler = Callable[[Payload], Any]


class PeerConnection:
    def __init__(self, channel: Channel, realm: str, *, workers: int = 16):
        self.realm = realm
        self._channel = channel
        self._send_lock = threading.Lock()
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._pending: dict[int, Future] = {}
        self._pending_handlers: dict[int, tuple[str, Handler]] = {}
        self._subscriptions: dict[int, tuple[str, list[Handler]]] = {}
        self._registrations: dict[int, tuple[str, Handler]] = {}
        self._closed = threading.Event()

        self._send(Message(Kind.HELLO, realm=realm))
        line = channel.recv_line()
        if line is None:
            channel.close()
            raise ConnectFailed("router closed the connection during handshake")
        reply = decode(line)
        if reply.kind is Kind.ABORT:
            channel.close()
            if reply.uri == ERR_NO_SUCH_REALM:
                raise RealmRejected(f"realm {realm!r} rejected by router")
            raise ConnectFailed(f"router aborted handshake: {reply.uri}")
        if reply.kind is not Kind.WELCOME:
            channel.close()
            raise ConnectFailed(f"unexpected {reply.kind.name} during handshake")
        self.session_id: int = reply.session_id

        self._events: queue.Queue[tuple[list[Handler], Payload] | None] = queue.Queue()
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix=f"inv-{self.session_id}")
        self._reader = threading.Thread(target=self._read_loop, name=f"rx-{self.session_id}", daemon=True)
        self._dispatcher = threading.Thread(target=self._event_loop, name=f"ev-{self.session_id}", daemon=True)
        self._reader.start()
        self._dispatcher.start()

    # -- plumbing ------------------------------------------------------------

    def _send(self, msg: Message) -> None:
        data = encode(msg)
        with self._send_lock:
            self._channel.send_line(data)

    def _request(self, msg_factory: Callable[[int], Message], handler: tuple[str, Handler] | None = None) -> Future:
        if self._closed.is_set():
            raise ConnectionClosed("connection is closed")
        fut: Future = Future()
        with self._lock:
            request_id = next(self._ids)
            self._pending[request_id] = fut
            if handler is not None:
                self._pending_handlers[request_id] = handler
        try:
            self._send(msg_factory(request_id))
        except BaseException:
            with self._lock:
                self._pending.pop(request_id, None)
                self._pending_handlers.pop(request_id, None)
            raise
        return fut

    @property
    def pending_count(self) -> int:
        with self._lock:
            return len(self._pending)

    @property
    def closed(self) -> bool:
        return self._closed.is_set()

    def _read_loop(self) -> None:
        try:
            while True:
                line = self._channel.recv_line()
                if line is None:
                    break
                try:
                    msg = decode(line)
                except IotMeshError as exc:
                    log_event(log, logging.WARNING, "client.bad_frame", error=exc)
                    continue
                if msg.kind in (Kind.GOODBYE, Kind.ABORT):
                    break
                self._dispatch(msg)
        finally:
            self._shutdown(ConnectionClosed("connection to router closed"))

    def _dispatch(self, msg: Message) -> None:
        kind = msg.kind
        if kind is Kind.EVENT:
            with self._lock:
                entry = self._subscriptions.get(msg.subscription_id)
            if entry is not None:
                self._events.put((list(entry[1]), msg.payload))
            return
        if kind is Kind.INVOCATION:
            with self._lock:
                entry = self._registrations.get(msg.registration_id)
            self._pool.submit(self._invoke, msg, entry[1] if entry else None)
            return
        with self._lock:
            fut = self._pending.pop(msg.request_id, None)
            handler = self._pending_handlers.pop(msg.request_id, None)
            if kind is Kind.SUBSCRIBED and handler is not None:
                topic, fn = handler
                self._subscriptions.setdefault(msg.subscription_id, (topic, []))[1].append(fn)
            elif kind is Kind.REGISTERED and handler is not None:
                self._registrations[msg.registration_id] = handler
        if fut is None:
            return
        if kind is Kind.RESULT:
            fut.set_result(msg.payload)
        elif kind is Kind.ERROR:
            fut.set_exception(error_from_uri(msg.uri, msg.payload))
        else:
            fut.set_result(msg)

    def _invoke(self, msg: Message, handler: Handler | None) -> None:
        try:
            if handler is None:
                raise HandlerFailed("no handler for registration")
            result = handler(dict(msg.payload))
            if result is None:
                result = {}
            if not isinstance(result, dict):
                raise HandlerFailed(f"handler returned {type(result).__name__}, expected a map")
            reply = Message(Kind.YIELD, request_id=msg.request_id, payload=result)
        except ApplicationError as exc:
            reply = self._invocation_error(msg, exc.uri, exc.to_payload())
        except Exception as exc:  # noqa: BLE001 - any handler failure goes back to the caller
            log_event(log, logging.WARNING, "handler.failed", procedure=msg.details.get("procedure"), error=exc)
            reply = self._invocation_error(msg, HandlerFailed.uri, {"message": f"{type(exc).__name__}: {exc}"})
        try:
            self._send(reply)
        except ConnectionClosed:
            pass

    @staticmethod
    def _invocation_error(msg: Message, uri: str, payload: Payload) -> Message:
        try:
            return Message(Kind.ERROR, request_kind=Kind.INVOCATION, request_id=msg.request_id, uri=uri, payload=payload)
        except IotMeshError:
            # error payload itself not serializable
            return Message(Kind.ERROR, request_kind=Kind.INVOCATION, request_id=msg.request_id, uri=uri)

    def _event_loop(self) -> None:
        while True:
            item = self._events.get()
            if item is None:
                return
            handlers, payload = item
            for fn in handlers:
                try:
                    fn(dict(payload))
                except Exception as exc:  # noqa: BLE001 - a subscriber bug must not stop delivery
                    log_event(log, logging.WARNING, "subscriber.failed", error=exc)

    def _shutdown(self, exc: Exception) -> None:
        if self._closed.is_set():
            return
        self._closed.set()
        with self._lock:
            pending = list(self._pending.values())
            self._pending.clear()
            self._pending_handlers.clear()
        for fut in pending:
            if not fut.done():
                fut.set_exception(exc)
        self._events.put(None)
        self._pool.shutdown(wait=False)
        self._channel.close()

    # -- RPC -----------------------------------------------------------------

    def call_async(
        self,
        procedure: str,
        payload: Payload | None = None,
        callback: Callable[[Future], Any] | None = None,
        *,
        timeout: float | None = None,
    ) -> Future:
        details = {"timeout": int(timeout * 1000)} if timeout else {}
        fut = self._request(
            lambda rid: Message(Kind.CALL, request_id=rid, details=details, uri=procedure, payload=payload or {})
        )
        if callback is not None:
            fut.add_done_callback(callback)
        return fut

    def call(self, procedure: str, payload: Payload | None = None, *, timeout: float | None = None) -> Payload:
        """Invoke ``procedure`` and block until its result; remote errors are raised."""
        return self.call_async(procedure, payload, timeout=timeout).result()

    def register(self, procedure: str, handler: Handler) -> int:
        fut = self._request(
            lambda rid: Message(Kind.REGISTER, request_id=rid, uri=procedure), handler=(procedure, handler)
        )
        return fut.result().registration_id

    def unregister(self, registration_id: int) -> None:
        self._request(lambda rid: Message(Kind.UNREGISTER, request_id=rid, registration_id=registration_id)).result()
        with self._lock:
            self._registrations.pop(registration_id, None)

    # -- pub/sub -------------------------------------------------------------

    def subscribe(self, topic: str, handler: Handler) -> int:
        fut = self._request(lambda rid: Message(Kind.SUBSCRIBE, request_id=rid, uri=topic), handler=(topic, handler))
        return fut.result().subscription_id

    def unsubscribe(self, subscription_id: int) -> None:
        self._request(
            lambda rid: Message(Kind.UNSUBSCRIBE, request_id=rid, subscription_id=subscription_id)
        ).result()
        with self._lock:
            self._subscriptions.pop(subscription_id, None)

    def publish(self, topic: str, payload: Payload | None = None) -> int:
        """Publish and wait for the router's acknowledgement."""
        fut = self._request(lambda rid: Message(Kind.PUBLISH, request_id=rid, uri=topic, payload=payload or {}))
        return fut.result().publication_id

    # -- lifecycle -----------------------------------------------------------

    def close(self, timeout: float = 2.0) -> None:
        if self._closed.is_set():
            return
        try:
            self._send(Message(Kind.GOODBYE, uri="close.normal"))
        except (ConnectionClosed, OSError):
            self._shutdown(ConnectionClosed("closed"))
            return
        self._reader.join(timeout)
        self._shutdown(ConnectionClosed("closed"))

    def __enter__(self) -> PeerConnection:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def connect(target: Router | Endpoint | tuple[str, int] | str, realm: str) -> PeerConnection:
    """Connect to a router: in-process if given a :class:`Router`, else over TCP."""
    if isinstance(target, Router):
        channel: Channel = loopback_connect(target)
    else:
        if isinstance(target, str):
            target = parse_endpoint(target)
        host, port = (target.host, target.port) if isinstance(target, Endpoint) else target
        channel = tcp_connect(host, port)
    return PeerConnection(channel, realm)
