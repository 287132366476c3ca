"""Line-oriented byte channels and the router's per-connection loop.

Both the in-process loopback and TCP sockets move encoded frames, so the
router and the peer SDK run the same codec path either way.
"""

from __future__ import annotations

import logging
import queue
import socket
import socketserver
import threading
from typing import Protocol

from iotmesh.errors import ConnectFailed, ConnectionClosed, ProtocolError
from iotmesh.logs import log_event
from iotmesh.protocol import Kind, Message, decode, encode
from iotmesh.router import ERR_PROTOCOL_VIOLATION, Router

log = logging.getLogger(__name__)

MAX_FRAME_BYTES = 16 * 1024 * 1024


class Channel(Protocol):
    def send_line(self, data: bytes) -> None: ...

    def recv_line(self) -> bytes | None: ...

    def close(self) -> None: ...


class LoopbackChannel:
    """One end of an in-memory duplex pipe; see :func:`loopback_pair`."""

    def __init__(self) -> None:
        self._inbox: queue.Queue[bytes | None] = queue.Queue()
        self.peer: LoopbackChannel | None = None
        self._closed = False

    def send_line(self, data: bytes) -> None:
        if self._closed or self.peer is None or self.peer._closed:
            raise ConnectionClosed("loopback channel closed")
        self.peer._inbox.put(data)

    def recv_line(self) -> bytes | None:
        if self._closed and self._inbox.empty():
            return None
        return self._inbox.get()

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        self._inbox.put(None)
        if self.peer is not None:
            self.peer._inbox.put(None)


def loopback_pair() -> tuple[LoopbackChannel, LoopbackChannel]:
    a, b = LoopbackChannel(), LoopbackChannel()
    a.peer, b.peer = b, a
    return a, b


class SocketChannel:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._rfile = sock.makefile("rb")
        self._wlock = threading.Lock()
        self._closed = False

    def send_line(self, data: bytes) -> None:
        try:
            with self._wlock:
                self.sock.sendall(data)
        except OSError as exc:
            raise ConnectionClosed(str(exc)) from exc

    def recv_line(self) -> bytes | None:
        try:
            line = self._rfile.readline(MAX_FRAME_BYTES)
        except (OSError, ValueError):
            return None
        return line or None

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._rfile.close()
        self.sock.close()


def tcp_connect(host: str, port: int, timeout: float = 5.0) -> SocketChannel:
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise ConnectFailed(f"cannot reach router at {host}:{port}: {exc}") from exc
    sock.settimeout(None)
    return SocketChannel(sock)


def serve_channel(router: Router, channel: Channel) -> None:
    """Run one peer connection until it closes.  Blocks the calling thread."""
    first = channel.recv_line()
    if first is None:
        channel.close()
        return
    try:
        hello = decode(first)
    except ProtocolError as exc:
        _abort(channel, str(exc))
        return
    outbox: queue.Queue[Message | None] = queue.Queue()
    reply = router.open_session(hello, outbox.put)
    if reply.kind is not Kind.WELCOME:
        try:
            channel.send_line(encode(reply))
        except ConnectionClosed:
            pass
        channel.close()
        return
    session = router.session(reply.session_id)
    outbox.put(reply)
    writer = threading.Thread(target=_drain, args=(outbox, channel), name=f"tx-{session.session_id}", daemon=True)
    writer.start()
    try:
        while not session.closed:
            line = channel.recv_line()
            if line is None:
                break
            try:
                msg = decode(line)
            except ProtocolError as exc:
                log_event(log, logging.WARNING, "frame.rejected", session=session.session_id, error=exc)
                outbox.put(Message(Kind.ABORT, uri=ERR_PROTOCOL_VIOLATION, details={"message": str(exc)}))
                break
            router.handle(session, msg)
    finally:
        router.close_session(session)
        outbox.put(None)
        writer.join(timeout=5)
        channel.close()


def _abort(channel: Channel, reason: str) -> None:
    try:
        channel.send_line(encode(Message(Kind.ABORT, uri=ERR_PROTOCOL_VIOLATION, details={"message": reason})))
    except ConnectionClosed:
        pass
    channel.close()


def _drain(outbox: queue.Queue[Message | None], channel: Channel) -> None:
    while True:
        msg = outbox.get()
        if msg is None:
            return
        try:
            channel.send_line(encode(msg))
        except ConnectionClosed:
            return


def loopback_connect(router: Router) -> LoopbackChannel:
    """Attach an in-process peer to ``router``; returns the peer's end."""
    client_end, server_end = loopback_pair()
    threading.Thread(target=serve_channel, args=(router, server_end), name="loopback-peer", daemon=True).start()
    return client_end


class _Handler(socketserver.BaseRequestHandler):
    server: RouterServer

    def handle(self) -> None:
        channel = SocketChannel(self.request)
        self.server.track(channel)
        try:
            serve_channel(self.server.router, channel)
        finally:
            self.server.untrack(channel)


class RouterServer(socketserver.ThreadingTCPServer):
    """TCP listener feeding accepted sockets to :func:`serve_channel`."""

    allow_reuse_address = True
    daemon_threads = True
    request_queue_size = 128

    def __init__(self, router: Router, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _Handler)
        self.router = router
        self._channels: set[SocketChannel] = set()
        self._chan_lock = threading.Lock()
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        host, port = self.server_address[:2]
        return host, port

    def track(self, channel: SocketChannel) -> None:
        with self._chan_lock:
            self._channels.add(channel)

    def untrack(self, channel: SocketChannel) -> None:
        with self._chan_lock:
            self._channels.discard(channel)

    def start(self) -> RouterServer:
        self._thread = threading.Thread(target=self.serve_forever, name="router-tcp", daemon=True)
        self._thread.start()
        log_event(log, logging.INFO, "router.listening", host=self.address[0], port=self.address[1])
        return self

    def stop(self) -> None:
        self.shutdown()
        with self._chan_lock:
            channels = list(self._channels)
        for channel in channels:
            channel.close()
        self.server_close()
