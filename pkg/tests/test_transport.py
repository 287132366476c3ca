import socket

import pytest

from iotmesh.protocol import Kind, decode
from iotmesh.transport import RouterServer, loopback_pair


@pytest.fixture
def server(router):
    s = RouterServer(router).start()
    yield s
    s.stop()


def raw(server):
    sock = socket.create_connection(server.address, timeout=2)
    return sock, sock.makefile("rb")


def test_raw_hello_gets_welcome(server):
    sock, rf = raw(server)
    sock.sendall(b'[1,"clinic",{}]\n')
    welcome = decode(rf.readline())
    assert welcome.kind is Kind.WELCOME and welcome.session_id >= 1
    sock.close()


def test_unknown_realm_aborts_and_closes(server):
    sock, rf = raw(server)
    sock.sendall(b'[1,"ghost",{}]\n')
    assert decode(rf.readline()).uri == "err.no_such_realm"
    assert rf.readline() == b""
    sock.close()


def test_garbage_after_welcome_aborts(server, router):
    sock, rf = raw(server)
    sock.sendall(b'[1,"clinic",{}]\n')
    sid = decode(rf.readline()).session_id
    sock.sendall(b"{not json\n")
    abort = decode(rf.readline())
    assert abort.kind is Kind.ABORT and abort.uri == "err.protocol_violation"
    assert rf.readline() == b""
    assert sid not in router.sessions
    sock.close()


def test_garbage_hello_aborts(server):
    sock, rf = raw(server)
    sock.sendall(b"[99]\n")
    assert decode(rf.readline()).kind is Kind.ABORT
    sock.close()


def test_loopback_pair_close_wakes_reader():
    a, b = loopback_pair()
    a.send_line(b"x\n")
    assert b.recv_line() == b"x\n"
    a.close()
    assert b.recv_line() is None
