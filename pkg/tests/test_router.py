"""Router tables driven directly, with each session's outbound frames captured in a list."""

from itertools import count

import pytest
from hypothesis import given, settings, strategies as st

from iotmesh.protocol import Kind, Message
from iotmesh.router import Router


class Peer:
    def __init__(self, router: Router, realm: str = "clinic"):
        self.router = router
        self.inbox: list[Message] = []
        self._ids = count(1)
        welcome = router.open_session(Message(Kind.HELLO, realm=realm), self.inbox.append)
        assert welcome.kind is Kind.WELCOME
        self.session = router.session(welcome.session_id)

    def send(self, kind: Kind, **fields) -> Message | None:
        before = len(self.inbox)
        rid = fields.pop("request_id", None) or next(self._ids)
        self.router.handle(self.session, Message(kind, request_id=rid, **fields))
        return self.inbox[before] if len(self.inbox) > before else None

    def of_kind(self, kind: Kind) -> list[Message]:
        return [m for m in self.inbox if m.kind is kind]


@pytest.fixture
def r():
    router = Router(["clinic", "lab"], call_timeout_s=30.0)
    yield router
    router.shutdown()


def test_open_session_welcome_and_abort(r):
    a = r.open_session(Message(Kind.HELLO, realm="clinic"))
    b = r.open_session(Message(Kind.HELLO, realm="clinic"))
    assert a.kind is b.kind is Kind.WELCOME
    assert a.session_id != b.session_id
    ghost = r.open_session(Message(Kind.HELLO, realm="ghost"))
    assert ghost.kind is Kind.ABORT and ghost.uri == "err.no_such_realm"


def test_subscribe_fresh_and_idempotent(r):
    p = Peer(r)
    first = p.send(Kind.SUBSCRIBE, uri="remedes.results")
    again = p.send(Kind.SUBSCRIBE, uri="remedes.results")
    assert first.kind is Kind.SUBSCRIBED
    assert again.subscription_id == first.subscription_id


def test_subscribe_invalid_uri(r):
    reply = Peer(r).send(Kind.SUBSCRIBE, uri="BAD..uri")
    assert reply.kind is Kind.ERROR and reply.uri == "err.invalid_uri"
    assert reply.request_kind is Kind.SUBSCRIBE


def test_fanout_to_three_doctors(r):
    app, doctors = Peer(r), [Peer(r) for _ in range(3)]
    for d in doctors:
        d.send(Kind.SUBSCRIBE, uri="remedes.results")
    ack = app.send(Kind.PUBLISH, uri="remedes.results", payload={"mean_ms": 412})
    assert ack.kind is Kind.PUBLISHED
    for d in doctors:
        events = d.of_kind(Kind.EVENT)
        assert len(events) == 1
        assert events[0].payload == {"mean_ms": 412}
        assert events[0].publication_id == ack.publication_id


def test_publish_without_subscribers(r):
    app = Peer(r)
    assert app.send(Kind.PUBLISH, uri="nobody.listens").kind is Kind.PUBLISHED
    assert app.of_kind(Kind.EVENT) == []


def test_publisher_self_exclusion(r):
    app, doc = Peer(r), Peer(r)
    app.send(Kind.SUBSCRIBE, uri="t")
    doc.send(Kind.SUBSCRIBE, uri="t")
    app.send(Kind.PUBLISH, uri="t", payload={"n": 1})
    assert app.of_kind(Kind.EVENT) == []
    assert len(doc.of_kind(Kind.EVENT)) == 1


def test_unsubscribe_stops_delivery(r):
    app, doc = Peer(r), Peer(r)
    sub = doc.send(Kind.SUBSCRIBE, uri="t").subscription_id
    assert doc.send(Kind.UNSUBSCRIBE, subscription_id=sub).kind is Kind.UNSUBSCRIBED
    app.send(Kind.PUBLISH, uri="t")
    assert doc.of_kind(Kind.EVENT) == []
    again = doc.send(Kind.UNSUBSCRIBE, subscription_id=sub)
    assert again.uri == "err.no_such_subscription"


def test_realm_isolation(r):
    clinic_pub, lab_sub = Peer(r, "clinic"), Peer(r, "lab")
    lab_sub.send(Kind.SUBSCRIBE, uri="remedes.results")
    clinic_pub.send(Kind.PUBLISH, uri="remedes.results")
    assert lab_sub.of_kind(Kind.EVENT) == []


def test_single_registration_first_wins(r):
    a, b = Peer(r), Peer(r)
    assert a.send(Kind.REGISTER, uri="nao.speak").kind is Kind.REGISTERED
    dup = b.send(Kind.REGISTER, uri="nao.speak")
    assert dup.kind is Kind.ERROR and dup.uri == "err.procedure_already_exists"


def test_unregister_own_and_foreign(r):
    a, b = Peer(r), Peer(r)
    reg = a.send(Kind.REGISTER, uri="nao.speak").registration_id
    assert b.send(Kind.UNREGISTER, registration_id=reg).uri == "err.no_such_registration"
    assert a.send(Kind.UNREGISTER, registration_id=reg).kind is Kind.UNREGISTERED
    assert b.send(Kind.REGISTER, uri="nao.speak").kind is Kind.REGISTERED


def test_call_routed_and_correlated(r):
    caller, callee = Peer(r), Peer(r)
    reg = callee.send(Kind.REGISTER, uri="rpi.reminder").registration_id
    assert caller.send(Kind.CALL, request_id=41, uri="rpi.reminder", payload={"text": "x"}) is None
    inv = callee.of_kind(Kind.INVOCATION)[0]
    assert inv.registration_id == reg and inv.payload == {"text": "x"}
    callee.send(Kind.YIELD, request_id=inv.request_id, payload={"extractions": []})
    result = caller.of_kind(Kind.RESULT)[0]
    assert result.request_id == 41 and result.payload == {"extractions": []}
    assert r.pending_calls == 0


def test_interleaved_calls_no_crosstalk(r):
    caller, callee = Peer(r), Peer(r)
    callee.send(Kind.REGISTER, uri="echo")
    for tag in range(1, 11):
        caller.send(Kind.CALL, request_id=100 + tag, uri="echo", payload={"tag": tag})
    for inv in reversed(callee.of_kind(Kind.INVOCATION)):
        callee.send(Kind.YIELD, request_id=inv.request_id, payload=inv.payload)
    results = caller.of_kind(Kind.RESULT)
    assert len(results) == 10
    assert all(m.payload["tag"] + 100 == m.request_id for m in results)


def test_call_unknown_procedure(r):
    reply = Peer(r).send(Kind.CALL, uri="no.such", payload={})
    assert reply.kind is Kind.ERROR and reply.uri == "err.no_such_procedure"


def test_callee_error_forwarded(r):
    caller, callee = Peer(r), Peer(r)
    callee.send(Kind.REGISTER, uri="nao.record")
    caller.send(Kind.CALL, request_id=5, uri="nao.record")
    inv = callee.of_kind(Kind.INVOCATION)[0]
    callee.send(Kind.ERROR, request_kind=Kind.INVOCATION, request_id=inv.request_id, uri="err.no_utterance")
    err = caller.of_kind(Kind.ERROR)[0]
    assert err.request_id == 5 and err.uri == "err.no_utterance" and err.request_kind is Kind.CALL


def test_callee_gone_mid_call(r):
    caller, callee = Peer(r), Peer(r)
    callee.send(Kind.REGISTER, uri="nao.speak")
    caller.send(Kind.CALL, request_id=9, uri="nao.speak", payload={"text": "hi"})
    r.close_session(callee.session)
    err = caller.of_kind(Kind.ERROR)[0]
    assert err.request_id == 9 and err.uri == "err.callee_gone"
    assert caller.send(Kind.CALL, uri="nao.speak").uri == "err.no_such_procedure"


def test_timeout_default_and_override():
    t = [0.0]
    router = Router(["clinic"], call_timeout_s=30.0, clock=lambda: t[0])
    try:
        caller, callee = Peer(router), Peer(router)
        callee.send(Kind.REGISTER, uri="slow")
        caller.send(Kind.CALL, request_id=1, uri="slow")
        caller.send(Kind.CALL, request_id=2, uri="slow", details={"timeout": 500})
        assert router.expire_calls(0.4) == 0
        assert router.expire_calls(0.5) == 1
        assert [m.request_id for m in caller.of_kind(Kind.ERROR)] == [2]
        assert router.expire_calls(29.9) == 0
        assert router.expire_calls(30.0) == 1
        assert {m.uri for m in caller.of_kind(Kind.ERROR)} == {"err.timeout"}
        late = caller.of_kind(Kind.ERROR)
        for inv in callee.of_kind(Kind.INVOCATION):
            callee.send(Kind.YIELD, request_id=inv.request_id)
        assert caller.of_kind(Kind.RESULT) == [] and caller.of_kind(Kind.ERROR) == late
    finally:
        router.shutdown()


def test_close_subscriber_leaves_others(r):
    app, d1, d2 = Peer(r), Peer(r), Peer(r)
    d1.send(Kind.SUBSCRIBE, uri="t")
    d2.send(Kind.SUBSCRIBE, uri="t")
    r.close_session(d1.session)
    app.send(Kind.PUBLISH, uri="t")
    assert d1.of_kind(Kind.EVENT) == [] and len(d2.of_kind(Kind.EVENT)) == 1


def test_close_idle_session_leaves_tables(r):
    busy, idle = Peer(r), Peer(r)
    busy.send(Kind.SUBSCRIBE, uri="t")
    busy.send(Kind.REGISTER, uri="p")
    before = r.table_rows_for(busy.session.session_id)
    r.close_session(idle.session)
    assert r.table_rows_for(busy.session.session_id) == before
    assert idle.session.session_id not in r.sessions


def test_goodbye_closes(r):
    p = Peer(r)
    p.send(Kind.SUBSCRIBE, uri="t")
    r.handle(p.session, Message(Kind.GOODBYE, uri="close.normal"))
    assert p.inbox[-1].kind is Kind.GOODBYE
    assert r.table_rows_for(p.session.session_id) == []


def test_unexpected_kind_aborts(r):
    p = Peer(r)
    r.handle(p.session, Message(Kind.RESULT, request_id=1))
    assert p.inbox[-1].kind is Kind.ABORT and p.inbox[-1].uri == "err.protocol_violation"
    assert p.session.closed


ops = st.lists(
    st.tuples(st.sampled_from(["sub", "unsub", "reg", "unreg", "call", "close"]), st.integers(0, 4), st.integers(0, 2)),
    max_size=40,
)


@given(ops)
@settings(max_examples=150, deadline=None)
def test_table_hygiene_and_single_registration(script):
    router = Router(["clinic"])
    try:
        peers = [Peer(router) for _ in range(5)]
        topics, procs = ["t0", "t1", "t2"], ["p0", "p1", "p2"]
        subs: dict[int, list[int]] = {i: [] for i in range(5)}
        regs: dict[int, list[int]] = {i: [] for i in range(5)}
        for op, who, which in script:
            p = peers[who]
            if p.session.closed:
                continue
            if op == "sub":
                subs[who].append(p.send(Kind.SUBSCRIBE, uri=topics[which]).subscription_id)
            elif op == "unsub" and subs[who]:
                p.send(Kind.UNSUBSCRIBE, subscription_id=subs[who].pop())
            elif op == "reg":
                reply = p.send(Kind.REGISTER, uri=procs[which])
                if reply.kind is Kind.REGISTERED:
                    regs[who].append(reply.registration_id)
            elif op == "unreg" and regs[who]:
                p.send(Kind.UNREGISTER, registration_id=regs[who].pop())
            elif op == "call":
                p.send(Kind.CALL, uri=procs[which])
            elif op == "close":
                router.close_session(p.session)
                assert router.table_rows_for(p.session.session_id) == []
            tables = router.realms["clinic"]
            assert len(tables.procedures) == len(tables.registrations)
            for topic, rows in tables.topics.items():
                sessions = [sid for _, sid in rows]
                assert len(sessions) == len(set(sessions))
    finally:
        router.shutdown()
