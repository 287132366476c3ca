import json

import pytest
from hypothesis import given, settings, strategies as st

from iotmesh.errors import InvalidMessage, MalformedFrame, UnknownKind
from iotmesh.protocol import LAYOUT, Kind, Message, decode, encode, validate_uri

from strategies import messages


def test_hello_golden():
    assert encode(Message(Kind.HELLO, realm="clinic")) == b'[1,"clinic",{}]\n'


def test_publish_golden():
    m = Message(Kind.PUBLISH, request_id=7, uri="remedes.results", payload={"mean_ms": 412})
    assert encode(m) == b'[16,7,{},"remedes.results",{"mean_ms":412}]\n'


def test_call_without_uri_rejected():
    with pytest.raises(InvalidMessage):
        Message(Kind.CALL, request_id=1)


def test_welcome_decodes():
    m = decode(b"[2,11,{}]")
    assert m.kind is Kind.WELCOME
    assert m.session_id == 11


def test_unknown_kind():
    with pytest.raises(UnknownKind):
        decode(b"[99]")


@pytest.mark.parametrize(
    "line",
    [b"", b"not json", b"{}", b"[]", b'["1"]', b"[1.5]", b"[16,1,{},\"a\",{\"x\":NaN}]", b"\xff\xfe", b"[1,\n\"a\",{}]"],
)
def test_malformed_frames(line):
    with pytest.raises(MalformedFrame):
        decode(line)


@pytest.mark.parametrize("line", [b"[1]", b'[1,"clinic"]', b'[2,0,{}]', b'[16,7,{},"t"]', b'[48,1,{},"",{}]'])
def test_wrong_fields(line):
    with pytest.raises(InvalidMessage):
        decode(line)


@pytest.mark.parametrize(
    "uri,ok",
    [
        ("nao.speak", True),
        ("remedes.exercise.start", True),
        ("a", True),
        ("x_1.y2", True),
        ("Nao..speak", False),
        ("", False),
        (".nao", False),
        ("nao.", False),
        ("nao speak", False),
        ("a" * 256, True),
        ("a" * 257, False),
    ],
)
def test_validate_uri(uri, ok):
    assert validate_uri(uri) is ok


def test_mandatory_fields_enforced_for_every_kind():
    for kind, fields in LAYOUT.items():
        required = [f for f in fields if f not in ("details", "payload")]
        for f in required:
            kwargs = {name: _sample(name) for name in required if name != f}
            with pytest.raises(InvalidMessage):
                Message(kind, **kwargs)


def _sample(field):
    return {
        "realm": "clinic",
        "uri": "a.b",
        "request_kind": Kind.CALL,
    }.get(field, 1)


def test_interior_newline_is_escaped():
    m = Message(Kind.PUBLISH, request_id=1, uri="t", payload={"s": "two\nlines", "u": "ünï"})
    wire = encode(m)
    assert wire.count(b"\n") == 1 and wire.endswith(b"\n")
    assert decode(wire) == m


def test_non_finite_payload_rejected():
    with pytest.raises(InvalidMessage):
        Message(Kind.PUBLISH, request_id=1, uri="t", payload={"x": float("inf")})


@given(messages())
@settings(max_examples=500)
def test_round_trip(m):
    assert decode(encode(m)) == m


@given(messages())
@settings(max_examples=200)
def test_frame_isolation(m):
    wire = encode(m)
    assert wire.count(b"\n") == 1 and wire.endswith(b"\n")
    assert json.loads(wire)[0] == int(m.kind)
