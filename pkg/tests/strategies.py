"""Hypothesis generators shared by the protocol and acceptance tests."""

from __future__ import annotations

from hypothesis import strategies as st

from iotmesh.protocol import ERROR_REQUEST_KINDS, LAYOUT, Kind, Message

MAX_ID = 2**53 - 1

segment = st.text("abcdefghijklmnopqrstuvwxyz0123456789_", min_size=1, max_size=8)
uris = st.lists(segment, min_size=1, max_size=4).map(".".join)
ids = st.integers(min_value=1, max_value=MAX_ID)

scalars = st.one_of(
    st.none(),
    st.booleans(),
    st.integers(min_value=-(2**63), max_value=2**63),
    st.floats(allow_nan=False, allow_infinity=False),
    st.text(max_size=20),
)
values = st.recursive(
    scalars,
    lambda inner: st.one_of(
        st.lists(inner, max_size=4),
        st.dictionaries(st.text(max_size=8), inner, max_size=4),
    ),
    max_leaves=8,
)
payloads = st.dictionaries(st.text(max_size=8), values, max_size=4)

_FIELD_STRATEGIES = {
    "realm": uris,
    "uri": uris,
    "details": payloads,
    "payload": payloads,
    "request_id": ids,
    "session_id": ids,
    "subscription_id": ids,
    "registration_id": ids,
    "publication_id": ids,
    "request_kind": st.sampled_from(sorted(ERROR_REQUEST_KINDS)),
}


@st.composite
def messages(draw, kinds=st.sampled_from(list(Kind))):
    kind = draw(kinds)
    fields = {name: draw(_FIELD_STRATEGIES[name]) for name in LAYOUT[kind]}
    return Message(kind, **fields)
