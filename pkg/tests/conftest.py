from __future__ import annotations

from datetime import datetime

import pytest

from iotmesh.client import connect
from iotmesh.clock import SimClock
from iotmesh.router import Router
from iotmesh.stack import Stack

WORKED_TEXT = (
    "Remind me to take the medicine every day after lunch. "
    "Furthermore, remind me to practice REMEDES on Sundays nights"
)
WORKED_NOW = datetime(2017, 10, 18, 10, 0)


@pytest.fixture
def router():
    r = Router(["clinic", "lab"], call_timeout_s=5.0)
    yield r
    r.shutdown()


@pytest.fixture
def peers(router):
    opened = []

    def make(realm: str = "clinic"):
        conn = connect(router, realm)
        opened.append(conn)
        return conn

    yield make
    for conn in reversed(opened):
        conn.close()


@pytest.fixture
def sim_clock():
    return SimClock(WORKED_NOW)


@pytest.fixture
def stack(sim_clock, tmp_path):
    with Stack(sim_clock, store_path=tmp_path / "activities.jsonl", bridge=True) as s:
        yield s
