import json
import os
import subprocess
import sys
import textwrap

import pytest
from hypothesis import given, settings, strategies as st

from iotmesh.store import Activity, ActivityStore, Status


def add(store, day=18, body="x", recurring=False, interval=None):
    return store.add(2017, 10, day, 14, 0, body, recurring, interval)


def test_ids_monotone_and_persisted(tmp_path):
    path = tmp_path / "a.jsonl"
    s = ActivityStore(path)
    ids = [add(s, body=str(i)).activity_id for i in range(5)]
    assert ids == [1, 2, 3, 4, 5]
    s.mark_fired(2)
    reopened = ActivityStore(path)
    assert [a.activity_id for a in reopened.all()] == ids
    assert reopened.get(2).status is Status.FIRED
    assert add(reopened).activity_id == 6


def test_mark_fired_once(tmp_path):
    s = ActivityStore(tmp_path / "a.jsonl")
    a = add(s)
    s.mark_fired(a.activity_id)
    with pytest.raises(ValueError):
        s.mark_fired(a.activity_id)


def test_activity_invariants():
    with pytest.raises(ValueError):
        Activity(1, 2017, 2, 30, 9, 0, "x")
    with pytest.raises(ValueError):
        Activity(1, 2017, 2, 3, 9, 0, "x", recurring=True)


def test_torn_tail_ignored(tmp_path):
    path = tmp_path / "a.jsonl"
    s = ActivityStore(path)
    add(s, body="kept")
    with open(path, "ab") as fh:
        fh.write(b'{"activity_id": 2, "year": 20')
    reopened = ActivityStore(path)
    assert [a.body for a in reopened.all()] == ["kept"]
    add(reopened, body="next")
    assert [a.body for a in ActivityStore(path).all()] == ["kept", "next"]


def test_mid_file_corruption_raises(tmp_path):
    path = tmp_path / "a.jsonl"
    s = ActivityStore(path)
    add(s)
    add(s)
    lines = path.read_text().splitlines()
    path.write_text(lines[0] + "\ngarbage\n" + lines[1] + "\n")
    with pytest.raises(ValueError):
        ActivityStore(path)


def test_compaction(tmp_path):
    path = tmp_path / "a.jsonl"
    s = ActivityStore(path, compact_min_lines=8)
    for _ in range(3):
        add(s)
    for i in (1, 2, 3):
        s.mark_fired(i)
    for _ in range(10):
        s.mark_fired(add(s).activity_id)
    assert s.log_lines <= 2 * len(s) or s.log_lines < 8
    before = {a.activity_id: a for a in s.all()}
    s.compact()
    assert len(path.read_text().splitlines()) == len(s) == 13
    assert {a.activity_id: a for a in ActivityStore(path).all()} == before


def test_memory_store_has_no_file():
    s = ActivityStore()
    add(s)
    assert len(s) == 1 and s.path is None


@given(st.lists(st.tuples(st.booleans(), st.integers(1, 28)), max_size=30))
@settings(max_examples=60, deadline=None)
def test_replay_equals_live_state(tmp_path_factory, script):
    path = tmp_path_factory.mktemp("store") / "a.jsonl"
    s = ActivityStore(path, compact_min_lines=4)
    for fire, day in script:
        a = s.add(2017, 10, day, 9, 0, "b")
        if fire:
            s.mark_fired(a.activity_id)
    assert ActivityStore(path).all() == s.all()


def test_sigkill_during_appends_loses_nothing_acknowledged(tmp_path):
    """A child appends and reports each durable id; after SIGKILL every reported id must replay."""
    path = tmp_path / "a.jsonl"
    child = textwrap.dedent(
        f"""
        import sys
        from iotmesh.store import ActivityStore
        s = ActivityStore({str(path)!r})
        while True:
            a = s.add(2017, 10, 18, 14, 0, "pill")
            print(a.activity_id, flush=True)
        """
    )
    proc = subprocess.Popen([sys.executable, "-c", child], stdout=subprocess.PIPE, text=True)
    acked = []
    while len(acked) < 50:
        acked.append(int(proc.stdout.readline()))
    proc.kill()
    proc.wait()
    replayed = {a.activity_id for a in ActivityStore(path).all()}
    assert set(acked) <= replayed
