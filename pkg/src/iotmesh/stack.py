"""Boot a whole star topology (router, nodes, calendar app) in one process."""

from __future__ import annotations

from pathlib import Path

from iotmesh.bridge import RestBridge
from iotmesh.calendar_app import CalendarApp
from iotmesh.client import PeerConnection, connect
from iotmesh.clock import SimClock
from iotmesh.remedes import ExerciseConfig, MasterController, RemedesNode
from iotmesh.robot import RobotAgent, RobotNode
from iotmesh.router import Router
from iotmesh.services import ServicesNode
from iotmesh.store import ActivityStore
from iotmesh.transport import RouterServer

DEFAULT_REALM = "clinic"


class Stack:
    """Router plus every spoke.  ``sockets=True`` links peers over real TCP."""

    def __init__(
        self,
        clock: SimClock,
        *,
        realm: str = DEFAULT_REALM,
        store_path: str | Path | None = None,
        sockets: bool = False,
        bridge: bool = False,
        exercise: ExerciseConfig | None = None,
        n_pads: int = 4,
        call_timeout_s: float = 30.0,
    ):
        self.clock = clock
        self.realm = realm
        self.router = Router([realm], call_timeout_s=call_timeout_s)
        self.server = RouterServer(self.router).start() if sockets else None
        self._peers: list[PeerConnection] = []

        self.robot = RobotNode(self.peer(), RobotAgent(clock=clock))
        self.robot.start()
        self.remedes = RemedesNode(self.peer(), MasterController(n_pads, clock, exercise))
        self.remedes.start()
        self.services = ServicesNode(self.peer(), clock)
        self.services.start()
        self.store = ActivityStore(store_path)
        self.app = CalendarApp(self.peer(), self.store, clock)
        self.bridge = RestBridge(self.peer()) if bridge else None

    def peer(self) -> PeerConnection:
        target = self.server.address if self.server is not None else self.router
        conn = connect(target, self.realm)
        self._peers.append(conn)
        return conn

    def restart_app(self) -> CalendarApp:
        """Drop the calendar app without closing its store, then start a fresh one from disk."""
        self.app.conn.close()
        self.store = ActivityStore(self.store.path)
        self.app = CalendarApp(self.peer(), self.store, self.clock)
        return self.app

    def close(self) -> None:
        for conn in reversed(self._peers):
            conn.close()
        if self.server is not None:
            self.server.stop()
        self.router.shutdown()

    def __enter__(self) -> Stack:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()
