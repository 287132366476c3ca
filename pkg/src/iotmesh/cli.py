"""``iotmesh`` command line: run components, replay scenarios, parse text.

Exit status: 0 success, 1 runtime failure (including a failed scenario
expectation), 2 bad configuration or usage.
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading
from datetime import datetime, timezone
from typing import Callable, Sequence

from iotmesh.bridge import RestBridge
from iotmesh.calendar_app import CalendarApp
from iotmesh.client import connect
from iotmesh.clock import SimClock
from iotmesh.config import parse_endpoint, load_config
from iotmesh.errors import ConfigError, ConnectFailed, IotMeshError, RealmRejected
from iotmesh.logs import log_event, setup_logging
from iotmesh.nlp import ReferenceClock, parse_reminders
from iotmesh.protocol import canonical, validate_uri
from iotmesh.remedes import MasterController, RemedesNode, load_exercise_config
from iotmesh.robot import RobotAgent, RobotNode
from iotmesh.router import Router
from iotmesh.scenario import ScenarioError, run_scenario
from iotmesh.services import ServicesNode
from iotmesh.stack import DEFAULT_REALM
from iotmesh.store import ActivityStore
from iotmesh.transport import RouterServer

log = logging.getLogger("iotmesh")


def _wait_for_signal(done: Callable[[], bool] = lambda: False) -> None:
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    while not stop.wait(0.2) and not done():
        pass


def cmd_router(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    setup_logging(cfg.log_level)
    router = Router.from_config(cfg)
    try:
        server = RouterServer(router, cfg.listen.host, cfg.listen.port).start()
    except OSError as exc:
        print(f"cannot listen on {cfg.listen}: {exc}", file=sys.stderr)
        return 1
    bridge_server = None
    if cfg.rest_bridge.enabled:
        bridge = RestBridge(connect(router, cfg.realms[0]))
        bridge_server = bridge.serve(cfg.rest_bridge.listen.host, cfg.rest_bridge.listen.port)
    _wait_for_signal()
    if bridge_server is not None:
        bridge_server.stop()
    server.stop()
    router.shutdown()
    return 0


def cmd_node(args: argparse.Namespace) -> int:
    setup_logging()
    try:
        conn = connect(parse_endpoint(args.router), args.realm)
        clock = SimClock.wall()
        if args.kind == "robot":
            RobotNode(conn, RobotAgent(clock=clock)).start()
        elif args.kind == "remedes":
            exercise = load_exercise_config(args.exercise) if args.exercise else None
            RemedesNode(conn, MasterController(args.pads, clock, exercise)).start()
        else:
            ServicesNode(conn).start()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConnectFailed, RealmRejected) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except IotMeshError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    log_event(log, logging.INFO, "node.started", kind=args.kind, session=conn.session_id)
    _wait_for_signal(lambda: conn.closed)
    if conn.closed:
        print("connection to router lost", file=sys.stderr)
        return 1
    conn.close()
    return 0


def cmd_app(args: argparse.Namespace) -> int:
    setup_logging()
    try:
        conn = connect(parse_endpoint(args.router), args.realm)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConnectFailed, RealmRejected) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    app = CalendarApp(conn, ActivityStore(args.store), SimClock.wall())
    if args.capture:
        try:
            app.store_activity_flow()
        except IotMeshError as exc:
            print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
            return 1
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    app.reminder_loop(args.tick, stop)
    conn.close()
    return 0


def cmd_scenario(args: argparse.Namespace) -> int:
    setup_logging("WARNING")
    try:
        report = run_scenario(args.path, sockets=args.sockets)
    except (ScenarioError, OSError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    print("scenario FAILED" if report.failed else "scenario passed")
    return report.exit_code


def cmd_subscribe(args: argparse.Namespace) -> int:
    setup_logging("WARNING")
    if not validate_uri(args.topic):
        print(f"invalid topic {args.topic!r}", file=sys.stderr)
        return 1
    try:
        conn = connect(parse_endpoint(args.router), args.realm)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConnectFailed, RealmRejected) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    done = threading.Event()
    seen = 0

    def on_event(payload: dict) -> None:
        nonlocal seen
        stamp = datetime.now(timezone.utc).isoformat(timespec="milliseconds")
        print(f"{stamp} {args.topic} {canonical(payload).decode('utf-8')}", flush=True)
        seen += 1
        if args.count and seen >= args.count:
            done.set()

    try:
        conn.subscribe(args.topic, on_event)
    except IotMeshError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"subscribed {args.topic}", file=sys.stderr, flush=True)
    _wait_for_signal(lambda: done.is_set() or conn.closed)
    lost = conn.closed
    conn.close()
    return 1 if lost and not (args.count and seen >= args.count) else 0


def cmd_parse(args: argparse.Namespace) -> int:
    try:
        now = datetime.fromisoformat(args.now) if args.now else datetime.now().replace(second=0, microsecond=0)
    except ValueError:
        print(f"--now is not an ISO 8601 datetime: {args.now!r}", file=sys.stderr)
        return 2
    for extraction in parse_reminders(args.text, ReferenceClock(now)):
        print(canonical(extraction.to_payload()).decode("utf-8"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iotmesh", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("router", help="run the router (and REST bridge if configured)")
    p.add_argument("--config", required=True, help="router YAML configuration")
    p.set_defaults(func=cmd_router)

    def peer_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--router", default="127.0.0.1:9000", help="router host:port")
        p.add_argument("--realm", default=DEFAULT_REALM)

    p = sub.add_parser("node", help="run a simulated node")
    p.add_argument("kind", choices=("robot", "remedes", "services"))
    peer_flags(p)
    p.add_argument("--exercise", help="exercise YAML for the remedes node")
    p.add_argument("--pads", type=int, default=4, help="number of remedes pads")
    p.set_defaults(func=cmd_node)

    p = sub.add_parser("app", help="run an application")
    p.add_argument("name", choices=("calendar",))
    peer_flags(p)
    p.add_argument("--store", required=True, help="activity store file")
    p.add_argument("--tick", type=float, default=1.0, help="seconds between reminder ticks")
    p.add_argument("--capture", action="store_true", help="run the store-activity flow once before looping")
    p.set_defaults(func=cmd_app)

    p = sub.add_parser("scenario", help="replay a scripted scenario")
    p.add_argument("action", choices=("run",))
    p.add_argument("path", help="scenario file, or 'example' for the shipped example")
    p.add_argument("--sockets", action="store_true", help="link peers over TCP instead of loopback")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("subscribe", help="print every event on a topic")
    p.add_argument("topic")
    peer_flags(p)
    p.add_argument("--count", type=int, default=0, help="exit after this many events")
    p.set_defaults(func=cmd_subscribe)

    p = sub.add_parser("parse", help="extract reminders from text")
    p.add_argument("--now", help="reference time, ISO 8601 (default: now)")
    p.add_argument("text")
    p.set_defaults(func=cmd_parse)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
