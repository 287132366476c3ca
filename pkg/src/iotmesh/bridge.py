"""HTTP facade over the router.

``POST|GET /call/a/b`` issues a CALL to ``a.b`` and ``POST /publish/a/b``
publishes to topic ``a.b``.  All traffic goes through one long-lived bridge
session.  Response bodies use the same canonical serialization as wire
payloads, so a bridged result is byte-identical to the native one.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any
from urllib.parse import parse_qsl, urlsplit

from iotmesh import __version__, remedes, robot, services
from iotmesh.client import PeerConnection
from iotmesh.errors import ApplicationError, ConnectionClosed, InvalidMessage
from iotmesh.logs import log_event
from iotmesh.protocol import canonical, validate_uri

log = logging.getLogger(__name__)

CALL = "call"
PUBLISH = "publish"

# Router error URI -> HTTP status.  Errors raised by callee handlers carry
# their own URIs and all map to 502 (the upstream node failed the request).
STATUS_BY_ERROR: dict[str, int] = {
    "err.no_such_procedure": 404,
    "err.timeout": 504,
    "err.callee_gone": 502,
    "err.invalid_uri": 422,
    "err.handler_failed": 502,
    "err.procedure_already_exists": 409,
    "err.no_such_registration": 404,
    "err.no_such_subscription": 404,
    "err.no_such_realm": 404,
    "err.protocol_violation": 400,
}
UPSTREAM_ERROR_STATUS = 502


def status_for(uri: str) -> int:
    return STATUS_BY_ERROR.get(uri, UPSTREAM_ERROR_STATUS)


@dataclass(frozen=True)
class BridgeRoute:
    method: str
    path: str
    interaction: str
    summary: str = ""

    @property
    def uri(self) -> str:
        return path_to_uri(self.path.split("/", 2)[2])


def path_to_uri(rest: str) -> str:
    return ".".join(rest.split("/"))


def uri_to_path(interaction: str, uri: str) -> str:
    return f"/{interaction}/" + uri.replace(".", "/")


def default_routes() -> list[BridgeRoute]:
    return [
        BridgeRoute("POST", uri_to_path(CALL, robot.SPEAK), CALL, "Speak a sentence through the robot"),
        BridgeRoute("GET", uri_to_path(CALL, robot.RECORD), CALL, "Record the user's next utterance"),
        BridgeRoute("POST", uri_to_path(CALL, services.SPEECH_RECOGNITION), CALL, "Transcribe an audio payload"),
        BridgeRoute("POST", uri_to_path(CALL, services.REMINDER), CALL, "Extract reminders from text"),
        BridgeRoute("POST", uri_to_path(CALL, remedes.START), CALL, "Start a reflex exercise"),
        BridgeRoute("GET", uri_to_path(CALL, remedes.RESULTS), CALL, "Fetch exercise results"),
        BridgeRoute("POST", uri_to_path(PUBLISH, remedes.RESULTS_TOPIC), PUBLISH, "Publish exercise results"),
    ]


def _coerce_query(value: str) -> Any:
    try:
        return json.loads(value)
    except ValueError:
        return value


def _error_body(uri: str, message: str = "") -> dict[str, Any]:
    return {"error": uri, "message": message} if message else {"error": uri}


def _json_object(schema_desc: str) -> dict[str, Any]:
    return {"description": schema_desc, "content": {"application/json": {"schema": {"type": "object"}}}}


class RestBridge:
    def __init__(self, conn: PeerConnection, routes: list[BridgeRoute] | None = None):
        self.conn = conn
        self.routes: list[BridgeRoute] = list(routes if routes is not None else default_routes())
        self._document = self.build_openapi()

    def add_route(self, route: BridgeRoute) -> None:
        self.routes.append(route)
        self._document = self.build_openapi()

    # -- description document -------------------------------------------------

    def build_openapi(self) -> dict[str, Any]:
        errors = {
            "400": {"description": "Malformed request body"},
            "404": {"description": "No such procedure"},
            "422": {"description": "Invalid URI"},
            "502": {"description": "Callee failed or disconnected"},
            "504": {"description": "Call timed out"},
        }
        paths: dict[str, Any] = {}
        for route in self.routes:
            op: dict[str, Any] = {
                "operationId": f"{route.interaction}_{route.uri.replace('.', '_')}_{route.method.lower()}",
                "summary": route.summary or f"{route.interaction.upper()} {route.uri}",
            }
            if route.interaction == CALL:
                op["responses"] = {"200": _json_object("Result payload"), **errors}
            else:
                op["responses"] = {"202": _json_object("Published"), "400": errors["400"], "422": errors["422"]}
            if route.method == "POST":
                op["requestBody"] = {"required": False, "content": {"application/json": {"schema": {"type": "object"}}}}
            paths.setdefault(route.path, {})[route.method.lower()] = op

        param = {
            "in": "path",
            "required": True,
            "schema": {"type": "string"},
            "description": "URI with '.' written as '/', e.g. nao/speak for nao.speak",
        }
        generic_body = {"required": False, "content": {"application/json": {"schema": {"type": "object"}}}}
        paths["/call/{procedure}"] = {
            "parameters": [{"name": "procedure", **param}],
            "post": {
                "operationId": "call_post",
                "summary": "Call any registered procedure",
                "requestBody": generic_body,
                "responses": {"200": _json_object("Result payload"), **errors},
            },
            "get": {
                "operationId": "call_get",
                "summary": "Call any registered procedure; query parameters form the payload",
                "responses": {"200": _json_object("Result payload"), **errors},
            },
        }
        paths["/publish/{topic}"] = {
            "parameters": [{"name": "topic", **param}],
            "post": {
                "operationId": "publish_post",
                "summary": "Publish an event to any topic",
                "requestBody": generic_body,
                "responses": {"202": _json_object("Published"), "400": errors["400"], "422": errors["422"]},
            },
        }
        paths["/openapi"] = {
            "get": {"operationId": "describe", "summary": "This document", "responses": {"200": _json_object("API description")}}
        }
        return {
            "openapi": "3.0.3",
            "info": {"title": "iotmesh REST bridge", "version": __version__},
            "paths": paths,
        }

    def describe(self) -> dict[str, Any]:
        return self._document

    # -- request handling ----------------------------------------------------------

    def handle(self, method: str, target: str, body: bytes | None = None) -> tuple[int, bytes]:
        """Serve one request; returns ``(status, canonical JSON body)``."""
        status, payload = self._dispatch(method.upper(), target, body or b"")
        return status, canonical(payload)

    def _dispatch(self, method: str, target: str, body: bytes) -> tuple[int, Any]:
        parts = urlsplit(target)
        path = parts.path
        if path == "/openapi":
            if method != "GET":
                return 405, _error_body("err.method_not_allowed")
            return 200, self._document
        if path.startswith("/call/") or path == "/call":
            if method not in ("GET", "POST"):
                return 405, _error_body("err.method_not_allowed")
            if method == "GET":
                payload: Any = {k: _coerce_query(v) for k, v in parse_qsl(parts.query, keep_blank_values=True)}
            else:
                payload = self._parse_body(body)
                if payload is None:
                    return 400, _error_body("err.bad_request", "body must be a JSON object")
            return self._call(path_to_uri(path[len("/call/"):]), payload)
        if path.startswith("/publish/") or path == "/publish":
            if method != "POST":
                return 405, _error_body("err.method_not_allowed")
            payload = self._parse_body(body)
            if payload is None:
                return 400, _error_body("err.bad_request", "body must be a JSON object")
            return self._publish(path_to_uri(path[len("/publish/"):]), payload)
        return 404, _error_body("err.no_such_route", path)

    @staticmethod
    def _parse_body(body: bytes) -> dict[str, Any] | None:
        if not body.strip():
            return {}
        try:
            value = json.loads(body)
        except ValueError:
            return None
        return value if isinstance(value, dict) else None

    def _call(self, uri: str, payload: dict[str, Any]) -> tuple[int, Any]:
        if not validate_uri(uri):
            return 422, _error_body("err.invalid_uri", f"bad procedure path for {uri!r}")
        try:
            return 200, self.conn.call(uri, payload)
        except ApplicationError as exc:
            return status_for(exc.uri), _error_body(exc.uri, exc.message)
        except InvalidMessage as exc:
            return 400, _error_body("err.bad_request", str(exc))
        except ConnectionClosed as exc:
            return 503, _error_body("err.bridge_disconnected", str(exc))

    def _publish(self, uri: str, payload: dict[str, Any]) -> tuple[int, Any]:
        if not validate_uri(uri):
            return 422, _error_body("err.invalid_uri", f"bad topic path for {uri!r}")
        try:
            self.conn.publish(uri, payload)
        except ApplicationError as exc:
            return status_for(exc.uri), _error_body(exc.uri, exc.message)
        except InvalidMessage as exc:
            return 400, _error_body("err.bad_request", str(exc))
        except ConnectionClosed as exc:
            return 503, _error_body("err.bridge_disconnected", str(exc))
        return 202, {"published": True}

    # -- HTTP server ---------------------------------------------------------

    def serve(self, host: str = "127.0.0.1", port: int = 0) -> BridgeServer:
        return BridgeServer(self, host, port).start()


class _RequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: BridgeServer

    def _serve(self) -> None:
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        status, data = self.server.bridge.handle(self.command, self.path, body)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    do_GET = do_POST = do_PUT = do_DELETE = _serve

    def log_message(self, fmt: str, *args: Any) -> None:
        log_event(log, logging.DEBUG, "http", request=self.requestline, status=args[1] if len(args) > 1 else "")


class BridgeServer(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 128  # the stdlib default of 5 resets bursts of clients

    def __init__(self, bridge: RestBridge, host: str, port: int):
        super().__init__((host, port), _RequestHandler)
        self.bridge = bridge
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> BridgeServer:
        self._thread = threading.Thread(target=self.serve_forever, name="rest-bridge", daemon=True)
        self._thread.start()
        host, port = self.server_address[:2]
        log_event(log, logging.INFO, "bridge.listening", host=host, port=port)
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()

