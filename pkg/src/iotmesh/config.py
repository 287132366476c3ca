"""Router configuration loaded from a single YAML file.

Schema::

    realms: [clinic]            # required, at least one
    listen: {host: 127.0.0.1, port: 9000}
    rest_bridge:                # optional, disabled by default
      enabled: true
      listen: {host: 127.0.0.1, port: 8080}
    log_level: INFO             # optional
    call_timeout_s: 30          # optional RPC deadline

Unknown keys are rejected at every level.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from iotmesh.errors import ConfigInvalid, ConfigNotFound, ConfigParse

_SEGMENT_RE = re.compile(r"[a-z0-9_]+")
_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

DEFAULT_CALL_TIMEOUT_S = 30.0


@dataclass(frozen=True)
class Endpoint:
    host: str = "127.0.0.1"
    port: int = 9000

    def __str__(self) -> str:
        return f"{self.host}:{self.port}"


@dataclass(frozen=True)
class BridgeConfig:
    enabled: bool = False
    listen: Endpoint = Endpoint(port=8080)


@dataclass(frozen=True)
class RouterConfig:
    realms: tuple[str, ...]
    listen: Endpoint = Endpoint()
    rest_bridge: BridgeConfig = field(default_factory=BridgeConfig)
    log_level: str = "INFO"
    call_timeout_s: float = DEFAULT_CALL_TIMEOUT_S


def parse_endpoint(text: str) -> Endpoint:
    """Parse ``host:port`` as used on the command line."""
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ConfigInvalid("endpoint", f"expected host:port, got {text!r}")
    return _endpoint({"host": host, "port": _int_or_fail(port, "endpoint")}, "endpoint")


def _int_or_fail(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigInvalid(key, f"port {text!r} is not an integer") from None


def _reject_unknown(raw: dict[str, Any], allowed: set[str], prefix: str) -> None:
    for key in raw:
        if key not in allowed:
            raise ConfigInvalid(f"{prefix}{key}", "unknown key")


def _mapping(raw: Any, key: str) -> dict[str, Any]:
    if not isinstance(raw, dict):
        raise ConfigInvalid(key, "expected a mapping")
    return raw


def _endpoint(raw: Any, key: str) -> Endpoint:
    raw = _mapping(raw, key)
    _reject_unknown(raw, {"host", "port"}, f"{key}.")
    host = raw.get("host", "127.0.0.1")
    if not isinstance(host, str) or not host:
        raise ConfigInvalid(f"{key}.host", "expected a non-empty string")
    port = raw.get("port")
    if port is None:
        raise ConfigInvalid(f"{key}.port", "required")
    if isinstance(port, bool) or not isinstance(port, int) or not 1 <= port <= 65535:
        raise ConfigInvalid(f"{key}.port", f"port {port!r} outside [1, 65535]")
    return Endpoint(host, port)


def config_from_dict(raw: Any) -> RouterConfig:
    raw = _mapping(raw, "<root>")
    _reject_unknown(raw, {"realms", "listen", "rest_bridge", "log_level", "call_timeout_s"}, "")

    realms = raw.get("realms")
    if not isinstance(realms, list) or not realms:
        raise ConfigInvalid("realms", "at least one realm is required")
    for realm in realms:
        if not isinstance(realm, str) or not _SEGMENT_RE.fullmatch(realm):
            raise ConfigInvalid("realms", f"invalid realm name {realm!r}")
    if len(set(realms)) != len(realms):
        raise ConfigInvalid("realms", "duplicate realm name")

    if "listen" not in raw:
        raise ConfigInvalid("listen", "required")
    listen = _endpoint(raw["listen"], "listen")

    bridge = BridgeConfig()
    if "rest_bridge" in raw:
        rb = _mapping(raw["rest_bridge"], "rest_bridge")
        _reject_unknown(rb, {"enabled", "listen"}, "rest_bridge.")
        enabled = rb.get("enabled", False)
        if not isinstance(enabled, bool):
            raise ConfigInvalid("rest_bridge.enabled", "expected a boolean")
        bridge_listen = _endpoint(rb["listen"], "rest_bridge.listen") if "listen" in rb else BridgeConfig().listen
        bridge = BridgeConfig(enabled, bridge_listen)

    log_level = raw.get("log_level", "INFO")
    if not isinstance(log_level, str) or log_level.upper() not in _LOG_LEVELS:
        raise ConfigInvalid("log_level", f"expected one of {', '.join(_LOG_LEVELS)}")

    timeout = raw.get("call_timeout_s", DEFAULT_CALL_TIMEOUT_S)
    if isinstance(timeout, bool) or not isinstance(timeout, (int, float)) or timeout <= 0:
        raise ConfigInvalid("call_timeout_s", "expected a positive number")

    return RouterConfig(tuple(realms), listen, bridge, log_level.upper(), float(timeout))


def load_config(path: str | Path) -> RouterConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigNotFound(str(path)) from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParse(f"{path}: {exc}") from exc
    return config_from_dict(raw)
