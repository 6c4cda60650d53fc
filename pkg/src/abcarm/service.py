"""Dual-interface control service: one core system, two HTTP ports.

The user port and the assistant port expose different capabilities over
the same arm, library, and safety interlock; the TCP port is the whole
privilege boundary (trusted-LAN deployment). Wrong-role requests get 403.

All arm-affecting commands funnel through the shared Controller, whose
30 Hz loop runs on a background thread. Every state change fans out as a
WebSocket event {type, seq, payload} with seq strictly increasing per
connection; slow clients are disconnected rather than allowed to block
the control loop.

Captured images are handed to the recommendation backend and dropped;
nothing in this service ever writes image bytes to disk.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import queue
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import uvicorn
from fastapi import FastAPI, HTTPException, Request, UploadFile, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .arm import create_arm, default_actuator_specs, default_chain, load_arm_config
from .control import Controller
from .errors import (
    AbcArmError,
    AlreadyRecording,
    BackendTimeout,
    BackendUnavailable,
    Busy,
    ConfigError,
    CorruptFile,
    DuplicateName,
    EmptyName,
    LibraryTooSmall,
    Locked,
    NotFound,
    NotLocked,
    NotRecording,
    ParseFailed,
    PlaybackInProgress,
    PortInUse,
    SchemaVersionMismatch,
    StorageError,
    TorqueDisabled,
    TorqueEnabled,
    UnplayableClip,
)
from .memory import HOME_ACTION, ActionClip, ActionLibrary
from .recommend import (
    LiveVisionBackend,
    MockVisionBackend,
    RecommendationRequest,
    RecommendationResult,
    request_recommendation,
)
from .safety import (
    REASON_ESTOP_ASSISTANT,
    REASON_ESTOP_USER,
    REASON_TAP_STOP,
    DeviationTracker,
    SafetyInterlock,
)

USER_ROLE = "user"
ASSISTANT_ROLE = "assistant"

HISTORY_CAP = 50
MIN_SCAN_INTERVAL_S = 0.2


# -- configuration --------------------------------------------------------------

@dataclass
class BackendConfig:
    kind: str = "mock"  # "mock" | "live"
    mock_path: Optional[str] = None
    endpoint: str = "https://api.openai.com/v1"
    model: str = "gpt-4o-2024-05-13"
    timeout_s: float = 15.0

    def build(self):
        if self.kind == "mock":
            if self.mock_path:
                return MockVisionBackend.from_file(self.mock_path)
            return MockVisionBackend({})
        if self.kind == "live":
            return LiveVisionBackend(
                endpoint=self.endpoint, model=self.model, timeout_s=self.timeout_s
            )
        raise ConfigError(f"unknown backend kind {self.kind!r}")


@dataclass
class WatchdogConfig:
    epsilon_rad: float = 0.1
    window_s: float = 0.5
    monitor_rate_hz: float = 30.0

    def __post_init__(self) -> None:
        if self.window_s <= 0:
            raise ConfigError("watchdog window must be positive")
        if self.monitor_rate_hz <= 0:
            raise ConfigError("watchdog monitor rate must be positive")


@dataclass
class ServiceConfig:
    user_port: int = 8600
    assistant_port: int = 8601
    host: str = "127.0.0.1"
    library_path: str = "abcarm_library.json"
    arm_config: Optional[str] = None
    backend: BackendConfig = field(default_factory=BackendConfig)
    watchdog: WatchdogConfig = field(default_factory=WatchdogConfig)
    input_defaults: dict = field(default_factory=lambda: {"scan_interval_s": 1.0,
                                                          "debounce_s": 0.3})
    home_after_play: bool = True

    def __post_init__(self) -> None:
        if self.user_port == self.assistant_port:
            raise ConfigError("user and assistant interfaces need distinct ports")
        for port in (self.user_port, self.assistant_port):
            if not 0 < port < 65536:
                raise ConfigError(f"port {port} out of range")

    @classmethod
    def from_dict(cls, doc: dict) -> "ServiceConfig":
        try:
            backend = BackendConfig(**doc.get("backend", {}))
            watchdog = WatchdogConfig(**doc.get("watchdog", {}))
            known = {
                k: doc[k]
                for k in ("user_port", "assistant_port", "host", "library_path",
                          "arm_config", "input_defaults", "home_after_play")
                if k in doc
            }
            return cls(backend=backend, watchdog=watchdog, **known)
        except TypeError as exc:
            raise ConfigError(f"invalid service config: {exc}") from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        return cls.from_dict(doc)


# -- event fan-out ----------------------------------------------------------------

class EventBroker:
    """Thread-safe pub/sub with bounded per-subscriber queues.

    A subscriber whose queue overflows is marked dead and disconnected by
    its WebSocket loop; publishing never blocks the control loop.
    """

    def __init__(self, buffer_size: int = 512):
        self.buffer_size = buffer_size
        self._lock = threading.Lock()
        self._subs: dict[int, "_Subscription"] = {}
        self._ids = itertools.count(1)

    def subscribe(self) -> "_Subscription":
        sub = _Subscription(next(self._ids), self.buffer_size)
        with self._lock:
            self._subs[sub.id] = sub
        return sub

    def unsubscribe(self, sub: "_Subscription") -> None:
        with self._lock:
            self._subs.pop(sub.id, None)

    def publish(self, kind: str, payload: dict) -> None:
        with self._lock:
            subs = list(self._subs.values())
        for sub in subs:
            try:
                sub.queue.put_nowait((kind, payload))
            except queue.Full:
                sub.dead = True


class _Subscription:
    def __init__(self, sub_id: int, buffer_size: int):
        self.id = sub_id
        self.queue: "queue.Queue[tuple[str, dict]]" = queue.Queue(maxsize=buffer_size)
        self.dead = False


# -- core system -------------------------------------------------------------------

class AbcSystem:
    """Everything both interfaces share: arm, controller, library, backend."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        if config.arm_config:
            specs, chain = load_arm_config(config.arm_config)
        else:
            specs, chain = default_actuator_specs(), default_chain()
        self.arm = create_arm(specs, chain)
        tracker = DeviationTracker(
            epsilon_rad=config.watchdog.epsilon_rad,
            window_s=config.watchdog.window_s,
            monitor_rate_hz=config.watchdog.monitor_rate_hz,
        )
        self.interlock = SafetyInterlock(tracker)
        self.library = ActionLibrary.load_or_create(config.library_path)
        self.controller = Controller(
            self.arm,
            self.interlock,
            self.library,
            tick_rate_hz=config.watchdog.monitor_rate_hz,
            home_after_play=config.home_after_play,
        )
        self.backend = config.backend.build()
        self.broker = EventBroker()
        self.controller.add_listener(self.broker.publish)
        self.history: deque[tuple[str, datetime]] = deque(maxlen=HISTORY_CAP)
        self.input_settings = dict(config.input_defaults)
        self.pending_clips: "dict[str, ActionClip]" = {}
        self._recommendation: dict = {"status": "none"}
        self._capture_lock = threading.Lock()

    # lifecycle -----------------------------------------------------------------

    def start(self) -> None:
        self.controller.start()

    def shutdown(self) -> None:
        """Stop the loop and leave the arm torque-off."""
        self.controller.stop_loop()

    # shared operations ------------------------------------------------------------

    def play(self, name: str):
        handle = self.controller.play(name)
        self.history.appendleft((name, datetime.now(timezone.utc)))
        return handle

    def stop(self, reason: str) -> dict:
        state = self.controller.stop(reason)
        return _safety_dict(state)

    def capture(self, image: bytes) -> RecommendationResult:
        """Run one recommendation over the current library for an uploaded image."""
        handle = self.controller.playback()
        if handle is not None and handle.active:
            raise Busy("cannot capture while a playback is active")
        names = self.library.names(include_home=True)
        if len([n for n in names if n != HOME_ACTION]) < 2:
            raise LibraryTooSmall("record at least two actions before asking for suggestions")
        with self._capture_lock:
            self._set_recommendation({"status": "pending"})
            try:
                result = request_recommendation(
                    self.backend, RecommendationRequest(image, tuple(names))
                )
            except AbcArmError as exc:
                self._set_recommendation({
                    "status": "error",
                    "detail": _human_status(exc),
                })
                raise
            self._set_recommendation({
                "status": "ready",
                "suggestions": list(result.suggestions),
                "latency_s": result.latency_s,
                "backend_id": result.backend_id,
            })
            return result

    def recommendation_state(self) -> dict:
        return dict(self._recommendation)

    def _set_recommendation(self, state: dict) -> None:
        self._recommendation = state
        self.broker.publish("recommendation", dict(state))

    def publish_library(self, event: str, **extra) -> None:
        payload = {"event": event, "names": self.library.names(include_home=True)}
        payload.update(extra)
        self.broker.publish("library", payload)

    def update_input_settings(self, scan_interval_s: float, debounce_s: float) -> dict:
        if scan_interval_s < MIN_SCAN_INTERVAL_S:
            raise ConfigError(f"scan interval must be >= {MIN_SCAN_INTERVAL_S}s")
        if debounce_s < 0:
            raise ConfigError("debounce must be >= 0")
        self.input_settings = {"scan_interval_s": scan_interval_s, "debounce_s": debounce_s}
        return dict(self.input_settings)

    def initial_events(self) -> list[tuple[str, dict]]:
        """Baseline events a fresh WebSocket client receives before the stream."""
        snap = self.arm.snapshot()
        return [
            ("arm", self.controller.arm_payload(snap)),
            ("safety", _safety_dict(self.interlock.state)),
            ("library", {"event": "snapshot",
                         "names": self.library.names(include_home=True)}),
        ]


def _safety_dict(state) -> dict:
    return {
        "mode": state.mode,
        "reason": state.locked_reason,
        "joint": state.deviation_joint,
        "since": state.since,
    }


def _human_status(exc: AbcArmError) -> str:
    if isinstance(exc, BackendTimeout):
        return "The suggestion service took too long. Try capturing again."
    if isinstance(exc, BackendUnavailable):
        return "The suggestion service is unreachable right now."
    if isinstance(exc, ParseFailed):
        return "The suggestion service gave an unusable answer. Try capturing again."
    return str(exc)


_ERROR_STATUS: dict[type, int] = {
    NotFound: 404,
    Locked: 409,
    NotLocked: 409,
    PlaybackInProgress: 409,
    Busy: 409,
    AlreadyRecording: 409,
    NotRecording: 409,
    DuplicateName: 409,
    LibraryTooSmall: 409,
    TorqueEnabled: 409,
    TorqueDisabled: 409,
    EmptyName: 422,
    UnplayableClip: 422,
    ConfigError: 422,
    BackendUnavailable: 502,
    ParseFailed: 502,
    BackendTimeout: 504,
    StorageError: 500,
    CorruptFile: 500,
    SchemaVersionMismatch: 500,
}


def _status_for(exc: AbcArmError) -> int:
    for cls, status in _ERROR_STATUS.items():
        if isinstance(exc, cls):
            return status
    return 500


# -- request models -----------------------------------------------------------------

class NameBody(BaseModel):
    name: str


class InputSettingsBody(BaseModel):
    scan_interval_s: float
    debounce_s: float


class StopBody(BaseModel):
    kind: str = "tap"  # "tap" | "estop"


class RecordStartBody(BaseModel):
    rate_hz: Optional[float] = None


# -- application factory ---------------------------------------------------------------

def _required_role(method: str, path: str) -> Optional[str]:
    """Which role a path belongs to; None for shared endpoints."""
    if path == "/stop" or path.startswith(("/play/", "/capture", "/recommendation",
                                           "/settings/")):
        return USER_ROLE
    if path in ("/estop", "/unlock") or path.startswith("/record/"):
        return ASSISTANT_ROLE
    if path.startswith("/actions/"):
        # bare GET /actions is shared; per-action subroutes are assistant-only
        if method == "DELETE" or path.endswith(("/name", "/play")):
            return ASSISTANT_ROLE
        return ASSISTANT_ROLE if method != "GET" else None
    return None


def create_app(core: AbcSystem, role: str) -> FastAPI:
    if role not in (USER_ROLE, ASSISTANT_ROLE):
        raise ValueError(f"unknown role {role!r}")
    app = FastAPI(title=f"abcarm {role} interface", docs_url=None, redoc_url=None)

    @app.exception_handler(AbcArmError)
    async def _abc_error(_req: Request, exc: AbcArmError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.middleware("http")
    async def role_boundary(request: Request, call_next):
        # The TCP port is the privilege boundary. Enforced before routing so
        # wrong-role calls are rejected ahead of any body validation.
        needed = _required_role(request.method, request.url.path)
        if needed is not None and needed != role:
            return JSONResponse(
                status_code=403,
                content={
                    "error": "Forbidden",
                    "detail": f"endpoint requires the {needed} interface",
                },
            )
        return await call_next(request)

    def require(needed: str) -> None:
        # Backstop for the middleware table; same 403 contract.
        if role != needed:
            raise HTTPException(
                status_code=403,
                detail=f"endpoint requires the {needed} interface",
            )

    # ---- shared -----------------------------------------------------------------

    @app.get("/actions")
    def list_actions(query: Optional[str] = None):
        if role == USER_ROLE:
            return {"actions": core.library.search(query or "")}
        clips = sorted(core.library.clips(), key=lambda c: c.created_at)
        return {
            "actions": [
                {
                    "name": c.name,
                    "id": c.id,
                    "created_at": c.created_at.isoformat(),
                    "last_used_at": c.last_used_at.isoformat() if c.last_used_at else None,
                    "duration_s": c.duration_s,
                    "samples": len(c.samples),
                }
                for c in clips
            ]
        }

    @app.websocket("/ws/state")
    async def ws_state(ws: WebSocket):
        await ws.accept()
        sub = core.broker.subscribe()
        seq = 0
        # Resolves when the client goes away, so the relay loop can exit
        # even while no events are flowing.
        gone = asyncio.ensure_future(ws.receive())
        try:
            for kind, payload in core.initial_events():
                seq += 1
                await ws.send_json({"type": kind, "seq": seq, "payload": payload})
            while not gone.done():
                if sub.dead:
                    break  # overflowed: drop this client, never the loop
                try:
                    kind, payload = sub.queue.get_nowait()
                except queue.Empty:
                    await asyncio.sleep(0.01)
                    continue
                seq += 1
                await ws.send_json({"type": kind, "seq": seq, "payload": payload})
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            gone.cancel()
            core.broker.unsubscribe(sub)

    # ---- user interface ------------------------------------------------------------

    @app.post("/play/{name}")
    def user_play(name: str):
        require(USER_ROLE)
        return {"playback": core.play(name).as_dict()}

    @app.post("/stop")
    def user_stop(body: Optional[StopBody] = None):
        require(USER_ROLE)
        kind = body.kind if body is not None else "tap"
        reason = REASON_ESTOP_USER if kind == "estop" else REASON_TAP_STOP
        return {"safety": core.stop(reason)}

    @app.post("/capture")
    async def user_capture(image: UploadFile):
        require(USER_ROLE)
        data = await image.read()
        result = core.capture(data)
        return {
            "recommendation": {
                "suggestions": list(result.suggestions),
                "latency_s": result.latency_s,
                "backend_id": result.backend_id,
            }
        }

    @app.get("/recommendation")
    def user_recommendation():
        require(USER_ROLE)
        return core.recommendation_state()

    @app.post("/settings/input")
    def user_settings(body: InputSettingsBody):
        require(USER_ROLE)
        return {"settings": core.update_input_settings(body.scan_interval_s, body.debounce_s)}

    # ---- assistant interface ----------------------------------------------------------

    @app.post("/estop")
    def assistant_estop():
        require(ASSISTANT_ROLE)
        return {"safety": core.stop(REASON_ESTOP_ASSISTANT)}

    @app.post("/unlock")
    def assistant_unlock():
        require(ASSISTANT_ROLE)
        state = core.controller.unlock("assistant")
        return {"safety": _safety_dict(state)}

    @app.post("/record/start")
    def assistant_record_start(body: Optional[RecordStartBody] = None):
        require(ASSISTANT_ROLE)
        rate = body.rate_hz if body is not None else None
        try:
            core.controller.start_recording(rate)
        except TorqueEnabled:
            # Teaching needs a compliant arm: drop torque, then record.
            core.controller.set_torque(False)
            core.controller.start_recording(rate)
        return {"recording": True, "rate_hz": core.controller.session.rate_hz}

    @app.post("/record/stop")
    def assistant_record_stop():
        require(ASSISTANT_ROLE)
        clip = core.controller.stop_recording()
        core.pending_clips[clip.id] = clip
        while len(core.pending_clips) > 8:  # keep only the freshest unnamed clips
            core.pending_clips.pop(next(iter(core.pending_clips)))
        return {
            "clip": {
                "id": clip.id,
                "samples": len(clip.samples),
                "duration_s": clip.duration_s,
                "playable": clip.playable,
            }
        }

    @app.post("/actions/{clip_id}/name")
    def assistant_name(clip_id: str, body: NameBody):
        require(ASSISTANT_ROLE)
        pending = core.pending_clips.get(clip_id)
        if pending is not None:
            named = core.library.save_action(pending, body.name)
            del core.pending_clips[clip_id]
            core.publish_library("saved", name=named.name)
            return {"action": {"id": named.id, "name": named.name}}
        for clip in core.library.clips():
            if clip.id == clip_id:
                core.library.rename_action(clip.name, body.name)
                core.publish_library("renamed", name=body.name)
                return {"action": {"id": clip_id, "name": body.name}}
        raise NotFound(f"no pending or saved clip with id {clip_id!r}")

    @app.post("/actions/{name}/play")
    def assistant_play(name: str):
        require(ASSISTANT_ROLE)
        return {"playback": core.play(name).as_dict()}

    @app.delete("/actions/{name}")
    def assistant_delete(name: str):
        require(ASSISTANT_ROLE)
        core.library.delete_action(name)
        core.publish_library("deleted", name=name)
        return {"deleted": name}

    return app


# -- server -------------------------------------------------------------------------

def _probe_port(host: str, port: int) -> None:
    try:
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            sock.bind((host, port))
    except OSError as exc:
        raise PortInUse(f"cannot bind {host}:{port}: {exc}") from exc


class ServiceRunner:
    """Owns the core, both uvicorn servers, and their event loop thread."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.core = AbcSystem(config)
        self._servers: list[uvicorn.Server] = []
        self._thread: Optional[threading.Thread] = None
        self._started = threading.Event()
        self._failed: Optional[BaseException] = None

    def _build_servers(self) -> None:
        for role, port in (
            (USER_ROLE, self.config.user_port),
            (ASSISTANT_ROLE, self.config.assistant_port),
        ):
            app = create_app(self.core, role)
            uv_config = uvicorn.Config(
                app,
                host=self.config.host,
                port=port,
                log_level="warning",
                ws_ping_interval=None,
                ws_ping_timeout=None,
            )
            self._servers.append(uvicorn.Server(uv_config))

    async def _serve_all(self) -> None:
        self._started.set()
        await asyncio.gather(*(server.serve() for server in self._servers))

    def start(self) -> None:
        """Start the control loop and both listeners on a background thread."""
        _probe_port(self.config.host, self.config.user_port)
        _probe_port(self.config.host, self.config.assistant_port)
        self._build_servers()
        self.core.start()

        def runner() -> None:
            try:
                asyncio.run(self._serve_all())
            except BaseException as exc:  # surfaced via wait_ready
                self._failed = exc
                self._started.set()

        self._thread = threading.Thread(target=runner, name="abcarm-service", daemon=True)
        self._thread.start()
        self.wait_ready()

    def wait_ready(self, timeout: float = 10.0) -> None:
        self._started.wait(timeout)
        if self._failed is not None:
            raise PortInUse(f"service failed to start: {self._failed}")
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if all(server.started for server in self._servers):
                return
            if self._failed is not None:
                raise PortInUse(f"service failed to start: {self._failed}")
            time.sleep(0.02)
        raise TimeoutError("service did not start in time")

    def stop(self) -> None:
        """Graceful shutdown: listeners down, loop stopped, arm torque-off."""
        for server in self._servers:
            server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout=10.0)
            self._thread = None
        self.core.shutdown()


def serve(config: ServiceConfig) -> ServiceRunner:
    """Validate ports, bind both interfaces, and return the running service."""
    runner = ServiceRunner(config)
    runner.start()
    return runner
