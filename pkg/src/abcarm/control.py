"""Fixed-rate control loop: playback streaming, teach-mode recording, watchdog.

One Controller owns the arm. Every command lands between ticks (a single
lock serializes commands with the loop), so a command issued during tick
N takes effect in tick N+1 and a watchdog trip in tick N suppresses all
target emission from tick N+1 on. Simulation time advances exactly
1/tick_rate per tick regardless of wall time; `start()` runs the loop on
a wall-clock-paced thread for live service use, while tests call `tick()`
directly to run simulated time as fast as they like.

Playback never jumps the arm: each segment (the requested clip, then the
"init" homing clip when configured) begins with a lead-in that walks the
target from the current pose to the segment's first sample at a capped
per-joint velocity, after which samples stream as targets at the clip's
original timing.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

from .arm import Arm, ArmSnapshot
from .errors import Busy, Locked, NotFound, PlaybackInProgress, TorqueEnabled
from .memory import HOME_ACTION, ActionClip, ActionLibrary, RecordingSession
from .safety import REASON_DEVIATION, SafetyInterlock, SafetyState

PHASE_QUEUED = "queued"
PHASE_LEAD_IN = "lead_in"
PHASE_PLAYING = "playing"
PHASE_HOMING = "homing"
PHASE_COMPLETED = "completed"
PHASE_INTERRUPTED = "interrupted"

_POSITION_TOL = 1e-9

EventListener = Callable[[str, dict], None]


class PlaybackHandle:
    """Progress view of one playback request; written only by the control loop."""

    def __init__(self, clip_name: str, sample_count: int):
        self.clip_name = clip_name
        self.sample_count = sample_count
        self.phase = PHASE_QUEUED
        self.sample_index = 0
        self.stop_reason: Optional[str] = None

    @property
    def active(self) -> bool:
        return self.phase in (PHASE_QUEUED, PHASE_LEAD_IN, PHASE_PLAYING, PHASE_HOMING)

    @property
    def interrupted(self) -> bool:
        return self.phase == PHASE_INTERRUPTED

    def as_dict(self) -> dict:
        return {
            "name": self.clip_name,
            "phase": self.phase,
            "sample_index": self.sample_index,
            "sample_count": self.sample_count,
            "stop_reason": self.stop_reason,
        }


@dataclass
class _Segment:
    clip: ActionClip
    phase_label: str  # PHASE_PLAYING or PHASE_HOMING


class _ActivePlayback:
    def __init__(self, handle: PlaybackHandle, segments: list[_Segment]):
        self.handle = handle
        self.segments = segments
        self.segment_idx = 0
        self.stage = "lead"  # "lead" | "stream"
        self.tick_in_segment = 0
        self.sample_index = 0

    @property
    def segment(self) -> _Segment:
        return self.segments[self.segment_idx]


class Controller:
    """Single-writer control loop over one arm, interlock, and action library."""

    def __init__(
        self,
        arm: Arm,
        interlock: SafetyInterlock,
        library: ActionLibrary,
        tick_rate_hz: float = 30.0,
        record_rate_hz: float = 30.0,
        home_after_play: bool = True,
        lead_in_fraction: float = 0.8,
    ):
        if tick_rate_hz <= 0:
            raise ValueError("tick rate must be positive")
        self.arm = arm
        self.interlock = interlock
        self.library = library
        self.tick_rate_hz = tick_rate_hz
        self.dt = 1.0 / tick_rate_hz
        self.home_after_play = home_after_play
        self.lead_in_fraction = lead_in_fraction
        self.session = RecordingSession(default_rate_hz=record_rate_hz)
        self._lock = threading.RLock()
        self._playback: Optional[_ActivePlayback] = None
        self._record_start_t: float = 0.0
        self._listeners: list[EventListener] = []
        self._thread: Optional[threading.Thread] = None
        self._stop_event = threading.Event()
        # Interlock timestamps follow simulated arm time.
        interlock.now_fn = lambda: self.arm.snapshot().timestamp

    # -- events -----------------------------------------------------------------

    def add_listener(self, fn: EventListener) -> None:
        self._listeners.append(fn)

    def _emit(self, kind: str, payload: dict) -> None:
        for fn in list(self._listeners):
            fn(kind, payload)

    def _emit_playback(self, handle: PlaybackHandle) -> None:
        self._emit("playback", handle.as_dict())

    def _emit_safety(self, state: SafetyState) -> None:
        self._emit("safety", {
            "mode": state.mode,
            "reason": state.locked_reason,
            "joint": state.deviation_joint,
            "since": state.since,
        })

    # -- commands (serialized with the tick by self._lock) -----------------------

    def play(self, name: str) -> PlaybackHandle:
        """Start playing a named action. The arm torque is enabled as part of
        starting; motion begins on the next tick with a lead-in."""
        with self._lock:
            if self.session.recording:
                raise Busy("cannot play while a recording session is active")
            if self.interlock.locked:
                raise Locked(f"arm is locked ({self.interlock.state.locked_reason})")
            if self._playback is not None and self._playback.handle.active:
                raise PlaybackInProgress(f"already playing {self._playback.handle.clip_name!r}")
            clip = self.library.get(name)  # NotFound propagates
            segments = [_Segment(clip, PHASE_PLAYING)]
            if self.home_after_play and name != HOME_ACTION and HOME_ACTION in self.library:
                segments.append(_Segment(self.library.get(HOME_ACTION), PHASE_HOMING))
            self.arm.set_torque(True)
            self.interlock.tracker.reset()
            self.library.touch(name)
            handle = PlaybackHandle(name, len(clip.samples))
            handle.phase = PHASE_LEAD_IN
            self._playback = _ActivePlayback(handle, segments)
            self._emit_playback(handle)
            return handle

    def stop(self, reason: str) -> SafetyState:
        """Halt and lock: every stop source (tap, e-stop, deviation) lands here."""
        with self._lock:
            return self._trip(reason)

    def unlock(self, source: str = "assistant") -> SafetyState:
        with self._lock:
            state = self.interlock.unlock(source)
            self._emit_safety(state)
            return state

    def set_torque(self, enabled: bool) -> None:
        with self._lock:
            if enabled and self.interlock.locked:
                raise Locked("unlock before re-enabling torque")
            self.arm.set_torque(enabled)

    def start_recording(self, rate_hz: Optional[float] = None) -> None:
        """Begin sampling the hand-guided arm. Requires torque off; the first
        sample is taken immediately at the current pose."""
        with self._lock:
            if self._playback is not None and self._playback.handle.active:
                raise Busy("cannot record while a playback is active")
            if self.arm.torque_enabled:
                raise TorqueEnabled("recording requires torque off (teaching mode)")
            self.session.start(rate_hz)
            snap = self.arm.snapshot()
            self._record_start_t = snap.timestamp
            self.session.offer(0.0, snap.positions)
            self._emit("library", {"event": "recording_started", "rate_hz": self.session.rate_hz})

    def stop_recording(self) -> ActionClip:
        with self._lock:
            clip = self.session.stop()
            self._emit("library", {
                "event": "recording_stopped",
                "clip_id": clip.id,
                "samples": len(clip.samples),
                "duration_s": clip.duration_s,
            })
            return clip

    def guide(self, positions) -> None:
        with self._lock:
            self.arm.guide_positions(positions)

    def playback(self) -> Optional[PlaybackHandle]:
        pb = self._playback
        return pb.handle if pb is not None else None

    # -- loop ---------------------------------------------------------------------

    def tick(self) -> ArmSnapshot:
        """Advance one control period of simulated time."""
        with self._lock:
            # Sample teach-mode recording at tick start so the captured pose is
            # exactly what the guide set before this tick.
            if self.session.recording:
                snap = self.arm.snapshot()
                self.session.offer(snap.timestamp - self._record_start_t, snap.positions)

            if self._playback is not None and self._playback.handle.active:
                if self.arm.torque_enabled:
                    self._playback_emit()
                else:
                    # Torque vanished mid-playback (external trip path).
                    self._finish_playback(PHASE_INTERRUPTED, "torque_disabled")

            snap = self.arm.step(self.dt)

            if (
                self._playback is not None
                and self._playback.handle.active
                and snap.torque_enabled
            ):
                joint = self.interlock.tracker.observe(snap)
                if joint is not None:
                    self._trip(REASON_DEVIATION, joint=joint)

            self._emit("arm", self.arm_payload(snap))
            return snap

    def run_for(self, duration_s: float) -> ArmSnapshot:
        """Tick simulated time forward by at least duration_s."""
        ticks = max(1, math.ceil(duration_s / self.dt - 1e-9))
        snap = self.arm.snapshot()
        for _ in range(ticks):
            snap = self.tick()
        return snap

    def run_until(self, predicate: Callable[[], bool], timeout_s: float = 60.0) -> bool:
        """Tick until predicate holds; False if the simulated budget ran out."""
        ticks = math.ceil(timeout_s / self.dt)
        for _ in range(ticks):
            if predicate():
                return True
            self.tick()
        return predicate()

    def start(self) -> None:
        """Run the loop on a daemon thread paced to tick_rate_hz wall time."""
        if self._thread is not None and self._thread.is_alive():
            return
        self._stop_event.clear()
        self._thread = threading.Thread(target=self._run, name="abcarm-control", daemon=True)
        self._thread.start()

    def stop_loop(self) -> None:
        self._stop_event.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None
        self.arm.set_torque(False)

    def _run(self) -> None:
        period = self.dt
        next_t = time.monotonic()
        while not self._stop_event.is_set():
            self.tick()
            next_t += period
            delay = next_t - time.monotonic()
            if delay > 0:
                self._stop_event.wait(delay)
            else:
                next_t = time.monotonic()  # fell behind; do not spiral

    # -- internals ------------------------------------------------------------------

    def _trip(self, reason: str, joint: Optional[int] = None) -> SafetyState:
        state = self.interlock.trip(reason, joint=joint)
        if self._playback is not None and self._playback.handle.active:
            self._finish_playback(PHASE_INTERRUPTED, reason)
        self.arm.set_torque(False)
        self._emit_safety(state)
        return state

    def _finish_playback(self, phase: str, reason: Optional[str] = None) -> None:
        pb = self._playback
        if pb is None:
            return
        pb.handle.phase = phase
        pb.handle.stop_reason = reason
        self._playback = None
        self._emit_playback(pb.handle)

    def _playback_emit(self) -> None:
        pb = self._playback
        seg = pb.segment
        snap = self.arm.snapshot()

        if pb.stage == "lead":
            first = seg.clip.samples[0].positions
            if self._at(snap.targets, first) and self._at(snap.positions, first):
                pb.stage = "stream"
                pb.tick_in_segment = 0
                pb.sample_index = 0
                self._sync_handle_phase(pb)
            else:
                self._advance_lead_in(snap, first)
                return

        # stream stage
        samples = seg.clip.samples
        last = samples[-1]
        if pb.sample_index == len(samples) - 1 and self._at(snap.positions, last.positions):
            self._advance_segment(pb)
            return
        pb.tick_in_segment += 1
        elapsed = pb.tick_in_segment * self.dt
        moved = False
        while (
            pb.sample_index + 1 < len(samples)
            and samples[pb.sample_index + 1].t <= elapsed + 1e-9
        ):
            pb.sample_index += 1
            moved = True
        if moved:
            self.arm.command_positions(samples[pb.sample_index].positions)
            if seg.phase_label == PHASE_PLAYING:
                pb.handle.sample_index = pb.sample_index
                self._emit_playback(pb.handle)

    def _advance_segment(self, pb: _ActivePlayback) -> None:
        if pb.segment_idx + 1 < len(pb.segments):
            pb.segment_idx += 1
            pb.stage = "lead"
            pb.tick_in_segment = 0
            pb.sample_index = 0
            pb.handle.phase = pb.segment.phase_label
            self._emit_playback(pb.handle)
        else:
            self._finish_playback(PHASE_COMPLETED)

    def _sync_handle_phase(self, pb: _ActivePlayback) -> None:
        label = pb.segment.phase_label
        if pb.handle.phase != label:
            pb.handle.phase = label
            self._emit_playback(pb.handle)

    def _advance_lead_in(self, snap: ArmSnapshot, goal: tuple[float, ...]) -> None:
        new_targets = []
        for i, spec in enumerate(self.arm.specs):
            step = self.lead_in_fraction * spec.max_velocity_rad_s * self.dt
            delta = goal[i] - snap.targets[i]
            if abs(delta) <= step:
                new_targets.append(goal[i])
            else:
                new_targets.append(snap.targets[i] + math.copysign(step, delta))
        self.arm.command_positions(new_targets)

    @staticmethod
    def _at(current, goal) -> bool:
        return all(abs(c - g) <= _POSITION_TOL for c, g in zip(current, goal))

    def arm_payload(self, snap: ArmSnapshot) -> dict:
        from .arm import chain_points

        points = chain_points(self.arm.chain, snap.positions)
        return {
            "t": snap.timestamp,
            "positions": list(snap.positions),
            "targets": list(snap.targets),
            "torque_enabled": snap.torque_enabled,
            "joints": [[float(v) for v in p] for p in points],
        }
