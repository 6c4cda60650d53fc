"""Safety interlock and deviation watchdog.

The watchdog samples arm snapshots at the control rate (30 Hz) while a
playback is driving the arm. A joint whose position stays more than
`epsilon` radians away from its commanded target for strictly longer than
`window` seconds trips the interlock, which latches Locked until an
explicit unlock. Emergency stops from either interface latch the same
interlock, so every stop path converges on one state machine.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Optional

from .arm import JOINT_COUNT, ArmSnapshot
from .errors import NotLocked

# Lock reasons; deviation trips carry the joint index alongside.
REASON_NONE = "none"
REASON_ESTOP_USER = "estop_user"
REASON_ESTOP_ASSISTANT = "estop_assistant"
REASON_DEVIATION = "deviation"
REASON_TAP_STOP = "tap_stop"

_VALID_REASONS = {REASON_ESTOP_USER, REASON_ESTOP_ASSISTANT, REASON_DEVIATION, REASON_TAP_STOP}

UNLOCK_SOURCES = ("assistant", "user-confirmation")


@dataclass(frozen=True)
class SafetyState:
    """Interlock state at one instant. locked_reason is 'none' iff unlocked."""

    mode: str  # "Unlocked" | "Locked"
    locked_reason: str
    deviation_joint: Optional[int]
    since: float

    @property
    def locked(self) -> bool:
        return self.mode == "Locked"


class DeviationTracker:
    """Per-joint deviation timing against the instantaneous commanded target."""

    def __init__(self, epsilon_rad: float = 0.1, window_s: float = 0.5,
                 monitor_rate_hz: float = 30.0):
        if window_s <= 0:
            raise ValueError("window must be positive")
        if monitor_rate_hz <= 0:
            raise ValueError("monitor rate must be positive")
        self.epsilon_rad = epsilon_rad
        self.window_s = window_s
        self.monitor_rate_hz = monitor_rate_hz
        self._deviation_start: list[Optional[float]] = [None] * JOINT_COUNT

    def reset(self) -> None:
        self._deviation_start = [None] * JOINT_COUNT

    def observe(self, snapshot: ArmSnapshot) -> Optional[int]:
        """One monitor tick. Returns the joint index to trip on, or None.

        A joint trips on the first tick whose elapsed deviation strictly
        exceeds the window; a reading back within epsilon clears its timer.
        """
        now = snapshot.timestamp
        tripped: Optional[int] = None
        for i in range(JOINT_COUNT):
            if abs(snapshot.positions[i] - snapshot.targets[i]) > self.epsilon_rad:
                if self._deviation_start[i] is None:
                    self._deviation_start[i] = now
                elif tripped is None and now - self._deviation_start[i] > self.window_s:
                    tripped = i
            else:
                self._deviation_start[i] = None
        return tripped


class SafetyInterlock:
    """Lock/unlock latch shared by every stop source.

    Transition graph is exactly Unlocked -> Locked (trip) and
    Locked -> Unlocked (unlock); trip is idempotent and the first reason
    wins. Listeners get the new state after every transition.
    """

    def __init__(self, tracker: DeviationTracker | None = None,
                 now_fn: Callable[[], float] | None = None):
        self.tracker = tracker if tracker is not None else DeviationTracker()
        self.now_fn = now_fn if now_fn is not None else (lambda: 0.0)
        self._lock = threading.Lock()
        self._state = SafetyState("Unlocked", REASON_NONE, None, self.now_fn())
        self._listeners: list[Callable[[SafetyState], None]] = []

    @property
    def state(self) -> SafetyState:
        with self._lock:
            return self._state

    @property
    def locked(self) -> bool:
        return self.state.locked

    def add_listener(self, fn: Callable[[SafetyState], None]) -> None:
        self._listeners.append(fn)

    def trip(self, reason: str, joint: Optional[int] = None,
             timestamp: Optional[float] = None) -> SafetyState:
        """Latch Locked. Idempotent: a second trip keeps the original reason."""
        if reason not in _VALID_REASONS:
            raise ValueError(f"unknown trip reason {reason!r}")
        with self._lock:
            if self._state.locked:
                return self._state
            self._state = SafetyState(
                mode="Locked",
                locked_reason=reason,
                deviation_joint=joint if reason == REASON_DEVIATION else None,
                since=self.now_fn() if timestamp is None else timestamp,
            )
            state = self._state
        self._notify(state)
        return state

    def unlock(self, source: str = "assistant",
               timestamp: Optional[float] = None) -> SafetyState:
        """Release the latch after safety is confirmed; resets deviation timers."""
        if source not in UNLOCK_SOURCES:
            raise ValueError(f"unknown unlock source {source!r}")
        with self._lock:
            if not self._state.locked:
                raise NotLocked("interlock is not locked")
            self._state = SafetyState(
                mode="Unlocked",
                locked_reason=REASON_NONE,
                deviation_joint=None,
                since=self.now_fn() if timestamp is None else timestamp,
            )
            state = self._state
        self.tracker.reset()
        self._notify(state)
        return state

    def _notify(self, state: SafetyState) -> None:
        for fn in list(self._listeners):
            fn(state)
