"""Kinetic memory: named joint-trajectory recordings and their on-disk library.

A clip is an ordered list of (t, positions) samples captured while the
torque-off arm was moved by hand. Clips are stored under user-chosen
names; the reserved name "init" designates the neutral pose the arm
returns to after playing a gesture.

Library file schema (JSON, version 1):
{
  "version": 1,
  "actions": [
    {"id": "...", "name": "wave hand",
     "created_at": "2025-01-01T00:00:00+00:00",
     "last_used_at": null,
     "sample_rate_hz": 30.0,
     "samples": [[t, p0, p1, ..., p7], ...]}
  ]
}
Timestamps are ISO-8601, angles are radians as decimal numbers.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional

from .arm import JOINT_COUNT
from .errors import (
    AlreadyRecording,
    CorruptFile,
    DuplicateName,
    EmptyName,
    NotFound,
    NotRecording,
    SchemaVersionMismatch,
    StorageError,
    UnplayableClip,
)

LIBRARY_SCHEMA_VERSION = 1
HOME_ACTION = "init"
MIN_PLAYABLE_SAMPLES = 2


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    positions: tuple[float, ...]


@dataclass(frozen=True)
class ActionClip:
    """One recorded trajectory. Unnamed (name=None) until saved."""

    id: str
    name: Optional[str]
    samples: tuple[TrajectorySample, ...]
    sample_rate_hz: float
    created_at: datetime
    last_used_at: Optional[datetime] = None

    @property
    def duration_s(self) -> float:
        return self.samples[-1].t if self.samples else 0.0

    @property
    def playable(self) -> bool:
        return len(self.samples) >= MIN_PLAYABLE_SAMPLES

    def validate(self) -> None:
        """Check structural invariants; raises CorruptFile on violation."""
        if self.sample_rate_hz <= 0:
            raise CorruptFile(f"clip {self.id}: sample rate must be positive")
        prev = None
        for idx, sample in enumerate(self.samples):
            if len(sample.positions) != JOINT_COUNT:
                raise CorruptFile(f"clip {self.id}: sample {idx} has {len(sample.positions)} joints")
            if idx == 0 and sample.t != 0.0:
                raise CorruptFile(f"clip {self.id}: first sample must be at t=0")
            if prev is not None and sample.t <= prev:
                raise CorruptFile(f"clip {self.id}: timestamps not strictly increasing at {idx}")
            prev = sample.t


class RecordingSession:
    """Fixed-rate sampler the control loop feeds while the arm is hand-guided."""

    def __init__(self, default_rate_hz: float = 30.0):
        self.default_rate_hz = default_rate_hz
        self.recording = False
        self.rate_hz = default_rate_hz
        self._buffer: list[TrajectorySample] = []
        self._sample_count = 0

    def start(self, rate_hz: Optional[float] = None) -> None:
        if self.recording:
            raise AlreadyRecording("a recording session is already active")
        self.rate_hz = rate_hz if rate_hz is not None else self.default_rate_hz
        if self.rate_hz <= 0:
            raise ValueError("recording rate must be positive")
        self._buffer = []
        self._sample_count = 0
        self.recording = True

    def offer(self, elapsed_s: float, positions: tuple[float, ...]) -> bool:
        """Append a sample if one is due at this elapsed time.

        Sample k lands at exactly k / rate (computed, not accumulated, so
        long recordings do not drift); the control tick calls this every
        period so the comparison needs a small slack.
        """
        if not self.recording:
            return False
        due = self._sample_count / self.rate_hz
        if elapsed_s + 1e-9 < due:
            return False
        self._buffer.append(TrajectorySample(due, tuple(positions)))
        self._sample_count += 1
        return True

    def stop(self) -> ActionClip:
        if not self.recording:
            raise NotRecording("no recording session is active")
        self.recording = False
        samples = tuple(self._buffer)
        self._buffer = []
        return ActionClip(
            id=uuid.uuid4().hex,
            name=None,
            samples=samples,
            sample_rate_hz=self.rate_hz,
            created_at=datetime.now(timezone.utc),
        )

    @property
    def sample_count(self) -> int:
        return len(self._buffer)


class ActionLibrary:
    """Name -> clip mapping with optional write-through persistence.

    Mutations are serialized by an internal lock and flushed to `path`
    when one is configured; reads are cheap copies.
    """

    def __init__(self, clips: Iterable[ActionClip] = (), path: str | Path | None = None):
        self._lock = threading.Lock()
        self._clips: dict[str, ActionClip] = {}
        self.path = Path(path) if path is not None else None
        for clip in clips:
            if clip.name is None:
                raise EmptyName("library clips must be named")
            if clip.name in self._clips:
                raise DuplicateName(f"duplicate action name {clip.name!r}")
            self._clips[clip.name] = clip

    # -- queries ---------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._clips)

    def __contains__(self, name: str) -> bool:
        return name in self._clips

    def names(self, include_home: bool = True) -> list[str]:
        with self._lock:
            names = list(self._clips)
        if not include_home:
            names = [n for n in names if n != HOME_ACTION]
        return names

    def get(self, name: str) -> ActionClip:
        with self._lock:
            clip = self._clips.get(name)
        if clip is None:
            raise NotFound(f"no action named {name!r}")
        return clip

    def clips(self) -> list[ActionClip]:
        with self._lock:
            return list(self._clips.values())

    def search(self, query: str) -> list[str]:
        """Case-insensitive substring search, most recently used first.

        Never-used actions come after all used ones, newest created first;
        ties break lexicographically. "init" is never returned.
        """
        needle = query.lower()
        with self._lock:
            candidates = [c for c in self._clips.values() if c.name != HOME_ACTION]
        matches = [c for c in candidates if needle in c.name.lower()]

        def sort_key(clip: ActionClip):
            if clip.last_used_at is not None:
                return (0, -clip.last_used_at.timestamp(), clip.name)
            return (1, -clip.created_at.timestamp(), clip.name)

        return [c.name for c in sorted(matches, key=sort_key)]

    # -- mutations ---------------------------------------------------------------

    def save_action(self, clip: ActionClip, name: str, overwrite: bool = False) -> ActionClip:
        name = name.strip()
        if not name:
            raise EmptyName("action name must not be empty")
        if not clip.playable:
            raise UnplayableClip(
                f"clip has {len(clip.samples)} samples; at least {MIN_PLAYABLE_SAMPLES} required"
            )
        clip.validate()
        named = replace(clip, name=name)
        with self._lock:
            if name in self._clips and not overwrite:
                raise DuplicateName(f"action {name!r} already exists")
            self._clips[name] = named
            self._flush_locked()
        return named

    def rename_action(self, old: str, new: str) -> None:
        new = new.strip()
        if not new:
            raise EmptyName("action name must not be empty")
        with self._lock:
            if old not in self._clips:
                raise NotFound(f"no action named {old!r}")
            if new != old and new in self._clips:
                raise DuplicateName(f"action {new!r} already exists")
            clip = self._clips.pop(old)
            self._clips[new] = replace(clip, name=new)
            self._flush_locked()

    def delete_action(self, name: str) -> None:
        with self._lock:
            if name not in self._clips:
                raise NotFound(f"no action named {name!r}")
            del self._clips[name]
            self._flush_locked()

    def touch(self, name: str, when: Optional[datetime] = None) -> ActionClip:
        """Record a use of the action (playback started)."""
        when = when if when is not None else datetime.now(timezone.utc)
        with self._lock:
            if name not in self._clips:
                raise NotFound(f"no action named {name!r}")
            self._clips[name] = replace(self._clips[name], last_used_at=when)
            self._flush_locked()
            return self._clips[name]

    # -- persistence ---------------------------------------------------------------

    def _flush_locked(self) -> None:
        if self.path is not None:
            _write_library_file(self.path, list(self._clips.values()))

    def save(self, path: str | Path | None = None) -> None:
        target = Path(path) if path is not None else self.path
        if target is None:
            raise StorageError("no library path configured")
        with self._lock:
            _write_library_file(target, list(self._clips.values()))

    @classmethod
    def load(cls, path: str | Path) -> "ActionLibrary":
        clips = _read_library_file(path)
        return cls(clips, path=path)

    @classmethod
    def load_or_create(cls, path: str | Path) -> "ActionLibrary":
        path = Path(path)
        if path.exists():
            return cls.load(path)
        library = cls(path=path)
        library.save()
        return library


# -- file format ----------------------------------------------------------------

def _clip_to_doc(clip: ActionClip) -> dict:
    return {
        "id": clip.id,
        "name": clip.name,
        "created_at": clip.created_at.isoformat(),
        "last_used_at": clip.last_used_at.isoformat() if clip.last_used_at else None,
        "sample_rate_hz": clip.sample_rate_hz,
        "samples": [[s.t, *s.positions] for s in clip.samples],
    }


def _clip_from_doc(doc: dict) -> ActionClip:
    try:
        samples = []
        for row in doc["samples"]:
            if len(row) != 1 + JOINT_COUNT:
                raise CorruptFile(f"sample row has {len(row)} values, expected {1 + JOINT_COUNT}")
            samples.append(TrajectorySample(float(row[0]), tuple(float(v) for v in row[1:])))
        clip = ActionClip(
            id=str(doc["id"]),
            name=str(doc["name"]),
            samples=tuple(samples),
            sample_rate_hz=float(doc["sample_rate_hz"]),
            created_at=datetime.fromisoformat(doc["created_at"]),
            last_used_at=(
                datetime.fromisoformat(doc["last_used_at"]) if doc.get("last_used_at") else None
            ),
        )
    except CorruptFile:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"malformed action entry: {exc}") from exc
    clip.validate()
    if not clip.playable:
        raise CorruptFile(f"clip {clip.id} has fewer than {MIN_PLAYABLE_SAMPLES} samples")
    return clip


def _write_library_file(path: Path, clips: list[ActionClip]) -> None:
    doc = {
        "version": LIBRARY_SCHEMA_VERSION,
        "actions": [_clip_to_doc(c) for c in clips],
    }
    try:
        tmp = Path(str(path) + ".tmp")
        tmp.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        tmp.replace(path)
    except OSError as exc:
        raise StorageError(f"cannot write library {path}: {exc}") from exc


def _read_library_file(path: str | Path) -> list[ActionClip]:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot read library {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"library {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise CorruptFile(f"library {path} has no version field")
    if doc["version"] != LIBRARY_SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"library version {doc['version']} not supported (expected {LIBRARY_SCHEMA_VERSION})"
        )
    actions = doc.get("actions")
    if not isinstance(actions, list):
        raise CorruptFile(f"library {path}: 'actions' must be a list")
    return [_clip_from_doc(entry) for entry in actions]
