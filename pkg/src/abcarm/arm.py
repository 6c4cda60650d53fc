"""Simulated 8-actuator servo arm (7 joints plus end effector).

The model is first-order rate-limited position tracking: with holding
torque on, each joint moves toward its commanded target by at most
max_velocity * dt per step and snaps exactly onto the target once within
reach. With torque off the arm holds still and can be repositioned by
hand guidance, which is how trajectories are taught.

No torque or inertia dynamics are simulated; stall torque on the actuator entry is
descriptive metadata for the motor complement only.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CorruptFile,
    InvalidLimits,
    LimitViolation,
    SchemaVersionMismatch,
    SpecCountMismatch,
    StorageError,
    TorqueDisabled,
    TorqueEnabled,
)

JOINT_COUNT = 8
ARM_CONFIG_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ActuatorSpec:
    """Static description of one servo actuator."""

    id: int
    model_name: str
    stall_torque_nm: float
    max_velocity_rad_s: float
    position_limits: tuple[float, float]

    def __post_init__(self) -> None:
        lo, hi = self.position_limits
        if not lo < hi:
            raise InvalidLimits(f"actuator {self.id}: limits [{lo}, {hi}] are not increasing")
        if self.max_velocity_rad_s <= 0:
            raise InvalidLimits(f"actuator {self.id}: max velocity must be positive")


@dataclass(frozen=True)
class ArmSnapshot:
    """Immutable view of the arm at one instant; safe to share across threads."""

    timestamp: float
    positions: tuple[float, ...]
    targets: tuple[float, ...]
    torque_enabled: bool


@dataclass(frozen=True)
class FaultSpec:
    """Injected servo fault: 'stuck' freezes a joint, 'offset' skews its tracking."""

    joint: int
    kind: str  # "stuck" | "offset"
    magnitude: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.joint < JOINT_COUNT:
            raise ValueError(f"fault joint {self.joint} outside 0..{JOINT_COUNT - 1}")
        if self.kind not in ("stuck", "offset"):
            raise ValueError(f"unknown fault kind {self.kind!r}")


@dataclass(frozen=True)
class KinematicChain:
    """Serial chain geometry: one rotation axis and one link length per joint.

    At zero joint angles the chain extends along +x; each link is a
    translation along the local x axis after the joint rotation.
    """

    axes: tuple[tuple[float, float, float], ...]
    link_lengths_m: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.axes) != len(self.link_lengths_m):
            raise ValueError("chain needs one link length per joint axis")
        for i, axis in enumerate(self.axes):
            norm = math.sqrt(sum(c * c for c in axis))
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"chain axis {i} is not a unit vector (norm {norm})")
        for i, length in enumerate(self.link_lengths_m):
            if length < 0:
                raise ValueError(f"chain link {i} has negative length")

    def __len__(self) -> int:
        return len(self.axes)


def default_actuator_specs() -> list[ActuatorSpec]:
    """Stock motor complement: three 7.3 N·m servos on the proximal joints,
    five 4.1 N·m servos on the distal joints and end effector."""
    specs = []
    for i in range(JOINT_COUNT):
        if i < 3:
            model, stall = "XM540-W150", 7.3
        else:
            model, stall = "XM430-W350", 4.1
        specs.append(
            ActuatorSpec(
                id=i,
                model_name=model,
                stall_torque_nm=stall,
                max_velocity_rad_s=2.0,
                position_limits=(-math.pi, math.pi),
            )
        )
    return specs


def default_chain() -> KinematicChain:
    """Humanlike 7-DoF layout (alternating yaw/pitch axes) plus end effector."""
    return KinematicChain(
        axes=(
            (0.0, 0.0, 1.0),
            (0.0, 1.0, 0.0),
            (1.0, 0.0, 0.0),
            (0.0, 1.0, 0.0),
            (1.0, 0.0, 0.0),
            (0.0, 1.0, 0.0),
            (0.0, 0.0, 1.0),
            (1.0, 0.0, 0.0),
        ),
        link_lengths_m=(0.06, 0.10, 0.10, 0.12, 0.10, 0.06, 0.04, 0.03),
    )


def _rotation_matrix(axis: tuple[float, float, float], angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    ux, uy, uz = axis
    k = np.array([[0.0, -uz, uy], [uz, 0.0, -ux], [-uy, ux, 0.0]])
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def forward_kinematics(
    chain: KinematicChain, positions: tuple[float, ...] | list[float]
) -> tuple[np.ndarray, np.ndarray]:
    """End-effector pose for the given joint angles.

    Returns (position 3-vector, rotation matrix 3x3). Composition walks the
    chain accumulating orientation and origin separately; joint angles must
    match the chain length.
    """
    if len(positions) != len(chain):
        raise ValueError(f"expected {len(chain)} joint angles, got {len(positions)}")
    origin = np.zeros(3)
    orient = np.eye(3)
    for axis, angle, length in zip(chain.axes, positions, chain.link_lengths_m):
        orient = orient @ _rotation_matrix(axis, angle)
        origin = origin + orient @ np.array([length, 0.0, 0.0])
    return origin, orient


def chain_points(
    chain: KinematicChain, positions: tuple[float, ...] | list[float]
) -> list[np.ndarray]:
    """Joint origin of every link, base first; feeds skeleton rendering."""
    if len(positions) != len(chain):
        raise ValueError(f"expected {len(chain)} joint angles, got {len(positions)}")
    points = [np.zeros(3)]
    orient = np.eye(3)
    for axis, angle, length in zip(chain.axes, positions, chain.link_lengths_m):
        orient = orient @ _rotation_matrix(axis, angle)
        points.append(points[-1] + orient @ np.array([length, 0.0, 0.0]))
    return points


class Arm:
    """Mutable simulated arm with a single-writer contract.

    One control loop advances `step` and issues commands; `snapshot` may be
    called concurrently from reader threads.
    """

    def __init__(self, specs: list[ActuatorSpec], chain: KinematicChain | None = None):
        if len(specs) != JOINT_COUNT:
            raise SpecCountMismatch(f"expected {JOINT_COUNT} actuator specs, got {len(specs)}")
        ids = sorted(s.id for s in specs)
        if ids != list(range(JOINT_COUNT)):
            raise SpecCountMismatch(f"actuator ids must be 0..{JOINT_COUNT - 1}, got {ids}")
        self.specs = sorted(specs, key=lambda s: s.id)
        self.chain = chain if chain is not None else default_chain()
        self._lock = threading.Lock()
        self._t = 0.0
        self._positions = [0.0] * JOINT_COUNT
        self._targets = [0.0] * JOINT_COUNT
        self._torque = False
        self._faults: dict[int, FaultSpec] = {}

    # -- state access --------------------------------------------------------

    @property
    def torque_enabled(self) -> bool:
        return self._torque

    def snapshot(self) -> ArmSnapshot:
        with self._lock:
            return ArmSnapshot(
                timestamp=self._t,
                positions=tuple(self._positions),
                targets=tuple(self._targets),
                torque_enabled=self._torque,
            )

    # -- commands -------------------------------------------------------------

    def set_torque(self, enabled: bool) -> None:
        """Toggle holding torque. Enabling re-seats targets onto the current
        positions so the arm never jumps toward a stale target."""
        with self._lock:
            if enabled and not self._torque:
                self._targets = list(self._positions)
            self._torque = enabled

    def command_positions(self, targets: list[float] | tuple[float, ...]) -> None:
        """Atomically retarget all joints; requires torque on and in-limit values."""
        if len(targets) != JOINT_COUNT:
            raise ValueError(f"expected {JOINT_COUNT} targets, got {len(targets)}")
        with self._lock:
            if not self._torque:
                raise TorqueDisabled("cannot command positions while torque is off")
            self._check_limits(targets)
            self._targets = [float(v) for v in targets]

    def guide_positions(self, positions: list[float] | tuple[float, ...]) -> None:
        """Set joint positions directly, modelling a person moving the
        torque-off arm by hand. Bypasses the rate limit."""
        if len(positions) != JOINT_COUNT:
            raise ValueError(f"expected {JOINT_COUNT} positions, got {len(positions)}")
        with self._lock:
            if self._torque:
                raise TorqueEnabled("hand guidance requires torque off")
            self._check_limits(positions)
            self._positions = [float(v) for v in positions]

    def inject_fault(self, fault: FaultSpec) -> None:
        with self._lock:
            self._faults[fault.joint] = fault

    def clear_fault(self, joint: int) -> None:
        with self._lock:
            self._faults.pop(joint, None)

    def clear_faults(self) -> None:
        with self._lock:
            self._faults.clear()

    # -- simulation ------------------------------------------------------------

    def step(self, dt: float) -> ArmSnapshot:
        """Advance the simulation by dt seconds and return the new snapshot."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        with self._lock:
            self._t += dt
            if self._torque:
                for i, spec in enumerate(self.specs):
                    fault = self._faults.get(i)
                    if fault is not None and fault.kind == "stuck":
                        continue
                    goal = self._targets[i]
                    if fault is not None and fault.kind == "offset":
                        goal += fault.magnitude
                    lo, hi = spec.position_limits
                    goal = min(max(goal, lo), hi)
                    delta = goal - self._positions[i]
                    max_step = spec.max_velocity_rad_s * dt
                    if abs(delta) <= max_step:
                        self._positions[i] = goal
                    else:
                        self._positions[i] += math.copysign(max_step, delta)
            return ArmSnapshot(
                timestamp=self._t,
                positions=tuple(self._positions),
                targets=tuple(self._targets),
                torque_enabled=self._torque,
            )

    def _check_limits(self, values) -> None:
        for i, (value, spec) in enumerate(zip(values, self.specs)):
            lo, hi = spec.position_limits
            if not lo <= value <= hi:
                raise LimitViolation(i, float(value), (lo, hi))


def create_arm(specs: list[ActuatorSpec], chain: KinematicChain | None = None) -> Arm:
    """Build an arm with positions = targets = 0 and torque off."""
    return Arm(specs, chain)


# -- configuration file -------------------------------------------------------
#
# Schema (JSON, version 1):
# {
#   "version": 1,
#   "actuators": [
#     {"id": 0, "model_name": "XM540-W150", "stall_torque_nm": 7.3,
#      "max_velocity_rad_s": 2.0, "position_limits": [-3.1416, 3.1416]},
#     ... 8 entries ...
#   ],
#   "chain": {"axes": [[0,0,1], ...], "link_lengths_m": [0.06, ...]}
# }

def save_arm_config(path: str | Path, specs: list[ActuatorSpec], chain: KinematicChain) -> None:
    doc = {
        "version": ARM_CONFIG_SCHEMA_VERSION,
        "actuators": [
            {
                "id": s.id,
                "model_name": s.model_name,
                "stall_torque_nm": s.stall_torque_nm,
                "max_velocity_rad_s": s.max_velocity_rad_s,
                "position_limits": list(s.position_limits),
            }
            for s in specs
        ],
        "chain": {
            "axes": [list(a) for a in chain.axes],
            "link_lengths_m": list(chain.link_lengths_m),
        },
    }
    try:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot write arm config {path}: {exc}") from exc


def load_arm_config(path: str | Path) -> tuple[list[ActuatorSpec], KinematicChain]:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot read arm config {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"arm config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise CorruptFile(f"arm config {path} has no version field")
    if doc["version"] != ARM_CONFIG_SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"arm config version {doc['version']} not supported (expected {ARM_CONFIG_SCHEMA_VERSION})"
        )
    try:
        specs = [
            ActuatorSpec(
                id=int(a["id"]),
                model_name=str(a["model_name"]),
                stall_torque_nm=float(a["stall_torque_nm"]),
                max_velocity_rad_s=float(a["max_velocity_rad_s"]),
                position_limits=(float(a["position_limits"][0]), float(a["position_limits"][1])),
            )
            for a in doc["actuators"]
        ]
        chain = KinematicChain(
            axes=tuple(tuple(float(c) for c in axis) for axis in doc["chain"]["axes"]),
            link_lengths_m=tuple(float(v) for v in doc["chain"]["link_lengths_m"]),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CorruptFile(f"arm config {path} is structurally invalid: {exc}") from exc
    return specs, chain
