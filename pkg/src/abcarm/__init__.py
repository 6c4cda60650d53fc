"""abcarm: kinetic-memory robotic arm control with gesture recommendation.

Subsystems:
  arm        simulated 8-actuator servo arm and forward kinematics
  safety     deviation watchdog and lock/unlock interlock
  memory     named trajectory clips, recording, and the persisted library
  control    fixed-rate control loop: playback, teaching, monitoring
  recommend  single-image LLM gesture suggestion with strict validation
  evaluate   accuracy harness over degraded stimulus images (abc-eval)
  service    dual-port HTTP + WebSocket control interfaces (abc-serve)
"""

from .arm import (
    ActuatorSpec,
    Arm,
    ArmSnapshot,
    FaultSpec,
    KinematicChain,
    chain_points,
    create_arm,
    default_actuator_specs,
    default_chain,
    forward_kinematics,
)
from .control import Controller, PlaybackHandle
from .errors import AbcArmError
from .memory import ActionClip, ActionLibrary, RecordingSession, TrajectorySample
from .recommend import (
    MockVisionBackend,
    LiveVisionBackend,
    RecommendationRequest,
    RecommendationResult,
    build_prompt,
    parse_response,
    request_recommendation,
)
from .safety import DeviationTracker, SafetyInterlock, SafetyState

__version__ = "0.1.0"

__all__ = [
    "AbcArmError",
    "ActionClip",
    "ActionLibrary",
    "ActuatorSpec",
    "Arm",
    "ArmSnapshot",
    "Controller",
    "DeviationTracker",
    "FaultSpec",
    "KinematicChain",
    "LiveVisionBackend",
    "MockVisionBackend",
    "PlaybackHandle",
    "RecommendationRequest",
    "RecommendationResult",
    "RecordingSession",
    "SafetyInterlock",
    "SafetyState",
    "TrajectorySample",
    "build_prompt",
    "chain_points",
    "create_arm",
    "default_actuator_specs",
    "default_chain",
    "forward_kinematics",
    "parse_response",
    "request_recommendation",
]
