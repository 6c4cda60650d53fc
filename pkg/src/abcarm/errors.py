"""Exception hierarchy shared by all abcarm modules.

Every error that crosses a module boundary derives from AbcArmError so
callers (CLI, HTTP layer) can translate in one place.
"""

from __future__ import annotations


class AbcArmError(Exception):
    """Base class for all abcarm errors."""


# --- arm simulation ---------------------------------------------------------

class SpecCountMismatch(AbcArmError):
    """Arm construction needs exactly 8 actuator specs."""


class InvalidLimits(AbcArmError):
    """An actuator's position limits are empty or inverted."""


class TorqueDisabled(AbcArmError):
    """Position command issued while holding torque is off."""


class TorqueEnabled(AbcArmError):
    """Hand guidance attempted while holding torque is on."""


class LimitViolation(AbcArmError):
    """A requested position is outside a joint's configured limits."""

    def __init__(self, joint: int, value: float, limits: tuple[float, float]):
        self.joint = joint
        self.value = value
        self.limits = limits
        super().__init__(
            f"joint {joint}: position {value:.4f} rad outside limits "
            f"[{limits[0]:.4f}, {limits[1]:.4f}]"
        )


# --- kinetic memory ---------------------------------------------------------

class AlreadyRecording(AbcArmError):
    """start requested while a recording session is active."""


class NotRecording(AbcArmError):
    """stop requested with no recording session active."""


class UnplayableClip(AbcArmError):
    """Clip has fewer than two samples and cannot be replayed."""


class DuplicateName(AbcArmError):
    """Action name already present in the library."""


class EmptyName(AbcArmError):
    """Action name is empty or whitespace-only."""


class NotFound(AbcArmError):
    """Named action does not exist in the library."""


class PlaybackInProgress(AbcArmError):
    """Only one playback may run at a time."""


class StorageError(AbcArmError):
    """Underlying file I/O failed while persisting or loading."""


class SchemaVersionMismatch(AbcArmError):
    """Persisted file declares a schema version this build cannot read."""


class CorruptFile(AbcArmError):
    """Persisted file is truncated or structurally invalid."""


# --- safety -----------------------------------------------------------------

class Locked(AbcArmError):
    """Motion requested while the safety interlock is latched."""


class NotLocked(AbcArmError):
    """Unlock requested while already unlocked."""


# --- recommendation ---------------------------------------------------------

class EmptyActionList(AbcArmError):
    """Prompt construction needs at least one action name."""


class BackendUnavailable(AbcArmError):
    """Vision backend could not be reached or had no answer."""


class BackendTimeout(AbcArmError):
    """Vision backend did not answer within the configured deadline."""


class ParseFailed(AbcArmError):
    """Backend output failed validation twice (initial try plus one retry)."""


class NoValidActions(AbcArmError):
    """Fewer than two response tokens matched the action library."""


# --- evaluation harness -----------------------------------------------------

class SchemaError(AbcArmError):
    """Preference CSV or manifest file is malformed."""


class RangeError(AbcArmError):
    """A preference cell is outside [participants, 5 * participants]."""


class UnknownStimulus(AbcArmError):
    """Stimulus label is not a row of the preference matrix."""


class DecodeError(AbcArmError):
    """Image bytes could not be decoded as PNG or JPEG."""


# --- control service --------------------------------------------------------

class ConfigError(AbcArmError):
    """Service configuration is invalid (e.g. identical ports)."""


class PortInUse(AbcArmError):
    """A configured TCP port is already bound."""


class LibraryTooSmall(AbcArmError):
    """Recommendation needs at least two non-'init' actions."""


class Busy(AbcArmError):
    """Operation conflicts with an active playback or recording."""
