"""Shared fixtures and simulation helpers for the test suite."""

import math
import random

import pytest

from abcarm.arm import ActuatorSpec, create_arm
from abcarm.control import Controller
from abcarm.memory import ActionLibrary
from abcarm.safety import DeviationTracker, SafetyInterlock

TICK_RATE = 30.0
DT = 1.0 / TICK_RATE
MAX_VELOCITY = 2.0


def build_controller(
    library: ActionLibrary | None = None,
    max_velocity: float = MAX_VELOCITY,
    epsilon_rad: float = 0.1,
    window_s: float = 0.5,
    home_after_play: bool = True,
) -> Controller:
    specs = [ActuatorSpec(i, "test", 4.1, max_velocity, (-math.pi, math.pi)) for i in range(8)]
    arm = create_arm(specs)
    interlock = SafetyInterlock(
        DeviationTracker(epsilon_rad=epsilon_rad, window_s=window_s, monitor_rate_hz=TICK_RATE)
    )
    return Controller(
        arm,
        interlock,
        library if library is not None else ActionLibrary(),
        tick_rate_hz=TICK_RATE,
        home_after_play=home_after_play,
    )


def make_smooth_script(rng: random.Random, velocity_fraction: float = 0.8,
                       max_velocity: float = MAX_VELOCITY):
    """Random per-joint sums of sinusoids with |velocity| <= fraction * max.

    Positions stay within +/-3.0 rad, inside the default +/-pi joint limits.
    """
    joints = []
    for _ in range(8):
        n = rng.randint(1, 3)
        weights = [rng.uniform(0.2, 1.0) for _ in range(n)]
        omegas = [rng.uniform(0.5, 3.0) for _ in range(n)]
        phases = [rng.uniform(0.0, 2.0 * math.pi) for _ in range(n)]
        budget = velocity_fraction * max_velocity * rng.uniform(0.4, 1.0)
        velocity_scale = budget / sum(w * o for w, o in zip(weights, omegas))
        position_scale = 3.0 / sum(weights)
        scale = min(velocity_scale, position_scale)
        amps = [w * scale for w in weights]
        joints.append(list(zip(amps, omegas, phases)))

    def script(t: float) -> tuple[float, ...]:
        return tuple(
            sum(a * math.sin(o * t + p) for a, o, p in comps) for comps in joints
        )

    return script


def make_ramp_script(rng: random.Random, joint: int, slope: float,
                     base_script=None):
    """A script whose `joint` moves as a monotone ramp (deterministic deviation
    growth under a stuck fault); other joints follow base_script or hold 0."""
    direction = rng.choice((-1.0, 1.0))
    start = -direction * 1.2

    def script(t: float) -> tuple[float, ...]:
        base = base_script(t) if base_script is not None else (0.0,) * 8
        values = list(base)
        values[joint] = start + direction * slope * t
        return tuple(values)

    return script


def record_script(controller: Controller, script, duration_s: float):
    """Hand-guide the torque-off arm along `script` while recording.

    Guides the pose for each upcoming sample instant before the tick that
    captures it, so recorded samples equal the script exactly.
    """
    assert not controller.arm.torque_enabled
    controller.guide(script(0.0))
    controller.start_recording()
    ticks = int(round(duration_s * controller.tick_rate_hz))
    elapsed = 0.0
    for k in range(1, ticks + 1):
        controller.tick()
        elapsed = k * controller.dt
        controller.guide(script(elapsed))
    controller.tick()  # capture the final guided pose
    return controller.stop_recording()


def run_playback(controller: Controller, name: str, sim_budget_s: float = 30.0):
    """Play an action to completion, collecting per-sample replay errors.

    Returns (handle, errors) where errors[i] is the max per-joint absolute
    position error at the i-th observed sample instant of the main clip.
    """
    clip = controller.library.get(name)
    handle = controller.play(name)
    errors = []
    seen = set()
    ticks = int(sim_budget_s * controller.tick_rate_hz)
    for _ in range(ticks):
        if not handle.active:
            break
        snap = controller.tick()
        if handle.phase == "playing":
            idx = handle.sample_index
            if idx > 0 and idx not in seen:
                seen.add(idx)
                errors.append(
                    max(
                        abs(p - q)
                        for p, q in zip(snap.positions, clip.samples[idx].positions)
                    )
                )
    return handle, errors


@pytest.fixture
def controller():
    return build_controller()


def pytest_runtest_logreport(report):
    """Print one PASS/FAIL line per acceptance criterion as it completes."""
    if report.when != "call":
        return
    if "test_acceptance" not in report.nodeid:
        return
    label = report.nodeid.split("::")[-1]
    outcome = "PASS" if report.passed else "FAIL"
    print(f"\n[ACCEPTANCE] {label}: {outcome}")
