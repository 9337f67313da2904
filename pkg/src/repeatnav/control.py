"""Reactive repeat control: image shift in, velocity command out.

The horizontal shift between the live image and the localized keyframe is
converted to an angle via the focal length and fed to a proportional yaw
regulator; UAVs additionally regulate climb from the vertical shift. With
the displacement convention (reference minus query), a positive horizontal
shift means the reference view lies to the right of the live view, so the
commanded yaw rate is +kp * angle (counterclockwise-positive).

Forward speed is the configured maximum scaled down in curves and capped by
the taught speed. During initialization mode the robot holds in place while
the localization converges. A shift with zero matches degrades gracefully:
the previous command decays instead of steering on no information.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .belief import Mode
from .geometry import CameraModel
from .histogram import ShiftEstimate
from .teach import Keyframe


class Platform(enum.Enum):
    GROUND = "ground"
    UAV = "uav"


@dataclass(frozen=True)
class ControlConfig:
    """Regulator gains, speed policy, and end-of-path detection."""

    kp_yaw: float = 1.5
    kp_vertical: float = 0.8
    v_max: float = 0.5
    curvature_gain: float = 2.0
    shift_blend: bool = False
    end_epsilon: float = 0.2
    use_taught_speed_cap: bool = True
    degraded_decay: float = 0.5

    def __post_init__(self):
        if self.kp_yaw <= 0 or self.v_max <= 0:
            raise ValueError("kp_yaw and v_max must be positive")
        if self.kp_vertical < 0 or self.curvature_gain < 0:
            raise ValueError("gains must be nonnegative")
        if self.end_epsilon < 0:
            raise ValueError("end_epsilon must be nonnegative")
        if not 0.0 <= self.degraded_decay < 1.0:
            raise ValueError("degraded_decay must be in [0, 1)")


@dataclass(frozen=True)
class VelocityCommand:
    forward: float
    yaw_rate: float
    vertical: float = 0.0

    def scaled(self, factor: float) -> "VelocityCommand":
        return VelocityCommand(self.forward * factor, self.yaw_rate * factor,
                               self.vertical * factor)


ZERO_COMMAND = VelocityCommand(0.0, 0.0, 0.0)


def shift_to_angle(shift_px: float, camera: CameraModel) -> float:
    """Pixel shift to bearing angle via the focal length."""
    return math.atan(shift_px / camera.focal_length_px)


def slowdown_factor(curvature: float, config: ControlConfig) -> float:
    """Speed factor in (0, 1]; decreases with taught curvature magnitude."""
    return 1.0 / (1.0 + config.curvature_gain * abs(curvature) * config.v_max)


def effective_shift(measured: ShiftEstimate, keyframe: Keyframe,
                    config: ControlConfig) -> tuple[float, float]:
    """Measured shift, optionally averaged with the keyframe's stored shift."""
    h = measured.horizontal_shift_px
    v = measured.vertical_shift_px
    if config.shift_blend and keyframe.stored_shift is not None:
        h = 0.5 * (h + keyframe.stored_shift[0])
        v = 0.5 * (v + keyframe.stored_shift[1])
    return h, v


def control_tick(estimate: float, shift: ShiftEstimate, keyframe: Keyframe,
                 mode: Mode, config: ControlConfig, camera: CameraModel,
                 total_length: float, platform: Platform = Platform.GROUND,
                 previous: VelocityCommand = ZERO_COMMAND,
                 ) -> tuple[VelocityCommand, bool]:
    """One regulator step; returns the command and the path-done flag."""
    if estimate >= total_length - config.end_epsilon:
        return ZERO_COMMAND, True
    if mode is Mode.INITIALIZATION:
        return ZERO_COMMAND, False
    if shift.match_count == 0:
        return previous.scaled(config.degraded_decay), False

    h, v = effective_shift(shift, keyframe, config)
    yaw_rate = config.kp_yaw * shift_to_angle(h, camera)
    forward = config.v_max * slowdown_factor(keyframe.taught_curvature, config)
    if config.use_taught_speed_cap and keyframe.taught_forward_speed > 0:
        forward = min(forward, keyframe.taught_forward_speed)
    vertical = 0.0
    if platform is Platform.UAV:
        vertical = config.kp_vertical * shift_to_angle(v, camera)
    return VelocityCommand(forward, yaw_rate, vertical), False


class RepeatController:
    """Stateful wrapper holding the previous command for degraded ticks."""

    def __init__(self, config: ControlConfig, camera: CameraModel,
                 total_length: float, platform: Platform = Platform.GROUND):
        self.config = config
        self.camera = camera
        self.total_length = total_length
        self.platform = platform
        self.previous = ZERO_COMMAND

    def tick(self, estimate: float, shift: ShiftEstimate, keyframe: Keyframe,
             mode: Mode) -> tuple[VelocityCommand, bool]:
        command, done = control_tick(
            estimate, shift, keyframe, mode, self.config, self.camera,
            self.total_length, self.platform, self.previous)
        self.previous = command
        return command, done
