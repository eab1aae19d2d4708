"""Closed-form trajectories for the walk, rotation and vehicular runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from silent_tracker.channel import Pose

WALK_SPEED = 1.4  # m/s
MPH = 0.44704  # m/s per mph
VEHICULAR_SPEED = 20 * MPH
ROTATION_RATE = 120.0  # deg/s


class MobilityError(ValueError):
    pass


class Scenario(str, Enum):
    WALK = "walk"
    ROTATION = "rotation"
    VEHICULAR = "vehicular"
    STATIC = "static"


@dataclass(frozen=True)
class MobilityModel:
    variant: Scenario
    start_pose: Pose = field(default_factory=lambda: Pose(0.0, 0.0, 0.0))
    speed: float | None = None  # m/s; None picks the scenario default
    omega: float = ROTATION_RATE  # deg/s
    direction: float = 0.0  # bearing of linear motion, degrees

    def __post_init__(self):
        object.__setattr__(self, "variant", Scenario(self.variant))
        if self.speed is None:
            default = VEHICULAR_SPEED if self.variant is Scenario.VEHICULAR else WALK_SPEED
            object.__setattr__(self, "speed", default)
        if not (self.speed >= 0 and math.isfinite(self.speed)):
            raise MobilityError(f"speed must be finite and >= 0, got {self.speed}")
        if not math.isfinite(self.omega):
            raise MobilityError("omega must be finite")


def pose_at(model: MobilityModel, t: float) -> Pose:
    if t < 0:
        raise MobilityError(f"negative time {t}")
    p = model.start_pose
    if model.variant is Scenario.STATIC or t == 0:
        return p
    if model.variant is Scenario.ROTATION:
        return Pose(p.x, p.y, p.heading + model.omega * t)
    rad = math.radians(model.direction)
    s = model.speed * t
    return Pose(p.x + s * math.cos(rad), p.y + s * math.sin(rad), p.heading)
