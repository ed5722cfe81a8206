"""Physical robot parameters consumed by the risk and energy models."""

from __future__ import annotations

import math
from dataclasses import dataclass

GRAVITY = 9.81


@dataclass
class RobotModel:
    """Wheeled ground robot description.

    Units: kilograms, meters, radians, meters/second. ``footprint_dim`` is
    the maximum dimension of the robot and drives obstacle inflation;
    ``friction`` is the ground-friction assumption used by the slip model.
    """

    mass: float = 50.0
    wheel_thickness: float = 0.1
    wheel_contact_length: float = 0.2
    wheel_count: int = 4
    max_slope: float = math.radians(30.0)
    max_speed: float = 1.0
    footprint_dim: float = 0.8
    friction: float = 0.6
    gravity: float = GRAVITY

    def __post_init__(self) -> None:
        positive = {
            "mass": self.mass,
            "wheel_thickness": self.wheel_thickness,
            "wheel_contact_length": self.wheel_contact_length,
            "max_speed": self.max_speed,
            "footprint_dim": self.footprint_dim,
            "friction": self.friction,
            "gravity": self.gravity,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.wheel_count not in (2, 4, 6):
            raise ValueError("wheel_count must be 2, 4 or 6")
        if not 0.0 < self.max_slope < math.pi / 2:
            raise ValueError("max_slope must lie in (0, pi/2)")

    @property
    def contact_area(self) -> float:
        """Total wheel contact area in m^2."""
        return self.wheel_thickness * self.wheel_contact_length * self.wheel_count

    @property
    def nominal_power(self) -> float:
        """Flat-ground driving power in watts (rolling resistance only)."""
        return self.max_speed * self.mass * self.gravity
