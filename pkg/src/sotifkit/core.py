"""Closed-form longitudinal safety math for the emergency-brake function.

The safe-distance model follows the responsibility-sensitive safety (RSS)
bound for a moving ego approaching a static obstacle: the ego may keep
accelerating at its worst-case rate for the whole response time and must
still be able to brake to a stop before the obstacle.  The target speed is
hard-coded to zero; this toolkit's operational domain contains only static
objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError

__all__ = [
    "VehicleParams",
    "KinematicState",
    "BrakeDecomposition",
    "rss_min_distance",
    "ttc",
    "closed_form_stopping_distance",
    "effective_brake_decel",
    "NO_CLOSING",
]

#: Returned by :func:`ttc` when the ego is not closing on the target.
#: Callers treat it as an infinite time to collision.
NO_CLOSING = math.inf


def _require_finite(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class VehicleParams:
    """Kinematic parameters of the ego vehicle.

    v_r: current (constant) driving speed in m/s.
    rho: response time in s between brake decision and brake force.
    a_max_accel: worst-case acceleration in m/s^2 budgeted during rho.
    a_min_brake: available braking deceleration magnitude in m/s^2.
    """

    v_r: float
    rho: float
    a_max_accel: float
    a_min_brake: float

    def __post_init__(self) -> None:
        for name in ("v_r", "rho", "a_max_accel", "a_min_brake"):
            _require_finite(name, getattr(self, name))
        if self.v_r < 0:
            raise ParameterError(f"v_r must be >= 0, got {self.v_r}")
        if self.rho < 0:
            raise ParameterError(f"rho must be >= 0, got {self.rho}")
        if self.a_max_accel < 0:
            raise ParameterError(f"a_max_accel must be >= 0, got {self.a_max_accel}")
        if self.a_min_brake <= 0:
            raise ParameterError(f"a_min_brake must be > 0, got {self.a_min_brake}")


@dataclass(frozen=True)
class KinematicState:
    """Ego state sample: position along the road axis, speed, and time."""

    position: float
    velocity: float
    time: float

    def __post_init__(self) -> None:
        if self.velocity < 0:
            raise ParameterError(
                f"velocity must be >= 0 (braking only, no reverse), got {self.velocity}"
            )


@dataclass(frozen=True)
class BrakeDecomposition:
    """Stopping distance split into response travel and actuation travel.

    d_brake == d_rho + d_act holds exactly (d_brake is stored as the sum).
    """

    d_rho: float
    d_act: float

    @property
    def d_brake(self) -> float:
        return self.d_rho + self.d_act


def rss_min_distance(p: VehicleParams) -> float:
    """Minimum gap to a static object that still guarantees a stop.

    d_min = [v_r*rho + 1/2*a_max_accel*rho^2
             + (v_r + rho*a_max_accel)^2 / (2*a_min_brake)]_+

    where [x]_+ = max(x, 0).  With the parameter invariants every term is
    nonnegative, so the clamp only matters for exotic subclass inputs.
    """
    v_after_rho = p.v_r + p.rho * p.a_max_accel
    d = (
        p.v_r * p.rho
        + 0.5 * p.a_max_accel * p.rho**2
        + v_after_rho**2 / (2.0 * p.a_min_brake)
    )
    return max(0.0, d)


def ttc(gap: float, v_ego: float, v_target: float = 0.0) -> float:
    """Time to collision: gap / (v_ego - v_target).

    Returns :data:`NO_CLOSING` (infinity) when the ego is not closing on
    the target (v_ego <= v_target), which is a valid outcome rather than a
    numeric error.
    """
    if gap < 0:
        raise ParameterError(f"gap must be >= 0, got {gap}")
    closing = v_ego - v_target
    if closing <= 0:
        return NO_CLOSING
    return gap / closing


def closed_form_stopping_distance(
    p: VehicleParams, brake_decel: float | None = None
) -> BrakeDecomposition:
    """Distance to a full stop: constant-speed response travel plus braking.

    d_rho = v_r * rho   (the ego holds constant speed while responding)
    d_act = v_r^2 / (2 * brake_decel)

    ``brake_decel`` defaults to the vehicle's nominal a_min_brake.
    """
    if brake_decel is None:
        brake_decel = p.a_min_brake
    _require_finite("brake_decel", brake_decel)
    if brake_decel <= 0:
        raise ParameterError(f"brake_decel must be > 0, got {brake_decel}")
    d_rho = p.v_r * p.rho
    d_act = p.v_r**2 / (2.0 * brake_decel)
    return BrakeDecomposition(d_rho=d_rho, d_act=d_act)


def effective_brake_decel(p: VehicleParams, mu: float) -> float:
    """Braking deceleration on a surface with normalized friction mu.

    mu is a dimensionless multiplier in (0, 1]; the effective deceleration
    is mu * a_min_brake.  Linear scaling is the simplest defensible model
    and is isolated here so it can be swapped without touching callers.
    """
    _require_finite("mu", mu)
    if not 0.0 < mu <= 1.0:
        raise ParameterError(f"mu must be in (0, 1], got {mu}")
    return mu * p.a_min_brake
