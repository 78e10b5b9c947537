"""Magnetic snap connectors under body motion.

A module rides a small elastomer strip whose magnets hold it to the garment.
Motion shakes the module with a peak acceleration; the module detaches in a
trial when the inertial pull beats that trial's holding force draw.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

MODULE_MASS_KG = 0.001
HOLDING_SAFETY_FACTOR = 3.0


class MotionKind(str, Enum):
    WALKING = "walking"
    RUNNING = "running"
    JUMPING = "jumping"
    ROTATING = "rotating"


# Peak accelerations seen at a garment-mounted module, m/s^2.  Jumping is the
# worst case and pins the 0.03 N pull on a 1 g module.
DEFAULT_PEAK_ACCEL_MPS2 = {
    MotionKind.WALKING: 3.0,
    MotionKind.RUNNING: 12.0,
    MotionKind.JUMPING: 30.0,
    MotionKind.ROTATING: 5.0,
}

DEFAULT_TRIALS = 50
DEFAULT_PERIOD_S = 5.0


class OutOfDomainError(ValueError):
    """Tension outside the measured curve."""


@dataclass(frozen=True)
class MotionProfile:
    kind: MotionKind
    peak_accel_mps2: float
    period_s: float = DEFAULT_PERIOD_S
    trials: int = DEFAULT_TRIALS

    def __post_init__(self):
        if self.peak_accel_mps2 <= 0:
            raise ValueError("peak_accel_mps2 must be positive")
        if self.period_s <= 0:
            raise ValueError("period_s must be positive")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


def motion(kind: MotionKind | str, peak_accel_mps2: float | None = None,
           period_s: float = DEFAULT_PERIOD_S,
           trials: int = DEFAULT_TRIALS) -> MotionProfile:
    kind = MotionKind(kind)
    accel = DEFAULT_PEAK_ACCEL_MPS2[kind] if peak_accel_mps2 is None \
        else peak_accel_mps2
    return MotionProfile(kind, accel, period_s, trials)


# Placeholder strain curve; real strips get their curve from configuration.
DEFAULT_TENSION_STRAIN = (
    (0.0, 0.0),
    (1.0, 0.08),
    (2.0, 0.20),
    (4.0, 0.45),
    (6.0, 0.80),
)
DEFAULT_HOLDING_FORCE_N = 0.02
DEFAULT_HOLDING_SIGMA_FRACTION = 0.1


@dataclass(frozen=True)
class PmeStrip:
    """Permanent-magnet elastomer strip a module snaps onto."""

    width_mm: float = 5.0
    length_mm: float = 40.0
    tension_strain: tuple[tuple[float, float], ...] = DEFAULT_TENSION_STRAIN
    holding_force_n: float = DEFAULT_HOLDING_FORCE_N
    holding_sigma_n: float = DEFAULT_HOLDING_FORCE_N * DEFAULT_HOLDING_SIGMA_FRACTION

    def __post_init__(self):
        if self.width_mm <= 0 or self.length_mm <= 0:
            raise ValueError("strip dimensions must be positive")
        if self.holding_force_n <= 0:
            raise ValueError("holding_force_n must be positive")
        if self.holding_sigma_n < 0:
            raise ValueError("holding_sigma_n must be non-negative")
        if len(self.tension_strain) < 2:
            raise ValueError("tension_strain needs at least two points")
        ts = self.tension_strain
        for (t0, s0), (t1, s1) in zip(ts, ts[1:]):
            if t1 <= t0 or s1 <= s0:
                raise ValueError("tension_strain must be strictly increasing")


def strain_at_tension(strip: PmeStrip, tension_n: float) -> float:
    """Piecewise-linear strain lookup; errors outside the measured domain."""
    ts = strip.tension_strain
    if tension_n < ts[0][0] or tension_n > ts[-1][0]:
        raise OutOfDomainError(
            f"tension {tension_n} N outside [{ts[0][0]}, {ts[-1][0]}] N")
    xs = [t for t, _ in ts]
    ys = [s for _, s in ts]
    return float(np.interp(tension_n, xs, ys))


def peak_inertial_force(mass_kg: float, profile: MotionProfile) -> float:
    """F = m a at the motion's peak acceleration."""
    if mass_kg <= 0:
        raise ValueError("mass_kg must be positive")
    return mass_kg * profile.peak_accel_mps2


def required_holding_force(profile: MotionProfile, mass_kg: float = MODULE_MASS_KG,
                           safety_factor: float = HOLDING_SAFETY_FACTOR) -> float:
    """Holding force needed to survive a motion with the safety factor."""
    if safety_factor <= 0:
        raise ValueError("safety_factor must be positive")
    return safety_factor * peak_inertial_force(mass_kg, profile)


def detachment_trials(mass_kg: float, strip: PmeStrip, profile: MotionProfile,
                      seed: int) -> int:
    """Count trials (out of profile.trials) where the module stays attached.

    Each trial draws its own holding force Normal(H, sigma_H) truncated at
    zero; the module detaches when the peak inertial force exceeds it.
    """
    force = peak_inertial_force(mass_kg, profile)
    rng = np.random.default_rng(seed)
    held = rng.normal(strip.holding_force_n, strip.holding_sigma_n,
                      profile.trials)
    held = np.maximum(held, 0.0)
    return int(np.count_nonzero(force <= held))
