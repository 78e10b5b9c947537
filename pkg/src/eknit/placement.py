"""Joint-angle estimation quality versus module placement along the arm.

A single flexing joint is simulated directly in angle space.  Each candidate
position corrupts the true flexion with position-dependent noise: wrist twist
couples fully at the wrist and weakly on the hand just below it, soft tissue
jitters every muscled segment but only a fraction of it reaches the bony
hand, and past the elbow the sleeve decouples from the joint more the
farther up it sits.  MPJRE (mean per-joint rotation error) scores a position.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class Region(str, Enum):
    BELOW_WRIST = "below_wrist"
    WRIST = "wrist"
    FOREARM = "forearm"
    ELBOW = "elbow"
    UPPER_ARM = "upper_arm"


class DegenerateInputError(ValueError):
    """Calibration input with no spread."""


class TraceLengthError(ValueError):
    """Trace pair too short or mismatched."""


@dataclass(eq=False)
class JointTrace:
    """Flexion angle of one joint sampled at a fixed rate."""

    sample_rate_hz: float
    angles_deg: np.ndarray

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        self.angles_deg = np.asarray(self.angles_deg, dtype=float)
        if self.angles_deg.ndim != 1 or self.angles_deg.size < 2:
            raise TraceLengthError("a trace needs at least two frames")
        if not np.all(np.isfinite(self.angles_deg)):
            raise ValueError("angles must be finite")


@dataclass(frozen=True)
class PlacementPosition:
    """Candidate module position along the arm."""

    index: int
    distance_cm: float
    region: Region

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("index starts at 1")


DEFAULT_ARM_POSITIONS = (
    PlacementPosition(1, 0.0, Region.BELOW_WRIST),
    PlacementPosition(2, 7.0, Region.WRIST),
    PlacementPosition(3, 14.0, Region.FOREARM),
    PlacementPosition(4, 21.0, Region.FOREARM),
    PlacementPosition(5, 28.0, Region.ELBOW),
    PlacementPosition(6, 35.0, Region.UPPER_ARM),
    PlacementPosition(7, 42.0, Region.UPPER_ARM),
    PlacementPosition(8, 49.0, Region.UPPER_ARM),
)


@dataclass(frozen=True)
class ImuNoiseModel:
    """Gains of the three position-dependent error terms, degrees RMS.

    Orderings this model guarantees for any gains obeying the documented
    inequalities:

    * all three RMS gains > 0;
    * 0 <= below_wrist_coupling < 1 and 0 < below_wrist_soft_fraction < 1;
    * decoupling_growth_per_cm >= 0;
    * hand isolation: (below_wrist_coupling * wrist_twist_rms_deg)**2
      + (below_wrist_soft_fraction * soft_tissue_rms_deg)**2
      < soft_tissue_rms_deg**2, i.e. the residual twist leaking onto the
      hand stays smaller than the soft-tissue noise the hand avoids.

    Under those constraints: below-wrist error < every forearm error <
    every at/past-elbow error, below-wrist error < wrist error, and
    upper-arm error is non-decreasing in distance.  Hence the below-wrist
    position is always the global argmin.

    The shipped default gains were fitted so the reference flexion scenario
    reproduces the target below-wrist and wrist MPJRE values; see
    calibrate_noise_gains.
    """

    wrist_twist_rms_deg: float = 3.5531
    soft_tissue_rms_deg: float = 12.8402
    decoupling_rms_deg: float = 15.0
    below_wrist_coupling: float = 0.3
    below_wrist_soft_fraction: float = 0.8
    decoupling_growth_per_cm: float = 0.15
    elbow_reference_cm: float = 28.0

    def __post_init__(self):
        if min(self.wrist_twist_rms_deg, self.soft_tissue_rms_deg,
               self.decoupling_rms_deg) <= 0:
            raise ValueError("noise gains must be positive")
        if not (0.0 <= self.below_wrist_coupling < 1.0):
            raise ValueError("below_wrist_coupling must be in [0, 1)")
        if not (0.0 < self.below_wrist_soft_fraction < 1.0):
            raise ValueError("below_wrist_soft_fraction must be in (0, 1)")
        if self.decoupling_growth_per_cm < 0:
            raise ValueError("decoupling_growth_per_cm must be non-negative")

    def twist_factor(self, pos: PlacementPosition) -> float:
        if pos.region is Region.WRIST:
            return 1.0
        if pos.region is Region.BELOW_WRIST:
            return self.below_wrist_coupling
        return 0.0

    def soft_factor(self, pos: PlacementPosition) -> float:
        if pos.region is Region.BELOW_WRIST:
            return self.below_wrist_soft_fraction
        return 1.0

    def decoupling_factor(self, pos: PlacementPosition) -> float:
        if pos.region is Region.ELBOW:
            return 1.0
        if pos.region is Region.UPPER_ARM:
            growth = self.decoupling_growth_per_cm * (
                pos.distance_cm - self.elbow_reference_cm)
            return max(1.0, 1.0 + growth)
        return 0.0

    def total_rms_deg(self, pos: PlacementPosition) -> float:
        return math.sqrt(
            (self.wrist_twist_rms_deg * self.twist_factor(pos)) ** 2
            + (self.soft_tissue_rms_deg * self.soft_factor(pos)) ** 2
            + (self.decoupling_rms_deg * self.decoupling_factor(pos)) ** 2)


DEFAULT_NOISE_MODEL = ImuNoiseModel()


@dataclass(frozen=True)
class LinearCalibration:
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class PlacementReport:
    positions: tuple[PlacementPosition, ...]
    mpjre_deg: tuple[float, ...]
    ranking: tuple[int, ...]       # position indices, best first
    argmin_index: int

    def mpjre_for(self, index: int) -> float:
        for pos, v in zip(self.positions, self.mpjre_deg):
            if pos.index == index:
                return v
        raise KeyError(index)

    def to_dict(self) -> dict:
        return {
            "positions": [
                {"index": p.index, "distance_cm": p.distance_cm,
                 "region": p.region.value, "mpjre_deg": v}
                for p, v in zip(self.positions, self.mpjre_deg)],
            "ranking": list(self.ranking),
            "argmin_index": self.argmin_index,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["position_index", "distance_cm", "mpjre_deg"])
            for p, v in zip(self.positions, self.mpjre_deg):
                writer.writerow([p.index, p.distance_cm, v])


def synthesize_flexion_trace(duration_s: float, frequency_hz: float,
                             amplitude_deg: float,
                             sample_rate_hz: float = 100.0) -> JointTrace:
    """Raised-cosine flexion: angle(t) = A/2 * (1 - cos(2 pi f t)).

    Starts and ends each cycle at zero; over whole cycles the mean angle is
    exactly half the amplitude.
    """
    if duration_s <= 0 or frequency_hz <= 0 or amplitude_deg <= 0:
        raise ValueError("duration, frequency, and amplitude must be positive")
    n = int(round(duration_s * sample_rate_hz))
    if n < 2:
        raise TraceLengthError("duration too short for the sample rate")
    t = np.arange(n) / sample_rate_hz
    angles = 0.5 * amplitude_deg * (1.0 - np.cos(2.0 * math.pi * frequency_hz * t))
    return JointTrace(sample_rate_hz, angles)


def simulate_estimated_trace(truth: JointTrace, pos: PlacementPosition,
                             noise: ImuNoiseModel, seed: int) -> JointTrace:
    """Estimated joint angle as recovered from a module at ``pos``.

    The same seed draws the same underlying noise regardless of position, so
    positions with identical gain factors produce identical estimates; gains
    of zero return the truth untouched.
    """
    rng = np.random.default_rng(seed)
    n = truth.angles_deg.size
    z_twist = rng.standard_normal(n)
    z_soft = rng.standard_normal(n)
    z_decouple = rng.standard_normal(n)
    est = (truth.angles_deg
           + noise.wrist_twist_rms_deg * noise.twist_factor(pos) * z_twist
           + noise.soft_tissue_rms_deg * noise.soft_factor(pos) * z_soft
           + noise.decoupling_rms_deg * noise.decoupling_factor(pos) * z_decouple)
    return JointTrace(truth.sample_rate_hz, est)


def mpjre(estimated: JointTrace, truth: JointTrace) -> float:
    """Mean absolute per-frame rotation error, degrees."""
    if estimated.angles_deg.size != truth.angles_deg.size:
        raise TraceLengthError("traces must have equal length")
    return float(np.mean(np.abs(estimated.angles_deg - truth.angles_deg)))


def expected_mpjre(pos: PlacementPosition, noise: ImuNoiseModel) -> float:
    """Closed-form MPJRE this noise model converges to at ``pos``.

    The error terms are independent zero-mean Gaussians, so the absolute
    error is folded-normal with mean sigma * sqrt(2/pi).
    """
    return noise.total_rms_deg(pos) * SQRT_2_OVER_PI


def rank_placements(positions, truth: JointTrace, noise: ImuNoiseModel,
                    seeds_per_position: int, base_seed: int = 0
                    ) -> PlacementReport:
    """Average MPJRE per position over shared seeds, ranked ascending.

    Replicate i uses seed base_seed + i at every position (common random
    numbers), so equal gain factors give exactly equal scores.  Ties rank by
    position index.
    """
    positions = tuple(positions)
    if not positions:
        raise ValueError("positions must be non-empty")
    if len({p.index for p in positions}) != len(positions):
        raise ValueError("duplicate position indices")
    if seeds_per_position < 1:
        raise ValueError("seeds_per_position must be at least 1")
    scores = []
    for pos in positions:
        vals = [mpjre(simulate_estimated_trace(truth, pos, noise, base_seed + i),
                      truth) for i in range(seeds_per_position)]
        scores.append(float(np.mean(vals)))
    order = sorted(range(len(positions)),
                   key=lambda k: (scores[k], positions[k].index))
    ranking = tuple(positions[k].index for k in order)
    return PlacementReport(positions, tuple(scores), ranking, ranking[0])


def calibrate_noise_gains(below_wrist_target_deg: float = 8.24,
                          wrist_target_deg: float = 10.63,
                          base: ImuNoiseModel = DEFAULT_NOISE_MODEL,
                          tol_deg: float = 1e-9) -> ImuNoiseModel:
    """Fit twist and soft-tissue gains to the two anchor MPJRE targets.

    Nested bisection against expected_mpjre: the outer loop tunes the wrist
    twist gain for the wrist target, the inner loop re-fits soft tissue for
    the below-wrist target at each trial twist gain.  This is how the shipped
    defaults were produced.
    """
    if not (0 < below_wrist_target_deg < wrist_target_deg):
        raise ValueError("targets must satisfy 0 < below_wrist < wrist")
    kappa = base.below_wrist_coupling
    h = base.below_wrist_soft_fraction
    if kappa >= h:
        raise ValueError("below_wrist_coupling must stay below "
                         "below_wrist_soft_fraction for a monotone fit")
    ratio = below_wrist_target_deg / wrist_target_deg
    if not (kappa < ratio < h):
        raise ValueError("target ratio must lie strictly between the "
                         "coupling and the soft fraction")
    bw_pos = PlacementPosition(1, 0.0, Region.BELOW_WRIST)
    w_pos = PlacementPosition(2, 7.0, Region.WRIST)

    def fit_soft(twist: float) -> float:
        lo, hi = 1e-9, below_wrist_target_deg / (SQRT_2_OVER_PI * h) + twist
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            model = replace(base, wrist_twist_rms_deg=twist,
                            soft_tissue_rms_deg=mid)
            if expected_mpjre(bw_pos, model) < below_wrist_target_deg:
                lo = mid
            else:
                hi = mid
            if hi - lo < tol_deg:
                break
        return 0.5 * (lo + hi)

    lo, hi = 1e-9, (wrist_target_deg + below_wrist_target_deg) / SQRT_2_OVER_PI * 4
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        model = replace(base, wrist_twist_rms_deg=mid,
                        soft_tissue_rms_deg=fit_soft(mid))
        if expected_mpjre(w_pos, model) < wrist_target_deg:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol_deg:
            break
    twist = 0.5 * (lo + hi)
    return replace(base, wrist_twist_rms_deg=twist,
                   soft_tissue_rms_deg=fit_soft(twist))


def fit_linear_calibration(raw_counts, reference_c) -> LinearCalibration:
    """Ordinary least squares reference = slope * raw + intercept.

    Raises DegenerateInputError when every raw count is identical.  r^2 is 1
    for an exact fit; a constant reference fitted exactly also reports 1.
    """
    x = np.asarray(raw_counts, dtype=float)
    y = np.asarray(reference_c, dtype=float)
    if x.ndim != 1 or x.size != y.size or x.size < 2:
        raise ValueError("need matching 1-D inputs with at least two points")
    x_mean = float(x.mean())
    y_mean = float(y.mean())
    sxx = float(np.sum((x - x_mean) ** 2))
    if sxx == 0.0:
        raise DegenerateInputError("raw counts have no spread")
    sxy = float(np.sum((x - x_mean) * (y - y_mean)))
    slope = sxy / sxx
    intercept = y_mean - slope * x_mean
    residuals = y - (slope * x + intercept)
    ss_res = float(np.sum(residuals ** 2))
    ss_tot = float(np.sum((y - y_mean) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-24 else 0.0
    else:
        r2 = max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return LinearCalibration(slope, intercept, r2)


def apply_calibration(cal: LinearCalibration, raw_counts):
    """Convert raw counts to degrees C; accepts scalars or arrays."""
    arr = np.asarray(raw_counts, dtype=float)
    out = cal.slope * arr + cal.intercept
    if np.isscalar(raw_counts) or getattr(raw_counts, "ndim", 1) == 0:
        return float(out)
    return out
