"""Differential signalling over resistive thread: waveforms, attenuation, eyes.

Bits travel as complementary voltages on paired threads.  The receiver takes
the difference, which doubles the usable swing and cancels anything common to
both legs.  Attenuation over a thread run is a single-pole RC response (path
resistance charging the line plus receiver capacitance) followed by resistive
division against the receiver termination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

DEFAULT_BITRATE_HZ = 100e3
DEFAULT_SAMPLE_RATE_HZ = 10e6
DEFAULT_HYSTERESIS_V = 0.05
# Decision threshold as a fraction of the supply-rail differential swing.
DECISION_THRESHOLD_FRACTION = 0.2
MIN_OVERSAMPLING = 20
MIN_EYE_BITS = 8


class UndersamplingError(ValueError):
    """Sample rate too low for the requested bitrate."""


class TooFewBitsError(ValueError):
    """Eye analysis needs a longer waveform."""


class SampleMismatchError(ValueError):
    """Paired waveforms must share length and sample rate."""


@dataclass(eq=False)
class Waveform:
    """Uniformly sampled voltage trace."""

    sample_rate_hz: float
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate_hz


@dataclass(frozen=True)
class LineParams:
    """Electrical constants of one thread run and its receiver."""

    resistance_ohm_per_m: float = 20.0
    capacitance_f_per_m: float = 50e-12
    receiver_load_f: float = 400e-12
    receiver_termination_ohm: float = 130.0
    supply_v: float = 5.0
    rise_time_s: float = 1e-6

    def __post_init__(self):
        for name in ("resistance_ohm_per_m", "capacitance_f_per_m",
                     "receiver_load_f", "receiver_termination_ohm",
                     "supply_v", "rise_time_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def decision_threshold_v(self) -> float:
        return DECISION_THRESHOLD_FRACTION * self.supply_v


@dataclass(frozen=True)
class EyeReport:
    min_high_v: float
    max_low_v: float
    margin_v: float
    decodable: bool


def generate_bit_waveform(bits, bitrate_hz: float, swing_v: float,
                          sample_rate_hz: float,
                          rise_time_s: float = 1e-6) -> Waveform:
    """Trapezoidal bit pattern starting from an idle-low line.

    Levels are 0 and ``swing_v``; each level change ramps linearly over the
    rise time.  Raises UndersamplingError below 20 samples per bit.
    """
    if bitrate_hz <= 0 or swing_v <= 0:
        raise ValueError("bitrate_hz and swing_v must be positive")
    if sample_rate_hz < MIN_OVERSAMPLING * bitrate_hz:
        raise UndersamplingError(
            f"sample_rate_hz must be at least {MIN_OVERSAMPLING}x the bitrate")
    bit_list = [1 if b else 0 for b in bits]
    if not bit_list:
        raise ValueError("bits must be non-empty")
    spb = int(round(sample_rate_hz / bitrate_hz))
    n_rise = max(1, int(round(rise_time_s * sample_rate_hz)))
    if n_rise >= spb:
        raise ValueError("rise time must fit inside one bit period")

    out = np.repeat(np.asarray(bit_list, dtype=float) * swing_v, spb)
    prev = 0.0
    for k, b in enumerate(bit_list):
        level = b * swing_v
        if level != prev:
            start = k * spb
            out[start:start + n_rise] = np.linspace(prev, level, n_rise + 1)[1:]
        prev = level
    return Waveform(sample_rate_hz, out)


def attenuate(w: Waveform, path_resistance_ohm: float, path_length_m: float,
              line: LineParams) -> Waveform:
    """Propagate a waveform over a resistive path into the receiver.

    tau = R_path * (length * C_per_m + C_load) drives a single-pole low-pass;
    the termination then divides the level by R_term / (R_term + R_path).
    A zero-resistance path is the identity.
    """
    if path_resistance_ohm < 0 or path_length_m < 0:
        raise ValueError("path resistance and length must be non-negative")
    if math.isinf(path_resistance_ohm):
        return Waveform(w.sample_rate_hz, np.zeros_like(w.samples))
    if path_resistance_ohm == 0.0:
        return Waveform(w.sample_rate_hz, w.samples.copy())
    c_total = path_length_m * line.capacitance_f_per_m + line.receiver_load_f
    tau = path_resistance_ohm * c_total
    x = w.samples
    if tau > 0.0:
        alpha = 1.0 - math.exp(-1.0 / (w.sample_rate_hz * tau))
        y = lfilter([alpha], [1.0, alpha - 1.0], x)
    else:
        y = x.copy()
    gain = line.receiver_termination_ohm / (
        line.receiver_termination_ohm + path_resistance_ohm)
    return Waveform(w.sample_rate_hz, gain * y)


def differential_encode(w: Waveform, common_mode_v: float = 2.5
                        ) -> tuple[Waveform, Waveform]:
    """Split a single-ended waveform into complementary legs.

    plus = cm + w/2 and minus = cm - w/2, so (plus - minus) recovers w.
    """
    half = 0.5 * w.samples
    plus = Waveform(w.sample_rate_hz, common_mode_v + half)
    minus = Waveform(w.sample_rate_hz, common_mode_v - half)
    return plus, minus


def differential_difference(plus: Waveform, minus: Waveform) -> Waveform:
    _check_pair(plus, minus)
    return Waveform(plus.sample_rate_hz, plus.samples - minus.samples)


def _check_pair(plus: Waveform, minus: Waveform) -> None:
    if plus.sample_rate_hz != minus.sample_rate_hz:
        raise SampleMismatchError("legs must share a sample rate")
    if plus.samples.size != minus.samples.size:
        raise SampleMismatchError("legs must share a length")


def differential_decode(plus: Waveform, minus: Waveform,
                        threshold_v: float = 1.0,
                        hysteresis_v: float = DEFAULT_HYSTERESIS_V) -> Waveform:
    """Comparator on (plus - minus) with a hysteresis band around threshold.

    Output samples are 0.0/1.0 logic levels.  Inside the band the comparator
    holds its previous state; before any crossing it reads low.
    """
    _check_pair(plus, minus)
    if hysteresis_v < 0:
        raise ValueError("hysteresis_v must be non-negative")
    diff = plus.samples - minus.samples
    hi = threshold_v + 0.5 * hysteresis_v
    lo = threshold_v - 0.5 * hysteresis_v
    n = diff.size
    state = np.full(n, -1, dtype=np.int8)
    state[diff > hi] = 1
    state[diff < lo] = 0
    known = state >= 0
    last_known = np.where(known, np.arange(n), -1)
    np.maximum.accumulate(last_known, out=last_known)
    filled = np.where(last_known >= 0, state[np.clip(last_known, 0, None)], 0)
    return Waveform(plus.sample_rate_hz, filled.astype(float))


def sample_bits(logic: Waveform, bitrate_hz: float) -> list[int]:
    """Read back one bit per period by sampling at mid-bit."""
    spb = logic.sample_rate_hz / bitrate_hz
    n_bits = int(logic.samples.size // spb)
    mids = np.floor((np.arange(n_bits) + 0.5) * spb).astype(int)
    return [int(v > 0.5) for v in logic.samples[mids]]


def eye_margin(w: Waveform, bitrate_hz: float,
               decision_threshold_v: float = 1.0) -> EyeReport:
    """Mid-bit eye statistics of a (usually differential) waveform.

    Mid-period samples split into high and low populations around their own
    midpoint; margin is min(high) - max(low).  Needs at least eight bit
    periods of signal.
    """
    spb = w.sample_rate_hz / bitrate_hz
    n_bits = int(w.samples.size // spb)
    if n_bits < MIN_EYE_BITS:
        raise TooFewBitsError(f"need at least {MIN_EYE_BITS} bit periods, "
                              f"got {n_bits}")
    mids = np.floor((np.arange(n_bits) + 0.5) * spb).astype(int)
    vals = w.samples[mids]
    split = 0.5 * (float(vals.max()) + float(vals.min()))
    highs = vals[vals > split]
    lows = vals[vals <= split]
    min_high = float(highs.min()) if highs.size else float(vals.max())
    max_low = float(lows.max()) if lows.size else float(vals.min())
    margin = min_high - max_low
    return EyeReport(min_high, max_low, margin, margin > decision_threshold_v)


def transmit_differential(bits, path_resistance_ohm: float, path_length_m: float,
                          line: LineParams,
                          bitrate_hz: float = DEFAULT_BITRATE_HZ,
                          sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
                          common_mode_noise: np.ndarray | None = None,
                          leg_noise_rms_v: float = 0.0,
                          noise_seed: int | None = None
                          ) -> tuple[list[int], Waveform]:
    """Run bits through encode, line attenuation, and decode.

    Returns the recovered bits and the received differential waveform.
    Optional common-mode noise is added identically to both legs after the
    line; optional per-leg Gaussian noise is seeded and independent.
    """
    tx = generate_bit_waveform(bits, bitrate_hz, line.supply_v, sample_rate_hz,
                               line.rise_time_s)
    plus, minus = differential_encode(tx, common_mode_v=0.5 * line.supply_v)
    rx_p = attenuate(plus, path_resistance_ohm, path_length_m, line)
    rx_m = attenuate(minus, path_resistance_ohm, path_length_m, line)
    if leg_noise_rms_v > 0.0:
        rng = np.random.default_rng(noise_seed)
        rx_p = Waveform(rx_p.sample_rate_hz, rx_p.samples
                        + rng.normal(0.0, leg_noise_rms_v, rx_p.samples.size))
        rx_m = Waveform(rx_m.sample_rate_hz, rx_m.samples
                        + rng.normal(0.0, leg_noise_rms_v, rx_m.samples.size))
    if common_mode_noise is not None:
        noise = np.asarray(common_mode_noise, dtype=float)
        if noise.size != rx_p.samples.size:
            raise SampleMismatchError("common-mode noise length mismatch")
        rx_p = Waveform(rx_p.sample_rate_hz, rx_p.samples + noise)
        rx_m = Waveform(rx_m.sample_rate_hz, rx_m.samples + noise)
    logic = differential_decode(rx_p, rx_m,
                                threshold_v=line.decision_threshold_v,
                                hysteresis_v=DEFAULT_HYSTERESIS_V)
    diff = differential_difference(rx_p, rx_m)
    return sample_bits(logic, bitrate_hz), diff


def waveform_to_csv(w: Waveform, path) -> None:
    """Write a waveform as time_s,volts rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("time_s,volts\n")
        for t, v in zip(w.times(), w.samples):
            fh.write(f"{float(t)!r},{float(v)!r}\n")
