"""Frame-level differential bus over a garment conductance graph.

A hub polls addressed modules across the shared six-channel network.  A
module answers only when power and all four data threads reach it, the
differential eye at its site is decodable, and no injected line fault sits on
the way.  Shorts between adjacent lines poison exactly the transactions whose
conduction path crosses the shorted span.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .signal import (
    DEFAULT_BITRATE_HZ,
    DEFAULT_HYSTERESIS_V,
    DEFAULT_SAMPLE_RATE_HZ,
    LineParams,
    Waveform,
    attenuate,
    differential_decode,
    differential_encode,
    differential_difference,
    eye_margin,
    generate_bit_waveform,
    sample_bits,
)
from .topology import (
    CHANNELS,
    SIGNAL_CHANNELS,
    ConductanceGraph,
    GarmentLayout,
    build_conductance_graph,
)

ADDRESS_MIN = 0x08
ADDRESS_MAX = 0x77
DEFAULT_MODULE_ADDRESSES = (0x10, 0x11, 0x12, 0x13, 0x14)
DEFAULT_POLL_INTERVAL_S = 0.1

WHO_AM_I_REG = 0x00
TEMP_COUNT_HI_REG = 0x02
TEMP_COUNT_LO_REG = 0x03

GRAVITY_MPS2 = 9.81
DEFAULT_AMBIENT_C = 25.0

PROBE_BITS = (1, 0, 1, 0, 1, 0, 1, 0)
SIGNAL_PAIRS = ((2, 3), (4, 5))


class ModuleKind(str, Enum):
    IMU = "imu"
    TEMPERATURE = "temperature"


WHO_AM_I_VALUES = {ModuleKind.IMU: 0x49, ModuleKind.TEMPERATURE: 0x54}


class BusError(ValueError):
    pass


class UnknownSiteError(BusError):
    pass


class SiteOccupiedError(BusError):
    pass


class NackAddrError(BusError):
    """Addressed module did not respond."""


class WrongKindError(BusError):
    """Register access does not match the module kind."""


def _default_registers(kind: ModuleKind) -> dict[int, int]:
    return {WHO_AM_I_REG: WHO_AM_I_VALUES[kind]}


@dataclass
class ModuleDescriptor:
    """Static identity of one attachable module."""

    address: int
    kind: ModuleKind
    mass_kg: float = 0.001
    footprint_mm: tuple[float, float] = (40.0, 15.0)
    registers: dict[int, int] = field(default_factory=dict)
    temp_slope_c_per_count: float = 0.05
    temp_intercept_c: float = 20.0

    def __post_init__(self):
        self.kind = ModuleKind(self.kind)
        if not (ADDRESS_MIN <= self.address <= ADDRESS_MAX):
            raise ValueError(
                f"address {self.address:#x} outside "
                f"[{ADDRESS_MIN:#x}, {ADDRESS_MAX:#x}]")
        if self.mass_kg <= 0:
            raise ValueError("mass_kg must be positive")
        if len(self.footprint_mm) != 2 or min(self.footprint_mm) <= 0:
            raise ValueError("footprint_mm must be two positive extents")
        if self.temp_slope_c_per_count == 0:
            raise ValueError("temp_slope_c_per_count must be nonzero")
        base = _default_registers(self.kind)
        base.update(self.registers)
        self.registers = base


@dataclass(frozen=True)
class Ack:
    data: tuple[int, ...] = ()


@dataclass(frozen=True)
class NackAddr:
    pass


@dataclass(frozen=True)
class NackData:
    pass


@dataclass(frozen=True)
class BusFaultResult:
    fault_kind: str


TransactionResult = Ack | NackAddr | NackData | BusFaultResult


@dataclass(frozen=True)
class Transaction:
    target: int
    direction: str                        # "read" | "write"
    register: int
    length: int = 1
    payload: tuple[int, ...] = ()

    def __post_init__(self):
        if self.direction not in ("read", "write"):
            raise ValueError("direction must be 'read' or 'write'")
        if self.direction == "read" and self.length < 1:
            raise ValueError("read length must be at least 1")
        if self.direction == "write" and not self.payload:
            raise ValueError("write payload must be non-empty")
        if any(not 0 <= b <= 0xFF for b in self.payload):
            raise ValueError("payload bytes must fit in one byte")


@dataclass(frozen=True)
class LineFault:
    """Span of damaged thread on one group.

    kind "open" breaks one channel's conduction inside the span; kind
    "short_adjacent" keeps conduction but corrupts signalling across the span
    on the two (adjacent) shorted channels.
    """

    kind: str
    channels: tuple[int, ...]
    group_id: str
    x_start_cm: float
    x_end_cm: float

    def __post_init__(self):
        if self.kind not in ("open", "short_adjacent"):
            raise ValueError("kind must be 'open' or 'short_adjacent'")
        if self.x_start_cm >= self.x_end_cm:
            raise ValueError("fault span must be non-empty")
        if any(ch not in CHANNELS for ch in self.channels):
            raise ValueError("fault channels must be valid channel ids")
        if self.kind == "open" and len(self.channels) != 1:
            raise ValueError("an open fault names exactly one channel")
        if self.kind == "short_adjacent":
            if len(self.channels) != 2:
                raise ValueError("a short names exactly two channels")
            a, b = self.channels
            if abs(a - b) != 1:
                raise ValueError("shorted channels must be adjacent")


@dataclass(frozen=True)
class ImuSample:
    accel_mps2: tuple[float, float, float]
    gyro_dps: tuple[float, float, float]
    mag_ut: tuple[float, float, float]


STATIONARY_SAMPLE = ImuSample((0.0, 0.0, GRAVITY_MPS2), (0.0, 0.0, 0.0),
                              (25.0, 0.0, 40.0))

IMU_NOISE_ACCEL = 0.05
IMU_NOISE_GYRO = 0.1
IMU_NOISE_MAG = 0.5


class BusModel:
    """Hub-side view of every module currently snapped onto the garment."""

    def __init__(self, layout: GarmentLayout, hub_site: str,
                 line: LineParams | None = None, *,
                 bitrate_hz: float = DEFAULT_BITRATE_HZ,
                 sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
                 hysteresis_v: float = DEFAULT_HYSTERESIS_V,
                 seed: int = 0):
        if hub_site not in layout.site_ids():
            raise UnknownSiteError(f"unknown hub site {hub_site!r}")
        self.layout = layout
        self.hub_site = hub_site
        self.line = line or LineParams()
        self.bitrate_hz = bitrate_hz
        self.sample_rate_hz = sample_rate_hz
        self.hysteresis_v = hysteresis_v
        self.attached: dict[str, ModuleDescriptor] = {}
        self.faults: list[LineFault] = []
        self._rng = np.random.default_rng(seed)
        self._base_graph = build_conductance_graph(layout)
        self._operating: ConductanceGraph | None = None
        self._margin_cache: dict[str, tuple[float | None, bool]] = {}
        self._imu_state: dict[int, ImuSample] = {}
        self._temperature_c: dict[int, float] = {}

    # -- attachment --------------------------------------------------------

    def attach(self, site_id: str, desc: ModuleDescriptor) -> None:
        if site_id not in self.layout.site_ids():
            raise UnknownSiteError(f"unknown site {site_id!r}")
        if site_id in self.attached:
            raise SiteOccupiedError(f"site {site_id!r} already occupied")
        self.attached[site_id] = desc

    def detach_site(self, site_id: str) -> ModuleDescriptor:
        if site_id not in self.attached:
            raise UnknownSiteError(f"no module at site {site_id!r}")
        return self.attached.pop(site_id)

    def site_of(self, address: int) -> str | None:
        for site in self.layout.site_ids():
            desc = self.attached.get(site)
            if desc is not None and desc.address == address:
                return site
        return None

    # -- faults ------------------------------------------------------------

    def inject_fault(self, fault: LineFault) -> None:
        if fault.group_id not in {g.id for g in self.layout.groups}:
            raise BusError(f"fault names unknown group {fault.group_id!r}")
        self.faults.append(fault)
        self._invalidate()

    def clear_fault(self, fault: LineFault) -> None:
        try:
            self.faults.remove(fault)
        except ValueError:
            raise BusError("fault not present") from None
        self._invalidate()

    def _invalidate(self) -> None:
        self._operating = None
        self._margin_cache = {}

    @property
    def base_graph(self) -> ConductanceGraph:
        """Conductance network of the layout itself, before any fault."""
        return self._base_graph

    def operating_graph(self) -> ConductanceGraph:
        """Base network minus every open-fault span."""
        if self._operating is None:
            spans = [(f.group_id, f.x_start_cm, f.x_end_cm, f.channels)
                     for f in self.faults if f.kind == "open"]
            self._operating = self._base_graph.without_spans(spans) if spans \
                else self._base_graph
        return self._operating

    # -- visibility --------------------------------------------------------

    def site_margin(self, site_id: str) -> tuple[float | None, bool]:
        """Worst differential eye margin hub->site, and its decodability.

        Returns (None, False) when any of the six channels fails to reach the
        site.  The margin is the smaller of the two signal pairs, each
        evaluated at the worse of its legs' effective resistances.
        """
        cached = self._margin_cache.get(site_id)
        if cached is not None:
            return cached
        g = self.operating_graph()
        result: tuple[float | None, bool]
        if not all(g.reachable(self.hub_site, site_id, ch) for ch in CHANNELS):
            result = (None, False)
        else:
            margins = []
            decodables = []
            for pair in SIGNAL_PAIRS:
                r = max(g.resistance(self.hub_site, site_id, ch) for ch in pair)
                length = max(g.shortest_length_m(self.hub_site, site_id, ch)
                             for ch in pair)
                report = self._pair_eye(r, length)
                margins.append(report.margin_v)
                decodables.append(report.decodable)
            result = (min(margins), all(decodables))
        self._margin_cache[site_id] = result
        return result

    def _pair_eye(self, resistance_ohm: float, length_m: float):
        probe = generate_bit_waveform(PROBE_BITS, self.bitrate_hz,
                                      self.line.supply_v, self.sample_rate_hz,
                                      self.line.rise_time_s)
        plus, minus = differential_encode(probe, 0.5 * self.line.supply_v)
        rx_p = attenuate(plus, resistance_ohm, length_m, self.line)
        rx_m = attenuate(minus, resistance_ohm, length_m, self.line)
        diff = differential_difference(rx_p, rx_m)
        return eye_margin(diff, self.bitrate_hz, self.line.decision_threshold_v)

    def received_probe(self, site_id: str) -> Waveform | None:
        """Differential probe waveform as seen at a site, for inspection.

        Uses the worse of the two signal pairs; None when any channel fails
        to reach the site.
        """
        g = self.operating_graph()
        if not all(g.reachable(self.hub_site, site_id, ch) for ch in CHANNELS):
            return None
        r = max(g.resistance(self.hub_site, site_id, ch)
                for ch in SIGNAL_CHANNELS)
        length = max(g.shortest_length_m(self.hub_site, site_id, ch)
                     for ch in SIGNAL_CHANNELS)
        probe = generate_bit_waveform(PROBE_BITS, self.bitrate_hz,
                                      self.line.supply_v, self.sample_rate_hz,
                                      self.line.rise_time_s)
        plus, minus = differential_encode(probe, 0.5 * self.line.supply_v)
        rx_p = attenuate(plus, r, length, self.line)
        rx_m = attenuate(minus, r, length, self.line)
        return differential_difference(rx_p, rx_m)

    def _short_blocks(self, site_id: str) -> bool:
        """True when a short-adjacent fault lies on the hub-site signal path.

        A fault lies on the path when cutting its span on a shorted signal
        channel severs that channel between hub and site: every conduction
        route crosses the short.
        """
        g = self.operating_graph()
        for fault in self.faults:
            if fault.kind != "short_adjacent":
                continue
            for ch in fault.channels:
                if ch not in SIGNAL_CHANNELS:
                    continue
                if not g.reachable(self.hub_site, site_id, ch):
                    continue
                cut = g.without_spans(
                    [(fault.group_id, fault.x_start_cm, fault.x_end_cm, (ch,))])
                if not cut.reachable(self.hub_site, site_id, ch):
                    return True
        return False

    def site_visible(self, site_id: str) -> bool:
        margin, decodable = self.site_margin(site_id)
        if margin is None or not decodable:
            return False
        return not self._short_blocks(site_id)

    # -- protocol ----------------------------------------------------------

    def scan(self) -> list[int]:
        """Addresses that answer a bus scan, ascending."""
        found = set()
        for site in self.layout.site_ids():
            desc = self.attached.get(site)
            if desc is not None and self.site_visible(site):
                found.add(desc.address)
        return sorted(found)

    def transact(self, txn: Transaction, bit_accurate: bool = False
                 ) -> TransactionResult:
        """Execute one transaction; failures come back as result values."""
        site = self.site_of(txn.target)
        if site is None:
            return NackAddr()
        margin, decodable = self.site_margin(site)
        if margin is None or not decodable:
            return NackAddr()
        if self._short_blocks(site):
            return BusFaultResult("short_adjacent")
        if bit_accurate and not self._frame_survives(site, txn):
            return BusFaultResult("bit_error")
        desc = self.attached[site]
        if txn.direction == "write":
            for offset, value in enumerate(txn.payload):
                desc.registers[txn.register + offset] = value
            return Ack(())
        data = []
        for reg in range(txn.register, txn.register + txn.length):
            value = self._read_register(desc, reg)
            if value is None:
                return NackData()
            data.append(value)
        return Ack(tuple(data))

    def _frame_survives(self, site_id: str, txn: Transaction) -> bool:
        """Push the frame's bits through the full waveform chain."""
        bits = [1]  # start marker keeps the eye classifier two-level
        for value in (txn.target, txn.register, *txn.payload):
            bits.extend((value >> k) & 1 for k in range(7, -1, -1))
        bits.extend((0, 1) * 4)
        g = self.operating_graph()
        r = max(g.resistance(self.hub_site, site_id, ch)
                for ch in SIGNAL_CHANNELS)
        length = max(g.shortest_length_m(self.hub_site, site_id, ch)
                     for ch in SIGNAL_CHANNELS)
        tx = generate_bit_waveform(bits, self.bitrate_hz, self.line.supply_v,
                                   self.sample_rate_hz, self.line.rise_time_s)
        plus, minus = differential_encode(tx, 0.5 * self.line.supply_v)
        rx_p = attenuate(plus, r, length, self.line)
        rx_m = attenuate(minus, r, length, self.line)
        logic = differential_decode(rx_p, rx_m, self.line.decision_threshold_v,
                                    self.hysteresis_v)
        return sample_bits(logic, self.bitrate_hz) == bits

    def detect_conflicts(self) -> list[tuple[int, list[str]]]:
        """Addresses claimed by more than one attached module."""
        groups: dict[int, list[str]] = {}
        for site in self.layout.site_ids():
            desc = self.attached.get(site)
            if desc is not None:
                groups.setdefault(desc.address, []).append(site)
        return sorted((addr, sites) for addr, sites in groups.items()
                      if len(sites) >= 2)

    def _read_register(self, desc: ModuleDescriptor, reg: int) -> int | None:
        if desc.kind is ModuleKind.TEMPERATURE and reg in (TEMP_COUNT_HI_REG,
                                                           TEMP_COUNT_LO_REG):
            counts = self._temperature_counts(desc)
            word = counts & 0xFFFF
            return (word >> 8) & 0xFF if reg == TEMP_COUNT_HI_REG else word & 0xFF
        return desc.registers.get(reg)

    # -- sensor access -----------------------------------------------------

    def set_imu_state(self, address: int, sample: ImuSample) -> None:
        self._imu_state[address] = sample

    def set_temperature(self, address: int, temperature_c: float) -> None:
        self._temperature_c[address] = temperature_c

    def _visible_module(self, address: int, kind: ModuleKind) -> ModuleDescriptor:
        site = self.site_of(address)
        if site is None or not self.site_visible(site):
            raise NackAddrError(f"address {address:#x} does not respond")
        desc = self.attached[site]
        if desc.kind is not kind:
            raise WrongKindError(f"address {address:#x} is a {desc.kind.value} "
                                 f"module")
        return desc

    def read_imu(self, address: int) -> ImuSample:
        """Current 9-axis sample with sensor noise.

        A module nobody moved reports gravity on z and near-zero rates.
        """
        self._visible_module(address, ModuleKind.IMU)
        base = self._imu_state.get(address, STATIONARY_SAMPLE)
        noise = self._rng.normal(0.0, 1.0, 9)
        return ImuSample(
            tuple(v + IMU_NOISE_ACCEL * n
                  for v, n in zip(base.accel_mps2, noise[0:3])),
            tuple(v + IMU_NOISE_GYRO * n
                  for v, n in zip(base.gyro_dps, noise[3:6])),
            tuple(v + IMU_NOISE_MAG * n
                  for v, n in zip(base.mag_ut, noise[6:9])),
        )

    def _temperature_counts(self, desc: ModuleDescriptor) -> int:
        true_c = self._temperature_c.get(desc.address, DEFAULT_AMBIENT_C)
        return int(round((true_c - desc.temp_intercept_c)
                         / desc.temp_slope_c_per_count))

    def read_temperature_raw(self, address: int) -> int:
        """Raw ADC counts: the ground-truth linear map inverted and quantised."""
        desc = self._visible_module(address, ModuleKind.TEMPERATURE)
        return self._temperature_counts(desc)


def imu_sample_for_flexion(angles_deg: np.ndarray, sample_rate_hz: float,
                           frame: int) -> ImuSample:
    """IMU reading consistent with a flexion trace at one frame.

    Gyro x carries the flexion rate (deg/s, central difference); gravity stays
    on the accelerometer z axis.
    """
    rates = np.gradient(np.asarray(angles_deg, dtype=float)) * sample_rate_hz
    rate = float(rates[frame])
    return ImuSample((0.0, 0.0, GRAVITY_MPS2), (rate, 0.0, 0.0),
                     STATIONARY_SAMPLE.mag_ut)
