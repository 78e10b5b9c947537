"""Deterministic scenario runner.

A scenario bundles a garment layout, line electrical parameters, an initial
module placement, and a timestamped event script.  Running it replays the
events against a fresh bus and returns a result whose canonical serialization
is byte-identical for equal seeds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bus import (
    Ack,
    BusError,
    BusFaultResult,
    BusModel,
    LineFault,
    ModuleDescriptor,
    ModuleKind,
    NackAddr,
    NackData,
    Transaction,
    TransactionResult,
    WHO_AM_I_REG,
)
from .connector import (
    DEFAULT_TRIALS,
    MotionKind,
    PmeStrip,
    detachment_trials,
    motion as make_motion,
    peak_inertial_force,
)
from .signal import (
    DEFAULT_BITRATE_HZ,
    DEFAULT_HYSTERESIS_V,
    DEFAULT_SAMPLE_RATE_HZ,
    LineParams,
)
from .topology import (
    GarmentLayout,
    build_conductance_graph,
    layout_from_dict,
    layout_to_dict,
    reachable_fraction,
    reference_layout,
    sample_misalignment,
)

SCENARIO_SCHEMA = 1


class ScenarioError(ValueError):
    pass


class SchemaError(ScenarioError):
    """Scenario document has the wrong schema tag or unexpected fields."""


class MalformedScenarioError(ScenarioError):
    """Scenario file is not valid JSON at all."""


class EventError(ScenarioError):
    """An event cannot be applied; carries the offending event index."""

    def __init__(self, index: int, message: str):
        super().__init__(f"event {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class Misalignment:
    sigma_mm: float
    tolerance_mm: float = 1.0

    def __post_init__(self):
        if self.sigma_mm < 0:
            raise ScenarioError("sigma_mm must be non-negative")
        if self.tolerance_mm <= 0:
            raise ScenarioError("tolerance_mm must be positive")


@dataclass(frozen=True)
class ModulePlacement:
    site: str
    address: int
    kind: ModuleKind = ModuleKind.IMU
    mass_kg: float = 0.001


@dataclass(frozen=True)
class AttachEvent:
    t: float
    site: str
    address: int
    module_kind: ModuleKind = ModuleKind.IMU
    mass_kg: float = 0.001
    kind: str = field(default="attach", init=False)


@dataclass(frozen=True)
class DetachEvent:
    t: float
    address: int
    kind: str = field(default="detach", init=False)


@dataclass(frozen=True)
class MotionEvent:
    t: float
    motion: MotionKind
    trials: int = DEFAULT_TRIALS
    peak_accel_mps2: float | None = None
    kind: str = field(default="motion", init=False)


@dataclass(frozen=True)
class TransactEvent:
    t: float
    address: int
    direction: str = "read"
    register: int = 0
    length: int = 1
    payload: tuple[int, ...] = ()
    kind: str = field(default="transact", init=False)


@dataclass(frozen=True)
class PollAllEvent:
    t: float
    kind: str = field(default="poll_all", init=False)


@dataclass(frozen=True)
class InjectFaultEvent:
    t: float
    fault: LineFault
    kind: str = field(default="inject_fault", init=False)


@dataclass(frozen=True)
class ClearFaultEvent:
    t: float
    fault: LineFault
    kind: str = field(default="clear_fault", init=False)


@dataclass(frozen=True)
class SetTemperatureEvent:
    t: float
    address: int
    temperature_c: float
    kind: str = field(default="set_temperature", init=False)


Event = (AttachEvent | DetachEvent | MotionEvent | TransactEvent
         | PollAllEvent | InjectFaultEvent | ClearFaultEvent
         | SetTemperatureEvent)


@dataclass
class Scenario:
    layout: GarmentLayout
    hub_site: str
    seed: int = 0
    line: LineParams = field(default_factory=LineParams)
    bitrate_hz: float = DEFAULT_BITRATE_HZ
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    hysteresis_v: float = DEFAULT_HYSTERESIS_V
    bit_accurate: bool = False
    connector_default: PmeStrip = field(default_factory=PmeStrip)
    connector_overrides: dict[int, PmeStrip] = field(default_factory=dict)
    misalignment: Misalignment | None = None
    modules: tuple[ModulePlacement, ...] = ()
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        if self.seed < 0:
            raise ScenarioError("seed must be non-negative")
        if self.hub_site not in self.layout.site_ids():
            raise ScenarioError(f"hub site {self.hub_site!r} not in layout")
        seen_sites: set[str] = set()
        for i, m in enumerate(self.modules):
            if m.site not in self.layout.site_ids():
                raise ScenarioError(f"module {i}: unknown site {m.site!r}")
            if m.site in seen_sites:
                raise ScenarioError(f"module {i}: site {m.site!r} used twice")
            seen_sites.add(m.site)
        prev = -math.inf
        for i, ev in enumerate(self.events):
            if not math.isfinite(ev.t) or ev.t < 0:
                raise EventError(i, "timestamp must be finite and >= 0")
            if ev.t < prev:
                raise EventError(i, "events must be ordered by timestamp")
            prev = ev.t


@dataclass
class SimResult:
    seed: int
    outcomes: list[dict]
    final_scan: list[int]
    site_margins: dict[str, dict]
    detachments: list[dict]
    summary: dict

    def to_dict(self) -> dict:
        return {
            "schema": SCENARIO_SCHEMA,
            "seed": self.seed,
            "outcomes": self.outcomes,
            "final_scan": self.final_scan,
            "site_margins": self.site_margins,
            "detachments": self.detachments,
            "summary": self.summary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True,
                          separators=(",", ":"))

    def to_bytes(self) -> bytes:
        return self.to_json().encode("utf-8")


def derive_seed(master: int, index: int) -> int:
    """Seed of the index-th run in a batch rooted at master."""
    if index < 0:
        raise ValueError("index must be non-negative")
    return master + index


def _motion_trial_seed(master: int, motion_counter: int, address: int) -> int:
    ss = np.random.SeedSequence([master, 1, motion_counter, address])
    return int(ss.generate_state(1, np.uint64)[0])


def _result_to_dict(result: TransactionResult) -> dict:
    if isinstance(result, Ack):
        return {"type": "ack", "data": list(result.data)}
    if isinstance(result, NackAddr):
        return {"type": "nack_addr"}
    if isinstance(result, NackData):
        return {"type": "nack_data"}
    if isinstance(result, BusFaultResult):
        return {"type": "bus_fault", "fault_kind": result.fault_kind}
    raise TypeError(f"unexpected result {result!r}")


def run_scenario(scenario: Scenario) -> SimResult:
    """Replay the scenario's event script and collect every outcome.

    Invalid operations (attach to a taken site, detach an absent address,
    clear a fault never injected) abort with an EventError naming the event;
    bus-level failures such as NACKs are ordinary outcomes, not errors.
    """
    layout = scenario.layout
    if scenario.misalignment is not None:
        layout = sample_misalignment(layout, scenario.misalignment.sigma_mm,
                                     scenario.misalignment.tolerance_mm,
                                     seed=scenario.seed)
    bus = BusModel(layout, scenario.hub_site, scenario.line,
                   bitrate_hz=scenario.bitrate_hz,
                   sample_rate_hz=scenario.sample_rate_hz,
                   hysteresis_v=scenario.hysteresis_v,
                   seed=scenario.seed)
    for i, placement in enumerate(scenario.modules):
        try:
            bus.attach(placement.site, ModuleDescriptor(
                placement.address, placement.kind, mass_kg=placement.mass_kg))
        except BusError as exc:
            raise ScenarioError(f"module {i}: {exc}") from exc

    outcomes: list[dict] = []
    detachments: list[dict] = []
    counts = {"ack": 0, "nack_addr": 0, "nack_data": 0, "bus_fault": 0}
    motion_counter = 0

    for i, ev in enumerate(scenario.events):
        record: dict = {"index": i, "t": ev.t, "kind": ev.kind}
        if isinstance(ev, AttachEvent):
            try:
                bus.attach(ev.site, ModuleDescriptor(ev.address,
                                                     ev.module_kind,
                                                     mass_kg=ev.mass_kg))
            except BusError as exc:
                raise EventError(i, str(exc)) from exc
            record.update(site=ev.site, address=ev.address)
        elif isinstance(ev, DetachEvent):
            site = bus.site_of(ev.address)
            if site is None:
                raise EventError(i, f"address {ev.address:#x} not attached")
            bus.detach_site(site)
            record.update(site=site, address=ev.address)
        elif isinstance(ev, MotionEvent):
            motion_counter += 1
            profile = make_motion(ev.motion, ev.peak_accel_mps2,
                                  trials=ev.trials)
            shaken = []
            for site in bus.layout.site_ids():
                desc = bus.attached.get(site)
                if desc is None:
                    continue
                strip = scenario.connector_overrides.get(
                    desc.address, scenario.connector_default)
                remaining = _run_trials(desc, strip, profile,
                                        scenario.seed, motion_counter)
                detached = remaining < profile.trials
                shaken.append({"site": site, "address": desc.address,
                               "remaining": remaining,
                               "trials": profile.trials,
                               "detached": detached})
            for entry in shaken:
                if entry["detached"]:
                    bus.detach_site(entry["site"])
                    detachments.append({"t": ev.t,
                                        "motion": profile.kind.value,
                                        "site": entry["site"],
                                        "address": entry["address"],
                                        "remaining": entry["remaining"],
                                        "trials": entry["trials"]})
            record.update(motion=profile.kind.value,
                          peak_accel_mps2=profile.peak_accel_mps2,
                          modules=shaken)
        elif isinstance(ev, TransactEvent):
            txn = Transaction(ev.address, ev.direction, ev.register,
                              ev.length, ev.payload)
            result = bus.transact(txn, scenario.bit_accurate)
            detail = _result_to_dict(result)
            counts[detail["type"]] += 1
            record.update(address=ev.address, direction=ev.direction,
                          register=ev.register, result=detail)
        elif isinstance(ev, PollAllEvent):
            scan = bus.scan()
            replies = []
            for address in scan:
                result = bus.transact(Transaction(address, "read",
                                                  WHO_AM_I_REG, 1),
                                      scenario.bit_accurate)
                detail = _result_to_dict(result)
                counts[detail["type"]] += 1
                replies.append({"address": address, "result": detail})
            record.update(scan=scan, replies=replies)
        elif isinstance(ev, InjectFaultEvent):
            try:
                bus.inject_fault(ev.fault)
            except (BusError, ValueError) as exc:
                raise EventError(i, str(exc)) from exc
            record.update(fault=fault_to_dict(ev.fault))
        elif isinstance(ev, ClearFaultEvent):
            try:
                bus.clear_fault(ev.fault)
            except BusError as exc:
                raise EventError(i, str(exc)) from exc
            record.update(fault=fault_to_dict(ev.fault))
        elif isinstance(ev, SetTemperatureEvent):
            bus.set_temperature(ev.address, ev.temperature_c)
            record.update(address=ev.address,
                          temperature_c=ev.temperature_c)
        else:
            raise EventError(i, f"unknown event kind {ev!r}")
        outcomes.append(record)

    site_margins = {}
    for site in layout.site_ids():
        margin, decodable = bus.site_margin(site)
        site_margins[site] = {
            "margin_v": margin,
            "decodable": decodable,
            "reachable": margin is not None,
        }
    disconnected = None
    if scenario.misalignment is not None:
        disconnected = 1.0 - reachable_fraction(bus.base_graph,
                                                scenario.hub_site)
    final_scan = bus.scan()
    summary = {
        "n_events": len(scenario.events),
        "n_ack": counts["ack"],
        "n_nack_addr": counts["nack_addr"],
        "n_nack_data": counts["nack_data"],
        "n_bus_fault": counts["bus_fault"],
        "n_detached": len(detachments),
        "attached_final": len(bus.attached),
        "scan_size": len(final_scan),
        "disconnected_fraction": disconnected,
    }
    return SimResult(scenario.seed, outcomes, final_scan, site_margins,
                     detachments, summary)


def _run_trials(desc: ModuleDescriptor, strip: PmeStrip,
                profile, master_seed: int, motion_counter: int) -> int:
    seed = _motion_trial_seed(master_seed, motion_counter, desc.address)
    return detachment_trials(desc.mass_kg, strip, profile, seed)


# -- batch helpers ----------------------------------------------------------


@dataclass
class MonteCarloReport:
    n_runs: int
    master_seed: int
    stats: dict[str, dict[str, float]]
    summaries: list[dict]


def run_monte_carlo(scenario: Scenario, n_runs: int,
                    base_seed: int | None = None) -> MonteCarloReport:
    """Re-run the scenario under derived seeds and aggregate its summary.

    Run i uses seed derive_seed(master, i), so a one-run batch reproduces
    run_scenario exactly.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    master = scenario.seed if base_seed is None else base_seed
    summaries = []
    for i in range(n_runs):
        result = run_scenario(replace(scenario,
                                      seed=derive_seed(master, i)))
        summaries.append(result.summary)
    stats: dict[str, dict[str, float]] = {}
    for key in summaries[0]:
        values = [s[key] for s in summaries]
        if any(v is None for v in values):
            continue
        arr = np.asarray(values, dtype=float)
        mean = float(arr.mean())
        std = float(arr.std(ddof=1)) if n_runs > 1 else 0.0
        stats[key] = {"mean": mean, "std": std,
                      "ci95_half": 1.96 * std / math.sqrt(n_runs)}
    return MonteCarloReport(n_runs, master, stats, summaries)


def shake_test_table(scenario: Scenario,
                     motions: tuple[MotionKind, ...] | None = None,
                     trials: int = DEFAULT_TRIALS) -> list[dict]:
    """One independent shake campaign per motion, from the initial placement.

    Each motion runs against a fresh copy of the scenario (events replaced by
    the single shake), so campaigns never influence each other.
    """
    kinds = motions if motions is not None else tuple(MotionKind)
    table = []
    for kind in kinds:
        sc = replace(scenario,
                     events=(MotionEvent(0.0, MotionKind(kind), trials),))
        result = run_scenario(sc)
        outcome = result.outcomes[0]
        rows = []
        for entry in outcome["modules"]:
            mass = next(m.mass_kg for m in scenario.modules
                        if m.address == entry["address"])
            rows.append({**entry,
                         "intact": entry["remaining"] == entry["trials"],
                         "peak_force_n": peak_inertial_force(
                             mass, make_motion(kind, trials=trials))})
        table.append({"motion": MotionKind(kind).value,
                      "peak_accel_mps2": outcome["peak_accel_mps2"],
                      "trials": trials,
                      "modules": rows})
    return table


def reference_scenario(seed: int = 42) -> Scenario:
    """Default jacket with the hub on the right cuff and five motion sensors."""
    return Scenario(
        layout=reference_layout(),
        hub_site="right_wrist",
        seed=seed,
        modules=(
            ModulePlacement("left_wrist", 0x10),
            ModulePlacement("sleeve_50", 0x11),
            ModulePlacement("back", 0x12),
            ModulePlacement("chest_center", 0x13),
            ModulePlacement("waist_center", 0x14),
        ),
    )


# -- serialization ----------------------------------------------------------


def _check_keys(obj: dict, allowed: set[str], required: set[str],
                where: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"{where}: unknown fields {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise SchemaError(f"{where}: missing fields {sorted(missing)}")


def fault_to_dict(fault: LineFault) -> dict:
    return {"kind": fault.kind, "channels": list(fault.channels),
            "group_id": fault.group_id, "x_start_cm": fault.x_start_cm,
            "x_end_cm": fault.x_end_cm}


def fault_from_dict(data: dict) -> LineFault:
    keys = {"kind", "channels", "group_id", "x_start_cm", "x_end_cm"}
    _check_keys(data, keys, keys, "fault")
    try:
        return LineFault(data["kind"], tuple(data["channels"]),
                         data["group_id"], float(data["x_start_cm"]),
                         float(data["x_end_cm"]))
    except ValueError as exc:
        raise SchemaError(f"fault: {exc}") from exc


def _strip_to_dict(strip: PmeStrip) -> dict:
    return {
        "width_mm": strip.width_mm,
        "length_mm": strip.length_mm,
        "tension_strain": [list(pair) for pair in strip.tension_strain],
        "holding_force_n": strip.holding_force_n,
        "holding_sigma_n": strip.holding_sigma_n,
    }


def _strip_from_dict(data: dict, where: str) -> PmeStrip:
    keys = {"width_mm", "length_mm", "tension_strain", "holding_force_n",
            "holding_sigma_n"}
    _check_keys(data, keys, keys, where)
    try:
        return PmeStrip(
            width_mm=float(data["width_mm"]),
            length_mm=float(data["length_mm"]),
            tension_strain=tuple((float(t), float(s))
                                 for t, s in data["tension_strain"]),
            holding_force_n=float(data["holding_force_n"]),
            holding_sigma_n=float(data["holding_sigma_n"]),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc


_EVENT_FIELDS = {
    "attach": ({"site", "address"}, {"module_kind", "mass_kg"}),
    "detach": ({"address"}, set()),
    "motion": ({"motion"}, {"trials", "peak_accel_mps2"}),
    "transact": ({"address"}, {"direction", "register", "length", "payload"}),
    "poll_all": (set(), set()),
    "inject_fault": ({"fault"}, set()),
    "clear_fault": ({"fault"}, set()),
    "set_temperature": ({"address", "temperature_c"}, set()),
}


def event_to_dict(ev: Event) -> dict:
    data: dict = {"t": ev.t, "kind": ev.kind}
    if isinstance(ev, AttachEvent):
        data.update(site=ev.site, address=ev.address,
                    module_kind=ev.module_kind.value, mass_kg=ev.mass_kg)
    elif isinstance(ev, DetachEvent):
        data.update(address=ev.address)
    elif isinstance(ev, MotionEvent):
        data.update(motion=ev.motion.value, trials=ev.trials)
        if ev.peak_accel_mps2 is not None:
            data.update(peak_accel_mps2=ev.peak_accel_mps2)
    elif isinstance(ev, TransactEvent):
        data.update(address=ev.address, direction=ev.direction,
                    register=ev.register, length=ev.length,
                    payload=list(ev.payload))
    elif isinstance(ev, (InjectFaultEvent, ClearFaultEvent)):
        data.update(fault=fault_to_dict(ev.fault))
    elif isinstance(ev, SetTemperatureEvent):
        data.update(address=ev.address, temperature_c=ev.temperature_c)
    return data


def event_from_dict(data: dict, index: int) -> Event:
    where = f"event {index}"
    if not isinstance(data, dict) or "kind" not in data or "t" not in data:
        raise SchemaError(f"{where}: needs 't' and 'kind'")
    kind = data["kind"]
    if kind not in _EVENT_FIELDS:
        raise SchemaError(f"{where}: unknown kind {kind!r}")
    required, optional = _EVENT_FIELDS[kind]
    _check_keys(data, required | optional | {"t", "kind"},
                required | {"t", "kind"}, where)
    t = float(data["t"])
    try:
        if kind == "attach":
            return AttachEvent(t, data["site"], int(data["address"]),
                               ModuleKind(data.get("module_kind", "imu")),
                               float(data.get("mass_kg", 0.001)))
        if kind == "detach":
            return DetachEvent(t, int(data["address"]))
        if kind == "motion":
            accel = data.get("peak_accel_mps2")
            return MotionEvent(t, MotionKind(data["motion"]),
                               int(data.get("trials", DEFAULT_TRIALS)),
                               None if accel is None else float(accel))
        if kind == "transact":
            return TransactEvent(t, int(data["address"]),
                                 data.get("direction", "read"),
                                 int(data.get("register", 0)),
                                 int(data.get("length", 1)),
                                 tuple(data.get("payload", ())))
        if kind == "poll_all":
            return PollAllEvent(t)
        if kind == "inject_fault":
            return InjectFaultEvent(t, fault_from_dict(data["fault"]))
        if kind == "clear_fault":
            return ClearFaultEvent(t, fault_from_dict(data["fault"]))
        return SetTemperatureEvent(t, int(data["address"]),
                                   float(data["temperature_c"]))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"{where}: {exc}") from exc


_SCENARIO_KEYS = {"schema", "seed", "hub_site", "layout", "line", "signaling",
                  "connector", "misalignment", "modules", "events"}


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "schema": SCENARIO_SCHEMA,
        "seed": scenario.seed,
        "hub_site": scenario.hub_site,
        "layout": layout_to_dict(scenario.layout),
        "line": {
            "resistance_ohm_per_m": scenario.line.resistance_ohm_per_m,
            "capacitance_f_per_m": scenario.line.capacitance_f_per_m,
            "receiver_load_f": scenario.line.receiver_load_f,
            "receiver_termination_ohm": scenario.line.receiver_termination_ohm,
            "supply_v": scenario.line.supply_v,
            "rise_time_s": scenario.line.rise_time_s,
        },
        "signaling": {
            "bitrate_hz": scenario.bitrate_hz,
            "sample_rate_hz": scenario.sample_rate_hz,
            "hysteresis_v": scenario.hysteresis_v,
            "bit_accurate": scenario.bit_accurate,
        },
        "connector": {
            "default": _strip_to_dict(scenario.connector_default),
            "overrides": {str(addr): _strip_to_dict(strip)
                          for addr, strip in
                          sorted(scenario.connector_overrides.items())},
        },
        "misalignment": None if scenario.misalignment is None else {
            "sigma_mm": scenario.misalignment.sigma_mm,
            "tolerance_mm": scenario.misalignment.tolerance_mm,
        },
        "modules": [{"site": m.site, "address": m.address,
                     "kind": m.kind.value, "mass_kg": m.mass_kg}
                    for m in scenario.modules],
        "events": [event_to_dict(ev) for ev in scenario.events],
    }


def scenario_from_dict(data: dict) -> Scenario:
    _check_keys(data, _SCENARIO_KEYS, {"schema", "hub_site", "layout"},
                "scenario")
    if data["schema"] != SCENARIO_SCHEMA:
        raise SchemaError(f"unsupported scenario schema {data['schema']!r}")

    line_data = data.get("line", {})
    line_keys = {"resistance_ohm_per_m", "capacitance_f_per_m",
                 "receiver_load_f", "receiver_termination_ohm", "supply_v",
                 "rise_time_s"}
    _check_keys(line_data, line_keys, set(), "line")
    sig_data = data.get("signaling", {})
    _check_keys(sig_data, {"bitrate_hz", "sample_rate_hz", "hysteresis_v",
                           "bit_accurate"}, set(), "signaling")
    conn_data = data.get("connector", {})
    _check_keys(conn_data, {"default", "overrides"}, set(), "connector")

    try:
        layout = layout_from_dict(data["layout"])
    except ValueError as exc:
        raise SchemaError(f"layout: {exc}") from exc

    default_strip = PmeStrip()
    if "default" in conn_data:
        default_strip = _strip_from_dict(conn_data["default"],
                                         "connector.default")
    overrides = {}
    for addr_str, strip_data in conn_data.get("overrides", {}).items():
        overrides[int(addr_str)] = _strip_from_dict(
            strip_data, f"connector.overrides[{addr_str}]")

    misalignment = None
    mis_data = data.get("misalignment")
    if mis_data is not None:
        _check_keys(mis_data, {"sigma_mm", "tolerance_mm"}, {"sigma_mm"},
                    "misalignment")
        misalignment = Misalignment(float(mis_data["sigma_mm"]),
                                    float(mis_data.get("tolerance_mm", 1.0)))

    modules = []
    for i, m in enumerate(data.get("modules", [])):
        _check_keys(m, {"site", "address", "kind", "mass_kg"},
                    {"site", "address"}, f"module {i}")
        modules.append(ModulePlacement(m["site"], int(m["address"]),
                                       ModuleKind(m.get("kind", "imu")),
                                       float(m.get("mass_kg", 0.001))))

    events = tuple(event_from_dict(ev, i)
                   for i, ev in enumerate(data.get("events", [])))

    try:
        return Scenario(
            layout=layout,
            hub_site=data["hub_site"],
            seed=int(data.get("seed", 0)),
            line=LineParams(
                resistance_ohm_per_m=float(
                    line_data.get("resistance_ohm_per_m", 20.0)),
                capacitance_f_per_m=float(
                    line_data.get("capacitance_f_per_m", 50e-12)),
                receiver_load_f=float(
                    line_data.get("receiver_load_f", 400e-12)),
                receiver_termination_ohm=float(
                    line_data.get("receiver_termination_ohm", 130.0)),
                supply_v=float(line_data.get("supply_v", 5.0)),
                rise_time_s=float(line_data.get("rise_time_s", 1e-6)),
            ),
            bitrate_hz=float(sig_data.get("bitrate_hz", DEFAULT_BITRATE_HZ)),
            sample_rate_hz=float(sig_data.get("sample_rate_hz",
                                              DEFAULT_SAMPLE_RATE_HZ)),
            hysteresis_v=float(sig_data.get("hysteresis_v",
                                            DEFAULT_HYSTERESIS_V)),
            bit_accurate=bool(sig_data.get("bit_accurate", False)),
            connector_default=default_strip,
            connector_overrides=overrides,
            misalignment=misalignment,
            modules=tuple(modules),
            events=events,
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


def scenario_to_json(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2, sort_keys=True)


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(scenario_to_json(scenario))
        fh.write("\n")


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedScenarioError(f"not valid JSON: {exc}") from exc
    return scenario_from_dict(data)


def transactions_to_jsonl(result: SimResult) -> str:
    """Flatten transaction outcomes to one JSON object per line."""
    lines = []
    for outcome in result.outcomes:
        if outcome["kind"] == "transact":
            lines.append(json.dumps(
                {"t": outcome["t"], "address": outcome["address"],
                 "result": outcome["result"]},
                sort_keys=True, separators=(",", ":")))
        elif outcome["kind"] == "poll_all":
            for reply in outcome["replies"]:
                lines.append(json.dumps(
                    {"t": outcome["t"], "address": reply["address"],
                     "result": reply["result"]},
                    sort_keys=True, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")
