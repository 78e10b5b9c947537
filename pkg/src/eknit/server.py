"""HTTP + WebSocket facade for interactive layout editing.

Every client session (X-Session-Id header, default "default") owns an
independent bus it can mutate through REST calls; a WebSocket at /api/events
streams the resulting state changes with a per-session monotone sequence
number so clients can reconcile snapshots against live pushes.
"""

from __future__ import annotations

import asyncio
import threading
import time

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from .bus import (
    ADDRESS_MAX,
    ADDRESS_MIN,
    BusModel,
    LineFault,
    ModuleDescriptor,
    ModuleKind,
)
from .connector import MotionKind, detachment_trials, motion as make_motion
from .engine import Scenario, _motion_trial_seed, fault_to_dict, \
    reference_scenario
from .placement import (
    DEFAULT_ARM_POSITIONS,
    DEFAULT_NOISE_MODEL,
    rank_placements,
    synthesize_flexion_trace,
)
from .topology import layout_to_dict

DEFAULT_SESSION_ID = "default"
DEFAULT_IDLE_TTL_S = 1800.0
EVENT_RETENTION = 1000
PUSH_POLL_S = 0.05

# margin bands (volts) splitting decodable sites into classes 1..4;
# class 0 is unreachable or undecodable
HEATMAP_THRESHOLDS_V = (2.5, 5.0, 7.5)

PUSH_TYPES = ("module_attached", "module_detached", "scan_changed",
              "fault_injected", "fault_cleared")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def heatmap_class(margin_v: float | None, decodable: bool) -> int:
    if margin_v is None or not decodable:
        return 0
    return 1 + sum(margin_v > t for t in HEATMAP_THRESHOLDS_V)


class _StrictBody(BaseModel):
    """Reject unknown fields so a typo'd optional key fails loudly."""

    model_config = ConfigDict(extra="forbid")


class ModuleBody(_StrictBody):
    site: str
    address: int = Field(ge=ADDRESS_MIN, le=ADDRESS_MAX)
    kind: str = "imu"


class MotionBody(_StrictBody):
    motion: str
    trials: int = Field(default=50, ge=1, le=10000)
    peak_accel_mps2: float | None = Field(default=None, gt=0)


class FaultBody(_StrictBody):
    kind: str
    channels: list[int]
    group_id: str
    x_start_cm: float
    x_end_cm: float


class PlacementBody(_StrictBody):
    seeds: int = Field(default=100, ge=1, le=100000)
    duration_s: float = Field(default=10.0, gt=0)
    base_seed: int = Field(default=0, ge=0)


class _Session:
    """One client's mutable garment state plus its push-event log."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.lock = threading.Lock()
        self.bus = BusModel(scenario.layout, scenario.hub_site, scenario.line,
                            bitrate_hz=scenario.bitrate_hz,
                            sample_rate_hz=scenario.sample_rate_hz,
                            hysteresis_v=scenario.hysteresis_v,
                            seed=scenario.seed)
        self.modules: dict[str, dict] = {}
        self.faults: dict[str, LineFault] = {}
        self._next_module = 1
        self._next_fault = 1
        self.seq = 0
        self.events: list[dict] = []
        self.motion_counter = 0
        self.touched = time.monotonic()
        for placement in scenario.modules:
            desc = ModuleDescriptor(placement.address, placement.kind,
                                    mass_kg=placement.mass_kg)
            self.bus.attach(placement.site, desc)
            self._register_module(placement.site, desc)
        self.last_scan = self.scan_snapshot()

    def _register_module(self, site: str, desc: ModuleDescriptor) -> str:
        mid = f"m{self._next_module}"
        self._next_module += 1
        self.modules[mid] = {"id": mid, "site": site,
                             "address": desc.address,
                             "kind": desc.kind.value}
        return mid

    def module_at(self, site: str) -> dict | None:
        for info in self.modules.values():
            if info["site"] == site:
                return info
        return None

    def push(self, kind: str, data: dict) -> None:
        self.seq += 1
        self.events.append({"seq": self.seq, "type": kind, "data": data})
        if len(self.events) > EVENT_RETENTION:
            del self.events[:len(self.events) - EVENT_RETENTION]

    def scan_snapshot(self) -> dict:
        addresses = self.bus.scan()
        sites = []
        for site in self.bus.layout.site_ids():
            margin, decodable = self.bus.site_margin(site)
            info = self.module_at(site)
            sites.append({
                "site": site,
                "margin_v": margin,
                "decodable": decodable,
                "reachable": margin is not None,
                "heatmap_class": heatmap_class(margin, decodable),
                "module_id": None if info is None else info["id"],
                "address": None if info is None else info["address"],
            })
        return {"addresses": addresses, "sites": sites}

    def push_scan_if_changed(self) -> None:
        snap = self.scan_snapshot()
        if snap != self.last_scan:
            self.last_scan = snap
            self.push("scan_changed", snap)


class _SessionStore:
    def __init__(self, scenario: Scenario, idle_ttl_s: float):
        self.scenario = scenario
        self.idle_ttl_s = idle_ttl_s
        self._sessions: dict[str, _Session] = {}
        self._lock = threading.Lock()

    def get(self, session_id: str) -> _Session:
        now = time.monotonic()
        with self._lock:
            stale = [sid for sid, s in self._sessions.items()
                     if now - s.touched > self.idle_ttl_s]
            for sid in stale:
                del self._sessions[sid]
            session = self._sessions.get(session_id)
            if session is None:
                session = _Session(self.scenario)
                self._sessions[session_id] = session
            session.touched = now
            return session


def _session_id(request: Request) -> str:
    return request.headers.get("x-session-id", DEFAULT_SESSION_ID)


def create_app(scenario: Scenario | None = None,
               idle_ttl_s: float = DEFAULT_IDLE_TTL_S) -> FastAPI:
    base = scenario if scenario is not None else reference_scenario()
    store = _SessionStore(base, idle_ttl_s)
    app = FastAPI(title="eknit studio API")
    app.state.store = store
    # the studio UI is served from a separate static origin during design work
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code,
                                     "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request,
                                 exc: RequestValidationError):
        parts = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"] if p != "body")
            parts.append(f"{loc or 'body'}: {err['msg']}")
        return JSONResponse(status_code=400,
                            content={"code": "bad_request",
                                     "message": "; ".join(parts)})

    def session_for(request: Request) -> _Session:
        return store.get(_session_id(request))

    @app.get("/api/layout")
    def get_layout(request: Request):
        session = session_for(request)
        with session.lock:
            occupancy = {site: None for site in session.bus.layout.site_ids()}
            for info in session.modules.values():
                occupancy[info["site"]] = info["id"]
            return {
                "layout": layout_to_dict(session.bus.layout),
                "hub_site": session.bus.hub_site,
                "occupancy": occupancy,
            }

    @app.get("/api/scan")
    def get_scan(request: Request):
        session = session_for(request)
        with session.lock:
            snap = session.scan_snapshot()
            session.last_scan = snap
            return {"seq": session.seq, **snap}

    @app.post("/api/modules", status_code=201)
    def post_module(body: ModuleBody, request: Request):
        session = session_for(request)
        with session.lock:
            if body.site not in session.bus.layout.site_ids():
                raise ApiError(404, "unknown_site",
                               f"no attachment site {body.site!r}")
            if body.site in session.bus.attached:
                raise ApiError(409, "site_occupied",
                               f"site {body.site!r} already has a module")
            try:
                kind = ModuleKind(body.kind)
            except ValueError:
                raise ApiError(400, "bad_request",
                               f"unknown module kind {body.kind!r}")
            if any(info["address"] == body.address
                   for info in session.modules.values()):
                raise ApiError(409, "address_in_use",
                               f"address {body.address:#x} already attached")
            desc = ModuleDescriptor(body.address, kind)
            session.bus.attach(body.site, desc)
            mid = session._register_module(body.site, desc)
            info = session.modules[mid]
            session.push("module_attached", dict(info))
            session.push_scan_if_changed()
            return dict(info)

    @app.delete("/api/modules/{module_id}")
    def delete_module(module_id: str, request: Request):
        session = session_for(request)
        with session.lock:
            info = session.modules.get(module_id)
            if info is None:
                raise ApiError(404, "unknown_module",
                               f"no module {module_id!r}")
            session.bus.detach_site(info["site"])
            del session.modules[module_id]
            session.push("module_detached",
                         {**info, "reason": "removed"})
            session.push_scan_if_changed()
            return {"removed": module_id}

    @app.post("/api/motion")
    def post_motion(body: MotionBody, request: Request):
        session = session_for(request)
        with session.lock:
            try:
                profile = make_motion(MotionKind(body.motion),
                                      body.peak_accel_mps2,
                                      trials=body.trials)
            except ValueError:
                raise ApiError(400, "bad_request",
                               f"unknown motion {body.motion!r}")
            session.motion_counter += 1
            results = []
            for info in list(session.modules.values()):
                strip = session.scenario.connector_overrides.get(
                    info["address"], session.scenario.connector_default)
                seed = _motion_trial_seed(session.scenario.seed,
                                          session.motion_counter,
                                          info["address"])
                desc = session.bus.attached[info["site"]]
                remaining = detachment_trials(desc.mass_kg, strip, profile,
                                              seed)
                detached = remaining < profile.trials
                results.append({**info, "remaining": remaining,
                                "trials": profile.trials,
                                "detached": detached})
                if detached:
                    session.bus.detach_site(info["site"])
                    del session.modules[info["id"]]
                    session.push("module_detached",
                                 {**info, "reason": "motion",
                                  "motion": profile.kind.value,
                                  "remaining": remaining})
            session.push_scan_if_changed()
            return {"motion": profile.kind.value,
                    "peak_accel_mps2": profile.peak_accel_mps2,
                    "results": results}

    @app.post("/api/placement-eval")
    def post_placement_eval(body: PlacementBody, request: Request):
        truth = synthesize_flexion_trace(body.duration_s, 1.0, 90.0)
        report = rank_placements(DEFAULT_ARM_POSITIONS, truth,
                                 DEFAULT_NOISE_MODEL,
                                 seeds_per_position=body.seeds,
                                 base_seed=body.base_seed)
        return report.to_dict()

    @app.post("/api/faults", status_code=201)
    def post_fault(body: FaultBody, request: Request):
        session = session_for(request)
        with session.lock:
            try:
                fault = LineFault(body.kind, tuple(body.channels),
                                  body.group_id, body.x_start_cm,
                                  body.x_end_cm)
                session.bus.inject_fault(fault)
            except ValueError as exc:
                raise ApiError(400, "bad_fault", str(exc))
            fid = f"f{session._next_fault}"
            session._next_fault += 1
            session.faults[fid] = fault
            data = {"id": fid, **fault_to_dict(fault)}
            session.push("fault_injected", data)
            session.push_scan_if_changed()
            return data

    @app.delete("/api/faults/{fault_id}")
    def delete_fault(fault_id: str, request: Request):
        session = session_for(request)
        with session.lock:
            fault = session.faults.get(fault_id)
            if fault is None:
                raise ApiError(404, "unknown_fault",
                               f"no fault {fault_id!r}")
            session.bus.clear_fault(fault)
            del session.faults[fault_id]
            session.push("fault_cleared",
                         {"id": fault_id, **fault_to_dict(fault)})
            session.push_scan_if_changed()
            return {"removed": fault_id}

    @app.get("/api/schema")
    def get_schema():
        return {
            "schema": 1,
            "push_types": list(PUSH_TYPES),
            "heatmap_thresholds_v": list(HEATMAP_THRESHOLDS_V),
            "event_retention": EVENT_RETENTION,
            "session_header": "X-Session-Id",
            "endpoints": [
                "GET /api/layout",
                "GET /api/scan",
                "POST /api/modules",
                "DELETE /api/modules/{id}",
                "POST /api/motion",
                "POST /api/placement-eval",
                "POST /api/faults",
                "DELETE /api/faults/{id}",
                "GET /api/schema",
                "WS /api/events",
            ],
        }

    @app.websocket("/api/events")
    async def events_ws(ws: WebSocket):
        await ws.accept()
        sid = ws.query_params.get("session") \
            or ws.headers.get("x-session-id", DEFAULT_SESSION_ID)
        session = store.get(sid)
        try:
            last = int(ws.query_params.get("after", "0"))
        except ValueError:
            last = 0
        try:
            while True:
                with session.lock:
                    batch = [e for e in session.events if e["seq"] > last]
                    session.touched = time.monotonic()
                for event in batch:
                    await ws.send_json(event)
                    last = event["seq"]
                await asyncio.sleep(PUSH_POLL_S)
        except (WebSocketDisconnect, RuntimeError):
            return

    return app
