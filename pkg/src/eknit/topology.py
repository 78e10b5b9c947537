"""Garment conductor topology and per-channel resistive network queries.

A garment carries horizontal channel groups (six parallel conductive threads
each: power, two differential data pairs, ground) and vertical strips that
bridge groups.  Where a strip crosses a group, each of the six channels has a
junction whose alignment offset decides whether the crossing actually
conducts.  Everything downstream (bus scans, eye margins, Monte-Carlo yield)
is a query against the per-channel conductance graphs built here.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

CHANNELS = (1, 2, 3, 4, 5, 6)
CHANNEL_ROLES = {1: "VCC", 2: "SDA_P", 3: "SDA_N", 4: "SCL_P", 5: "SCL_N", 6: "GND"}
POWER_CHANNELS = (1, 6)
SIGNAL_CHANNELS = (2, 3, 4, 5)

DEFAULT_THREAD_OHM_PER_M = 20.0
DEFAULT_TOLERANCE_MM = 1.0
LAYOUT_SCHEMA = 1

DISCONNECTED = math.inf


class LayoutError(ValueError):
    """Structurally invalid garment layout."""


class UnachievableTargetError(ValueError):
    """The requested disconnection level cannot be produced on this layout."""


@dataclass(frozen=True)
class ChannelGroup:
    """Horizontal band of six parallel channel threads."""

    id: str
    y_cm: float
    x_start_cm: float
    x_end_cm: float
    ohm_per_m: float = DEFAULT_THREAD_OHM_PER_M


@dataclass(frozen=True)
class VerticalStrip:
    """Vertical conductor bridging two or more groups."""

    id: str
    x_cm: float
    spans: tuple[str, ...]
    ohm_per_m: float = DEFAULT_THREAD_OHM_PER_M


@dataclass(frozen=True)
class Junction:
    """One channel's contact point where a strip crosses a group.

    The junction conducts only when the strip's channel gap lines up with the
    group's thread: abs(offset) must stay within the layout tolerance.
    """

    group_id: str
    strip_id: str
    channel: int
    offset_mm: float = 0.0

    def connected(self, tolerance_mm: float) -> bool:
        return abs(self.offset_mm) <= tolerance_mm


@dataclass(frozen=True)
class AttachmentSite:
    """Snap point where a module can sit; at most one occupant."""

    id: str
    group_id: str
    x_cm: float
    occupant: str | None = None


def default_junctions(groups: tuple[ChannelGroup, ...],
                      strips: tuple[VerticalStrip, ...]) -> tuple[Junction, ...]:
    """All strip-group-channel junctions in canonical order, zero offsets."""
    out = []
    for strip in strips:
        for gid in strip.spans:
            for ch in CHANNELS:
                out.append(Junction(gid, strip.id, ch))
    return tuple(out)


@dataclass(frozen=True)
class GarmentLayout:
    groups: tuple[ChannelGroup, ...]
    strips: tuple[VerticalStrip, ...]
    sites: tuple[AttachmentSite, ...]
    junctions: tuple[Junction, ...]
    tolerance_mm: float = DEFAULT_TOLERANCE_MM
    thread_ohm_per_m: float = DEFAULT_THREAD_OHM_PER_M

    def __post_init__(self):
        _validate_layout(self)

    def group(self, gid: str) -> ChannelGroup:
        for g in self.groups:
            if g.id == gid:
                return g
        raise KeyError(gid)

    def site(self, sid: str) -> AttachmentSite:
        for s in self.sites:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def site_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.sites)

    def with_junctions(self, junctions: tuple[Junction, ...],
                       tolerance_mm: float | None = None) -> "GarmentLayout":
        tol = self.tolerance_mm if tolerance_mm is None else tolerance_mm
        return replace(self, junctions=junctions, tolerance_mm=tol)


def _validate_layout(layout: GarmentLayout) -> None:
    if not layout.groups:
        raise LayoutError("layout needs at least one group")
    if layout.tolerance_mm <= 0:
        raise LayoutError("tolerance_mm must be positive")
    if layout.thread_ohm_per_m <= 0:
        raise LayoutError("thread_ohm_per_m must be positive")

    group_ids = [g.id for g in layout.groups]
    if len(set(group_ids)) != len(group_ids):
        raise LayoutError("duplicate group ids")
    by_id = {g.id: g for g in layout.groups}
    for g in layout.groups:
        if g.x_start_cm >= g.x_end_cm:
            raise LayoutError(f"group {g.id!r} has empty span")
        if g.ohm_per_m <= 0:
            raise LayoutError(f"group {g.id!r} resistance must be positive")
    for a in layout.groups:
        for b in layout.groups:
            if a.id < b.id and a.y_cm == b.y_cm:
                if max(a.x_start_cm, b.x_start_cm) < min(a.x_end_cm, b.x_end_cm):
                    raise LayoutError(f"groups {a.id!r} and {b.id!r} overlap")

    strip_ids = [s.id for s in layout.strips]
    if len(set(strip_ids)) != len(strip_ids):
        raise LayoutError("duplicate strip ids")
    for s in layout.strips:
        if len(s.spans) < 2:
            raise LayoutError(f"strip {s.id!r} must span at least two groups")
        if len(set(s.spans)) != len(s.spans):
            raise LayoutError(f"strip {s.id!r} repeats a group")
        if s.ohm_per_m <= 0:
            raise LayoutError(f"strip {s.id!r} resistance must be positive")
        for gid in s.spans:
            g = by_id.get(gid)
            if g is None:
                raise LayoutError(f"strip {s.id!r} spans unknown group {gid!r}")
            if not (g.x_start_cm <= s.x_cm <= g.x_end_cm):
                raise LayoutError(
                    f"strip {s.id!r} at x={s.x_cm} misses group {gid!r}")

    site_ids = [s.id for s in layout.sites]
    if len(set(site_ids)) != len(site_ids):
        raise LayoutError("duplicate site ids")
    for s in layout.sites:
        g = by_id.get(s.group_id)
        if g is None:
            raise LayoutError(f"site {s.id!r} on unknown group {s.group_id!r}")
        if not (g.x_start_cm <= s.x_cm <= g.x_end_cm):
            raise LayoutError(f"site {s.id!r} lies outside group {s.group_id!r}")

    expected = {(gid, s.id, ch) for s in layout.strips for gid in s.spans
                for ch in CHANNELS}
    actual = [(j.group_id, j.strip_id, j.channel) for j in layout.junctions]
    if len(set(actual)) != len(actual):
        raise LayoutError("duplicate junctions")
    if set(actual) != expected:
        raise LayoutError("junction set must cover every strip crossing exactly once")


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


@dataclass(frozen=True)
class _Edge:
    u: int
    v: int
    ohm: float
    length_m: float
    kind: str            # "group" | "strip"
    owner: str           # group or strip id
    lo: float            # cm coordinate range covered by this segment
    hi: float


def two_point_resistance(n_nodes: int, edges, a: int, b: int) -> float:
    """Effective resistance between nodes a and b of an undirected network.

    ``edges`` is an iterable of (u, v, ohm) with ohm > 0.  Returns
    ``DISCONNECTED`` (inf) when no path exists.  Uses the graph-Laplacian
    pseudoinverse, so parallel branches combine the way real conductors do.
    """
    if a == b:
        return 0.0
    uf = _UnionFind(n_nodes)
    for u, v, _ in edges:
        uf.union(u, v)
    if uf.find(a) != uf.find(b):
        return DISCONNECTED
    comp = [i for i in range(n_nodes) if uf.find(i) == uf.find(a)]
    index = {node: k for k, node in enumerate(comp)}
    lap = np.zeros((len(comp), len(comp)))
    for u, v, ohm in edges:
        if u in index and v in index and u != v:
            g = 1.0 / ohm
            iu, iv = index[u], index[v]
            lap[iu, iu] += g
            lap[iv, iv] += g
            lap[iu, iv] -= g
            lap[iv, iu] -= g
    pinv = np.linalg.pinv(lap)
    ia, ib = index[a], index[b]
    return float(pinv[ia, ia] + pinv[ib, ib] - 2.0 * pinv[ia, ib])


class ConductanceGraph:
    """Per-channel resistive network over one layout.

    Nodes are taps on group threads and strip crossing points, with
    zero-resistance contacts collapsed.  Queries are cached per instance, so
    reuse the same graph for repeated lookups on an unchanged layout.
    """

    def __init__(self, sites: tuple[str, ...], n_nodes: dict[int, int],
                 site_nodes: dict[int, dict[str, int]],
                 edges: dict[int, tuple[_Edge, ...]]):
        self.sites = sites
        self._n_nodes = n_nodes
        self._site_nodes = site_nodes
        self._edges = edges
        self._labels: dict[int, list[int]] = {}
        self._pinv: dict[tuple[int, int], tuple[np.ndarray, dict[int, int]]] = {}
        self._dists: dict[tuple[int, int], dict[int, float]] = {}

    def edges(self, channel: int) -> tuple[_Edge, ...]:
        return self._edges[channel]

    def _node(self, site: str, channel: int) -> int:
        try:
            return self._site_nodes[channel][site]
        except KeyError:
            raise KeyError(f"unknown site {site!r}") from None

    def _component_labels(self, channel: int) -> list[int]:
        labels = self._labels.get(channel)
        if labels is None:
            uf = _UnionFind(self._n_nodes[channel])
            for e in self._edges[channel]:
                uf.union(e.u, e.v)
            labels = [uf.find(i) for i in range(self._n_nodes[channel])]
            self._labels[channel] = labels
        return labels

    def reachable(self, site_a: str, site_b: str, channel: int) -> bool:
        labels = self._component_labels(channel)
        return labels[self._node(site_a, channel)] == labels[self._node(site_b, channel)]

    def resistance(self, site_a: str, site_b: str, channel: int) -> float:
        na, nb = self._node(site_a, channel), self._node(site_b, channel)
        if na == nb:
            return 0.0
        labels = self._component_labels(channel)
        if labels[na] != labels[nb]:
            return DISCONNECTED
        key = (channel, labels[na])
        cached = self._pinv.get(key)
        if cached is None:
            comp = [i for i in range(self._n_nodes[channel]) if labels[i] == labels[na]]
            index = {node: k for k, node in enumerate(comp)}
            lap = np.zeros((len(comp), len(comp)))
            for e in self._edges[channel]:
                if e.u in index:
                    g = 1.0 / e.ohm
                    iu, iv = index[e.u], index[e.v]
                    lap[iu, iu] += g
                    lap[iv, iv] += g
                    lap[iu, iv] -= g
                    lap[iv, iu] -= g
            cached = (np.linalg.pinv(lap), index)
            self._pinv[key] = cached
        pinv, index = cached
        ia, ib = index[na], index[nb]
        return float(pinv[ia, ia] + pinv[ib, ib] - 2.0 * pinv[ia, ib])

    def shortest_length_m(self, site_a: str, site_b: str, channel: int) -> float:
        """Shortest conductor run between two sites (for capacitive loading)."""
        na, nb = self._node(site_a, channel), self._node(site_b, channel)
        key = (channel, na)
        dist = self._dists.get(key)
        if dist is None:
            adj: dict[int, list[tuple[int, float]]] = {}
            for e in self._edges[channel]:
                adj.setdefault(e.u, []).append((e.v, e.length_m))
                adj.setdefault(e.v, []).append((e.u, e.length_m))
            dist = {na: 0.0}
            queue = [(0.0, na)]
            while queue:
                d, node = heapq.heappop(queue)
                if d > dist.get(node, math.inf):
                    continue
                for nxt, w in adj.get(node, ()):
                    nd = d + w
                    if nd < dist.get(nxt, math.inf):
                        dist[nxt] = nd
                        heapq.heappush(queue, (nd, nxt))
            self._dists[key] = dist
        return dist.get(nb, DISCONNECTED)

    def without_spans(self, spans) -> "ConductanceGraph":
        """Copy of this graph with group segments overlapping ``spans`` removed.

        ``spans`` is an iterable of (group_id, x_start_cm, x_end_cm, channels).
        Overlap is strict, so spans that only touch a segment endpoint leave
        it in place.
        """
        spans = list(spans)
        new_edges = {}
        for ch in CHANNELS:
            kept = []
            for e in self._edges[ch]:
                cut = False
                if e.kind == "group":
                    for gid, x0, x1, channels in spans:
                        if ch in channels and e.owner == gid \
                                and max(e.lo, x0) < min(e.hi, x1):
                            cut = True
                            break
                if not cut:
                    kept.append(e)
            new_edges[ch] = tuple(kept)
        return ConductanceGraph(self.sites, dict(self._n_nodes),
                                self._site_nodes, new_edges)

    def reachable_sites(self, hub_site: str) -> frozenset[str]:
        """Sites connected to the hub on every one of the six channels."""
        out = set(self.sites)
        for ch in CHANNELS:
            labels = self._component_labels(ch)
            hub_label = labels[self._node(hub_site, ch)]
            out = {s for s in out if labels[self._site_nodes[ch][s]] == hub_label}
        return frozenset(out)


def build_conductance_graph(layout: GarmentLayout) -> ConductanceGraph:
    """Expand a layout into six per-channel resistive networks.

    Group threads become chains of segments between taps (sites and strip
    crossings), strips become vertical chains, and connected junctions weld
    the two together.  Junctions whose offset exceeds the tolerance contribute
    no contact at all.
    """
    strips_by_group: dict[str, list[VerticalStrip]] = {}
    for s in layout.strips:
        for gid in s.spans:
            strips_by_group.setdefault(gid, []).append(s)
    junction_state = {(j.group_id, j.strip_id, j.channel):
                      j.connected(layout.tolerance_mm) for j in layout.junctions}

    n_nodes: dict[int, int] = {}
    site_nodes: dict[int, dict[str, int]] = {}
    edges: dict[int, tuple[_Edge, ...]] = {}

    for ch in CHANNELS:
        ids: dict[tuple, int] = {}

        def node(key: tuple) -> int:
            if key not in ids:
                ids[key] = len(ids)
            return ids[key]

        raw_edges: list[tuple[int, int, float, float, str, str, float, float]] = []

        for g in layout.groups:
            taps = {g.x_start_cm, g.x_end_cm}
            taps.update(s.x_cm for s in layout.sites if s.group_id == g.id)
            taps.update(s.x_cm for s in strips_by_group.get(g.id, ()))
            xs = sorted(taps)
            for x0, x1 in zip(xs, xs[1:]):
                length_m = (x1 - x0) / 100.0
                raw_edges.append((node(("g", g.id, x0)), node(("g", g.id, x1)),
                                  length_m * g.ohm_per_m, length_m,
                                  "group", g.id, x0, x1))

        for s in layout.strips:
            crossings = sorted(s.spans, key=lambda gid: layout.group(gid).y_cm)
            for ga, gb in zip(crossings, crossings[1:]):
                dy = abs(layout.group(gb).y_cm - layout.group(ga).y_cm)
                length_m = dy / 100.0
                raw_edges.append((node(("s", s.id, ga)), node(("s", s.id, gb)),
                                  length_m * s.ohm_per_m, length_m,
                                  "strip", s.id, 0.0, 0.0))
            for gid in s.spans:
                if junction_state[(gid, s.id, ch)]:
                    raw_edges.append((node(("s", s.id, gid)),
                                      node(("g", gid, s.x_cm)),
                                      0.0, 0.0, "contact", s.id, 0.0, 0.0))

        for s in layout.sites:
            node(("g", s.group_id, s.x_cm))

        # Collapse zero-resistance links (contacts, coincident taps).
        uf = _UnionFind(len(ids))
        for u, v, ohm, *_ in raw_edges:
            if ohm == 0.0:
                uf.union(u, v)
        remap: dict[int, int] = {}
        for i in range(len(ids)):
            root = uf.find(i)
            if root not in remap:
                remap[root] = len(remap)
        final_edges = []
        for u, v, ohm, length_m, kind, owner, lo, hi in raw_edges:
            if ohm == 0.0:
                continue
            mu, mv = remap[uf.find(u)], remap[uf.find(v)]
            if mu != mv:
                final_edges.append(_Edge(mu, mv, ohm, length_m, kind, owner, lo, hi))

        n_nodes[ch] = len(remap)
        site_nodes[ch] = {s.id: remap[uf.find(ids[("g", s.group_id, s.x_cm)])]
                          for s in layout.sites}
        edges[ch] = tuple(final_edges)

    return ConductanceGraph(layout.site_ids(), n_nodes, site_nodes, edges)


def path_resistance(graph: ConductanceGraph, site_a: str, site_b: str,
                    channel: int) -> float:
    """Two-point effective resistance on one channel.

    Returns ``DISCONNECTED`` (inf ohms) when the sites share no conductive
    path.  Symmetric in its site arguments.
    """
    if channel not in CHANNELS:
        raise ValueError(f"channel must be in {CHANNELS}")
    return graph.resistance(site_a, site_b, channel)


def reachable_fraction(graph: ConductanceGraph, hub_site: str) -> float:
    """Fraction of attachment sites reachable from the hub on all channels."""
    if hub_site not in graph.sites:
        raise KeyError(f"unknown site {hub_site!r}")
    return len(graph.reachable_sites(hub_site)) / len(graph.sites)


def sample_misalignment(layout: GarmentLayout, sigma_mm: float,
                        tolerance_mm: float, seed: int) -> GarmentLayout:
    """Layout copy with junction offsets drawn iid Normal(0, sigma).

    The draw order follows ``layout.junctions``, so a given seed always
    produces the same offsets for the same layout.
    """
    if sigma_mm < 0:
        raise ValueError("sigma_mm must be non-negative")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(len(layout.junctions))
    offsets = z * sigma_mm
    junctions = tuple(replace(j, offset_mm=float(o))
                      for j, o in zip(layout.junctions, offsets))
    return layout.with_junctions(junctions, tolerance_mm=tolerance_mm)


class _DisconnectionSimulator:
    """Fast reachable-fraction evaluator for misalignment sweeps.

    Static conduction (threads, strip runs) is collapsed once; only junction
    contacts are toggled per sample.  Results for each junction on/off mask
    are memoised, which keeps thousand-seed calibration sweeps cheap.  Agrees
    with build_conductance_graph + reachable_fraction by construction of the
    same edge set.
    """

    def __init__(self, layout: GarmentLayout, hub_site: str):
        self.layout = layout
        self.hub_site = hub_site
        self.n_sites = len(layout.sites)
        # Static edges (threads, strip runs) collapse once; junction contacts
        # stay as gated pairs.  Mirrors build_conductance_graph's node scheme.
        self._per_channel: dict[int, dict] = {}
        strips_by_group: dict[str, list[VerticalStrip]] = {}
        for s in layout.strips:
            for gid in s.spans:
                strips_by_group.setdefault(gid, []).append(s)
        for ch in CHANNELS:
            ids: dict[tuple, int] = {}

            def node(key: tuple) -> int:
                if key not in ids:
                    ids[key] = len(ids)
                return ids[key]

            static_pairs: list[tuple[int, int]] = []
            for g in layout.groups:
                taps = {g.x_start_cm, g.x_end_cm}
                taps.update(s.x_cm for s in layout.sites if s.group_id == g.id)
                taps.update(s.x_cm for s in strips_by_group.get(g.id, ()))
                xs = sorted(taps)
                for x0, x1 in zip(xs, xs[1:]):
                    static_pairs.append((node(("g", g.id, x0)), node(("g", g.id, x1))))
            for s in layout.strips:
                crossings = sorted(s.spans, key=lambda gid: layout.group(gid).y_cm)
                for ga, gb in zip(crossings, crossings[1:]):
                    static_pairs.append((node(("s", s.id, ga)), node(("s", s.id, gb))))
            contact_pairs = {}
            for s in layout.strips:
                for gid in s.spans:
                    contact_pairs[(gid, s.id)] = (node(("s", s.id, gid)),
                                                  node(("g", gid, s.x_cm)))
            for s in layout.sites:
                node(("g", s.group_id, s.x_cm))

            uf = _UnionFind(len(ids))
            for u, v in static_pairs:
                uf.union(u, v)
            remap: dict[int, int] = {}
            for i in range(len(ids)):
                root = uf.find(i)
                if root not in remap:
                    remap[root] = len(remap)
            gated = [(remap[uf.find(contact_pairs[(j.group_id, j.strip_id)][0])],
                      remap[uf.find(contact_pairs[(j.group_id, j.strip_id)][1])])
                     for j in layout.junctions if j.channel == ch]
            jidx = [k for k, j in enumerate(layout.junctions) if j.channel == ch]
            sites = [remap[uf.find(ids[("g", s.group_id, s.x_cm)])]
                     for s in layout.sites]
            hub = remap[uf.find(ids[("g", layout.site(hub_site).group_id,
                                     layout.site(hub_site).x_cm)])]
            self._per_channel[ch] = {
                "n": len(remap), "gated": gated, "jidx": jidx,
                "sites": sites, "hub": hub, "cache": {},
            }

    def reachable_mask(self, connected: np.ndarray) -> int:
        """Bitmask over sites reachable from the hub on all six channels."""
        full = (1 << self.n_sites) - 1
        acc = full
        for ch in CHANNELS:
            info = self._per_channel[ch]
            key = 0
            for bit, k in enumerate(info["jidx"]):
                if connected[k]:
                    key |= 1 << bit
            mask = info["cache"].get(key)
            if mask is None:
                uf = _UnionFind(info["n"])
                for bit, (u, v) in enumerate(info["gated"]):
                    if key >> bit & 1:
                        uf.union(u, v)
                hub_root = uf.find(info["hub"])
                mask = 0
                for i, node_id in enumerate(info["sites"]):
                    if uf.find(node_id) == hub_root:
                        mask |= 1 << i
                info["cache"][key] = mask
            acc &= mask
            if acc == 0:
                break
        return acc

    def disconnected_fraction(self, abs_z: np.ndarray, sigma_mm: float,
                              tolerance_mm: float) -> float:
        connected = abs_z * sigma_mm <= tolerance_mm
        mask = self.reachable_mask(connected)
        return 1.0 - bin(mask).count("1") / self.n_sites


def mean_disconnected_fraction(layout: GarmentLayout, hub_site: str,
                               sigma_mm: float, tolerance_mm: float,
                               n_seeds: int, base_seed: int = 0) -> float:
    """Average disconnected site fraction over seeds base..base+n-1."""
    sim = _DisconnectionSimulator(layout, hub_site)
    total = 0.0
    for i in range(n_seeds):
        z = np.random.default_rng(base_seed + i).standard_normal(len(layout.junctions))
        total += sim.disconnected_fraction(np.abs(z), sigma_mm, tolerance_mm)
    return total / n_seeds


def calibrate_misalignment_sigma(layout: GarmentLayout, hub_site: str,
                                 target_fraction: float,
                                 tolerance_mm: float = DEFAULT_TOLERANCE_MM,
                                 n_seeds: int = 1000,
                                 target_band: float = 0.005,
                                 base_seed: int = 0,
                                 max_iter: int = 200) -> float:
    """Find sigma whose mean disconnected fraction matches the target.

    Bisection over sigma with common random numbers: the same per-seed
    standard-normal draws are rescaled at every trial sigma, which makes the
    objective monotone and the search deterministic.  Raises
    UnachievableTargetError when the target exceeds what even fully
    disconnected junctions produce.
    """
    if not (0.0 <= target_fraction < 1.0):
        raise ValueError("target_fraction must be in [0, 1)")
    if target_fraction == 0.0:
        return 0.0
    sim = _DisconnectionSimulator(layout, hub_site)
    zs = [np.abs(np.random.default_rng(base_seed + i)
                 .standard_normal(len(layout.junctions)))
          for i in range(n_seeds)]

    def objective(sigma: float) -> float:
        return sum(sim.disconnected_fraction(z, sigma, tolerance_mm)
                   for z in zs) / n_seeds

    all_open = 1.0 - bin(sim.reachable_mask(
        np.zeros(len(layout.junctions), dtype=bool))).count("1") / sim.n_sites
    if target_fraction > all_open:
        raise UnachievableTargetError(
            f"target {target_fraction} exceeds maximum attainable {all_open:.3f}")

    lo, hi = 0.0, tolerance_mm
    while objective(hi) < target_fraction:
        hi *= 2.0
        if hi > tolerance_mm * 2 ** 30:
            raise UnachievableTargetError("bisection upper bound runaway")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f = objective(mid)
        if abs(f - target_fraction) <= target_band:
            return mid
        if f < target_fraction:
            lo = mid
        else:
            hi = mid
    raise UnachievableTargetError("bisection failed to land in the target band")


# -- layout (de)serialisation -------------------------------------------------

def layout_to_dict(layout: GarmentLayout) -> dict:
    strips = []
    for s in layout.strips:
        offsets: dict[str, list[float]] = {}
        for gid in s.spans:
            per_ch = [0.0] * len(CHANNELS)
            for j in layout.junctions:
                if j.strip_id == s.id and j.group_id == gid:
                    per_ch[j.channel - 1] = j.offset_mm
            offsets[gid] = per_ch
        strips.append({"id": s.id, "x_cm": s.x_cm, "spans": list(s.spans),
                       "ohm_per_m": s.ohm_per_m, "offsets_mm": offsets})
    return {
        "schema": LAYOUT_SCHEMA,
        "tolerance_mm": layout.tolerance_mm,
        "thread_ohm_per_m": layout.thread_ohm_per_m,
        "groups": [{"id": g.id, "y_cm": g.y_cm, "x_start_cm": g.x_start_cm,
                    "x_end_cm": g.x_end_cm, "ohm_per_m": g.ohm_per_m}
                   for g in layout.groups],
        "strips": strips,
        "sites": [{"id": s.id, "group": s.group_id, "x_cm": s.x_cm,
                   "occupant": s.occupant} for s in layout.sites],
    }


def layout_to_bytes(layout: GarmentLayout) -> bytes:
    return json.dumps(layout_to_dict(layout), sort_keys=True,
                      separators=(",", ":")).encode()


def _require_keys(obj: dict, allowed: set[str], required: set[str],
                  where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise LayoutError(f"unknown field {sorted(unknown)[0]!r} in {where}")
    missing = required - set(obj)
    if missing:
        raise LayoutError(f"missing field {sorted(missing)[0]!r} in {where}")


def layout_from_dict(data: dict) -> GarmentLayout:
    if not isinstance(data, dict):
        raise LayoutError("layout must be a JSON object")
    _require_keys(data, {"schema", "tolerance_mm", "thread_ohm_per_m", "groups",
                         "strips", "sites"},
                  {"schema", "groups", "strips", "sites"}, "layout")
    if data["schema"] != LAYOUT_SCHEMA:
        raise LayoutError(f"unsupported layout schema {data['schema']!r}")
    thread = float(data.get("thread_ohm_per_m", DEFAULT_THREAD_OHM_PER_M))
    tol = float(data.get("tolerance_mm", DEFAULT_TOLERANCE_MM))

    groups = []
    for g in data["groups"]:
        _require_keys(g, {"id", "y_cm", "x_start_cm", "x_end_cm", "ohm_per_m"},
                      {"id", "y_cm", "x_start_cm", "x_end_cm"}, f"group {g.get('id')!r}")
        groups.append(ChannelGroup(g["id"], float(g["y_cm"]), float(g["x_start_cm"]),
                                   float(g["x_end_cm"]),
                                   float(g.get("ohm_per_m", thread))))
    strips = []
    junctions = []
    for s in data["strips"]:
        _require_keys(s, {"id", "x_cm", "spans", "ohm_per_m", "offsets_mm"},
                      {"id", "x_cm", "spans"}, f"strip {s.get('id')!r}")
        strip = VerticalStrip(s["id"], float(s["x_cm"]), tuple(s["spans"]),
                              float(s.get("ohm_per_m", thread)))
        strips.append(strip)
        offsets = s.get("offsets_mm", {})
        unknown = set(offsets) - set(strip.spans)
        if unknown:
            raise LayoutError(f"strip {strip.id!r} offsets name unknown group "
                              f"{sorted(unknown)[0]!r}")
        for gid in strip.spans:
            per_ch = offsets.get(gid, [0.0] * len(CHANNELS))
            if len(per_ch) != len(CHANNELS):
                raise LayoutError(f"strip {strip.id!r} needs {len(CHANNELS)} "
                                  f"offsets for group {gid!r}")
            for ch in CHANNELS:
                junctions.append(Junction(gid, strip.id, ch, float(per_ch[ch - 1])))
    sites = []
    for s in data["sites"]:
        _require_keys(s, {"id", "group", "x_cm", "occupant"},
                      {"id", "group", "x_cm"}, f"site {s.get('id')!r}")
        sites.append(AttachmentSite(s["id"], s["group"], float(s["x_cm"]),
                                    s.get("occupant")))
    return GarmentLayout(tuple(groups), tuple(strips), tuple(sites),
                         tuple(junctions), tol, thread)


def load_layout(path) -> GarmentLayout:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LayoutError(f"malformed layout JSON: {exc}") from exc
    return layout_from_dict(data)


def save_layout(layout: GarmentLayout, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(layout_to_dict(layout), fh, indent=2, sort_keys=True)
        fh.write("\n")


def reference_layout() -> GarmentLayout:
    """The default jacket layout shipped with the package."""
    text = resources.files("eknit.data").joinpath("reference_layout.json").read_text()
    return layout_from_dict(json.loads(text))


# Measurement positions used by margin sweeps, nearest to farthest from the
# transmitter at the right wrist.
REFERENCE_POSITIONS = (
    "right_wrist", "sleeve_75", "sleeve_50", "sleeve_25", "left_wrist",
    "chest_center", "waist_center", "hem_center", "hem_corner",
)
