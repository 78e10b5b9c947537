from __future__ import annotations

import json
import math

import networkx as nx
import numpy as np
import pytest
from scipy.special import erfcinv

from eknit.topology import (
    CHANNELS,
    DISCONNECTED,
    AttachmentSite,
    ChannelGroup,
    GarmentLayout,
    Junction,
    LayoutError,
    UnachievableTargetError,
    VerticalStrip,
    build_conductance_graph,
    calibrate_misalignment_sigma,
    default_junctions,
    layout_from_dict,
    layout_to_bytes,
    layout_to_dict,
    load_layout,
    mean_disconnected_fraction,
    path_resistance,
    reachable_fraction,
    reference_layout,
    sample_misalignment,
    save_layout,
    two_point_resistance,
    REFERENCE_POSITIONS,
)


# -- two-point resistance against independent oracles ------------------------


def test_series_chain_is_the_sum():
    edges = [(0, 1, 3.0), (1, 2, 5.0)]
    assert two_point_resistance(3, edges, 0, 2) == pytest.approx(8.0, abs=1e-12)


def test_parallel_pair_is_the_product_over_sum():
    edges = [(0, 1, 4.0), (0, 1, 6.0)]
    assert two_point_resistance(2, edges, 0, 1) == pytest.approx(2.4, abs=1e-12)


def test_ladder_reduces_by_series_parallel_laws():
    # 2 + (3 || 6) + 4 = 8
    edges = [(0, 1, 2.0), (1, 2, 3.0), (1, 2, 6.0), (2, 3, 4.0)]
    assert two_point_resistance(4, edges, 0, 3) == pytest.approx(8.0, abs=1e-12)


def _random_resistor_graph(seed: int, n: int = 10):
    rng = np.random.default_rng(seed)
    attempt = 0
    while True:
        g = nx.gnp_random_graph(n, 0.45, seed=seed + attempt)
        if nx.is_connected(g):
            break
        attempt += 1
    for u, v in g.edges:
        g[u][v]["resistance"] = float(rng.uniform(0.5, 20.0))
    return g


@pytest.mark.parametrize("seed", [101, 202, 303, 404, 505])
def test_matches_networkx_resistance_distance(seed):
    g = _random_resistor_graph(seed)
    edges = [(u, v, g[u][v]["resistance"]) for u, v in g.edges]
    rng = np.random.default_rng(seed)
    a, b = map(int, rng.choice(g.number_of_nodes(), size=2, replace=False))
    want = nx.resistance_distance(g, a, b, weight="resistance",
                                  invert_weight=True)
    assert two_point_resistance(10, edges, a, b) == pytest.approx(want,
                                                                  rel=1e-9)


def test_two_point_resistance_is_symmetric():
    g = _random_resistor_graph(42)
    edges = [(u, v, g[u][v]["resistance"]) for u, v in g.edges]
    assert two_point_resistance(10, edges, 2, 7) == pytest.approx(
        two_point_resistance(10, edges, 7, 2), rel=1e-12)


@pytest.mark.parametrize("seed", [11, 22, 33])
def test_rayleigh_monotonicity(seed):
    # adding a resistor can only lower effective resistance
    g = _random_resistor_graph(seed)
    edges = [(u, v, g[u][v]["resistance"]) for u, v in g.edges]
    base = two_point_resistance(10, edges, 0, 9)
    more = edges + [(3, 8, 5.0)]
    assert two_point_resistance(10, more, 0, 9) <= base + 1e-12
    fewer = edges[:-1]
    if nx.is_connected(nx.Graph((u, v) for u, v, _ in fewer)):
        assert two_point_resistance(10, fewer, 0, 9) >= base - 1e-12


def test_disconnected_pair_reports_infinite():
    edges = [(0, 1, 3.0)]
    assert two_point_resistance(3, edges, 0, 2) == DISCONNECTED


# -- layout graphs ------------------------------------------------------------


def test_single_group_resistance_is_length_times_rate(single_group_layout):
    graph = build_conductance_graph(single_group_layout)
    # 50 cm at 20 ohm/m on every channel
    for ch in CHANNELS:
        assert path_resistance(graph, "a", "b", ch) == pytest.approx(10.0,
                                                                     abs=1e-9)


def test_path_resistance_rejects_bad_channel(single_group_layout):
    graph = build_conductance_graph(single_group_layout)
    with pytest.raises(ValueError):
        path_resistance(graph, "a", "b", 7)


def test_two_group_layout_crosses_the_strip(two_group_layout):
    graph = build_conductance_graph(two_group_layout)
    # h(40) -> strip(10) on top: 30 cm; strip drop 20 cm; strip(10) -> b(25): 15 cm
    want = (0.30 + 0.20 + 0.15) * 20.0
    assert path_resistance(graph, "h", "b", 2) == pytest.approx(want, abs=1e-9)
    assert graph.shortest_length_m("h", "b", 2) == pytest.approx(0.65,
                                                                 abs=1e-12)


def test_open_junction_disconnects_exactly_that_channel(two_group_layout):
    junctions = list(two_group_layout.junctions)
    for i, j in enumerate(junctions):
        if j.group_id == "bot" and j.channel == 4:
            junctions[i] = Junction(j.group_id, j.strip_id, j.channel, 9.9)
    layout = two_group_layout.with_junctions(tuple(junctions))
    graph = build_conductance_graph(layout)
    assert not graph.reachable("h", "b", 4)
    assert path_resistance(graph, "h", "b", 4) == DISCONNECTED
    for ch in (1, 2, 3, 5, 6):
        assert graph.reachable("h", "b", ch)


def test_reachability_agrees_with_bfs_oracle(ref_layout):
    rng = np.random.default_rng(99)
    junctions = tuple(
        Junction(j.group_id, j.strip_id, j.channel,
                 float(rng.uniform(0.0, 2.0)))
        for j in ref_layout.junctions)
    layout = ref_layout.with_junctions(junctions)
    graph = build_conductance_graph(layout)

    for ch in CHANNELS:
        # independent reachability: walk groups/strips as whole conductors
        # joined only by connected junctions
        g = nx.Graph()
        for grp in layout.groups:
            g.add_node(("g", grp.id))
        for strip in layout.strips:
            g.add_node(("s", strip.id))
        for j in layout.junctions:
            if j.channel == ch and j.connected(layout.tolerance_mm):
                g.add_edge(("g", j.group_id), ("s", j.strip_id))
        for a in layout.sites:
            for b in layout.sites:
                want = nx.has_path(g, ("g", a.group_id), ("g", b.group_id))
                assert graph.reachable(a.id, b.id, ch) == want


def test_without_spans_cuts_only_overlapping_paths(ref_layout):
    graph = build_conductance_graph(ref_layout)
    cut = graph.without_spans([("sleeve", 30.0, 40.0, (2,))])
    assert not cut.reachable("right_wrist", "sleeve_25", 2)
    assert cut.reachable("right_wrist", "sleeve_75", 2)
    assert cut.reachable("right_wrist", "sleeve_25", 3)
    # a cut touching nothing on the path leaves resistance untouched
    elsewhere = graph.without_spans([("hem", 0.0, 5.0, (2,))])
    assert elsewhere.resistance("right_wrist", "sleeve_75", 2) == \
        pytest.approx(graph.resistance("right_wrist", "sleeve_75", 2),
                      rel=1e-12)


# -- reference layout geometry -----------------------------------------------


def test_reference_positions_exist_in_order(ref_layout):
    ids = ref_layout.site_ids()
    assert all(p in ids for p in REFERENCE_POSITIONS)
    assert len(REFERENCE_POSITIONS) == 9


def test_reference_wrist_to_hem_path_is_long(ref_layout):
    graph = build_conductance_graph(ref_layout)
    length = graph.shortest_length_m("right_wrist", "hem_corner", 2)
    assert length >= 1.5


def test_reference_far_corner_has_the_largest_resistance(ref_layout):
    graph = build_conductance_graph(ref_layout)
    rs = {p: path_resistance(graph, "right_wrist", p, 2)
          for p in REFERENCE_POSITIONS if p != "right_wrist"}
    assert max(rs, key=rs.get) == "hem_corner"
    ordered = [path_resistance(graph, "right_wrist", p, 2)
               for p in REFERENCE_POSITIONS]
    assert ordered == sorted(ordered)


def test_reference_layout_fully_connected(ref_layout):
    graph = build_conductance_graph(ref_layout)
    assert reachable_fraction(graph, "right_wrist") == 1.0


# -- misalignment -------------------------------------------------------------


def test_sample_misalignment_is_deterministic(ref_layout):
    a = sample_misalignment(ref_layout, 0.5, 1.0, seed=7)
    b = sample_misalignment(ref_layout, 0.5, 1.0, seed=7)
    assert layout_to_bytes(a) == layout_to_bytes(b)
    c = sample_misalignment(ref_layout, 0.5, 1.0, seed=8)
    assert layout_to_bytes(a) != layout_to_bytes(c)


def test_sample_misalignment_zero_sigma_changes_nothing(ref_layout):
    sampled = sample_misalignment(ref_layout, 0.0, 1.0, seed=3)
    assert all(j.offset_mm == 0.0 for j in sampled.junctions)


def test_gaussian_tail_fraction_of_junctions():
    # with sigma == tolerance each junction disconnects w.p. erfc(1/sqrt 2)
    layout = reference_layout()
    p_true = math.erfc(1.0 / math.sqrt(2.0))
    n_junctions = len(layout.junctions)
    total = 0
    disconnected = 0
    for seed in range(400):
        sampled = sample_misalignment(layout, 1.0, 1.0, seed=seed)
        disconnected += sum(not j.connected(1.0) for j in sampled.junctions)
        total += n_junctions
    p_hat = disconnected / total
    se = math.sqrt(p_true * (1 - p_true) / total)
    assert abs(p_hat - p_true) < 5 * se


def test_reachable_fraction_never_rises_as_junctions_fail(ref_layout):
    rng = np.random.default_rng(5)
    junctions = list(ref_layout.junctions)
    order = rng.permutation(len(junctions))
    hub = "right_wrist"
    last = 1.0
    for idx in order[:40]:
        j = junctions[idx]
        junctions[idx] = Junction(j.group_id, j.strip_id, j.channel, 99.0)
        layout = ref_layout.with_junctions(tuple(junctions))
        frac = reachable_fraction(build_conductance_graph(layout), hub)
        assert frac <= last + 1e-12
        last = frac


def test_mean_disconnected_fraction_matches_closed_form(two_group_layout):
    # site b needs all 12 junctions; hub h is always reachable
    sigma = 0.8
    p = math.erfc(1.0 / (sigma * math.sqrt(2.0)))
    want = (1.0 - (1.0 - p) ** 12) / 2.0
    got = mean_disconnected_fraction(two_group_layout, "h", sigma, 1.0,
                                     n_seeds=4000)
    se = 0.5 * math.sqrt((1 - (1 - p) ** 12) * (1 - p) ** 12 / 4000)
    assert abs(got - want) < 5 * se + 1e-6


def test_calibration_matches_analytic_inversion(two_group_layout):
    target = 0.3
    p_star = 1.0 - (1.0 - 2.0 * target) ** (1.0 / 12.0)
    sigma_closed = 1.0 / (math.sqrt(2.0) * float(erfcinv(p_star)))
    sigma = calibrate_misalignment_sigma(two_group_layout, "h", target,
                                         n_seeds=2000)
    assert abs(sigma - sigma_closed) / sigma_closed < 0.05
    achieved = mean_disconnected_fraction(two_group_layout, "h", sigma, 1.0,
                                          n_seeds=2000)
    assert abs(achieved - target) <= 0.005


def test_calibration_zero_target_gives_zero_sigma(two_group_layout):
    assert calibrate_misalignment_sigma(two_group_layout, "h", 0.0) == 0.0


def test_calibration_rejects_unreachable_target(two_group_layout):
    # even fully broken junctions leave the hub's own site reachable
    with pytest.raises(UnachievableTargetError):
        calibrate_misalignment_sigma(two_group_layout, "h", 0.9,
                                     n_seeds=200)


# -- validation and serialization ---------------------------------------------


def test_overlapping_groups_rejected():
    groups = (ChannelGroup("a", 100.0, 0.0, 50.0),
              ChannelGroup("b", 100.0, 40.0, 90.0))
    sites = (AttachmentSite("s", "a", 10.0),)
    with pytest.raises(LayoutError):
        GarmentLayout(groups, (), sites, ())


def test_site_outside_group_span_rejected():
    groups = (ChannelGroup("a", 100.0, 0.0, 50.0),)
    sites = (AttachmentSite("s", "a", 60.0),)
    with pytest.raises(LayoutError):
        GarmentLayout(groups, (), sites, ())


def test_strip_needs_full_junction_cover(two_group_layout):
    with pytest.raises(LayoutError):
        two_group_layout.with_junctions(two_group_layout.junctions[:-1])


def test_strip_outside_group_rejected():
    groups = (ChannelGroup("a", 100.0, 0.0, 50.0),
              ChannelGroup("b", 80.0, 0.0, 50.0))
    strips = (VerticalStrip("s", 70.0, ("a", "b")),)
    sites = (AttachmentSite("s1", "a", 10.0),)
    with pytest.raises(LayoutError):
        GarmentLayout(groups, strips, sites,
                      default_junctions(groups, strips))


def test_layout_round_trips_through_json(ref_layout, tmp_path):
    path = tmp_path / "layout.json"
    save_layout(ref_layout, path)
    again = load_layout(path)
    assert layout_to_bytes(again) == layout_to_bytes(ref_layout)


def test_layout_dict_rejects_unknown_keys(ref_layout):
    data = layout_to_dict(ref_layout)
    data["color"] = "red"
    with pytest.raises(LayoutError):
        layout_from_dict(data)


def test_layout_dict_rejects_wrong_schema(ref_layout):
    data = layout_to_dict(ref_layout)
    data["schema"] = 2
    with pytest.raises(LayoutError):
        layout_from_dict(data)


def test_layout_bytes_are_canonical(ref_layout):
    blob = layout_to_bytes(ref_layout)
    parsed = json.loads(blob)
    assert json.dumps(parsed, sort_keys=True,
                      separators=(",", ":")).encode() == blob
