from __future__ import annotations

import csv
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from eknit.placement import (
    DEFAULT_ARM_POSITIONS,
    DEFAULT_NOISE_MODEL,
    SQRT_2_OVER_PI,
    DegenerateInputError,
    ImuNoiseModel,
    JointTrace,
    PlacementPosition,
    Region,
    TraceLengthError,
    apply_calibration,
    calibrate_noise_gains,
    expected_mpjre,
    fit_linear_calibration,
    mpjre,
    rank_placements,
    simulate_estimated_trace,
    synthesize_flexion_trace,
)

BW, WRIST, FA1, FA2, ELBOW, UA1, UA2, UA3 = DEFAULT_ARM_POSITIONS


def test_flexion_trace_mean_is_half_amplitude():
    # ten whole cycles: the cosine sums to zero exactly
    trace = synthesize_flexion_trace(10.0, 1.0, 90.0)
    assert trace.angles_deg.size == 1000
    assert float(trace.angles_deg.mean()) == pytest.approx(45.0, abs=1e-9)
    assert float(trace.angles_deg[0]) == 0.0
    assert float(trace.angles_deg.max()) <= 90.0 + 1e-9


def test_flexion_trace_validation():
    with pytest.raises(ValueError):
        synthesize_flexion_trace(-1.0, 1.0, 90.0)
    with pytest.raises(TraceLengthError):
        synthesize_flexion_trace(0.01, 1.0, 90.0)
    with pytest.raises(TraceLengthError):
        JointTrace(100.0, np.array([1.0]))
    with pytest.raises(ValueError):
        JointTrace(0.0, np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        JointTrace(100.0, np.array([1.0, np.nan]))


def test_expected_error_matches_folded_normal_quadrature():
    # E|X| for X ~ N(0, sigma) integrated numerically
    model = replace(DEFAULT_NOISE_MODEL, soft_tissue_rms_deg=7.3)
    sigma = model.total_rms_deg(FA1)
    assert sigma == 7.3

    def integrand(x):
        return x * math.exp(-0.5 * (x / sigma) ** 2) / (
            sigma * math.sqrt(2.0 * math.pi))

    # |x| * pdf is symmetric, so fold the integral onto [0, inf)
    half, err = integrate.quad(integrand, 0.0, np.inf)
    assert err < 1e-6
    assert expected_mpjre(FA1, model) == pytest.approx(2.0 * half, rel=1e-9)


def test_noise_factors_by_region():
    m = DEFAULT_NOISE_MODEL
    assert m.twist_factor(WRIST) == 1.0
    assert m.twist_factor(BW) == m.below_wrist_coupling
    assert m.twist_factor(FA1) == 0.0
    assert m.soft_factor(BW) == m.below_wrist_soft_fraction
    assert m.soft_factor(FA1) == 1.0
    assert m.decoupling_factor(ELBOW) == 1.0
    assert m.decoupling_factor(FA2) == 0.0
    assert m.decoupling_factor(UA1) == pytest.approx(1.0 + 0.15 * 7.0)
    assert m.decoupling_factor(UA3) == pytest.approx(1.0 + 0.15 * 21.0)
    # upper arm closer than the reference distance clamps to 1
    near = PlacementPosition(9, 20.0, Region.UPPER_ARM)
    assert m.decoupling_factor(near) == 1.0


def test_zero_factor_gains_do_not_touch_the_estimate():
    truth = synthesize_flexion_trace(2.0, 1.0, 90.0)
    small = replace(DEFAULT_NOISE_MODEL, wrist_twist_rms_deg=3.0)
    large = replace(DEFAULT_NOISE_MODEL, wrist_twist_rms_deg=30.0)
    # forearm has zero twist factor, so the twist gain is irrelevant there
    a = simulate_estimated_trace(truth, FA1, small, seed=7)
    b = simulate_estimated_trace(truth, FA1, large, seed=7)
    assert np.array_equal(a.angles_deg, b.angles_deg)


def test_forearm_positions_tie_exactly_and_break_by_index():
    truth = synthesize_flexion_trace(2.0, 1.0, 90.0)
    report = rank_placements((FA2, FA1), truth, DEFAULT_NOISE_MODEL,
                             seeds_per_position=5)
    assert report.mpjre_for(3) == report.mpjre_for(4)
    assert report.ranking == (3, 4)
    assert report.argmin_index == 3


def test_default_gains_reproduce_anchor_errors():
    assert expected_mpjre(BW, DEFAULT_NOISE_MODEL) == \
        pytest.approx(8.24, abs=5e-4)
    assert expected_mpjre(WRIST, DEFAULT_NOISE_MODEL) == \
        pytest.approx(10.63, abs=5e-4)


def test_default_ranking_over_the_arm():
    truth = synthesize_flexion_trace(2.0, 1.0, 90.0)
    report = rank_placements(DEFAULT_ARM_POSITIONS, truth,
                             DEFAULT_NOISE_MODEL, seeds_per_position=100)
    assert report.ranking == (1, 3, 4, 2, 5, 6, 7, 8)
    assert report.argmin_index == 1


def test_monte_carlo_converges_to_closed_form():
    truth = synthesize_flexion_trace(2.0, 1.0, 90.0)
    report = rank_placements((BW, WRIST), truth, DEFAULT_NOISE_MODEL,
                             seeds_per_position=2000)
    assert abs(report.mpjre_for(1) - expected_mpjre(BW, DEFAULT_NOISE_MODEL)) \
        < 0.15
    assert abs(report.mpjre_for(2) - expected_mpjre(WRIST, DEFAULT_NOISE_MODEL)) \
        < 0.15


gain = st.floats(min_value=0.1, max_value=50.0,
                 allow_nan=False, allow_infinity=False)


@settings(max_examples=80, deadline=None)
@given(
    soft=gain,
    decouple=gain,
    kappa=st.floats(min_value=0.01, max_value=0.95),
    h=st.floats(min_value=0.05, max_value=0.95),
    leak=st.floats(min_value=1e-3, max_value=0.95),
    growth=st.floats(min_value=0.0, max_value=1.0),
)
def test_documented_orderings_hold_for_any_admissible_gains(
        soft, decouple, kappa, h, leak, growth):
    # construct the twist gain so the hand-isolation inequality holds:
    # (kappa * twist)^2 + (h * soft)^2 < soft^2
    twist = leak * soft * math.sqrt(1.0 - h * h) / kappa
    model = ImuNoiseModel(
        wrist_twist_rms_deg=twist,
        soft_tissue_rms_deg=soft,
        decoupling_rms_deg=decouple,
        below_wrist_coupling=kappa,
        below_wrist_soft_fraction=h,
        decoupling_growth_per_cm=growth,
    )
    e = {p.index: expected_mpjre(p, model) for p in DEFAULT_ARM_POSITIONS}
    assert e[1] < e[3] and e[1] < e[4]       # hand beats the forearm
    assert e[1] < e[2]                       # hand beats the wrist
    assert e[3] < e[5] and e[4] < e[5]       # forearm beats the elbow
    assert e[5] <= e[6] <= e[7] <= e[8]      # error grows up the arm
    assert min(e, key=e.get) == 1


def test_noise_model_validation():
    with pytest.raises(ValueError):
        ImuNoiseModel(wrist_twist_rms_deg=0.0)
    with pytest.raises(ValueError):
        ImuNoiseModel(below_wrist_coupling=1.0)
    with pytest.raises(ValueError):
        ImuNoiseModel(below_wrist_soft_fraction=1.0)
    with pytest.raises(ValueError):
        ImuNoiseModel(decoupling_growth_per_cm=-0.1)


def test_rank_placements_validation():
    truth = synthesize_flexion_trace(1.0, 1.0, 90.0)
    with pytest.raises(ValueError):
        rank_placements((), truth, DEFAULT_NOISE_MODEL, 1)
    with pytest.raises(ValueError):
        rank_placements((BW, BW), truth, DEFAULT_NOISE_MODEL, 1)
    with pytest.raises(ValueError):
        rank_placements((BW,), truth, DEFAULT_NOISE_MODEL, 0)


def test_mpjre_rejects_length_mismatch():
    a = synthesize_flexion_trace(1.0, 1.0, 90.0)
    b = synthesize_flexion_trace(2.0, 1.0, 90.0)
    with pytest.raises(TraceLengthError):
        mpjre(a, b)


def test_report_serialization(tmp_path):
    truth = synthesize_flexion_trace(1.0, 1.0, 90.0)
    report = rank_placements(DEFAULT_ARM_POSITIONS, truth,
                             DEFAULT_NOISE_MODEL, seeds_per_position=3)
    d = report.to_dict()
    assert set(d) == {"positions", "ranking", "argmin_index"}
    assert len(d["positions"]) == 8
    assert d["positions"][0] == {
        "index": 1, "distance_cm": 0.0, "region": "below_wrist",
        "mpjre_deg": report.mpjre_for(1)}
    path = tmp_path / "report.csv"
    report.write_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["position_index", "distance_cm", "mpjre_deg"]
    assert len(rows) == 9
    assert float(rows[1][2]) == report.mpjre_for(1)
    with pytest.raises(KeyError):
        report.mpjre_for(99)


def test_calibration_refit_recovers_shipped_gains():
    fitted = calibrate_noise_gains()
    assert fitted.wrist_twist_rms_deg == \
        pytest.approx(DEFAULT_NOISE_MODEL.wrist_twist_rms_deg, abs=1e-3)
    assert fitted.soft_tissue_rms_deg == \
        pytest.approx(DEFAULT_NOISE_MODEL.soft_tissue_rms_deg, abs=1e-3)
    assert expected_mpjre(BW, fitted) == pytest.approx(8.24, abs=1e-6)
    assert expected_mpjre(WRIST, fitted) == pytest.approx(10.63, abs=1e-6)


def test_calibration_target_feasibility_checks():
    with pytest.raises(ValueError):
        calibrate_noise_gains(10.0, 8.0)
    # ratio below the hand coupling floor
    with pytest.raises(ValueError):
        calibrate_noise_gains(1.0, 100.0)
    # ratio above the soft-fraction ceiling
    with pytest.raises(ValueError):
        calibrate_noise_gains(9.9, 10.0)
    bad = replace(DEFAULT_NOISE_MODEL, below_wrist_coupling=0.85)
    with pytest.raises(ValueError):
        calibrate_noise_gains(base=bad)


def test_linear_fit_matches_polyfit():
    rng = np.random.default_rng(17)
    x = rng.uniform(0.0, 200.0, size=40)
    y = 0.05 * x + 20.0 + rng.normal(0.0, 0.3, size=40)
    cal = fit_linear_calibration(x, y)
    slope_ref, intercept_ref = np.polyfit(x, y, 1)
    assert cal.slope == pytest.approx(slope_ref, rel=1e-9)
    assert cal.intercept == pytest.approx(intercept_ref, rel=1e-9)
    r_ref = float(np.corrcoef(x, y)[0, 1]) ** 2
    assert cal.r_squared == pytest.approx(r_ref, rel=1e-9)


def test_exact_line_fits_perfectly():
    counts = np.arange(0, 201, dtype=float)
    temps = 0.05 * counts + 20.0
    cal = fit_linear_calibration(counts, temps)
    assert cal.slope == pytest.approx(0.05, rel=1e-12)
    assert cal.intercept == pytest.approx(20.0, rel=1e-12)
    assert cal.r_squared == pytest.approx(1.0, abs=1e-12)


def test_noisy_fit_recovers_slope_within_one_percent():
    rng = np.random.default_rng(0)
    counts = np.arange(0, 201, dtype=float)
    temps = 0.05 * counts + 20.0 + rng.normal(0.0, 0.1, size=counts.size)
    cal = fit_linear_calibration(counts, temps)
    assert abs(cal.slope - 0.05) / 0.05 < 0.01
    assert cal.r_squared > 0.99


def test_degenerate_counts_rejected():
    with pytest.raises(DegenerateInputError):
        fit_linear_calibration([5.0, 5.0, 5.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        fit_linear_calibration([1.0], [2.0])
    with pytest.raises(ValueError):
        fit_linear_calibration([1.0, 2.0], [1.0, 2.0, 3.0])


def test_constant_reference_exact_fit_reports_unit_r_squared():
    cal = fit_linear_calibration([1.0, 2.0, 3.0], [7.0, 7.0, 7.0])
    assert cal.slope == 0.0
    assert cal.intercept == 7.0
    assert cal.r_squared == 1.0


def test_apply_calibration_scalar_and_array():
    cal = fit_linear_calibration([0.0, 100.0], [20.0, 25.0])
    assert apply_calibration(cal, 106) == pytest.approx(25.3)
    out = apply_calibration(cal, np.array([0.0, 100.0]))
    assert isinstance(out, np.ndarray)
    assert out == pytest.approx([20.0, 25.0])
