from __future__ import annotations

import math

import numpy as np
import pytest

from eknit.connector import (
    DEFAULT_PEAK_ACCEL_MPS2,
    MODULE_MASS_KG,
    MotionKind,
    OutOfDomainError,
    PmeStrip,
    detachment_trials,
    motion,
    peak_inertial_force,
    required_holding_force,
    strain_at_tension,
)


def test_strain_interpolates_between_anchor_points():
    strip = PmeStrip()
    # midpoint of (1 N, 0.08) and (2 N, 0.20)
    assert strain_at_tension(strip, 1.5) == pytest.approx(0.14, abs=1e-12)
    assert strain_at_tension(strip, 1.0) == 0.08
    assert strain_at_tension(strip, 0.0) == 0.0


def test_strain_outside_curve_rejected():
    strip = PmeStrip()
    with pytest.raises(OutOfDomainError):
        strain_at_tension(strip, 6.5)
    with pytest.raises(OutOfDomainError):
        strain_at_tension(strip, -0.1)


def test_strain_curve_must_increase():
    with pytest.raises(ValueError):
        PmeStrip(tension_strain=((0.0, 0.0), (1.0, 0.1), (2.0, 0.1)))


def test_jumping_force_is_exact():
    jump = motion(MotionKind.JUMPING)
    assert peak_inertial_force(MODULE_MASS_KG, jump) == 0.03
    assert required_holding_force(jump) == 0.09


def test_default_peak_accelerations():
    assert DEFAULT_PEAK_ACCEL_MPS2[MotionKind.WALKING] == 3.0
    assert DEFAULT_PEAK_ACCEL_MPS2[MotionKind.RUNNING] == 12.0
    assert DEFAULT_PEAK_ACCEL_MPS2[MotionKind.JUMPING] == 30.0
    assert DEFAULT_PEAK_ACCEL_MPS2[MotionKind.ROTATING] == 5.0
    assert max(DEFAULT_PEAK_ACCEL_MPS2.values()) == 30.0


def test_motion_accepts_string_kind_and_override():
    prof = motion("running", peak_accel_mps2=15.0, trials=7)
    assert prof.kind is MotionKind.RUNNING
    assert prof.peak_accel_mps2 == 15.0
    assert prof.trials == 7


def test_force_scales_with_mass_and_accel():
    prof = motion(MotionKind.WALKING)
    assert peak_inertial_force(0.002, prof) == pytest.approx(0.006)
    assert required_holding_force(prof, mass_kg=0.002) == \
        pytest.approx(0.018)


def test_zero_sigma_is_a_hard_threshold():
    prof = motion(MotionKind.JUMPING, trials=100)
    exactly = PmeStrip(holding_force_n=0.03, holding_sigma_n=0.0)
    assert detachment_trials(MODULE_MASS_KG, exactly, prof, seed=1) == 100
    weaker = PmeStrip(holding_force_n=0.03 - 1e-12, holding_sigma_n=0.0)
    assert detachment_trials(MODULE_MASS_KG, weaker, prof, seed=1) == 0


def test_force_at_the_mean_detaches_about_half():
    # P(N(H, sigma) < F) = 1/2 when F == H and truncation is negligible
    prof = motion(MotionKind.JUMPING, peak_accel_mps2=1000.0, trials=10000)
    force = peak_inertial_force(MODULE_MASS_KG, prof)
    strip = PmeStrip(holding_force_n=force, holding_sigma_n=0.1 * force)
    remaining = detachment_trials(MODULE_MASS_KG, strip, prof, seed=42)
    se = math.sqrt(10000 * 0.25)
    assert abs(remaining - 5000) < 5 * se


def test_stronger_magnet_never_detaches_more():
    prof = motion(MotionKind.JUMPING, trials=500)
    # same seed draws the same unit deviates, so survival is monotone in H
    weak = PmeStrip(holding_force_n=0.02, holding_sigma_n=0.01)
    strong = PmeStrip(holding_force_n=0.05, holding_sigma_n=0.01)
    r_weak = detachment_trials(MODULE_MASS_KG, weak, prof, seed=9)
    r_strong = detachment_trials(MODULE_MASS_KG, strong, prof, seed=9)
    assert r_strong >= r_weak


def test_gentler_motion_never_detaches_more():
    strip = PmeStrip(holding_force_n=0.025, holding_sigma_n=0.005)
    walk = motion(MotionKind.WALKING, trials=500)
    jump = motion(MotionKind.JUMPING, trials=500)
    r_walk = detachment_trials(MODULE_MASS_KG, strip, walk, seed=9)
    r_jump = detachment_trials(MODULE_MASS_KG, strip, jump, seed=9)
    assert r_walk >= r_jump


def test_strong_magnet_survives_jumping():
    prof = motion(MotionKind.JUMPING, trials=1000)
    strip = PmeStrip(holding_force_n=0.09, holding_sigma_n=0.009)
    remaining = detachment_trials(MODULE_MASS_KG, strip, prof, seed=3)
    assert remaining >= 999


def test_trials_are_seeded():
    prof = motion(MotionKind.JUMPING, trials=200)
    strip = PmeStrip(holding_force_n=0.03, holding_sigma_n=0.01)
    a = detachment_trials(MODULE_MASS_KG, strip, prof, seed=5)
    b = detachment_trials(MODULE_MASS_KG, strip, prof, seed=5)
    assert a == b


def test_negative_holding_draws_clamp_to_zero():
    # huge sigma makes raw draws negative; clamped draws can never hold
    prof = motion(MotionKind.JUMPING, trials=2000)
    strip = PmeStrip(holding_force_n=1e-6, holding_sigma_n=10.0)
    remaining = detachment_trials(MODULE_MASS_KG, strip, prof, seed=11)
    # about half the draws clamp to 0 and detach; the huge-sigma half that
    # stays positive mostly holds
    assert 0 < remaining < 2000


def test_motion_profile_validation():
    with pytest.raises(ValueError):
        motion(MotionKind.WALKING, peak_accel_mps2=-1.0)
    with pytest.raises(ValueError):
        motion(MotionKind.WALKING, trials=0)
    with pytest.raises(ValueError):
        peak_inertial_force(0.0, motion(MotionKind.WALKING))
