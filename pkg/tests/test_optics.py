"""Angle handling, Malus splitting, and strict-threshold click logic."""

from __future__ import annotations

import math

import numpy as np
import pytest

from blindsim.optics import (
    DetectorStation,
    Outcome,
    Pulse,
    canon_angle,
    click_codes,
    malus_split,
    measure_pulse,
    split_intensities,
    threshold_click,
    wrap_diff,
)


def test_canon_angle_basics():
    assert canon_angle(0.0) == 0.0
    assert canon_angle(math.pi) == 0.0
    assert canon_angle(math.pi / 4.0) == math.pi / 4.0
    assert canon_angle(3.5) == pytest.approx(3.5 - math.pi, abs=1e-15)
    assert canon_angle(-math.pi / 4.0) == pytest.approx(3.0 * math.pi / 4.0, abs=1e-15)


def test_canon_angle_tiny_negative_stays_below_period():
    # np.mod(-1e-18, pi) rounds up to pi itself; the canonical form must not
    out = canon_angle(-1e-18)
    assert out == 0.0
    arr = canon_angle(np.array([-1e-18, -1e-300, 0.0]))
    assert np.all(arr < math.pi)
    assert np.all(arr >= 0.0)


def test_canon_angle_idempotent_and_in_range():
    rng = np.random.default_rng(11)
    raw = rng.uniform(-50.0, 50.0, 20000)
    once = canon_angle(raw)
    assert np.all((once >= 0.0) & (once < math.pi))
    np.testing.assert_array_equal(canon_angle(once), once)


def test_canon_angle_scalar_returns_float():
    assert isinstance(canon_angle(1.0), float)
    assert isinstance(canon_angle(np.float64(1.0)), float)


def test_wrap_diff_range_and_examples():
    assert wrap_diff(0.0) == 0.0
    assert wrap_diff(math.pi) == 0.0
    assert wrap_diff(3.0 * math.pi / 4.0) == pytest.approx(-math.pi / 4.0, abs=1e-15)
    assert wrap_diff(-3.0 * math.pi / 4.0) == pytest.approx(math.pi / 4.0, abs=1e-15)
    rng = np.random.default_rng(12)
    raw = rng.uniform(-50.0, 50.0, 20000)
    out = wrap_diff(raw)
    assert np.all((out >= -math.pi / 2.0) & (out < math.pi / 2.0))


def test_outcome_codes_and_numeric_value():
    assert int(Outcome.MINUS) == -1
    assert int(Outcome.NO_CLICK) == 0
    assert int(Outcome.PLUS) == 1
    assert int(Outcome.DOUBLE_CLICK) == 2
    assert Outcome.PLUS.numeric_value == 1
    assert Outcome.MINUS.numeric_value == -1
    assert Outcome.NO_CLICK.numeric_value == 0
    with pytest.raises(ValueError):
        Outcome.DOUBLE_CLICK.numeric_value


def test_pulse_validation_and_canonical_polarization():
    p = Pulse(2.0, 4.0)
    assert p.polarization == pytest.approx(4.0 - math.pi, abs=1e-15)
    assert Pulse(0.0, 0.0).intensity == 0.0
    with pytest.raises(ValueError):
        Pulse(-0.5, 0.0)
    with pytest.raises(ValueError):
        Pulse(float("nan"), 0.0)


def test_station_validation():
    s = DetectorStation(-math.pi / 4.0)
    assert s.setting == pytest.approx(3.0 * math.pi / 4.0, abs=1e-15)
    assert s.threshold == 1.0
    with pytest.raises(ValueError):
        DetectorStation(0.0, threshold=0.0)
    with pytest.raises(ValueError):
        DetectorStation(0.0, threshold=-1.0)


def test_malus_split_frozen_example():
    i0, i1 = malus_split(Pulse(2.0, math.pi / 8.0), 0.0)
    assert i0 == pytest.approx(1.7071067811865475, abs=1e-15)
    assert i1 == pytest.approx(0.2928932188134525, abs=1e-15)


def test_malus_split_aligned_and_crossed():
    i0, i1 = malus_split(Pulse(2.0, 0.3), 0.3)
    assert i0 == 2.0
    assert i1 == 0.0
    i0, i1 = malus_split(Pulse(2.0, 0.3), 0.3 + math.pi / 2.0)
    assert i0 == pytest.approx(0.0, abs=1e-15)
    assert i1 == pytest.approx(2.0, abs=1e-15)


def test_malus_split_energy_conserved_in_bulk():
    rng = np.random.default_rng(13)
    n = 100_000
    intensity = rng.uniform(0.0, 3.0, n)
    pol = rng.uniform(0.0, math.pi, n)
    setting = rng.uniform(0.0, math.pi, n)
    i0, i1 = split_intensities(intensity, pol, setting)
    assert np.all(i0 >= 0.0)
    assert np.all(i1 >= 0.0)
    assert np.max(np.abs(i0 + i1 - intensity)) <= 1e-12


def test_threshold_click_strictness():
    # exactly at threshold is no click on either side
    assert threshold_click(1.0, 1.0, 1.0) is Outcome.NO_CLICK
    assert threshold_click(1.0 + 1e-9, 0.0) is Outcome.PLUS
    assert threshold_click(0.0, 1.0 + 1e-9) is Outcome.MINUS
    assert threshold_click(1.5, 1.2) is Outcome.DOUBLE_CLICK
    assert threshold_click(0.0, 0.0) is Outcome.NO_CLICK
    assert threshold_click(0.3, 0.9, threshold=0.25) is Outcome.DOUBLE_CLICK
    with pytest.raises(ValueError):
        threshold_click(1.0, 1.0, threshold=0.0)
    with pytest.raises(ValueError):
        threshold_click(-0.1, 0.5)


def test_measure_pulse_sides():
    station = DetectorStation(0.0)
    assert measure_pulse(Pulse(2.0, math.pi / 6.0), station) is Outcome.PLUS
    assert measure_pulse(Pulse(2.0, math.pi / 3.0), station) is Outcome.MINUS
    assert measure_pulse(Pulse(0.5, 0.0), station) is Outcome.NO_CLICK


def test_measure_pulse_null_at_diagonal():
    # at intensity 2 the 45-degree split puts both outputs at the threshold,
    # which a strict comparison reads as silence, not a click
    station = DetectorStation(0.0)
    assert measure_pulse(Pulse(2.0, math.pi / 4.0), station) is Outcome.NO_CLICK
    # the anti-diagonal's rounding may leave one output an ulp above the
    # threshold; a single click is acceptable there, a double click is not
    anti = measure_pulse(Pulse(2.0, 3.0 * math.pi / 4.0), station)
    assert anti in (Outcome.NO_CLICK, Outcome.MINUS)


def test_intensity_two_never_double_clicks():
    rng = np.random.default_rng(14)
    n = 200_000
    pol = rng.uniform(0.0, math.pi, n)
    setting = rng.uniform(0.0, math.pi, n)
    i0, i1 = split_intensities(np.full(n, 2.0), pol, setting)
    codes = click_codes(i0, i1)
    assert not np.any(codes == int(Outcome.DOUBLE_CLICK))
    # grid including the exact diagonal boundaries
    grid = np.linspace(0.0, math.pi, 20001)
    i0, i1 = split_intensities(np.full(grid.shape, 2.0), grid, np.zeros_like(grid))
    codes = click_codes(i0, i1)
    assert not np.any(codes == int(Outcome.DOUBLE_CLICK))


def test_click_codes_match_scalar_path():
    rng = np.random.default_rng(15)
    n = 5000
    intensity = rng.uniform(0.0, 3.0, n)
    pol = rng.uniform(0.0, math.pi, n)
    setting = rng.uniform(0.0, math.pi, n)
    i0, i1 = split_intensities(intensity, pol, setting)
    codes = click_codes(i0, i1)
    for k in range(0, n, 250):
        scalar = threshold_click(float(i0[k]), float(i1[k]))
        assert int(codes[k]) == int(scalar)


def test_split_respects_pi_periodicity():
    rng = np.random.default_rng(16)
    pol = rng.uniform(0.0, math.pi, 1000)
    setting = rng.uniform(0.0, math.pi, 1000)
    i0a, i1a = split_intensities(2.0, pol, setting)
    i0b, i1b = split_intensities(2.0, pol, setting + math.pi)
    assert np.max(np.abs(i0a - i0b)) <= 1e-12
    assert np.max(np.abs(i1a - i1b)) <= 1e-12
