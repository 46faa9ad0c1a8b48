"""Tests for field estimation and drive-to-field calibration."""

# MIT License
#
# Copyright (c) 2022 The floquetmag authors
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.special import jv

from conftest import FREQUENCY, N_PULSES
from floquetmag.analytic import AcField, tau_sweep_model
from floquetmag.calibration import (
    CalibrationResult,
    FieldEstimate,
    bessel_residual_scan,
    fit_bessel_conversion,
    fit_linear_conversion,
    fit_tau_sweep,
)
from floquetmag.core import GAMMA_NV
from floquetmag.errors import FitError, FloquetmagError, IllPosedError
from floquetmag.readout import (
    ReadoutConfig,
    alias_frequency,
    normalize_counts,
    synthesize_series,
    to_photon_counts,
)
from floquetmag.spectral import dft, extract_harmonics

OMEGA = 2 * math.pi * FREQUENCY
# 0.392 µT per mVpp, in tesla per mVpp.
COEFFICIENT = 0.392e-6
VOLTAGES = (10.0, 20.0, 40.0, 80.0)
TAUS = np.linspace(0.5e-6, 1.5e-6, 41)


def bessel_data(coefficient, voltages, orders):
    scale = 2 * N_PULSES * GAMMA_NV / OMEGA
    return [
        (v, k, abs(jv(k, scale * coefficient * v))) for v in voltages for k in orders
    ]


def tau_data(b_ac):
    return [
        (tau, tau_sweep_model(tau, N_PULSES, b_ac, OMEGA, at_singularity="limit"))
        for tau in TAUS
    ]


def test_error_hierarchy():
    assert issubclass(FitError, FloquetmagError)
    assert issubclass(IllPosedError, FloquetmagError)


def test_tau_sweep_recovers_field(resonant_cp):
    estimate = fit_tau_sweep(tau_data(200e-9), resonant_cp, OMEGA)
    assert isinstance(estimate, FieldEstimate)
    assert estimate.n_points == 41
    assert estimate.amplitude == pytest.approx(200e-9, rel=1e-6)
    assert estimate.uncertainty < 1e-3 * 200e-9


def test_tau_sweep_with_noise(resonant_cp):
    rng = np.random.default_rng(1)
    data = [(tau, p0 + rng.normal(0, 1e-3)) for tau, p0 in tau_data(300e-9)]
    estimate = fit_tau_sweep(data, resonant_cp, OMEGA)
    assert 0 < estimate.uncertainty < 30e-9
    assert abs(estimate.amplitude - 300e-9) < 5 * estimate.uncertainty


def test_tau_sweep_without_field(resonant_cp):
    estimate = fit_tau_sweep(tau_data(0.0), resonant_cp, OMEGA)
    assert estimate == FieldEstimate(0.0, math.inf, 41)


def test_tau_sweep_exclusion_windows(resonant_cp):
    windows = [(450e3, 550e3)]
    estimate = fit_tau_sweep(tau_data(200e-9), resonant_cp, OMEGA, windows)
    dropped = sum(450e3 <= 1 / (2 * tau) <= 550e3 for tau in TAUS)
    assert dropped > 0
    assert estimate.n_points == 41 - dropped
    assert estimate.amplitude == pytest.approx(200e-9, rel=1e-6)
    with pytest.raises(IllPosedError):
        fit_tau_sweep(tau_data(200e-9), resonant_cp, OMEGA, [(0.0, 1e7)])


def test_tau_sweep_needs_ten_points(resonant_cp):
    with pytest.raises(IllPosedError):
        fit_tau_sweep(tau_data(200e-9)[:9], resonant_cp, OMEGA)


def test_linear_conversion():
    drive = np.array(VOLTAGES)
    result = fit_linear_conversion(drive, COEFFICIENT * drive)
    assert isinstance(result, CalibrationResult)
    assert result.conversion_coefficient == pytest.approx(COEFFICIENT, rel=1e-12)
    assert result.uncertainty == pytest.approx(0.0, abs=1e-15)
    assert result.goodness_of_fit == pytest.approx(1.0)
    assert result.field_estimates[-1] == pytest.approx((80.0, 80.0 * COEFFICIENT))
    assert len(result.residuals) == 4


def test_weighted_linear_conversion():
    drive = np.array(VOLTAGES)
    sigma = np.full(4, 1e-9)
    result = fit_linear_conversion(drive, COEFFICIENT * drive, sigma)
    expected = 1e-9 / math.sqrt(float(np.sum(drive**2)))
    assert result.uncertainty == pytest.approx(expected)


def test_linear_conversion_rejects_bad_input():
    with pytest.raises(IllPosedError):
        fit_linear_conversion([0.0, 0.0], [1e-7, 2e-7])
    with pytest.raises(ValueError):
        fit_linear_conversion([1.0, 2.0], [1e-7])
    with pytest.raises(ValueError):
        fit_linear_conversion([], [])


def test_bessel_conversion_exact_data(resonant_cp):
    data = bessel_data(COEFFICIENT, VOLTAGES, (1, 3, 5))
    result = fit_bessel_conversion(data, resonant_cp, OMEGA)
    assert result.conversion_coefficient == pytest.approx(COEFFICIENT, rel=1e-9)
    assert result.goodness_of_fit == pytest.approx(1.0)
    assert len(result.residuals) == 12
    assert [v for v, _ in result.field_estimates] == list(VOLTAGES)
    assert max(abs(r) for r in result.residuals) < 1e-9


def test_relative_weighting(resonant_cp):
    data = bessel_data(COEFFICIENT, VOLTAGES, (1, 3, 5))
    result = fit_bessel_conversion(data, resonant_cp, OMEGA, weighting="relative")
    assert result.conversion_coefficient == pytest.approx(COEFFICIENT, rel=1e-9)


def test_bessel_conversion_with_bracket(resonant_cp):
    data = bessel_data(COEFFICIENT, VOLTAGES, (1, 3))
    result = fit_bessel_conversion(
        data, resonant_cp, OMEGA, bracket=(0.2e-6, 0.6e-6)
    )
    assert result.conversion_coefficient == pytest.approx(COEFFICIENT, rel=1e-9)
    with pytest.raises(ValueError):
        fit_bessel_conversion(data, resonant_cp, OMEGA, bracket=(0.6e-6, 0.2e-6))
    with pytest.raises(ValueError):
        fit_bessel_conversion(data, resonant_cp, OMEGA, weighting="inverse")


def test_bessel_conversion_needs_two_levels(resonant_cp):
    with pytest.raises(IllPosedError):
        fit_bessel_conversion([], resonant_cp, OMEGA)
    data = bessel_data(COEFFICIENT, (0.0, 40.0), (1, 3, 5))
    with pytest.raises(IllPosedError):
        fit_bessel_conversion(data, resonant_cp, OMEGA)


def test_residual_scan(resonant_cp):
    data = bessel_data(COEFFICIENT, VOLTAGES, (1, 3, 5))
    candidates = [0.3e-6, COEFFICIENT, 0.5e-6]
    costs = bessel_residual_scan(data, resonant_cp, OMEGA, candidates)
    assert costs.shape == (3,)
    assert costs[1] == pytest.approx(0.0, abs=1e-20)
    assert np.argmin(costs) == 1


def test_calibration_round_trip_from_photon_counts(resonant_cp):
    cfg = ReadoutConfig(t_L=2.0e-6, n_readouts=2**16)
    data = []
    for index, voltage in enumerate(VOLTAGES):
        field = AcField(COEFFICIENT * voltage, OMEGA, 0.2)
        probabilities = synthesize_series("analytic", resonant_cp, field, cfg)
        seeded = ReadoutConfig(t_L=cfg.t_L, n_readouts=cfg.n_readouts, rng_seed=index)
        counts = to_photon_counts(probabilities, seeded)
        spectrum = dft(normalize_counts(counts, seeded))
        alias = alias_frequency(OMEGA, cfg.t_L)
        for k, peak in extract_harmonics(spectrum, alias, [1, 3, 5]):
            data.append((voltage, k, peak.amplitude))
    result = fit_bessel_conversion(data, resonant_cp, OMEGA)
    assert result.conversion_coefficient == pytest.approx(COEFFICIENT, rel=0.01)
    assert result.goodness_of_fit > 0.99


def test_points_in_exclusion_windows_are_ignored(resonant_cp):
    windows = [(450e3, 550e3)]
    clean = fit_tau_sweep(tau_data(200e-9), resonant_cp, OMEGA, windows)
    polluted = tau_data(200e-9) + [(1.0e-6, 0.9), (0.99e-6, 0.8)]
    assert fit_tau_sweep(polluted, resonant_cp, OMEGA, windows) == clean


def test_residual_scan_minimum_is_at_the_coefficient(resonant_cp):
    data = bessel_data(COEFFICIENT, VOLTAGES, (1, 3, 5))
    grid = np.geomspace(0.1e-6, 1e-6, 200)
    costs = bessel_residual_scan(data, resonant_cp, OMEGA, grid)
    best = int(np.argmin(costs))
    assert abs(grid[best] / COEFFICIENT - 1) < grid[1] / grid[0] - 1
