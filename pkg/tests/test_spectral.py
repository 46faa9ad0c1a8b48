"""Tests for the spectral analysis of readout records."""

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

import logging
import math

import numpy as np
import pytest
from scipy.special import jv

from conftest import FREQUENCY, N_PULSES, field_for_argument
from floquetmag import spectral
from floquetmag.analytic import (
    AcField,
    CpConfig,
    harmonic_amplitude,
    harmonic_phase,
)
from floquetmag.errors import ConfigurationError, ModelDomainError
from floquetmag.readout import (
    ReadoutConfig,
    TimeSeries,
    alias_frequency,
    synthesize_series,
    to_photon_counts,
)
from floquetmag.spectral import (
    DETECTION_FACTOR,
    HarmonicMap,
    PeakFit,
    build_harmonic_map,
    dft,
    extract_harmonics,
    harmonic_table,
    nearest_bin_amplitude,
    noise_floor,
    odd_orders,
    sinc_peak_fit,
)

# 10 Hz bins with the 100 Hz alias of 500.1 kHz on bin 10.
ON_BIN = ReadoutConfig(t_L=2.0e-6, n_readouts=50000)
# 9.01 bins per alias harmonic at 1.098 kHz.
OFF_BIN = ReadoutConfig(t_L=2.004e-6, n_readouts=4096)


def tone(n, dt, frequency, amplitude, phase, offset=0.0):
    t = np.arange(n) * dt
    values = offset + amplitude * np.cos(2 * math.pi * frequency * t + phase)
    return TimeSeries(values, dt)


def wrapped(angle):
    return (angle + math.pi) % (2 * math.pi) - math.pi


def test_dft_scaling():
    spectrum = dft(tone(1000, 1e-3, 50.0, 0.4, 0.6))
    assert spectrum.size == 1000
    assert spectrum.bin_width == pytest.approx(1.0)
    assert spectrum.nyquist == pytest.approx(500.0)
    assert abs(spectrum.values[50]) == pytest.approx(0.4 * spectrum.duration / 2)
    assert np.angle(spectrum.values[50]) == pytest.approx(0.6)
    assert nearest_bin_amplitude(spectrum, 50.2) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        dft(TimeSeries([1.0], 1e-3))


def test_noise_floor():
    spectrum = dft(tone(1000, 1e-3, 50.0, 0.4, 0.0))
    assert noise_floor(spectrum, 100.0, 400.0) == pytest.approx(0.0, abs=1e-12)
    assert noise_floor(spectrum, 49.5, 50.5) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        noise_floor(spectrum, 10.2, 10.8)


@pytest.mark.parametrize("method", ["magnitude", "complex"])
@pytest.mark.parametrize("offset", [0.0, 0.25, 0.5, -0.37])
def test_fit_recovers_off_bin_tone(method, offset):
    n, dt = 4096, 1e-3
    bin_width = 1 / (n * dt)
    frequency = (1000 + offset) * bin_width
    spectrum = dft(tone(n, dt, frequency, 0.3, 0.7, offset=0.5))
    peak = sinc_peak_fit(spectrum, 1000 * bin_width, 5 * bin_width, method)
    assert peak.converged
    assert peak.center == pytest.approx(frequency, abs=1e-3 * bin_width)
    assert peak.amplitude == pytest.approx(0.3, rel=1e-3)
    assert wrapped(peak.phase - 0.7) == pytest.approx(0.0, abs=2e-3)
    assert peak.residual_norm < 1e-3


def test_pure_noise_gives_no_peak():
    rng = np.random.default_rng(12)
    n, dt = 4096, 1e-3
    bin_width = 1 / (n * dt)
    for _ in range(40):
        spectrum = dft(TimeSeries(rng.normal(size=n), dt))
        floor = noise_floor(spectrum, bin_width, spectrum.nyquist)
        for center in (300, 700, 1100, 1500, 1900):
            peak = sinc_peak_fit(spectrum, center * bin_width, 5 * bin_width)
            assert not peak.converged or peak.amplitude < DETECTION_FACTOR * floor


def test_complex_fit_needs_room_around_the_peak():
    n, dt = 1024, 1e-3
    bin_width = 1 / (n * dt)
    spectrum = dft(tone(n, dt, 305 * bin_width, 1.0, 0.0))
    peak = sinc_peak_fit(spectrum, 300 * bin_width, 5 * bin_width, "complex")
    assert not peak.converged


@pytest.mark.parametrize("method", ["magnitude", "complex"])
def test_fitted_center_stays_in_window(method):
    n, dt = 1024, 1e-3
    bin_width = 1 / (n * dt)
    spectrum = dft(tone(n, dt, 308.5 * bin_width, 1.0, 0.0))
    peak = sinc_peak_fit(spectrum, 300 * bin_width, 5 * bin_width, method)
    assert abs(peak.center - 300 * bin_width) <= 5 * bin_width * (1 + 1e-12)
    if method == "complex":
        assert not peak.converged


def test_fit_rejects_bad_input():
    spectrum = dft(tone(256, 1e-3, 50.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        sinc_peak_fit(spectrum, 50.0, 1.0)
    with pytest.raises(ValueError):
        sinc_peak_fit(spectrum, 50.0, 20.0, "gaussian")


# k = 5 sits at the level of the leakage from k = 1 and 3, which only the
# complex baseline absorbs.
@pytest.mark.parametrize(
    "method, orders, tolerance",
    [("complex", (1, 3, 5), 1e-3), ("magnitude", (1, 3), 1e-2)],
)
def test_harmonic_peaks_sit_at_alias_multiples(resonant_cp, method, orders, tolerance):
    cfg = ReadoutConfig(t_L=2.0e-6, n_readouts=2**16)
    field = AcField.from_frequency(877e-9, FREQUENCY)
    series = synthesize_series("analytic", resonant_cp, field, cfg)
    spectrum = dft(series)
    alias = alias_frequency(field.omega_ac, cfg.t_L)
    assert alias == pytest.approx(100.0)
    harmonics = dict(extract_harmonics(spectrum, alias, orders, method=method))
    for k in orders:
        peak = harmonics[k]
        assert peak.converged
        assert abs(peak.center - 100.0 * k) < spectrum.bin_width
        expected = abs(harmonic_amplitude(k, resonant_cp, field))
        assert peak.amplitude == pytest.approx(expected, abs=tolerance)


def test_harmonic_phases(resonant_cp):
    field = field_for_argument(2.0, 0.3)
    spectrum = dft(synthesize_series("analytic", resonant_cp, field, ON_BIN))
    for k, peak in extract_harmonics(spectrum, 100.0, [1, 3, 5]):
        expected = harmonic_phase(k, resonant_cp, field)
        assert wrapped(peak.phase - expected) == pytest.approx(0.0, abs=1e-6)
        assert peak.amplitude == pytest.approx(abs(jv(k, 2.0)), abs=1e-6)


def test_negative_alias_conjugates_phases(resonant_cp):
    field = field_for_argument(2.0, 0.3)
    spectrum = dft(synthesize_series("analytic", resonant_cp, field, ON_BIN))
    positive = dict(extract_harmonics(spectrum, 100.0, [3]))
    negative = dict(extract_harmonics(spectrum, -100.0, [3]))
    assert negative[3].amplitude == positive[3].amplitude
    assert negative[3].phase == -positive[3].phase


def test_extract_harmonics_limits(caplog):
    spectrum = dft(tone(1000, 1e-3, 100.0, 1.0, 0.0))
    with pytest.raises(ModelDomainError):
        extract_harmonics(spectrum, 0.0, [1])
    with caplog.at_level(logging.WARNING):
        harmonics = extract_harmonics(spectrum, 100.0, [1, 3, 5])
    assert [k for k, _ in harmonics] == [1, 3]
    assert "beyond the Nyquist frequency" in caplog.text


def test_no_even_harmonics_without_readout_error(resonant_cp):
    field = field_for_argument(1.0, 0.4)
    spectrum = dft(synthesize_series("analytic", resonant_cp, field, ON_BIN))
    for _, peak in extract_harmonics(spectrum, 100.0, [2, 4]):
        assert peak.amplitude < 1e-6


@pytest.mark.slow
def test_no_even_harmonics_in_numeric_record(resonant_cp):
    field = field_for_argument(1.0, 0.4)
    spectrum = dft(synthesize_series("numeric", resonant_cp, field, ON_BIN))
    for _, peak in extract_harmonics(spectrum, 100.0, [2, 4]):
        assert peak.amplitude < 1e-6


def test_readout_error_creates_even_harmonics():
    cp = CpConfig.resonant(N_PULSES, FREQUENCY, readout_tilt_error=0.05)
    field = field_for_argument(1.0)
    spectrum = dft(synthesize_series("analytic", cp, field, ON_BIN))
    (_, peak), = extract_harmonics(spectrum, 100.0, [2])
    assert peak.amplitude == pytest.approx(0.05 * jv(2, 1.0), abs=1e-6)
    assert peak.amplitude == pytest.approx(abs(harmonic_amplitude(2, cp, field)))


@pytest.mark.slow
def test_readout_error_in_numeric_record():
    cp = CpConfig.resonant(N_PULSES, FREQUENCY, readout_tilt_error=0.05)
    field = field_for_argument(1.0)
    spectrum = dft(synthesize_series("numeric", cp, field, ON_BIN))
    (_, peak), = extract_harmonics(spectrum, 100.0, [2])
    assert peak.amplitude == pytest.approx(0.05 * jv(2, 1.0), rel=0.1)


def test_harmonic_table():
    spectrum = dft(tone(1000, 1e-3, 100.0, 1.0, 0.0))
    harmonics = extract_harmonics(spectrum, 100.0, [1, 3])
    rows = harmonic_table(harmonics)
    assert [row["k"] for row in rows] == [1, 3]
    assert set(rows[0]) == {"k", "frequency", "amplitude", "phase", "converged"}
    assert rows[0]["amplitude"] == pytest.approx(1.0)
    detected = harmonic_table(harmonics, floor=1e-3)
    assert detected[0]["detected"]
    assert not detected[1]["detected"]


def test_odd_orders():
    np.testing.assert_array_equal(odd_orders(7), [1, 3, 5, 7])
    np.testing.assert_array_equal(odd_orders(8), [1, 3, 5, 7])
    assert odd_orders(0).size == 0


def test_map_shape_is_checked():
    with pytest.raises(ValueError):
        HarmonicMap([1.0, 2.0], [1, 3], np.zeros((2, 3)))


def test_fast_map_is_bessel(resonant_cp):
    threshold = 877e-9
    amplitudes = np.linspace(0, 4 * threshold, 9)
    field = AcField.from_frequency(0.0, FREQUENCY)
    result = build_harmonic_map(
        "analytic", amplitudes, 31, resonant_cp, field, OFF_BIN
    )
    assert result.grid.shape == (9, 16)
    np.testing.assert_array_equal(result.orders, odd_orders(31))
    arguments = 2 * N_PULSES * 2 * math.pi * 28e9 * amplitudes / field.omega_ac
    expected = np.abs(jv(result.orders[None, :], arguments[:, None]))
    np.testing.assert_allclose(result.grid, expected, rtol=1e-9, atol=1e-280)


def test_map_amplitudes_must_ascend(resonant_cp):
    field = AcField.from_frequency(0.0, FREQUENCY)
    with pytest.raises(ConfigurationError):
        build_harmonic_map("analytic", [2e-7, 1e-7], 5, resonant_cp, field, OFF_BIN)


def test_full_pipeline_map_matches_fast_path(resonant_cp):
    field = AcField.from_frequency(0.0, FREQUENCY)
    amplitudes = [100e-9, 500e-9, 900e-9]
    fast = build_harmonic_map("analytic", amplitudes, 21, resonant_cp, field, OFF_BIN)
    slow = build_harmonic_map(
        "analytic", amplitudes, 21, resonant_cp, field, OFF_BIN, fast_path=False
    )
    fitted = np.isfinite(slow.grid)
    assert np.all(fitted[:, 0])
    np.testing.assert_allclose(slow.grid[fitted], fast.grid[fitted], atol=5e-3)


@pytest.mark.slow
def test_numeric_map_matches_fast_path(resonant_cp):
    field = AcField.from_frequency(0.0, FREQUENCY)
    amplitudes = [200e-9, 600e-9]
    fast = build_harmonic_map("analytic", amplitudes, 21, resonant_cp, field, OFF_BIN)
    numeric = build_harmonic_map("numeric", amplitudes, 21, resonant_cp, field, OFF_BIN)
    fitted = np.isfinite(numeric.grid)
    assert np.all(fitted[:, 0])
    np.testing.assert_allclose(numeric.grid[fitted], fast.grid[fitted], atol=5e-3)


def test_parallel_map_equals_serial(resonant_cp):
    field = AcField.from_frequency(0.0, FREQUENCY)
    amplitudes = [150e-9, 450e-9, 750e-9]
    options = {"fast_path": False}
    serial = build_harmonic_map(
        "analytic", amplitudes, 9, resonant_cp, field, OFF_BIN, **options
    )
    parallel = build_harmonic_map(
        "analytic", amplitudes, 9, resonant_cp, field, OFF_BIN, max_workers=2, **options
    )
    np.testing.assert_array_equal(parallel.grid, serial.grid)


def test_harmonics_beyond_nyquist_are_nan(resonant_cp):
    # The alias is 25.7 bins and the Nyquist frequency 128 bins, so k = 5 drops.
    cfg = ReadoutConfig(t_L=2.2e-6, n_readouts=256)
    field = AcField.from_frequency(0.0, FREQUENCY)
    b_ac = field_for_argument(2.0).b_ac
    result = build_harmonic_map(
        "analytic", [b_ac], 5, resonant_cp, field, cfg, fast_path=False
    )
    assert np.all(np.isfinite(result.grid[0, :2]))
    assert np.isnan(result.grid[0, 2])


def test_unconverged_fits_stay_out_of_the_map(resonant_cp, monkeypatch):
    def fits(spectrum, alias, orders, window_bins, method):
        return [
            (1, PeakFit(100.0, 0.4, 0.0, 1e-6, True)),
            (3, PeakFit(300.0, 17.8, 0.0, 0.9, False)),
        ]

    monkeypatch.setattr(spectral, "extract_harmonics", fits)
    field = AcField.from_frequency(0.0, FREQUENCY)
    result = build_harmonic_map(
        "analytic", [100e-9], 5, resonant_cp, field, OFF_BIN, fast_path=False
    )
    assert result.grid[0, 0] == 0.4
    assert np.isnan(result.grid[0, 1])
    assert np.isnan(result.grid[0, 2])


@pytest.mark.slow
def test_finite_pulses_wash_out_high_harmonics():
    # 13.1 bins per alias harmonic; k = 101 stays below the Nyquist frequency.
    cfg = ReadoutConfig(t_L=2.006e-6, n_readouts=2**12)
    cp = CpConfig.resonant(N_PULSES, FREQUENCY, t_pi=400e-9)
    field = AcField.from_frequency(0.0, FREQUENCY)
    amplitudes = [5e-6, 10e-6, 20e-6, 40e-6, 80e-6]
    ideal = build_harmonic_map("analytic", amplitudes, 101, cp, field, cfg)
    numeric = build_harmonic_map("numeric", amplitudes, 101, cp, field, cfg)
    high = numeric.orders > 41
    for row in (3, 4):
        # No converged peak counts as zero amplitude.
        found = np.nan_to_num(numeric.grid[row, high], nan=0.0)
        assert 5 * found.mean() <= ideal.grid[row, high].mean()
    low = numeric.orders <= 41
    assert np.all(np.isfinite(numeric.grid[0, :5]))
    fitted = low & np.isfinite(numeric.grid[0])
    assert numeric.grid[0, fitted].mean() == pytest.approx(
        ideal.grid[0, fitted].mean(), rel=0.2
    )


def test_parseval():
    rng = np.random.default_rng(5)
    series = TimeSeries(rng.normal(size=300), 1e-3)
    spectrum = dft(series)
    energy = np.sum(series.values**2) * series.dt
    assert np.sum(np.abs(spectrum.values) ** 2) / spectrum.duration == pytest.approx(
        energy, rel=1e-9
    )


@pytest.mark.parametrize("method", ["magnitude", "complex"])
def test_sinc_fit_beats_nearest_bin(method):
    n, dt = 1024, 1e-3
    bin_width = 1 / (n * dt)
    rng = np.random.default_rng(6)
    offsets = rng.uniform(0.1, 0.5, 10) * rng.choice([-1, 1], 10)
    for offset in offsets:
        frequency = (300 + offset) * bin_width
        spectrum = dft(tone(n, dt, frequency, 1.0, 0.3))
        naive = abs(nearest_bin_amplitude(spectrum, frequency) - 1.0)
        peak = sinc_peak_fit(spectrum, 300 * bin_width, 5 * bin_width, method)
        fitted = abs(peak.amplitude - 1.0)
        assert fitted <= naive + 1e-9
    half = dft(tone(n, dt, 300.5 * bin_width, 1.0, 0.0))
    assert nearest_bin_amplitude(half, 300.5 * bin_width) == pytest.approx(
        2 / math.pi, abs=2e-3
    )


def test_shot_noise_floor():
    cfg = ReadoutConfig(n_readouts=2**14, rng_seed=2)
    counts = to_photon_counts(TimeSeries(np.full(2**14, 0.5), cfg.t_L), cfg)
    spectrum = dft(counts)
    floor = noise_floor(spectrum, 10 * spectrum.bin_width, spectrum.nyquist)
    median_magnitude = floor * spectrum.duration / 2
    expected = math.sqrt(math.pi / 4) * math.sqrt(np.sum(counts.values)) * counts.dt
    assert median_magnitude == pytest.approx(expected, rel=0.2)
