"""DFT, sinc peak fitting, harmonic extraction and harmonic maps."""

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
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Final, Literal, Optional, TypeAlias

import numpy as np
from scipy.optimize import least_squares

from floquetmag.analytic import AcField, CpConfig, bessel_argument
from floquetmag.core import PhysicalConstants, bessel_j_row
from floquetmag.dynamics import IntegratorSettings
from floquetmag.errors import ConfigurationError, ModelDomainError
from floquetmag.readout import (
    MODEL_TYPE,
    ReadoutConfig,
    TimeSeries,
    alias_frequency,
    synthesize_series,
)

_logger = logging.getLogger(__name__)

FIT_METHOD_TYPE: TypeAlias = Literal["complex", "magnitude"]

DEFAULT_WINDOW_BINS: Final[int] = 5
MIN_WINDOW_BINS: Final[int] = 5
MAX_ITERATIONS: Final[int] = 200
STEP_TOLERANCE: Final[float] = 1e-10
DETECTION_FACTOR: Final[float] = 5.0
BASELINE_DEGREE: Final[int] = 3
EDGE_MARGIN_BINS: Final[float] = 1.0
AMPLITUDE_LIMIT: Final[float] = 1.5

_SCAN_STEP: Final[float] = 0.05
_DEFAULT_CONSTANTS: Final = PhysicalConstants()


@dataclass(frozen=True, eq=False)
class Spectrum:
    """
    A discrete Fourier transform ``X(f_q) = Σ_m x_m e^{−2πi f_q m dt}·dt``.

    :param frequencies: Bin frequencies in Hz, in numpy FFT order
    :type frequencies: numpy.ndarray

    :param values: Complex amplitudes, in input units times seconds
    :type values: numpy.ndarray

    :param duration: Record length ``T = n·dt`` in seconds
    :type duration: float

    :param dt: Sampling period in seconds
    :type dt: float
    """

    frequencies: np.ndarray
    values: np.ndarray
    duration: float
    dt: float

    @property
    def bin_width(self: Spectrum) -> float:
        """Return the bin spacing ``1/T``."""
        return 1 / self.duration

    @property
    def nyquist(self: Spectrum) -> float:
        """Return the Nyquist frequency ``1/(2·dt)``."""
        return 1 / (2 * self.dt)

    @property
    def size(self: Spectrum) -> int:
        """Return the number of bins."""
        return self.values.size


@dataclass(frozen=True)
class PeakFit:
    """
    Result of fitting one spectral peak.

    ``amplitude`` and ``phase`` describe the tone ``A·cos(2πf₀t + phase)``.
    """

    center: float
    amplitude: float
    phase: float
    residual_norm: float
    converged: bool


@dataclass(frozen=True, eq=False)
class HarmonicMap:
    """
    Fitted harmonic amplitudes ``|A_k|`` over a sweep of field amplitudes.

    ``grid[i, j]`` belongs to ``amplitudes[i]`` (tesla) and ``orders[j]``.
    Harmonics beyond the Nyquist frequency and harmonics whose peak fit did
    not converge are NaN.
    """

    amplitudes: np.ndarray
    orders: np.ndarray
    grid: np.ndarray

    def __post_init__(self: HarmonicMap):
        """Check the shape of the grid."""
        object.__setattr__(self, "amplitudes", np.asarray(self.amplitudes, dtype=float))
        object.__setattr__(self, "orders", np.asarray(self.orders, dtype=int))
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        if self.grid.shape != (self.amplitudes.size, self.orders.size):
            raise ValueError("Grid dimensions do not match the axes.")


def dft(series: TimeSeries) -> Spectrum:
    """
    Return the scaled DFT of a series.

    A cosine of amplitude A at a bin frequency gives ``|X| = A·T/2``.
    No mean is removed and no window is applied.
    """
    if len(series) < 2:
        raise ValueError("A series needs at least two samples.")
    values = np.fft.fft(series.values) * series.dt
    frequencies = np.fft.fftfreq(len(series), series.dt)
    return Spectrum(frequencies, values, series.duration, series.dt)


def _kernel(offset: np.ndarray, n: int) -> np.ndarray:
    """Return the complex peak shape of a unit tone, ``offset`` in bins."""
    return (
        np.exp(-1j * math.pi * offset * (n - 1) / n)
        * np.sinc(offset)
        / np.sinc(offset / n)
    )


def _design(positions: np.ndarray, center: float, n: int) -> np.ndarray:
    """Return the columns: peak shape and a polynomial baseline."""
    degree = min(BASELINE_DEGREE, positions.size - MIN_WINDOW_BINS + 1)
    columns = [_kernel(positions - center, n)]
    columns.extend(positions**power for power in range(degree + 1))
    return np.column_stack(columns)


def _project(
    positions: np.ndarray, data: np.ndarray, center: float, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the linear part of the fit; return coefficients and residual."""
    design = _design(positions, center, n)
    coefficients = np.linalg.lstsq(design, data, rcond=None)[0]
    return coefficients, data - design @ coefficients


def _window(
    spectrum: Spectrum, window_center: float, window_halfwidth: float
) -> tuple[np.ndarray, np.ndarray]:
    """Return bin positions (in bins from the centre) and scaled values."""
    selected = np.abs(spectrum.frequencies - window_center) <= window_halfwidth * (
        1 + 1e-12
    )
    if np.count_nonzero(selected) < MIN_WINDOW_BINS:
        raise ValueError(f"A fit window needs at least {MIN_WINDOW_BINS} bins.")
    positions = (spectrum.frequencies[selected] - window_center) / spectrum.bin_width
    order = np.argsort(positions)
    data = spectrum.values[selected] / (spectrum.duration / 2)
    return positions[order], data[order]


def _fit_complex(
    positions: np.ndarray, data: np.ndarray, n: int
) -> tuple[float, complex, float, bool]:
    """Fit peak shape plus baseline to complex bins by variable projection."""
    peak = positions[np.argmax(np.abs(data))]
    scan = peak + np.arange(-1.0, 1.0 + _SCAN_STEP / 2, _SCAN_STEP)
    costs = [np.linalg.norm(_project(positions, data, u, n)[1]) for u in scan]
    start = float(scan[int(np.argmin(costs))])

    def residual(parameters: np.ndarray) -> np.ndarray:
        rest = _project(positions, data, parameters[0], n)[1]
        return np.concatenate((rest.real, rest.imag))

    result = least_squares(
        residual,
        [start],
        method="lm",
        xtol=STEP_TOLERANCE,
        max_nfev=MAX_ITERATIONS * 2,
    )
    center = float(result.x[0])
    coefficients, rest = _project(positions, data, center, n)
    return center, complex(coefficients[0]), float(np.linalg.norm(rest)), result.success


def _fit_magnitude(
    positions: np.ndarray, data: np.ndarray, n: int
) -> tuple[float, complex, float, bool]:
    """Fit ``|A·shape| + baseline`` to the magnitude of the bins."""
    magnitude = np.abs(data)
    peak_index = int(np.argmax(magnitude))
    baseline = float(np.median(magnitude))

    def residual(parameters: np.ndarray) -> np.ndarray:
        center, amplitude, offset = parameters
        model = np.abs(amplitude * _kernel(positions - center, n)) + offset
        return model - magnitude

    result = least_squares(
        residual,
        [positions[peak_index], magnitude[peak_index] - baseline, baseline],
        method="lm",
        xtol=STEP_TOLERANCE,
        max_nfev=MAX_ITERATIONS * 4,
    )
    center, amplitude, _ = result.x
    shape = _kernel(positions - center, n)
    value = np.vdot(shape, data) / np.vdot(shape, shape)
    value = abs(amplitude) * value / abs(value) if value != 0 else complex(amplitude)
    return (
        float(center),
        complex(value),
        float(np.linalg.norm(result.fun)),
        result.success,
    )


def sinc_peak_fit(
    spectrum: Spectrum,
    window_center: float,
    window_halfwidth: float,
    method: FIT_METHOD_TYPE = "magnitude",
) -> PeakFit:
    """
    Fit the sinc-broadened peak of a tone inside a frequency window.

    The default ``"magnitude"`` method fits the magnitude of the peak shape
    plus a constant baseline, and takes the phase from the complex bins at the
    fitted centre. The ``"complex"`` method fits the exact DFT peak shape of a
    tone plus a cubic complex baseline to the complex bins, which also absorbs
    leakage from neighbouring peaks; its centre must stay
    :data:`EDGE_MARGIN_BINS` inside the window, where the peak shape and the
    baseline are still distinguishable.

    A fit never converges with an amplitude above :data:`AMPLITUDE_LIMIT`
    times the norm of the window, since no single tone can produce it. The
    reported centre is clipped to the window.

    Amplitudes are in the units of the series, so a tone ``A·cos(2πf₀t + θ)``
    gives ``amplitude = A`` and ``phase = θ``.

    :param spectrum: The spectrum
    :type spectrum: Spectrum

    :param window_center: Centre of the window in Hz
    :type window_center: float

    :param window_halfwidth: Half width of the window in Hz
    :type window_halfwidth: float

    :param method: ``"complex"`` or ``"magnitude"``
    :type method: str

    :returns: The fit; ``converged`` is false when the optimizer failed, the
        centre left its allowed range or the amplitude exceeded the limit
    :rtype: PeakFit
    """
    positions, data = _window(spectrum, window_center, window_halfwidth)
    if method == "complex":
        fit = _fit_complex(positions, data, spectrum.size)
    elif method == "magnitude":
        fit = _fit_magnitude(positions, data, spectrum.size)
    else:
        raise ValueError(f'Unknown fit method "{method}".')
    center, value, residual, success = fit
    halfwidth_bins = window_halfwidth / spectrum.bin_width
    if method == "complex":
        center_limit = halfwidth_bins - EDGE_MARGIN_BINS
    else:
        center_limit = halfwidth_bins
    data_norm = float(np.linalg.norm(data))
    converged = (
        bool(success)
        and abs(center) <= center_limit
        and abs(value) <= AMPLITUDE_LIMIT * data_norm
    )
    center = min(max(center, -halfwidth_bins), halfwidth_bins)
    peak = PeakFit(
        center=window_center + center * spectrum.bin_width,
        amplitude=abs(value),
        phase=float(np.angle(value)),
        residual_norm=residual / data_norm if data_norm > 0 else 0.0,
        converged=converged,
    )
    if not converged:
        _logger.warning("peak fit near %.6g Hz did not converge", window_center)
    return peak


def nearest_bin_amplitude(spectrum: Spectrum, frequency: float) -> float:
    """Return ``2|X|/T`` at the bin nearest to ``frequency``."""
    index = int(np.argmin(np.abs(spectrum.frequencies - frequency)))
    return 2 * abs(spectrum.values[index]) / spectrum.duration


def noise_floor(spectrum: Spectrum, f_low: float, f_high: float) -> float:
    """Return the median of ``2|X|/T`` over the bins in ``[f_low, f_high]``."""
    selected = (spectrum.frequencies >= f_low) & (spectrum.frequencies <= f_high)
    if not np.any(selected):
        raise ValueError("No bins in the requested band.")
    return float(np.median(2 * np.abs(spectrum.values[selected]) / spectrum.duration))


def extract_harmonics(
    spectrum: Spectrum,
    alias_fundamental: float,
    orders: Sequence[int],
    window_bins: int = DEFAULT_WINDOW_BINS,
    method: FIT_METHOD_TYPE = "magnitude",
) -> list[tuple[int, PeakFit]]:
    """
    Fit the harmonics ``k·|f_a|`` of the alias frequency ``f_a``.

    Each peak is fitted in a window of ``±window_bins`` bins. Harmonics whose
    window reaches the Nyquist frequency are skipped with a warning. For a
    negative ``f_a`` the phases are negated, so they always refer to
    ``cos(kα + phase)`` in the AC phase α of the readouts.

    :raises ModelDomainError: if ``alias_fundamental`` is zero
    """
    if alias_fundamental == 0:
        raise ModelDomainError("The field is sampled stroboscopically (no alias).")
    halfwidth = window_bins * spectrum.bin_width
    results = []
    for k in orders:
        frequency = k * abs(alias_fundamental)
        if frequency + halfwidth >= spectrum.nyquist:
            _logger.warning(
                "harmonic k=%d at %.6g Hz is beyond the Nyquist frequency; skipped",
                k,
                frequency,
            )
            continue
        peak = sinc_peak_fit(spectrum, frequency, halfwidth, method)
        if alias_fundamental < 0:
            peak = PeakFit(
                peak.center,
                peak.amplitude,
                -peak.phase,
                peak.residual_norm,
                peak.converged,
            )
        results.append((k, peak))
    return results


def harmonic_table(
    harmonics: Sequence[tuple[int, PeakFit]], floor: Optional[float] = None
) -> list[dict]:
    """
    Return one row per harmonic with its fitted values.

    With a noise ``floor`` a harmonic counts as detected when it converged and
    its amplitude exceeds :data:`DETECTION_FACTOR` times the floor.
    """
    rows = []
    for k, peak in harmonics:
        row = {
            "k": k,
            "frequency": peak.center,
            "amplitude": peak.amplitude,
            "phase": peak.phase,
            "converged": peak.converged,
        }
        if floor is not None:
            threshold = DETECTION_FACTOR * floor
            row["detected"] = peak.converged and peak.amplitude > threshold
        rows.append(row)
    return rows


def odd_orders(max_order: int) -> np.ndarray:
    """Return the odd orders ``1, 3, ..., ≤ max_order``."""
    return np.arange(1, max_order + 1, 2)


def _map_row(
    task: tuple[
        MODEL_TYPE,
        CpConfig,
        AcField,
        ReadoutConfig,
        IntegratorSettings,
        PhysicalConstants,
        tuple[int, ...],
        int,
        FIT_METHOD_TYPE,
    ]
) -> np.ndarray:
    """Synthesize, transform and fit the harmonics of one field amplitude."""
    model, cp, field, cfg, settings, constants, orders, window_bins, method = task
    series = synthesize_series(model, cp, field, cfg, settings, constants)
    spectrum = dft(series)
    alias = alias_frequency(field.omega_ac, cfg.t_L)
    row = np.full(len(orders), np.nan)
    fitted = dict(extract_harmonics(spectrum, alias, orders, window_bins, method))
    for index, k in enumerate(orders):
        if k in fitted and fitted[k].converged:
            row[index] = fitted[k].amplitude
    _logger.info("harmonic map row for b_ac = %.6e T done", field.b_ac)
    return row


def build_harmonic_map(
    model: MODEL_TYPE,
    amplitudes: Sequence[float],
    max_order: int,
    cp: CpConfig,
    field_template: AcField,
    cfg: ReadoutConfig,
    settings: IntegratorSettings = IntegratorSettings(),
    fast_path: bool = True,
    max_workers: int = 1,
    window_bins: int = DEFAULT_WINDOW_BINS,
    constants: PhysicalConstants = _DEFAULT_CONSTANTS,
    method: FIT_METHOD_TYPE = "magnitude",
) -> HarmonicMap:
    """
    Return ``|A_k|`` for odd ``k ≤ max_order`` over a sweep of field amplitudes.

    The analytic model with ``fast_path`` evaluates ``|J_k(2Nγb/ω)|``
    directly. Otherwise each amplitude runs the full pipeline: series
    synthesis, DFT and harmonic fits. With ``max_workers > 1`` amplitudes
    are processed in separate processes; rows are stored by index, so the
    result does not depend on scheduling. Only converged fits enter the grid.

    :param amplitudes: Field amplitudes in tesla, ascending
    :type amplitudes: Sequence[float]

    :param field_template: Field whose amplitude is replaced by each sweep value
    :type field_template: AcField

    :param method: Peak fit method of the full pipeline
    :type method: str

    :raises ConfigurationError: if the amplitudes are not ascending
    """
    amplitude_axis = np.asarray(amplitudes, dtype=float)
    if np.any(np.diff(amplitude_axis) < 0):
        raise ConfigurationError("Map amplitudes must be sorted ascending.")
    orders = odd_orders(max_order)
    fields = [field_template.with_amplitude(float(b)) for b in amplitude_axis]

    if model == "analytic" and fast_path:
        grid = np.empty((amplitude_axis.size, orders.size))
        for index, field in enumerate(fields):
            row = bessel_j_row(max_order, bessel_argument(cp, field, constants))
            grid[index] = np.abs(row[orders])
        return HarmonicMap(amplitude_axis, orders, grid)

    order_tuple = tuple(int(k) for k in orders)
    tasks = [
        (model, cp, field, cfg, settings, constants, order_tuple, window_bins, method)
        for field in fields
    ]
    if max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as executor:
            rows = list(executor.map(_map_row, tasks))
    else:
        rows = [_map_row(task) for task in tasks]
    grid = np.vstack(rows) if rows else np.empty((0, orders.size))
    return HarmonicMap(amplitude_axis, orders, grid)
