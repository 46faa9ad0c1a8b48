"""Sequential readout: P0 time series, photon counts and normalization."""

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
from dataclasses import dataclass
from typing import Final, Literal, TypeAlias

import numpy as np

from floquetmag.analytic import AcField, CpConfig, bessel_argument, return_probability
from floquetmag.core import PhysicalConstants
from floquetmag.dynamics import (
    INITIAL_STATE,
    IntegratorSettings,
    build_xy8_schedule,
    propagate_ensemble,
    readout_probability,
)
from floquetmag.errors import ConfigurationError, ModelDomainError

_logger = logging.getLogger(__name__)

MODEL_TYPE: TypeAlias = Literal["analytic", "numeric"]
UNIT_TYPE: TypeAlias = Literal["probability", "counts"]
UNITS: Final[tuple[str, ...]] = ("probability", "counts")

NOISE_BLOCK: Final[int] = 2**16
NUMERIC_CHUNK: Final[int] = 1024

_DEFAULT_CONSTANTS: Final = PhysicalConstants()


@dataclass(frozen=True)
class ReadoutConfig:
    """
    Parameters of the sequential readout.

    The photoluminescence rates are placeholders of a realistic order of
    magnitude; calibrated values of a given setup should be supplied.

    :param t_L: Phase-stepping period in seconds
    :type t_L: float

    :param n_readouts: Number of readouts in the record
    :type n_readouts: int

    :param i0: Photon count rate of ``|0⟩`` in counts/s
    :type i0: float

    :param i1: Photon count rate of ``|1⟩`` in counts/s
    :type i1: float

    :param t_read: Readout window in seconds
    :type t_read: float

    :param n_seq: Repetitions summed per readout
    :type n_seq: int

    :param rng_seed: Seed of the shot-noise generator
    :type rng_seed: int
    """

    t_L: float = 2.0e-6
    n_readouts: int = 2**20
    i0: float = 1.0e5
    i1: float = 0.7e5
    t_read: float = 3.0e-7
    n_seq: int = 100000
    rng_seed: int = 0

    def __post_init__(self: ReadoutConfig):
        """Validate the configuration."""
        if not self.t_L > 0:
            raise ConfigurationError("t_L must be positive.")
        if self.n_readouts < 2:
            raise ConfigurationError("n_readouts must be at least 2.")
        if not self.i0 > self.i1 >= 0:
            raise ConfigurationError("Count rates must satisfy i0 > i1 >= 0.")
        if not self.t_read > 0 or self.n_seq < 1:
            raise ConfigurationError("t_read and n_seq must be positive.")
        if self.rng_seed < 0:
            raise ConfigurationError("rng_seed must be non-negative.")

    @property
    def count_scale(self: ReadoutConfig) -> float:
        """Return ``n_seq·t_read``, the time over which photons are collected."""
        return self.n_seq * self.t_read


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """
    A uniformly sampled readout record.

    :param values: One value per readout
    :type values: numpy.ndarray

    :param dt: Sampling period in seconds
    :type dt: float

    :param unit: ``"probability"`` or ``"counts"``
    :type unit: str
    """

    values: np.ndarray
    dt: float
    unit: UNIT_TYPE = "probability"

    def __post_init__(self: TimeSeries):
        """Validate the series."""
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("A time series is one-dimensional.")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not self.dt > 0:
            raise ValueError("dt must be positive.")
        if self.unit not in UNITS:
            raise ValueError(f'Unknown unit "{self.unit}".')

    def __len__(self: TimeSeries) -> int:
        """Return the number of samples."""
        return self.values.size

    @property
    def times(self: TimeSeries) -> np.ndarray:
        """Return the sample times ``m·dt``."""
        return np.arange(len(self)) * self.dt

    @property
    def duration(self: TimeSeries) -> float:
        """Return the record length ``n·dt``."""
        return len(self) * self.dt


def phase_step_sequence(cfg: ReadoutConfig, field: AcField) -> np.ndarray:
    """
    Return the AC phases ``α_j = φ_ac + j·ω_ac·t_L`` modulo 2π of the readouts.

    The advance is reduced to whole cycles before multiplying by ``j`` so the
    phases stay accurate for long records.
    """
    cycles = field.omega_ac * cfg.t_L / (2 * math.pi)
    fraction = cycles - math.floor(cycles)
    j = np.arange(cfg.n_readouts, dtype=float)
    return np.mod(field.phi_ac + 2 * math.pi * np.mod(j * fraction, 1.0), 2 * math.pi)


def alias_frequency(omega_ac: float, t_L: float) -> float:
    """
    Return the signed apparent frequency of the field in the readout record.

    >>> round(alias_frequency(2 * math.pi * 500.1e3, 2.0e-6), 6)
    100.0
    """
    cycles = omega_ac * t_L / (2 * math.pi)
    return (cycles - round(cycles)) / t_L


def synthesize_series(
    model: MODEL_TYPE,
    cp: CpConfig,
    field: AcField,
    cfg: ReadoutConfig,
    settings: IntegratorSettings = IntegratorSettings(),
    constants: PhysicalConstants = _DEFAULT_CONSTANTS,
) -> TimeSeries:
    """
    Return the noise-free record of ``P0`` for each readout.

    The ``"analytic"`` model evaluates the delta-pulse return probability; the
    ``"numeric"`` model integrates the Schrödinger equation for each readout
    phase (in chunks of readouts sharing one integration).

    :raises ModelDomainError: for the analytic model off resonance
    :raises IntegrationError: if the numeric integration fails
    """
    phases = phase_step_sequence(cfg, field)
    if model == "analytic":
        a = bessel_argument(cp, field, constants)
        values = return_probability(a * np.cos(phases), cp.readout_tilt_error)
    elif model == "numeric":
        schedule = build_xy8_schedule(cp)
        values = np.empty(cfg.n_readouts)
        for start in range(0, cfg.n_readouts, NUMERIC_CHUNK):
            chunk = phases[start : start + NUMERIC_CHUNK]
            amplitudes = propagate_ensemble(
                INITIAL_STATE, schedule, field, chunk, settings, constants
            )
            values[start : start + chunk.size] = readout_probability(
                amplitudes, schedule.readout
            )
            _logger.debug("numeric readouts %d..%d done", start, start + chunk.size)
    else:
        raise ValueError(f'Unknown model "{model}".')
    return TimeSeries(np.atleast_1d(values), cfg.t_L, "probability")


def mean_counts(series: TimeSeries, cfg: ReadoutConfig) -> np.ndarray:
    """Return ``µ = n_seq·t_read·(i1 + (i0 − i1)·P0)`` for each sample."""
    if series.unit != "probability":
        raise ValueError("Expected a series of probabilities.")
    mean = cfg.count_scale * (cfg.i1 + (cfg.i0 - cfg.i1) * series.values)
    if np.any(mean < 0):
        raise ModelDomainError("Negative mean photon count.")
    return mean


def to_photon_counts(
    series: TimeSeries, cfg: ReadoutConfig, noise: bool = True
) -> TimeSeries:
    """
    Convert probabilities to photon counts.

    Each count is drawn from a Poisson distribution with mean
    ``n_seq·t_read·(i1 + (i0 − i1)·P0)``. Blocks of :data:`NOISE_BLOCK`
    samples use independent Philox streams spawned from ``cfg.rng_seed``, so
    the result depends only on the seed. With ``noise=False`` the means are
    returned.

    :raises ModelDomainError: if a mean count is negative
    """
    mean = mean_counts(series, cfg)
    if not noise:
        return TimeSeries(mean, series.dt, "counts")
    counts = np.empty_like(mean)
    n_blocks = math.ceil(mean.size / NOISE_BLOCK)
    streams = np.random.SeedSequence(cfg.rng_seed).spawn(n_blocks)
    for index, stream in enumerate(streams):
        generator = np.random.Generator(np.random.Philox(stream))
        block = slice(index * NOISE_BLOCK, (index + 1) * NOISE_BLOCK)
        counts[block] = generator.poisson(mean[block])
    return TimeSeries(counts, series.dt, "counts")


def normalize_counts(series: TimeSeries, cfg: ReadoutConfig) -> TimeSeries:
    """
    Map counts back to probabilities, ``(c/(n_seq·t_read) − i1)/(i0 − i1)``.

    :raises ModelDomainError: if the two count rates are equal
    """
    if series.unit != "counts":
        raise ValueError("Expected a series of photon counts.")
    if cfg.i0 == cfg.i1:
        raise ModelDomainError("Equal count rates carry no spin contrast.")
    values = (series.values / cfg.count_scale - cfg.i1) / (cfg.i0 - cfg.i1)
    return TimeSeries(values, series.dt, "probability")
