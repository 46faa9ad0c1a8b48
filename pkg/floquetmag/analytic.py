"""Closed-form delta-pulse model of CP/XY8 sensing of an AC field."""

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
from dataclasses import dataclass
from typing import Final, Literal, Optional, TypeAlias, Union

import numpy as np

from floquetmag.core import PhysicalConstants, bessel_j
from floquetmag.errors import ConfigurationError, ModelDomainError

_logger = logging.getLogger(__name__)

PHASE_CYCLE_TYPE: TypeAlias = Literal["cp", "xy8"]
SINGULARITY_POLICY: TypeAlias = Literal["raise", "limit"]
ArrayOrFloat: TypeAlias = Union[float, np.ndarray]

X_PHASE: Final[float] = 0.0
Y_PHASE: Final[float] = math.pi / 2
XY8_PHASES: Final[tuple[float, ...]] = (
    X_PHASE,
    Y_PHASE,
    X_PHASE,
    Y_PHASE,
    Y_PHASE,
    X_PHASE,
    Y_PHASE,
    X_PHASE,
)

RESONANCE_TOLERANCE: Final[float] = 1e-9
SINGULARITY_TOLERANCE: Final[float] = 1e-6
PROBABILITY_TOLERANCE: Final[float] = 1e-12

_DEFAULT_CONSTANTS: Final = PhysicalConstants()


@dataclass(frozen=True)
class CpConfig:
    """
    Parameters of a Carr-Purcell pulse train.

    :param n_pulses: Number N of π pulses; even, and a multiple of 8 for XY8
    :type n_pulses: int

    :param tau: Interpulse delay τ in seconds
    :type tau: float

    :param t_pi: Nominal π-pulse duration in seconds; 0 means ideal delta pulses
    :type t_pi: float

    :param phase_cycle: ``"xy8"`` or ``"cp"`` (fixed phases ``phases``)
    :type phase_cycle: str

    :param phases: The phases (φ₁, φ₂) alternated by the ``"cp"`` cycle
    :type phases: tuple[float, float]

    :param pi_duration_error_fraction: Relative error of every pulse duration
    :type pi_duration_error_fraction: float

    :param readout_tilt_error: Error ε of the π/2 readout pulse, in radians
    :type readout_tilt_error: float

    :param rabi_frequency: Rabi frequency Ω in rad/s; ``None`` means π/t_pi
    :type rabi_frequency: Optional[float]
    """

    n_pulses: int
    tau: float
    t_pi: float = 0.0
    phase_cycle: PHASE_CYCLE_TYPE = "xy8"
    phases: tuple[float, float] = (0.0, 0.0)
    pi_duration_error_fraction: float = 0.0
    readout_tilt_error: float = 0.0
    rabi_frequency: Optional[float] = None

    def __post_init__(self: CpConfig):
        """Validate the configuration."""
        if self.n_pulses < 2 or self.n_pulses % 2:
            raise ConfigurationError("n_pulses must be even and at least 2.")
        if not self.tau > 0:
            raise ConfigurationError("tau must be positive.")
        if not 0 <= self.t_pi < self.tau:
            raise ConfigurationError("t_pi must satisfy 0 <= t_pi < tau.")
        if self.phase_cycle not in ("cp", "xy8"):
            raise ConfigurationError(f'Unknown phase cycle "{self.phase_cycle}".')
        if self.phase_cycle == "xy8" and self.n_pulses % 8:
            raise ConfigurationError("XY8 needs n_pulses divisible by 8.")
        if len(self.phases) != 2:
            raise ConfigurationError("phases must be a pair (phi1, phi2).")
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))
        if self.t_pi * (1 + self.pi_duration_error_fraction) >= self.tau or (
            self.pi_duration_error_fraction <= -1
        ):
            raise ConfigurationError("Pulse durations must lie in [0, tau).")
        if self.rabi_frequency is not None and not self.rabi_frequency > 0:
            raise ConfigurationError("rabi_frequency must be positive.")

    @classmethod
    def resonant(
        cls: type[CpConfig], n_pulses: int, frequency: float, **kwargs
    ) -> CpConfig:
        """Return a configuration with ``τ = 1/(2·frequency)``."""
        return cls(n_pulses=n_pulses, tau=1 / (2 * frequency), **kwargs)

    @property
    def omega(self: CpConfig) -> float:
        """Return the angular frequency π/τ the sequence is tuned to."""
        return math.pi / self.tau

    @property
    def total_duration(self: CpConfig) -> float:
        """Return the sensing time Nτ."""
        return self.n_pulses * self.tau

    @property
    def pulse_duration(self: CpConfig) -> float:
        """Return the actual duration t_π(1 + error) of each π pulse."""
        return self.t_pi * (1 + self.pi_duration_error_fraction)

    @property
    def nominal_rabi_frequency(self: CpConfig) -> float:
        """Return the Rabi frequency used for finite pulses."""
        if self.rabi_frequency is not None:
            return self.rabi_frequency
        if self.t_pi == 0:
            return math.inf
        return math.pi / self.t_pi

    def pulse_phases(self: CpConfig) -> list[float]:
        """Return the phase of each of the N π pulses."""
        if self.phase_cycle == "xy8":
            return list(XY8_PHASES) * (self.n_pulses // 8)
        return list(self.phases) * (self.n_pulses // 2)


@dataclass(frozen=True)
class AcField:
    """
    The sensed field ``b_ac·cos(ω_ac·t + φ_ac)``.

    :param b_ac: Amplitude in tesla
    :type b_ac: float

    :param omega_ac: Angular frequency in rad/s
    :type omega_ac: float

    :param phi_ac: Phase in radians
    :type phi_ac: float
    """

    b_ac: float
    omega_ac: float
    phi_ac: float = 0.0

    def __post_init__(self: AcField):
        """Validate the field."""
        if self.b_ac < 0:
            raise ConfigurationError("b_ac must be non-negative.")
        if not self.omega_ac > 0:
            raise ConfigurationError("omega_ac must be positive.")

    @classmethod
    def from_frequency(
        cls: type[AcField], b_ac: float, frequency: float, phi_ac: float = 0.0
    ) -> AcField:
        """Create a field from its frequency in Hz."""
        return cls(b_ac, 2 * math.pi * frequency, phi_ac)

    @property
    def frequency(self: AcField) -> float:
        """Return the frequency in Hz."""
        return self.omega_ac / (2 * math.pi)

    def with_phase(self: AcField, phi_ac: float) -> AcField:
        """Return a copy with another phase."""
        return AcField(self.b_ac, self.omega_ac, phi_ac)

    def with_amplitude(self: AcField, b_ac: float) -> AcField:
        """Return a copy with another amplitude."""
        return AcField(b_ac, self.omega_ac, self.phi_ac)

    def detuning(
        self: AcField,
        t: ArrayOrFloat,
        constants: PhysicalConstants = _DEFAULT_CONSTANTS,
    ) -> ArrayOrFloat:
        """Return ``f(t) = γ·b_ac·cos(ω_ac·t + φ_ac)`` in rad/s."""
        return constants.gamma * self.b_ac * np.cos(self.omega_ac * t + self.phi_ac)


@dataclass(frozen=True)
class FourierField:
    """
    A field ``f(t) = a0 + Σ_k a_k cos(kωt) + b_k sin(kωt)`` in rad/s.

    ``cos_coeffs[k − 1]`` is ``a_k`` and ``sin_coeffs[k − 1]`` is ``b_k``.
    """

    a0: float
    cos_coeffs: tuple[float, ...]
    sin_coeffs: tuple[float, ...]
    base_omega: float

    def __post_init__(self: FourierField):
        """Validate the coefficients."""
        object.__setattr__(self, "cos_coeffs", tuple(float(a) for a in self.cos_coeffs))
        object.__setattr__(self, "sin_coeffs", tuple(float(b) for b in self.sin_coeffs))
        if not self.base_omega > 0:
            raise ConfigurationError("base_omega must be positive.")
        coefficients = (self.a0,) + self.cos_coeffs + self.sin_coeffs
        if not all(math.isfinite(c) for c in coefficients):
            raise ConfigurationError("Fourier coefficients must be finite.")

    @classmethod
    def from_ac_field(
        cls: type[FourierField],
        ac: AcField,
        constants: PhysicalConstants = _DEFAULT_CONSTANTS,
    ) -> FourierField:
        """Return the single-harmonic series of an :class:`AcField`."""
        amplitude = constants.gamma * ac.b_ac
        return cls(
            0.0,
            (amplitude * math.cos(ac.phi_ac),),
            (-amplitude * math.sin(ac.phi_ac),),
            ac.omega_ac,
        )

    def value(self: FourierField, t: ArrayOrFloat) -> ArrayOrFloat:
        """Evaluate the field at ``t``."""
        total = self.a0 + 0 * np.asarray(t, dtype=float)
        for k, a_k in enumerate(self.cos_coeffs, start=1):
            total = total + a_k * np.cos(k * self.base_omega * t)
        for k, b_k in enumerate(self.sin_coeffs, start=1):
            total = total + b_k * np.sin(k * self.base_omega * t)
        return float(total) if np.ndim(total) == 0 else total

    def shifted(self: FourierField, t_shift: float) -> FourierField:
        """Return the series of ``t ↦ f(t + t_shift)``."""
        cos_coeffs = []
        sin_coeffs = []
        n_terms = max(len(self.cos_coeffs), len(self.sin_coeffs))
        for k in range(1, n_terms + 1):
            a_k = self.cos_coeffs[k - 1] if k <= len(self.cos_coeffs) else 0.0
            b_k = self.sin_coeffs[k - 1] if k <= len(self.sin_coeffs) else 0.0
            angle = k * self.base_omega * t_shift
            cos_coeffs.append(a_k * math.cos(angle) + b_k * math.sin(angle))
            sin_coeffs.append(b_k * math.cos(angle) - a_k * math.sin(angle))
        return FourierField(
            self.a0, tuple(cos_coeffs), tuple(sin_coeffs), self.base_omega
        )


def modulation_function(t: ArrayOrFloat, tau: float) -> ArrayOrFloat:
    """
    Return the toggling-frame sign h(t) of the CP sequence.

    ``h = −1`` on ``[0, τ/2)`` and ``[3τ/2, 2τ)``, ``+1`` on ``[τ/2, 3τ/2)``,
    repeated with period 2τ. At a switching instant the value of the
    interval starting there is returned.

    >>> modulation_function(0.25, 1.0), modulation_function(1.0, 1.0)
    (-1.0, 1.0)
    """
    phase = np.mod(np.asarray(t, dtype=float), 2 * tau)
    value = np.where((phase >= tau / 2) & (phase < 1.5 * tau), 1.0, -1.0)
    return float(value) if value.ndim == 0 else value


def modulation_fourier_sum(t: ArrayOrFloat, tau: float, n_terms: int) -> ArrayOrFloat:
    """
    Return the partial Fourier series of :func:`modulation_function`.

    The series ``Σ_j 4(−1)^j/(π(2j+1))·cos((2j+1)ω(t − τ))`` with ``ω = π/τ``
    is summed over ``j < n_terms``.
    """
    omega = math.pi / tau
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    for j in range(n_terms):
        order = 2 * j + 1
        total = total + 4 * (-1) ** j / (math.pi * order) * np.cos(
            order * omega * (t - tau)
        )
    return float(total) if total.ndim == 0 else total


def phase_per_cycle(field: FourierField) -> float:
    """
    Return the phase φ_u that one CP cycle of duration 2τ accumulates.

    Only the odd cosine coefficients contribute:
    ``φ_u = Σ_j a_{2j+1}·2(−1)^j/((2j+1)ω)``. With the sign conventions of
    :func:`modulation_function` this equals ``−½∫₀^{2τ} h(t)f(t) dt``.
    """
    total = 0.0
    for index in range(0, len(field.cos_coeffs), 2):
        j = index // 2
        order = 2 * j + 1
        total += field.cos_coeffs[index] * 2 * (-1) ** j / (order * field.base_omega)
    return total


def sequential_acquired_phase(
    field: FourierField, n_pulses: int, t_m: ArrayOrFloat
) -> ArrayOrFloat:
    """
    Return the phase accumulated by a sensing block that starts at ``t_m``.

    This is ``N·φ_u`` of the field shifted by ``t_m``, for each ``t_m``.
    """
    t_m = np.asarray(t_m, dtype=float)
    total = np.zeros_like(t_m)
    omega = field.base_omega
    n_terms = max(len(field.cos_coeffs), len(field.sin_coeffs))
    for index in range(0, n_terms, 2):
        j = index // 2
        order = 2 * j + 1
        a_k = field.cos_coeffs[index] if index < len(field.cos_coeffs) else 0.0
        b_k = field.sin_coeffs[index] if index < len(field.sin_coeffs) else 0.0
        weight = 2 * n_pulses * (-1) ** j / (order * omega)
        total = total + weight * (
            a_k * np.cos(order * omega * t_m) + b_k * np.sin(order * omega * t_m)
        )
    return float(total) if total.ndim == 0 else total


def _check_resonance(cp: CpConfig, ac: AcField) -> None:
    """Raise :class:`ModelDomainError` unless ``ω_ac = π/τ``."""
    if abs(ac.omega_ac - cp.omega) > RESONANCE_TOLERANCE * cp.omega:
        raise ModelDomainError(
            f"The analytic model needs omega_ac = pi/tau = {cp.omega:.9e} rad/s, "
            f"got {ac.omega_ac:.9e} rad/s."
        )


def bessel_argument(
    cp: CpConfig, ac: AcField, constants: PhysicalConstants = _DEFAULT_CONSTANTS
) -> float:
    """
    Return ``a = 2Nγb_ac/ω_ac``, the argument of the harmonic Bessel law.

    :raises ModelDomainError: if the field is not resonant with the sequence
    """
    _check_resonance(cp, ac)
    return 2 * cp.n_pulses * constants.gamma * ac.b_ac / ac.omega_ac


def acquired_phase(
    cp: CpConfig, ac: AcField, constants: PhysicalConstants = _DEFAULT_CONSTANTS
) -> float:
    """
    Return the net phase ``φ_acq = 2N(γb_ac/ω_ac)·cos(φ_ac)`` of one sensing block.

    Pulses are treated as instantaneous.

    :raises ModelDomainError: if the field is not resonant with the sequence
    """
    return bessel_argument(cp, ac, constants) * math.cos(ac.phi_ac)


def return_probability(
    phi_acq: ArrayOrFloat, readout_tilt_error: float = 0.0
) -> ArrayOrFloat:
    """
    Return ``P0 = (1 + sin φ − ε·cos φ)/2``.

    Results outside [0, 1] by less than 1e−12 are clamped.

    :raises ModelDomainError: if a larger ``ε`` pushes ``P0`` outside [0, 1]

    >>> return_probability(0.0, 0.1)
    0.45
    """
    phi = np.asarray(phi_acq, dtype=float)
    p0 = (1 + np.sin(phi) - readout_tilt_error * np.cos(phi)) / 2
    if np.any(p0 < -PROBABILITY_TOLERANCE) or np.any(p0 > 1 + PROBABILITY_TOLERANCE):
        raise ModelDomainError(
            f"Readout error {readout_tilt_error} gives probabilities outside [0, 1]."
        )
    p0 = np.clip(p0, 0.0, 1.0)
    return float(p0) if p0.ndim == 0 else p0


def _signed_harmonic(k: int, a: float, readout_tilt_error: float) -> float:
    """Return the coefficient of ``cos(kα)`` in ``P0(α)``."""
    if k % 2:
        return (-1) ** ((k - 1) // 2) * bessel_j(k, a)
    return -readout_tilt_error * (-1) ** (k // 2) * bessel_j(k, a)


def harmonic_amplitude(
    k: int, cp: CpConfig, ac: AcField, constants: PhysicalConstants = _DEFAULT_CONSTANTS
) -> float:
    """
    Return the DFT amplitude ``A_k`` of the k-th harmonic of the readout record.

    ``A_k = J_k(a)`` for odd ``k`` and ``ε·J_k(a)`` for even ``k``, with
    ``a = 2Nγb_ac/ω_ac`` and ``ε`` the readout error of ``cp``.

    :raises ModelDomainError: if the field is not resonant with the sequence
    """
    if k < 1:
        raise ValueError("Harmonic order must be a positive integer.")
    a = bessel_argument(cp, ac, constants)
    if k % 2:
        return bessel_j(k, a)
    if cp.readout_tilt_error == 0:
        return 0.0
    return cp.readout_tilt_error * bessel_j(k, a)


def harmonic_phase(
    k: int, cp: CpConfig, ac: AcField, constants: PhysicalConstants = _DEFAULT_CONSTANTS
) -> float:
    """
    Return the phase in [0, 2π) of the k-th harmonic ``cos(kα + φ_k)`` of P0.

    ``φ_k = k·φ_ac``, plus π where the signed coefficient of ``cos(kα)`` is
    negative. For odd k this equals ``k(φ_ac + π/2) − π/2`` plus π where
    ``J_k(a) < 0``, modulo 2π.
    """
    a = bessel_argument(cp, ac, constants)
    coefficient = _signed_harmonic(k, a, cp.readout_tilt_error)
    phase = k * ac.phi_ac + (math.pi if coefficient < 0 else 0.0)
    return phase % (2 * math.pi)


def small_amplitude_threshold(
    cp: CpConfig, constants: PhysicalConstants = _DEFAULT_CONSTANTS
) -> float:
    """Return the field amplitude ``(π/2)·ω/(2Nγ)`` at which ``φ_acq = π/2``."""
    return (math.pi / 2) * cp.omega / (2 * cp.n_pulses * constants.gamma)


def filter_weight(
    tau: float,
    n_pulses: int,
    omega_ac: float,
    at_singularity: SINGULARITY_POLICY = "raise",
) -> float:
    """
    Return the lock-in filter weight W_a of a τ sweep.

    ``W_a = [sin(ωNτ/2)/(ωNτ/2)]·[1 − 1/cos(ωτ/2)]``. At
    ``τ = (2m+1)π/ω`` the expression is singular; for even N the singularity
    is removable with ``|W_a| = 2/(π(2m+1))``, which is returned (as a
    magnitude) when ``at_singularity`` is ``"limit"``.

    :raises ModelDomainError: within 1e−6 relative of a singular τ, unless the
        limit is requested and N is even
    """
    if not tau > 0:
        raise ValueError("tau must be positive.")
    m = round((omega_ac * tau / math.pi - 1) / 2)
    if m >= 0:
        tau_singular = (2 * m + 1) * math.pi / omega_ac
        if abs(tau - tau_singular) <= SINGULARITY_TOLERANCE * tau_singular:
            if at_singularity == "limit" and n_pulses % 2 == 0:
                return 2 / (math.pi * (2 * m + 1))
            raise ModelDomainError(
                f"tau = {tau:.9e} s is at a singularity of the filter weight."
            )
    x = omega_ac * n_pulses * tau / 2
    return math.sin(x) / x * (1 - 1 / math.cos(omega_ac * tau / 2))


def tau_sweep_model(
    tau: float,
    n_pulses: int,
    b_ac: float,
    omega_ac: float,
    gamma: float = _DEFAULT_CONSTANTS.gamma,
    at_singularity: SINGULARITY_POLICY = "raise",
) -> float:
    """Return ``½(1 − J_0(|W_a|·γ·b_ac·N·τ))`` for a random-phase field."""
    weight = filter_weight(tau, n_pulses, omega_ac, at_singularity)
    return (1 - bessel_j(0, abs(weight) * gamma * b_ac * n_pulses * tau)) / 2


def tau_sweep_probability(
    tau: float,
    cp: CpConfig,
    ac: AcField,
    constants: PhysicalConstants = _DEFAULT_CONSTANTS,
    at_singularity: SINGULARITY_POLICY = "raise",
) -> float:
    """
    Return the phase-averaged return probability of a τ sweep.

    The number of pulses comes from ``cp`` and the field from ``ac``; the
    delay of ``cp`` is replaced by ``tau``.
    """
    return tau_sweep_model(
        tau, cp.n_pulses, ac.b_ac, ac.omega_ac, constants.gamma, at_singularity
    )


def harmonic_amplitudes(
    orders: Sequence[int],
    cp: CpConfig,
    ac: AcField,
    constants: PhysicalConstants = _DEFAULT_CONSTANTS,
) -> list[float]:
    """Return :func:`harmonic_amplitude` for each order."""
    return [harmonic_amplitude(k, cp, ac, constants) for k in orders]
