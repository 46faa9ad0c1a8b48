"""Time-domain integration of the pulse-driven two-level system."""

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

import bisect
import cmath
import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field as dataclass_field
from typing import Final, Optional, Union

import numpy as np
from scipy.integrate import solve_ivp

from floquetmag.analytic import AcField, ArrayOrFloat, CpConfig, modulation_function
from floquetmag.core import PhysicalConstants, SpinState, Unitary2, apply
from floquetmag.errors import ConfigurationError, IntegrationError

_logger = logging.getLogger(__name__)

_DEFAULT_CONSTANTS: Final = PhysicalConstants()

READOUT_PHASE: Final[float] = math.pi / 2
READOUT_ANGLE: Final[float] = math.pi / 2
MAX_STEP_FRACTION: Final[float] = 1 / 20

INITIAL_STATE: Final[SpinState] = SpinState(1 / math.sqrt(2), -1j / math.sqrt(2))
"""The state ``(|0⟩ − i|1⟩)/√2`` prepared before the pulse train."""


@dataclass(frozen=True)
class PulseEvent:
    """
    A rectangular microwave pulse.

    :param start: Start time in seconds
    :type start: float

    :param duration: Duration in seconds; 0 makes an instantaneous rotation
    :type duration: float

    :param phase: Pulse phase φ in radians
    :type phase: float

    :param rabi_freq: Rabi frequency Ω in rad/s
    :type rabi_freq: float

    :param angle: Rotation angle of an instantaneous pulse
    :type angle: float
    """

    start: float
    duration: float
    phase: float
    rabi_freq: float
    angle: float = math.pi

    def __post_init__(self: PulseEvent):
        """Validate the pulse."""
        if self.duration < 0:
            raise ConfigurationError("Pulse duration must be non-negative.")
        if self.duration > 0 and not (0 < self.rabi_freq < math.inf):
            raise ConfigurationError("A finite pulse needs a finite Rabi frequency.")

    @property
    def end(self: PulseEvent) -> float:
        """Return the end time."""
        return self.start + self.duration

    @property
    def instantaneous(self: PulseEvent) -> bool:
        """Return whether the pulse is a delta pulse."""
        return self.duration == 0

    @property
    def rotation_angle(self: PulseEvent) -> float:
        """Return the rotation angle produced without a detuning."""
        if self.instantaneous:
            return self.angle
        return self.rabi_freq * self.duration

    def unitary(self: PulseEvent) -> Unitary2:
        """Return the rotation of the pulse without a detuning."""
        return Unitary2.rotation(self.phase, self.rotation_angle)


@dataclass(frozen=True)
class ReadoutPulse:
    """The final π/2 pulse that maps the phase onto the ``|0⟩`` population."""

    phase: float = READOUT_PHASE
    angle: float = READOUT_ANGLE

    def unitary(self: ReadoutPulse) -> Unitary2:
        """Return the rotation of the pulse."""
        return Unitary2.rotation(self.phase, self.angle)


@dataclass(frozen=True)
class IntegratorSettings:
    """
    Settings of the adaptive Runge-Kutta 5(4) integrator.

    :param rel_tol: Relative tolerance
    :type rel_tol: float

    :param abs_tol: Absolute tolerance
    :type abs_tol: float

    :param max_step: Largest step in seconds; it is clamped to τ/20
    :type max_step: Optional[float]

    :param initial_step: First step in seconds, or ``None`` to let the
        integrator choose
    :type initial_step: Optional[float]
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: Optional[float] = None
    initial_step: Optional[float] = None

    def __post_init__(self: IntegratorSettings):
        """Validate the settings."""
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigurationError("Tolerances must be positive.")
        for name in ("max_step", "initial_step"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigurationError(f"{name} must be positive.")

    def step_limit(self: IntegratorSettings, tau: float) -> float:
        """Return the largest step allowed for a sequence with delay ``tau``."""
        limit = MAX_STEP_FRACTION * tau
        if self.max_step is None:
            return limit
        if self.max_step > limit:
            _logger.debug(
                "max_step %.3e s clamped to tau/20 = %.3e s", self.max_step, limit
            )
            return limit
        return self.max_step


@dataclass(frozen=True)
class Schedule:
    """
    A time-ordered pulse train followed by a readout pulse.

    :param events: The pulses, sorted by start time and non-overlapping
    :type events: tuple[PulseEvent, ...]

    :param total_duration: Sensing time in seconds
    :type total_duration: float

    :param tau: Interpulse delay in seconds, used to bound the step size
    :type tau: float

    :param readout: The final π/2 pulse
    :type readout: ReadoutPulse
    """

    events: tuple[PulseEvent, ...]
    total_duration: float
    tau: float
    readout: ReadoutPulse = dataclass_field(default_factory=ReadoutPulse)

    def __post_init__(self: Schedule):
        """Check ordering and overlap."""
        object.__setattr__(self, "events", tuple(self.events))
        previous_end = 0.0
        for event in self.events:
            if event.start < previous_end:
                raise ConfigurationError("Pulses overlap or are not time-ordered.")
            previous_end = event.end
        if previous_end > self.total_duration:
            raise ConfigurationError("The last pulse ends after the sequence.")
        object.__setattr__(self, "_starts", [event.start for event in self.events])

    def event_at(self: Schedule, t: float) -> Optional[PulseEvent]:
        """Return the finite pulse active at time ``t``, if any."""
        index = bisect.bisect_right(self._starts, t) - 1  # type: ignore[attr-defined]
        if index < 0:
            return None
        event = self.events[index]
        if event.start <= t < event.end:
            return event
        return None


@dataclass(frozen=True)
class FloquetModes:
    """The two Floquet modes of the delta-pulse CP sequence at one instant."""

    mode0: SpinState
    mode1: SpinState
    quasienergies: tuple[float, float] = (0.0, 0.0)


def build_xy8_schedule(cp: CpConfig) -> Schedule:
    """
    Build the pulse schedule of ``cp``.

    Pulses are centred at ``τ/2 + mτ`` and last ``t_π(1 + error)`` at the
    nominal Rabi frequency ``π/t_π``, so a duration error is an over- or
    under-rotation. With ``t_π = 0`` the pulses are instantaneous rotations
    by ``π(1 + error)``. Phases follow XY8 (X-Y-X-Y-Y-X-Y-X) or the fixed
    phases of the ``"cp"`` cycle. The readout pulse has phase ``π/2 − ε``.

    :param cp: The sequence parameters
    :type cp: CpConfig

    :rtype: Schedule
    """
    duration = cp.pulse_duration
    rabi = cp.nominal_rabi_frequency
    angle = math.pi * (1 + cp.pi_duration_error_fraction)
    events = []
    for m, phase in enumerate(cp.pulse_phases()):
        centre = cp.tau / 2 + m * cp.tau
        events.append(
            PulseEvent(
                start=centre - duration / 2,
                duration=duration,
                phase=phase,
                rabi_freq=rabi if duration > 0 else math.inf,
                angle=angle,
            )
        )
    readout = ReadoutPulse(phase=READOUT_PHASE - cp.readout_tilt_error)
    return Schedule(tuple(events), cp.total_duration, cp.tau, readout)


def hamiltonian_at(
    t: float,
    schedule: Schedule,
    field: AcField,
    constants: PhysicalConstants = _DEFAULT_CONSTANTS,
) -> np.ndarray:
    """
    Return the Hamiltonian ``Ω·S(φ) + f(t)|1⟩⟨1|`` at time ``t``, in rad/s.

    The pulse term is present only while a finite pulse is on.
    """
    hamiltonian = np.zeros((2, 2), dtype=complex)
    hamiltonian[1, 1] = field.detuning(t, constants)
    event = schedule.event_at(t)
    if event is not None:
        hamiltonian[0, 1] = event.rabi_freq / 2 * cmath.exp(-1j * event.phase)
        hamiltonian[1, 0] = event.rabi_freq / 2 * cmath.exp(1j * event.phase)
    return hamiltonian


def _segments(
    schedule: Schedule, t_end: float
) -> Iterator[tuple[float, float, Optional[PulseEvent]]]:
    """Yield ``(t0, t1, pulse or None)`` pieces covering ``[0, t_end]``."""
    now = 0.0
    for event in schedule.events:
        if event.start >= t_end:
            break
        if event.start > now:
            yield now, event.start, None
        if event.instantaneous:
            yield event.start, event.start, event
            now = event.start
        else:
            stop = min(event.end, t_end)
            yield event.start, stop, event
            now = stop
    if now < t_end:
        yield now, t_end, None


def _free_evolution(
    c1: np.ndarray,
    t0: float,
    t1: float,
    amplitude: float,
    omega: float,
    phases: np.ndarray,
) -> np.ndarray:
    """Evolve ``c1`` exactly under ``f(t)|1⟩⟨1|`` from ``t0`` to ``t1``."""
    if amplitude == 0:
        return c1
    integral = (amplitude / omega) * (
        np.sin(omega * t1 + phases) - np.sin(omega * t0 + phases)
    )
    return c1 * np.exp(-1j * integral)


def _integrate_pulse(
    c0: np.ndarray,
    c1: np.ndarray,
    t0: float,
    t1: float,
    event: PulseEvent,
    amplitude: float,
    omega: float,
    phases: np.ndarray,
    settings: IntegratorSettings,
    max_step: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the Schrödinger equation over a finite pulse with RK45."""
    size = c0.size
    coupling = event.rabi_freq / 2
    lower = coupling * cmath.exp(1j * event.phase)
    upper = coupling * cmath.exp(-1j * event.phase)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        amp0 = y[:size]
        amp1 = y[size:]
        detuning = amplitude * np.cos(omega * t + phases)
        return np.concatenate(
            (-1j * upper * amp1, -1j * (lower * amp0 + detuning * amp1))
        )

    options = {}
    if settings.initial_step is not None:
        options["first_step"] = min(settings.initial_step, abs(t1 - t0))
    solution = solve_ivp(
        rhs,
        (t0, t1),
        np.concatenate((c0, c1)),
        method="RK45",
        rtol=settings.rel_tol,
        atol=settings.abs_tol,
        max_step=max_step,
        **options,
    )
    if solution.status < 0 or not solution.success:
        raise IntegrationError(solution.message, time=float(solution.t[-1]))
    _logger.debug(
        "pulse segment [%.6e, %.6e] s: %d right-hand side evaluations",
        t0,
        t1,
        solution.nfev,
    )
    y = solution.y[:, -1]
    return y[:size], y[size:]


def propagate_ensemble(
    initial: Union[SpinState, np.ndarray],
    schedule: Schedule,
    field: AcField,
    phases: Optional[Sequence[float]] = None,
    settings: IntegratorSettings = IntegratorSettings(),
    constants: PhysicalConstants = _DEFAULT_CONSTANTS,
    backward: bool = False,
    t_final: Optional[float] = None,
) -> np.ndarray:
    """
    Propagate many copies of the system that differ only in the AC phase.

    Each finite pulse is integrated once for all copies. Between pulses the
    Hamiltonian is diagonal and the exact solution is used. The readout pulse
    is not applied.

    :param initial: A state, or a ``(2, M)`` array of M initial amplitudes
    :type initial: SpinState or numpy.ndarray

    :param schedule: The pulse schedule
    :type schedule: Schedule

    :param field: The AC field; its phase is replaced by each of ``phases``
    :type field: AcField

    :param phases: The AC phases, one per copy; ``None`` uses ``field.phi_ac``
    :type phases: Optional[Sequence[float]]

    :param settings: Integrator settings
    :type settings: IntegratorSettings

    :param constants: Physical constants
    :type constants: PhysicalConstants

    :param backward: Integrate from the end time back to 0, applying ``U†``
    :type backward: bool

    :param t_final: Stop at this time instead of the end of the sequence
    :type t_final: Optional[float]

    :returns: A ``(2, M)`` array of final amplitudes (not renormalized)
    :rtype: numpy.ndarray

    :raises IntegrationError: if the integrator fails
    """
    phase_array = np.atleast_1d(
        np.asarray([field.phi_ac] if phases is None else phases, dtype=float)
    )
    size = phase_array.size
    if isinstance(initial, SpinState):
        state = np.repeat(initial.as_array()[:, np.newaxis], size, axis=1)
    else:
        state = np.array(initial, dtype=complex).reshape(2, -1)
        if state.shape[1] == 1 and size > 1:
            state = np.repeat(state, size, axis=1)
        elif state.shape[1] != size:
            raise ValueError("Need one initial state per phase.")

    t_end = schedule.total_duration if t_final is None else t_final
    if not 0 <= t_end <= schedule.total_duration:
        raise ValueError("t_final must lie within the sequence.")
    amplitude = constants.gamma * field.b_ac
    omega = field.omega_ac
    max_step = settings.step_limit(schedule.tau)
    segments = list(_segments(schedule, t_end))
    if backward:
        segments = [(t1, t0, event) for t0, t1, event in reversed(segments)]

    c0, c1 = state[0].copy(), state[1].copy()
    for t0, t1, event in segments:
        if event is None:
            c1 = _free_evolution(c1, t0, t1, amplitude, omega, phase_array)
        elif event.instantaneous:
            rotation = event.unitary()
            if backward:
                rotation = rotation.adjoint()
            c0, c1 = (
                rotation.u00 * c0 + rotation.u01 * c1,
                rotation.u10 * c0 + rotation.u11 * c1,
            )
        elif t0 != t1:
            c0, c1 = _integrate_pulse(
                c0, c1, t0, t1, event, amplitude, omega, phase_array, settings, max_step
            )
    result = np.vstack((c0, c1))
    drift = float(np.max(np.abs(np.sum(np.abs(result) ** 2, axis=0) - 1)))
    if drift > 10 * settings.rel_tol:
        _logger.warning("norm drift %.3e exceeds 10*rel_tol", drift)
    return result


def propagate(
    initial: SpinState,
    schedule: Schedule,
    field: AcField,
    settings: IntegratorSettings = IntegratorSettings(),
    constants: PhysicalConstants = _DEFAULT_CONSTANTS,
    backward: bool = False,
    t_final: Optional[float] = None,
) -> SpinState:
    """
    Solve ``i d|ψ⟩/dt = H(t)|ψ⟩`` over the schedule, without the readout pulse.

    See :func:`propagate_ensemble` for the parameters.

    :raises IntegrationError: if the integrator fails
    """
    amplitudes = propagate_ensemble(
        initial, schedule, field, None, settings, constants, backward, t_final
    )
    return SpinState.normalized(complex(amplitudes[0, 0]), complex(amplitudes[1, 0]))


def effective_propagator(
    schedule: Schedule,
    field: AcField,
    settings: IntegratorSettings = IntegratorSettings(),
    constants: PhysicalConstants = _DEFAULT_CONSTANTS,
) -> Unitary2:
    """Return the propagator of the schedule, built column by column."""
    columns = propagate_ensemble(
        np.eye(2, dtype=complex),
        schedule,
        field,
        [field.phi_ac, field.phi_ac],
        settings,
        constants,
    )
    return Unitary2.from_array(columns)


def readout_probability(amplitudes: np.ndarray, readout: ReadoutPulse) -> np.ndarray:
    """Apply the readout pulse to ``(2, M)`` amplitudes; return ``|⟨0|ψ⟩|²``."""
    rotation = readout.unitary()
    amp0 = rotation.u00 * amplitudes[0] + rotation.u01 * amplitudes[1]
    norms = np.sum(np.abs(amplitudes) ** 2, axis=0)
    return np.clip(np.abs(amp0) ** 2 / norms, 0.0, 1.0)


def run_measurement(
    cp: CpConfig,
    field: AcField,
    settings: IntegratorSettings = IntegratorSettings(),
    constants: PhysicalConstants = _DEFAULT_CONSTANTS,
) -> float:
    """
    Return the probability of reading ``|0⟩`` after one sensing block.

    The system starts in ``(|0⟩ − i|1⟩)/√2``, evolves under the pulse train
    of ``cp`` and the field, and is read out with a π/2 pulse at phase
    ``π/2 − ε``.

    :raises IntegrationError: if the integrator fails
    """
    schedule = build_xy8_schedule(cp)
    amplitudes = propagate_ensemble(
        INITIAL_STATE, schedule, field, None, settings, constants
    )
    return float(readout_probability(amplitudes, schedule.readout)[0])


def cp_cycle_state(
    t: float, tau: float, t_pi: float, phi1: float, phi2: float
) -> SpinState:
    """
    Return the field-free state at time ``t`` of one CP cycle started in ``|0⟩``.

    The cycle has pulses with phases φ₁ and φ₂ centred at ``τ/2`` and
    ``3τ/2``, each rotating by π in ``t_pi``.
    """
    if not 0 <= t <= 2 * tau:
        raise ValueError("t must lie within one cycle [0, 2*tau].")
    state = SpinState.basis(0)
    for centre, phase in ((tau / 2, phi1), (3 * tau / 2, phi2)):
        start = centre - t_pi / 2
        if t < start or (t_pi == 0 and t < centre):
            break
        if t_pi > 0 and t < start + t_pi:
            return apply(Unitary2.rotation(phase, math.pi * (t - start) / t_pi), state)
        state = apply(Unitary2.rotation(phase, math.pi), state)
    return state


def floquet_mode_at(t: float, tau: float) -> FloquetModes:
    """
    Return the Floquet modes of the delta-pulse CP sequence at time ``t``.

    ``Φ₀ = ((1 − h)/2)|0⟩ + ((1 + h)/2)|1⟩`` and ``Φ₁`` is its swap; both
    have quasienergy 0.
    """
    h = modulation_function(t, tau)
    mode0 = SpinState((1 - h) / 2, (1 + h) / 2)
    mode1 = SpinState((1 + h) / 2, (1 - h) / 2)
    return FloquetModes(mode0, mode1)


def precession_frequencies(
    t: ArrayOrFloat,
    tau: float,
    field: AcField,
    constants: PhysicalConstants = _DEFAULT_CONSTANTS,
) -> tuple[ArrayOrFloat, ArrayOrFloat]:
    """Return the mode precession frequencies ``(ξ₀, ξ₁) = f(t)(1 ± h)/2``."""
    h = modulation_function(t, tau)
    detuning = field.detuning(t, constants)
    return detuning * (1 + h) / 2, detuning * (1 - h) / 2
