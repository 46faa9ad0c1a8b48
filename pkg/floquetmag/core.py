"""Spin states, 2x2 unitaries and Bessel functions of the first kind."""

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

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Final

import numpy as np

from floquetmag.errors import OrderRangeError

_logger = logging.getLogger(__name__)

GAMMA_NV: Final[float] = 2 * math.pi * 28e9
"""Gyromagnetic ratio of the NV electron spin, in rad/(s·T)."""

MAX_BESSEL_ORDER: Final[int] = 300
UNDERFLOW_FLUSH: Final[float] = 1e-290
NORM_TOLERANCE: Final[float] = 1e-9
UNITARY_TOLERANCE: Final[float] = 1e-9

_MILLER_MARGIN: Final[int] = 50
_RESCALE_LIMIT: Final[float] = 1e250


@dataclass(frozen=True)
class PhysicalConstants:
    """
    Physical constants used by the models.

    :param gamma: Gyromagnetic ratio in rad/(s·T)
    :type gamma: float
    """

    gamma: float = GAMMA_NV


@dataclass(frozen=True)
class SpinState:
    """
    A normalized state ``amp0|0⟩ + amp1|1⟩`` of the two-level system.

    :param amp0: Amplitude of ``|0⟩``
    :type amp0: complex

    :param amp1: Amplitude of ``|1⟩``
    :type amp1: complex

    Construction fails with :class:`ValueError` when the norm differs from one
    by more than :data:`NORM_TOLERANCE`; use :meth:`normalized` to build a
    state from unnormalized amplitudes.
    """

    amp0: complex
    amp1: complex

    def __post_init__(self: SpinState):
        """Check normalization."""
        object.__setattr__(self, "amp0", complex(self.amp0))
        object.__setattr__(self, "amp1", complex(self.amp1))
        if abs(self.norm - 1.0) > NORM_TOLERANCE:
            raise ValueError(f"State is not normalized (norm {self.norm!r}).")

    @classmethod
    def normalized(cls: type[SpinState], amp0: complex, amp1: complex) -> SpinState:
        """Create a state from amplitudes after dividing by their norm."""
        norm = math.hypot(abs(amp0), abs(amp1))
        if norm == 0:
            raise ValueError("The zero vector is not a state.")
        return cls(amp0 / norm, amp1 / norm)

    @classmethod
    def basis(cls: type[SpinState], index: int) -> SpinState:
        """Return ``|0⟩`` or ``|1⟩``."""
        if index == 0:
            return cls(1.0, 0.0)
        if index == 1:
            return cls(0.0, 1.0)
        raise ValueError("A two-level system only has basis states 0 and 1.")

    @property
    def norm(self: SpinState) -> float:
        """Return ``sqrt(|amp0|² + |amp1|²)``."""
        return math.hypot(abs(self.amp0), abs(self.amp1))

    @property
    def probabilities(self: SpinState) -> tuple[float, float]:
        """Return ``(|amp0|², |amp1|²)``."""
        return abs(self.amp0) ** 2, abs(self.amp1) ** 2

    def as_array(self: SpinState) -> np.ndarray:
        """Return the amplitudes as a complex numpy vector."""
        return np.array([self.amp0, self.amp1], dtype=complex)

    def phase_normalized(self: SpinState) -> SpinState:
        """
        Remove the global phase.

        The larger-magnitude amplitude is made real and positive.
        """
        lead = self.amp0 if abs(self.amp0) >= abs(self.amp1) else self.amp1
        rotation = abs(lead) / lead
        return SpinState(self.amp0 * rotation, self.amp1 * rotation)

    def equal_up_to_global_phase(
        self: SpinState, other: SpinState, tol: float = 1e-12
    ) -> bool:
        """Compare two states modulo a global phase factor."""
        overlap = (
            self.amp0.conjugate() * other.amp0 + self.amp1.conjugate() * other.amp1
        )
        return 1.0 - abs(overlap) <= tol


@dataclass(frozen=True)
class Unitary2:
    """
    A 2x2 unitary matrix ``[[u00, u01], [u10, u11]]``.

    Construction fails with :class:`ValueError` when ``U†U`` differs from the
    identity by more than :data:`UNITARY_TOLERANCE` in any entry.
    """

    u00: complex
    u01: complex
    u10: complex
    u11: complex

    def __post_init__(self: Unitary2):
        """Check unitarity."""
        for name in ("u00", "u01", "u10", "u11"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        if not self.is_unitary(UNITARY_TOLERANCE):
            raise ValueError("Matrix is not unitary.")

    @classmethod
    def identity(cls: type[Unitary2]) -> Unitary2:
        """Return the identity."""
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def rotation(cls: type[Unitary2], phase: float, angle: float) -> Unitary2:
        """
        Return the rotation by ``angle`` about the equatorial axis at ``phase``.

        This is ``cos(θ/2)·1 − 2i·sin(θ/2)·S(φ)`` with
        ``S(φ) = (e^{iφ}|1⟩⟨0| + e^{−iφ}|0⟩⟨1|)/2``, the evolution under
        ``Ω·S(φ)`` for a time ``θ/Ω``.

        :param phase: The pulse phase φ in radians
        :type phase: float

        :param angle: The rotation angle θ in radians
        :type angle: float
        """
        c = math.cos(angle / 2)
        s = math.sin(angle / 2)
        return cls(
            c,
            -1j * s * cmath.exp(-1j * phase),
            -1j * s * cmath.exp(1j * phase),
            c,
        )

    @classmethod
    def from_array(cls: type[Unitary2], matrix: np.ndarray) -> Unitary2:
        """Create from a 2x2 numpy array."""
        return cls(matrix[0, 0], matrix[0, 1], matrix[1, 0], matrix[1, 1])

    @classmethod
    def from_columns(
        cls: type[Unitary2], first: SpinState, second: SpinState
    ) -> Unitary2:
        """Create from the images of ``|0⟩`` and ``|1⟩``."""
        return cls(first.amp0, second.amp0, first.amp1, second.amp1)

    def as_array(self: Unitary2) -> np.ndarray:
        """Return the matrix as a complex numpy array."""
        return np.array([[self.u00, self.u01], [self.u10, self.u11]], dtype=complex)

    def adjoint(self: Unitary2) -> Unitary2:
        """Return the conjugate transpose."""
        return Unitary2(
            self.u00.conjugate(),
            self.u10.conjugate(),
            self.u01.conjugate(),
            self.u11.conjugate(),
        )

    def is_unitary(self: Unitary2, tol: float = 1e-12) -> bool:
        """Check ``U†U = 1`` entrywise within ``tol``."""
        matrix = self.as_array()
        residual = matrix.conj().T @ matrix - np.eye(2)
        return bool(np.max(np.abs(residual)) <= tol)

    def __matmul__(self: Unitary2, other):
        """Return the product ``self @ other`` with a unitary or a state."""
        if isinstance(other, Unitary2):
            return Unitary2(
                self.u00 * other.u00 + self.u01 * other.u10,
                self.u00 * other.u01 + self.u01 * other.u11,
                self.u10 * other.u00 + self.u11 * other.u10,
                self.u10 * other.u01 + self.u11 * other.u11,
            )
        if isinstance(other, SpinState):
            return apply(self, other)
        return NotImplemented


def apply(u: Unitary2, s: SpinState) -> SpinState:
    """
    Apply a unitary to a state.

    >>> flipped = apply(Unitary2.rotation(0.0, math.pi), SpinState.basis(0))
    >>> round(flipped.probabilities[1], 12)
    1.0
    """
    return SpinState(u.u00 * s.amp0 + u.u01 * s.amp1, u.u10 * s.amp0 + u.u11 * s.amp1)


def _check_order(order: int) -> None:
    """Raise :class:`OrderRangeError` for unsupported orders."""
    if order < 0 or order > MAX_BESSEL_ORDER:
        raise OrderRangeError(
            f"Bessel order {order} is outside the supported range "
            f"0..{MAX_BESSEL_ORDER}."
        )


def _miller_start(max_order: int, x: float) -> int:
    """Return the order at which the downward recurrence starts."""
    # the cube-root term covers the transition region width for large x
    return max(max_order, math.ceil(x)) + _MILLER_MARGIN + int(8 * x ** (1 / 3))


def bessel_j_row(max_order: int, argument: float) -> np.ndarray:
    """
    Return ``[J_0(x), J_1(x), ..., J_max_order(x)]`` for ``x = argument``.

    Miller's downward recurrence ``J_{k−1} = (2k/x)·J_k − J_{k+1}`` is
    started well above both ``max_order`` and ``x`` and normalized with
    ``J_0 + 2·Σ J_{2m} = 1``. Values below :data:`UNDERFLOW_FLUSH` in
    magnitude are flushed to signed zero. Negative arguments use
    ``J_k(−x) = (−1)^k J_k(x)``.

    :param max_order: Highest order returned, at most :data:`MAX_BESSEL_ORDER`
    :type max_order: int

    :param argument: The argument x
    :type argument: float

    :raises OrderRangeError: if ``max_order`` is negative or too large
    :rtype: numpy.ndarray

    >>> bessel_j_row(2, 0.0).tolist()
    [1.0, 0.0, 0.0]
    """
    _check_order(max_order)
    x = abs(float(argument))
    values = np.zeros(max_order + 1)
    if x == 0.0:
        values[0] = 1.0
        return values

    start = _miller_start(max_order, x)
    upper, current = 0.0, 1.0
    even_sum = 0.0
    for k in range(start, 0, -1):
        if k <= max_order:
            values[k] = current
        if k % 2 == 0:
            even_sum += current
        upper, current = current, (2 * k / x) * current - upper
        if abs(current) > _RESCALE_LIMIT:
            scale = 1 / _RESCALE_LIMIT
            current *= scale
            upper *= scale
            even_sum *= scale
            values *= scale
    values[0] = current
    values /= current + 2 * even_sum

    tiny = np.abs(values) < UNDERFLOW_FLUSH
    values[tiny] = np.copysign(0.0, values[tiny])
    if argument < 0:
        values[1::2] = -values[1::2]
    return values


def bessel_j(order: int, argument: float) -> float:
    """
    Return the Bessel function of the first kind ``J_order(argument)``.

    :raises OrderRangeError: if ``order`` is negative or above
        :data:`MAX_BESSEL_ORDER`

    >>> bessel_j(0, 0.0)
    1.0
    >>> round(bessel_j(1, 1.5708), 4)
    0.5668
    """
    _check_order(order)
    return float(bessel_j_row(order, argument)[order])
