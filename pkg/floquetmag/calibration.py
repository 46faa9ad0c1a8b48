"""Recovery of field amplitudes and drive-to-field conversion coefficients."""

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
from typing import Final, Literal, Optional, TypeAlias

import numpy as np
from scipy.optimize import least_squares

from floquetmag.analytic import CpConfig, filter_weight, tau_sweep_model
from floquetmag.core import PhysicalConstants, bessel_j_row
from floquetmag.errors import FitError, IllPosedError

_logger = logging.getLogger(__name__)

WEIGHTING_TYPE: TypeAlias = Literal["uniform", "relative"]

MIN_TAU_POINTS: Final[int] = 10
TAU_SCAN_POINTS: Final[int] = 200
BESSEL_SCAN_POINTS: Final[int] = 1500
MAX_SCAN_ARGUMENT: Final[float] = 250.0
BRACKET_DECADES: Final[float] = 3.0
RELATIVE_WEIGHT_FLOOR: Final[float] = 1e-3

_DEFAULT_CONSTANTS: Final = PhysicalConstants()


@dataclass(frozen=True)
class FieldEstimate:
    """
    A fitted field amplitude.

    :param amplitude: Field amplitude in tesla
    :type amplitude: float

    :param uncertainty: Standard error in tesla (``inf`` if undetermined)
    :type uncertainty: float

    :param n_points: Number of data points used
    :type n_points: int
    """

    amplitude: float
    uncertainty: float
    n_points: int


@dataclass(frozen=True)
class CalibrationResult:
    """
    A fitted drive-to-field conversion coefficient.

    :param conversion_coefficient: Tesla per unit of the drive amplitude
    :type conversion_coefficient: float

    :param uncertainty: Standard error, same unit
    :type uncertainty: float

    :param field_estimates: ``(drive, field)`` for each distinct drive amplitude
    :type field_estimates: tuple[tuple[float, float], ...]

    :param goodness_of_fit: Coefficient of determination R²
    :type goodness_of_fit: float

    :param residuals: Residual of each data point, in the unit of the data
    :type residuals: tuple[float, ...]
    """

    conversion_coefficient: float
    uncertainty: float
    field_estimates: tuple[tuple[float, float], ...]
    goodness_of_fit: float
    residuals: tuple[float, ...] = ()


def _standard_error(jacobian: np.ndarray, residuals: np.ndarray) -> float:
    """Return the standard error of a one-parameter least-squares fit."""
    dof = residuals.size - 1
    curvature = float(np.sum(np.square(jacobian)))
    if dof <= 0 or curvature == 0:
        return math.inf
    variance = float(residuals @ residuals) / dof
    return math.sqrt(variance / curvature)


def _r_squared(data: np.ndarray, residuals: np.ndarray) -> float:
    """Return ``1 − RSS/TSS``."""
    total = float(np.sum((data - np.mean(data)) ** 2))
    if total == 0:
        return 1.0 if float(residuals @ residuals) == 0 else 0.0
    return 1 - float(residuals @ residuals) / total


def _in_windows(frequency: float, windows: Sequence[tuple[float, float]]) -> bool:
    """Return whether ``frequency`` lies in one of the closed intervals."""
    return any(low <= frequency <= high for low, high in windows)


def fit_tau_sweep(
    data: Sequence[tuple[float, float]],
    cp: CpConfig,
    omega_ac: float,
    exclusion_windows: Sequence[tuple[float, float]] = (),
    constants: PhysicalConstants = _DEFAULT_CONSTANTS,
) -> FieldEstimate:
    """
    Fit the field amplitude of a τ sweep with the phase-averaged model.

    Points whose detection frequency ``1/(2τ)`` lies in one of the
    ``exclusion_windows`` (Hz) are dropped. The amplitude is found by a scan
    followed by bounded least squares with ``b_ac ≥ 0``; its uncertainty comes
    from the residual variance and the Jacobian.

    :param data: ``(tau, P0)`` pairs
    :type data: Sequence[tuple[float, float]]

    :param cp: Supplies the number of pulses
    :type cp: CpConfig

    :param omega_ac: Angular frequency of the field in rad/s
    :type omega_ac: float

    :raises IllPosedError: with fewer than 10 usable points
    :raises FitError: if the optimizer fails
    """
    kept = [
        (tau, p0)
        for tau, p0 in data
        if not _in_windows(1 / (2 * tau), exclusion_windows)
    ]
    if len(kept) < len(data):
        _logger.info("%d points dropped by exclusion windows", len(data) - len(kept))
    if len(kept) < MIN_TAU_POINTS:
        raise IllPosedError(f"A tau sweep fit needs at least {MIN_TAU_POINTS} points.")
    taus = np.array([tau for tau, _ in kept])
    measured = np.array([p0 for _, p0 in kept])
    n_pulses = cp.n_pulses

    def model(b_ac: float) -> np.ndarray:
        return np.array(
            [
                tau_sweep_model(
                    tau, n_pulses, b_ac, omega_ac, constants.gamma, "limit"
                )
                for tau in taus
            ]
        )

    def residual(parameters: np.ndarray) -> np.ndarray:
        return model(parameters[0]) - measured

    sensitivity = constants.gamma * n_pulses * max(
        abs(filter_weight(tau, n_pulses, omega_ac, "limit")) * tau for tau in taus
    )
    if sensitivity == 0:
        raise IllPosedError("The tau sweep is insensitive to the field.")
    scan = np.linspace(0.0, 30.0 / sensitivity, TAU_SCAN_POINTS)
    costs = [float(np.sum(residual(np.array([b])) ** 2)) for b in scan]
    start = float(scan[int(np.argmin(costs))])
    if start == 0:
        _logger.info("tau sweep fit: no field detected")
        return FieldEstimate(0.0, math.inf, len(kept))

    result = least_squares(
        residual,
        [start],
        bounds=([0.0], [np.inf]),
        method="trf",
        x_scale=[start],
        xtol=1e-14,
        ftol=1e-15,
        gtol=1e-15,
    )
    if not result.success:
        raise FitError(f"tau sweep fit failed: {result.message}")
    amplitude = float(result.x[0])
    if amplitude < 0:
        raise FitError("tau sweep fit gave a negative amplitude.")
    uncertainty = _standard_error(result.jac, result.fun)
    _logger.info("tau sweep fit: b_ac = %.6e T +- %.2e T", amplitude, uncertainty)
    return FieldEstimate(amplitude, uncertainty, len(kept))


def fit_linear_conversion(
    drive: Sequence[float],
    field: Sequence[float],
    field_uncertainty: Optional[Sequence[float]] = None,
) -> CalibrationResult:
    """
    Fit ``field = c·drive`` through the origin.

    With ``field_uncertainty`` the points are weighted by ``1/σ²`` and the
    standard error is ``1/√(Σ drive²/σ²)``; otherwise it is estimated from
    the residuals.

    :raises IllPosedError: if all drive amplitudes are zero
    """
    x = np.asarray(drive, dtype=float)
    y = np.asarray(field, dtype=float)
    if x.shape != y.shape or x.size == 0:
        raise ValueError("drive and field must be non-empty and of equal length.")
    weights = (
        np.ones_like(x)
        if field_uncertainty is None
        else 1 / np.asarray(field_uncertainty, dtype=float) ** 2
    )
    denominator = float(np.sum(weights * x**2))
    if denominator == 0:
        raise IllPosedError("All drive amplitudes are zero.")
    slope = float(np.sum(weights * x * y)) / denominator
    residuals = y - slope * x
    if field_uncertainty is None:
        uncertainty = _standard_error(x, residuals)
    else:
        uncertainty = 1 / math.sqrt(denominator)
    return CalibrationResult(
        conversion_coefficient=slope,
        uncertainty=uncertainty,
        field_estimates=tuple((float(d), slope * float(d)) for d in x),
        goodness_of_fit=_r_squared(y, residuals),
        residuals=tuple(float(r) for r in residuals),
    )


class _BesselModel:
    """The joint model ``|J_k(κ·c·V)|`` with ``κ = 2Nγ/ω``."""

    def __init__(
        self: _BesselModel,
        drive: np.ndarray,
        orders: np.ndarray,
        scale: float,
    ):
        """Group the points by drive amplitude."""
        self.drive = drive
        self.orders = orders
        self.scale = scale
        self.levels, self.level_index = np.unique(drive, return_inverse=True)
        self.max_order = int(orders.max())

    def __call__(self: _BesselModel, coefficient: float) -> np.ndarray:
        """Return the predicted amplitudes for ``coefficient``."""
        rows = [
            bessel_j_row(self.max_order, self.scale * coefficient * level)
            for level in self.levels
        ]
        table = np.vstack(rows)
        return np.abs(table[self.level_index, self.orders])


def fit_bessel_conversion(
    data: Sequence[tuple[float, int, float]],
    cp: CpConfig,
    omega_ac: float,
    weighting: WEIGHTING_TYPE = "uniform",
    bracket: Optional[tuple[float, float]] = None,
    constants: PhysicalConstants = _DEFAULT_CONSTANTS,
) -> CalibrationResult:
    """
    Fit one conversion coefficient ``c`` to harmonic amplitudes.

    The model ``A_k = |J_k(2Nγ·c·V/ω)|`` is fitted to all points jointly.
    Because the Bessel functions oscillate, ``c`` is first located on a
    logarithmic grid over ``bracket`` (by default the three decades below
    the value that makes the largest Bessel argument 250) and then refined
    by Levenberg-Marquardt least squares.

    :param data: ``(drive amplitude, k, measured |A_k|)`` triples
    :type data: Sequence[tuple[float, int, float]]

    :param cp: Supplies the number of pulses
    :type cp: CpConfig

    :param omega_ac: Angular frequency of the field in rad/s
    :type omega_ac: float

    :param weighting: ``"uniform"``, or ``"relative"`` to weight each point by
        the inverse of its amplitude
    :type weighting: str

    :raises IllPosedError: if fewer than two distinct non-zero drive
        amplitudes are present
    :raises FitError: if the refinement fails
    """
    if not data:
        raise IllPosedError("No calibration data.")
    drive = np.array([float(v) for v, _, _ in data])
    orders = np.array([int(k) for _, k, _ in data])
    measured = np.array([float(a) for _, _, a in data])
    if np.unique(drive[drive != 0]).size < 2:
        raise IllPosedError("Need at least two distinct non-zero drive amplitudes.")
    if weighting == "uniform":
        weights = np.ones_like(measured)
    elif weighting == "relative":
        weights = 1 / np.maximum(np.abs(measured), RELATIVE_WEIGHT_FLOOR)
    else:
        raise ValueError(f'Unknown weighting "{weighting}".')

    scale = 2 * cp.n_pulses * constants.gamma / omega_ac
    model = _BesselModel(drive, orders, scale)
    if bracket is None:
        high = MAX_SCAN_ARGUMENT / (scale * float(np.max(np.abs(drive))))
        bracket = (high * 10**-BRACKET_DECADES, high)
    low, high = bracket
    if not 0 < low < high:
        raise ValueError("The search bracket must satisfy 0 < low < high.")

    grid = np.geomspace(low, high, BESSEL_SCAN_POINTS)
    costs = [float(np.sum((weights * (model(c) - measured)) ** 2)) for c in grid]
    start = float(grid[int(np.argmin(costs))])

    def residual(parameters: np.ndarray) -> np.ndarray:
        return weights * (model(parameters[0] * start) - measured)

    result = least_squares(
        residual,
        [1.0],
        method="lm",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=400,
    )
    if result.status <= 0:
        raise FitError(f"Bessel conversion fit failed: {result.message}")
    coefficient = float(result.x[0]) * start
    if coefficient <= 0:
        raise FitError("Bessel conversion fit gave a non-positive coefficient.")
    uncertainty = _standard_error(result.jac[:, 0], result.fun) * start
    residuals = model(coefficient) - measured
    _logger.info(
        "Bessel conversion fit: c = %.6e T/unit +- %.2e", coefficient, uncertainty
    )
    return CalibrationResult(
        conversion_coefficient=coefficient,
        uncertainty=uncertainty,
        field_estimates=tuple((float(v), coefficient * float(v)) for v in model.levels),
        goodness_of_fit=_r_squared(measured, residuals),
        residuals=tuple(float(r) for r in residuals),
    )


def bessel_residual_scan(
    data: Sequence[tuple[float, int, float]],
    cp: CpConfig,
    omega_ac: float,
    coefficients: Sequence[float],
    constants: PhysicalConstants = _DEFAULT_CONSTANTS,
) -> np.ndarray:
    """Return the joint sum of squared residuals at each trial coefficient."""
    drive = np.array([float(v) for v, _, _ in data])
    orders = np.array([int(k) for _, k, _ in data])
    measured = np.array([float(a) for _, _, a in data])
    model = _BesselModel(drive, orders, 2 * cp.n_pulses * constants.gamma / omega_ac)
    return np.array([float(np.sum((model(c) - measured) ** 2)) for c in coefficients])
