"""Tests for states, unitaries and Bessel functions."""

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
import math

import numpy as np
import pytest
from scipy import integrate, special

from floquetmag.core import (
    MAX_BESSEL_ORDER,
    SpinState,
    Unitary2,
    apply,
    bessel_j,
    bessel_j_row,
)
from floquetmag.errors import OrderRangeError


def power_series_j(order: int, x: float) -> float:
    """Sum the power series of J_order until the terms stop mattering."""
    total = 0.0
    m = 0
    while True:
        term = (-1) ** m * (x / 2) ** (2 * m + order)
        term /= math.factorial(m) * math.factorial(m + order)
        total += term
        if m > 5 and abs(term) < 1e-18 * max(abs(total), 1e-300):
            return total
        m += 1


def quadrature_j(order: int, x: float) -> float:
    """Evaluate Bessel's integral (1/π)∫₀^π cos(kθ − x sin θ) dθ."""
    value, _ = integrate.quad(
        lambda theta: math.cos(order * theta - x * math.sin(theta)),
        0.0,
        math.pi,
        limit=1000,
        epsabs=1e-13,
        epsrel=1e-13,
    )
    return value / math.pi


def test_spin_state_validation():
    with pytest.raises(ValueError):
        SpinState(1.0, 1.0)
    state = SpinState.normalized(1.0, 1j)
    assert state.norm == pytest.approx(1.0)
    assert state.probabilities == pytest.approx((0.5, 0.5))
    with pytest.raises(ValueError):
        SpinState.normalized(0.0, 0.0)
    with pytest.raises(ValueError):
        SpinState.basis(2)


def test_global_phase_comparison():
    state = SpinState.normalized(0.6, 0.8j)
    rotated = SpinState(state.amp0 * cmath.exp(0.4j), state.amp1 * cmath.exp(0.4j))
    assert state.equal_up_to_global_phase(rotated)
    assert not state.equal_up_to_global_phase(SpinState.basis(0))
    normalized = rotated.phase_normalized()
    assert normalized.amp1.imag == pytest.approx(0.0, abs=1e-15)
    assert normalized.amp1.real > 0
    np.testing.assert_allclose(
        normalized.as_array(), state.phase_normalized().as_array(), atol=1e-15
    )


def test_pi_rotation_flips():
    for phase in (0.0, math.pi / 2, 1.234):
        flipped = Unitary2.rotation(phase, math.pi) @ SpinState.basis(0)
        assert flipped.probabilities[1] == pytest.approx(1.0, abs=1e-15)


def test_rotation_composition():
    half = Unitary2.rotation(0.3, math.pi / 2)
    full = Unitary2.rotation(0.3, math.pi)
    np.testing.assert_allclose((half @ half).as_array(), full.as_array(), atol=1e-15)
    product = full.adjoint() @ full
    np.testing.assert_allclose(product.as_array(), np.eye(2), atol=1e-15)
    assert (Unitary2.identity() @ half) == half


def test_rotation_matches_matrix_exponential():
    theta, phi = 1.1, 0.7
    generator = np.array([[0, np.exp(-1j * phi)], [np.exp(1j * phi), 0]]) / 2
    values, vectors = np.linalg.eigh(generator)
    expected = vectors @ np.diag(np.exp(-1j * theta * values)) @ vectors.conj().T
    np.testing.assert_allclose(
        Unitary2.rotation(phi, theta).as_array(), expected, atol=1e-14
    )


def test_unitary_validation_and_columns():
    with pytest.raises(ValueError):
        Unitary2(1.0, 1.0, 0.0, 1.0)
    matrix = Unitary2.from_columns(
        SpinState.normalized(1, 1j), SpinState.normalized(1j, 1)
    )
    assert matrix.is_unitary()
    assert Unitary2.from_array(matrix.as_array()) == matrix
    state = apply(matrix, SpinState.basis(1))
    assert state.equal_up_to_global_phase(SpinState.normalized(1j, 1))


def test_random_products_stay_unitary():
    rng = np.random.default_rng(7)
    product = Unitary2.identity()
    for _ in range(200):
        phase, angle = rng.uniform(0, 2 * math.pi, size=2)
        product = Unitary2.rotation(phase, angle) @ product
    assert product.is_unitary(1e-12)


@pytest.mark.parametrize(
    "order, x", [(0, 0.5), (1, 1.5708), (2, 3.0), (7, 4.2), (20, 10.0)]
)
def test_bessel_power_series(order, x):
    assert bessel_j(order, x) == pytest.approx(power_series_j(order, x), abs=1e-13)


def test_bessel_example_values():
    assert bessel_j(1, 1.5708) == pytest.approx(0.5668, abs=1e-4)
    assert abs(bessel_j(211, 100.0)) < 1e-30
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(3, 0.0) == 0.0


@pytest.mark.parametrize("order, x", [(0, 1.0), (5, 10.0), (50, 60.0), (100, 100.0)])
def test_bessel_quadrature(order, x):
    assert bessel_j(order, x) == pytest.approx(quadrature_j(order, x), abs=1e-10)


@pytest.mark.parametrize("x", [0.1, 1.0, 10.0, 50.0, 100.0, 211.4])
def test_bessel_row_against_scipy(x):
    row = bessel_j_row(250, x)
    reference = special.jv(np.arange(251), x)
    np.testing.assert_allclose(row, reference, rtol=1e-9, atol=1e-280)


def test_row_matches_scalar():
    row = bessel_j_row(5, 1.5708)
    for k in range(6):
        assert row[k] == pytest.approx(bessel_j(k, 1.5708), abs=1e-12)


@pytest.mark.parametrize("x", [0.5, 3.0, 47.0, 150.0, 220.0])
def test_bessel_parseval(x):
    row = bessel_j_row(MAX_BESSEL_ORDER, x)
    assert row[0] ** 2 + 2 * np.sum(row[1:] ** 2) == pytest.approx(1.0, abs=1e-8)


def test_bessel_negative_argument():
    positive = bessel_j_row(10, 3.3)
    negative = bessel_j_row(10, -3.3)
    signs = (-1.0) ** np.arange(11)
    np.testing.assert_allclose(negative, signs * positive, rtol=1e-15)


def test_underflow_is_flushed():
    row = bessel_j_row(MAX_BESSEL_ORDER, 0.5)
    assert row[-1] == 0.0
    assert np.all(np.isfinite(row))


@pytest.mark.parametrize("order", [-1, MAX_BESSEL_ORDER + 1])
def test_order_range(order):
    with pytest.raises(OrderRangeError):
        bessel_j(order, 1.0)
    with pytest.raises(ValueError):
        bessel_j_row(order, 1.0)
