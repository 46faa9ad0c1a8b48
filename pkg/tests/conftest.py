"""Shared test setup."""

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
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from floquetmag.analytic import AcField, CpConfig  # noqa: E402

FREQUENCY = 500.1e3
N_PULSES = 16


@pytest.fixture
def resonant_cp() -> CpConfig:
    """Delta-pulse XY8 with N = 16, resonant with 500.1 kHz."""
    return CpConfig.resonant(N_PULSES, FREQUENCY)


def field_for_argument(argument: float, phi_ac: float = 0.0) -> AcField:
    """Return the 500.1 kHz field whose Bessel argument 2Nγb/ω is ``argument``."""
    b_ac = argument * FREQUENCY / (2 * N_PULSES * 28e9)
    return AcField(b_ac, 2 * math.pi * FREQUENCY, phi_ac)
