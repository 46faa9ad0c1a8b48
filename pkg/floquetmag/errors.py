"""Exceptions raised by the floquetmag package."""

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

from typing import Optional


class FloquetmagError(Exception):
    """Base class for all errors raised by floquetmag."""


class ConfigurationError(FloquetmagError, ValueError):
    """A pulse sequence, readout, or run configuration is invalid."""


class OrderRangeError(FloquetmagError, ValueError):
    """A Bessel function order is negative or above the supported maximum."""


class ModelDomainError(FloquetmagError, ValueError):
    """A model was evaluated outside the domain where it is valid."""


class IntegrationError(FloquetmagError, RuntimeError):
    """
    The time integration of the Schrödinger equation failed.

    :param message: Description of the failure
    :type message: str

    :param time: The time (in seconds) at which the integrator stopped
    :type time: Optional[float]
    """

    def __init__(self: IntegrationError, message: str, time: Optional[float] = None):
        """Create the exception."""
        if time is not None:
            message = f"{message} (at t = {time:.6e} s)"
        super().__init__(message)
        self.time = time


class FitError(FloquetmagError, RuntimeError):
    """A calibration fit did not converge or gave an unphysical result."""


class IllPosedError(FitError):
    """The calibration data cannot determine the fitted parameter."""
