"""A module with some resources: parsing and formatting of physical quantities."""

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
import re
from typing import Final, Union

SI_PREFIXES: Final[dict[str, float]] = {
    "p": 1e-12,
    "n": 1e-9,
    "u": 1e-6,
    "µ": 1e-6,
    "μ": 1e-6,
    "m": 1e-3,
    "": 1.0,
    "k": 1e3,
    "M": 1e6,
    "G": 1e9,
}

BASE_UNITS: Final[tuple[str, ...]] = ("s", "T", "Hz", "rad", "V", "Vpp")

_QUANTITY_RE: Final = re.compile(
    r"^\s*(?P<number>[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)\s*(?P<unit>\S*)\s*$"
)

_FORMAT_PREFIXES: Final[list[tuple[str, float]]] = [
    ("G", 1e9),
    ("M", 1e6),
    ("k", 1e3),
    ("", 1.0),
    ("m", 1e-3),
    ("u", 1e-6),
    ("n", 1e-9),
    ("p", 1e-12),
]


def _split_unit(unit_text: str, unit: str) -> float:
    """Return the multiplier of ``unit_text`` relative to ``unit``."""
    if unit == "rad" and unit_text == "deg":
        return math.pi / 180
    if not unit_text.endswith(unit):
        raise ValueError(f'"{unit_text}" is not a unit of {unit}.')
    prefix = unit_text[: len(unit_text) - len(unit)]
    if prefix not in SI_PREFIXES:
        raise ValueError(f'"{prefix}" is not a known SI prefix.')
    return SI_PREFIXES[prefix]


def parse_quantity(value: Union[str, int, float], unit: str) -> float:
    """
    Convert a number or a string like ``"19.8 ns"`` into a float in SI units.

    Numbers are taken to be in SI units already. A string may carry an SI
    prefix in front of ``unit``; for angles, ``deg`` is also accepted.

    >>> parse_quantity("2 us", "s")
    2e-06
    >>> parse_quantity("500 kHz", "Hz")
    500000.0
    >>> round(parse_quantity("90 deg", "rad"), 12)
    1.570796326795
    >>> parse_quantity(3, "T")
    3.0

    A ratio unit such as ``"0.392 uT/mVpp"`` is accepted when ``unit``
    contains a slash; only the numerator prefix is applied and the
    denominator is returned by :func:`ratio_denominator`.
    """
    if isinstance(value, bool):
        raise ValueError("A boolean is not a quantity.")
    if isinstance(value, (int, float)):
        return float(value)
    match = _QUANTITY_RE.match(value)
    if match is None:
        raise ValueError(f'"{value}" is not a valid quantity.')
    number = float(match.group("number"))
    unit_text = match.group("unit")
    if not unit_text:
        return number
    if "/" in unit:
        numerator, _, _ = unit.partition("/")
        given_numerator, slash, _ = unit_text.partition("/")
        if not slash:
            raise ValueError(f'"{value}" is missing a denominator unit.')
        return number * _split_unit(given_numerator, numerator)
    return number * _split_unit(unit_text, unit)


def ratio_denominator(value: Union[str, int, float]) -> str:
    """
    Return the denominator label of a ratio quantity, or ``""``.

    >>> ratio_denominator("0.392 uT/mVpp")
    'mVpp'
    """
    if not isinstance(value, str):
        return ""
    return value.partition("/")[2].strip()


def format_quantity(value: float, unit: str, digits: int = 4) -> str:
    """
    Format ``value`` (in SI units) with an engineering prefix.

    >>> format_quantity(8.77e-7, "T")
    '877 nT'
    >>> format_quantity(0.0, "s")
    '0 s'
    """
    if value == 0 or not math.isfinite(value):
        return f"{value:g} {unit}"
    magnitude = abs(value)
    for prefix, scale in _FORMAT_PREFIXES:
        if magnitude >= scale * (1 - 1e-12):
            return f"{value / scale:.{digits}g} {prefix}{unit}"
    prefix, scale = _FORMAT_PREFIXES[-1]
    return f"{value / scale:.{digits}g} {prefix}{unit}"
