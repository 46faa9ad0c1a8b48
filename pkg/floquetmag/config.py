"""Strict TOML run configuration."""

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

import dataclasses
import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Final, Optional, Union

import tomli

from floquetmag._resources import parse_quantity, ratio_denominator
from floquetmag.analytic import AcField, CpConfig
from floquetmag.calibration import WEIGHTING_TYPE
from floquetmag.dynamics import IntegratorSettings
from floquetmag.errors import ConfigurationError
from floquetmag.readout import MODEL_TYPE, ReadoutConfig
from floquetmag.spectral import DEFAULT_WINDOW_BINS, FIT_METHOD_TYPE

_logger = logging.getLogger(__name__)

OUTPUT_FORMATS: Final[tuple[str, ...]] = ("csv", "json", "npz")
MODES: Final[tuple[str, ...]] = ("analytic", "numeric")

DEFAULT_FREQUENCY: Final[float] = 500.1e3
DEFAULT_AMPLITUDE: Final[float] = 877e-9
DEFAULT_T_PI: Final[float] = 19.8e-9
DEFAULT_N_PULSES: Final[int] = 16


@dataclass(frozen=True)
class DriveSection:
    """
    A sweep of drive amplitudes converted linearly to field amplitudes.

    :param voltages: Drive amplitudes, in ``unit``
    :type voltages: tuple[float, ...]

    :param conversion: Field per drive unit, in T/``unit``
    :type conversion: float

    :param unit: Label of the drive unit
    :type unit: str
    """

    voltages: tuple[float, ...]
    conversion: float
    unit: str = "mVpp"

    def __post_init__(self: DriveSection):
        """Validate the sweep."""
        if not self.voltages:
            raise ConfigurationError("[drive] voltages must not be empty.")
        if any(v < 0 for v in self.voltages):
            raise ConfigurationError("[drive] voltages must be non-negative.")
        if not self.conversion > 0:
            raise ConfigurationError("[drive] conversion must be positive.")

    @property
    def field_amplitudes(self: DriveSection) -> tuple[float, ...]:
        """Return the field amplitude of each drive level in tesla."""
        return tuple(self.conversion * v for v in self.voltages)


@dataclass(frozen=True)
class AnalysisSection:
    """Settings of the spectral analysis, harmonic maps and calibration fits."""

    orders: tuple[int, ...] = (1, 2, 3, 5)
    max_order: int = 101
    window_bins: int = DEFAULT_WINDOW_BINS
    amplitudes: tuple[float, ...] = ()
    fit_method: FIT_METHOD_TYPE = "magnitude"
    weighting: WEIGHTING_TYPE = "uniform"
    exclusion_windows: tuple[tuple[float, float], ...] = ()
    fast_path: bool = True
    workers: int = 1

    def __post_init__(self: AnalysisSection):
        """Validate the settings."""
        if any(k < 1 for k in self.orders):
            raise ConfigurationError("[analysis] orders must be positive.")
        if not 1 <= self.max_order <= 300:
            raise ConfigurationError("[analysis] max_order must lie in 1..300.")
        if self.window_bins < 2:
            raise ConfigurationError("[analysis] window_bins must be at least 2.")
        if list(self.amplitudes) != sorted(self.amplitudes):
            raise ConfigurationError("[analysis] amplitudes must be ascending.")
        if self.fit_method not in ("complex", "magnitude"):
            raise ConfigurationError(f'Unknown fit method "{self.fit_method}".')
        if self.weighting not in ("uniform", "relative"):
            raise ConfigurationError(f'Unknown weighting "{self.weighting}".')
        if any(len(w) != 2 or w[0] > w[1] for w in self.exclusion_windows):
            raise ConfigurationError("[analysis] exclusion windows are [low, high].")
        if self.workers < 1:
            raise ConfigurationError("[analysis] workers must be at least 1.")


@dataclass(frozen=True)
class OutputSection:
    """Where and in which formats results are written."""

    directory: str = "floquetmag_output"
    formats: tuple[str, ...] = ("csv", "json")

    def __post_init__(self: OutputSection):
        """Validate the formats."""
        unknown = set(self.formats) - set(OUTPUT_FORMATS)
        if unknown:
            raise ConfigurationError(f"Unknown output format(s): {sorted(unknown)}.")


@dataclass(frozen=True)
class RunConfig:
    """
    A complete, validated run configuration.

    The shot-noise seed of :attr:`readout` always equals :attr:`seed`.
    """

    cp: CpConfig
    ac: AcField
    readout: ReadoutConfig
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    output: OutputSection = field(default_factory=OutputSection)
    drive: Optional[DriveSection] = None
    seed: int = 0
    mode: MODEL_TYPE = "analytic"
    noise: bool = True

    def __post_init__(self: RunConfig):
        """Validate cross-section consistency."""
        if self.mode not in MODES:
            raise ConfigurationError(f'Unknown mode "{self.mode}".')
        if self.seed < 0:
            raise ConfigurationError("seed must be non-negative.")
        if self.readout.rng_seed != self.seed:
            object.__setattr__(
                self, "readout", dataclasses.replace(self.readout, rng_seed=self.seed)
            )

    def with_overrides(
        self: RunConfig,
        seed: Optional[int] = None,
        directory: Optional[str] = None,
        mode: Optional[str] = None,
    ) -> RunConfig:
        """Return a copy with command-line overrides applied."""
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = seed
        if directory is not None:
            changes["output"] = dataclasses.replace(self.output, directory=directory)
        if mode is not None:
            changes["mode"] = mode
        return dataclasses.replace(self, **changes)

    def to_dict(self: RunConfig) -> dict[str, Any]:
        """Return the resolved parameters as plain data (SI units)."""
        data = dataclasses.asdict(self)
        return _replace_non_finite(data)


def _replace_non_finite(value: Any) -> Any:
    """Replace infinite floats by strings so the data is valid JSON."""
    if isinstance(value, dict):
        return {key: _replace_non_finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_replace_non_finite(item) for item in value]
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


Parser = Callable[[Any], Any]


def _quantity(unit: str) -> Parser:
    """Return a parser for a quantity in ``unit``."""
    return lambda value: parse_quantity(value, unit)


def _integer(value: Any) -> int:
    """Parse an integer."""
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{value!r} is not an integer.")
    return value


def _real(value: Any) -> float:
    """Parse a plain number."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{value!r} is not a number.")
    return float(value)


def _boolean(value: Any) -> bool:
    """Parse a boolean."""
    if not isinstance(value, bool):
        raise ValueError(f"{value!r} is not a boolean.")
    return value


def _string(value: Any) -> str:
    """Parse a string."""
    if not isinstance(value, str):
        raise ValueError(f"{value!r} is not a string.")
    return value


def _list_of(parser: Parser) -> Parser:
    """Return a parser for a list of items."""

    def parse(value: Any) -> tuple:
        if not isinstance(value, list):
            raise ValueError(f"{value!r} is not a list.")
        return tuple(parser(item) for item in value)

    return parse


def _take(
    section: Any, parsers: Mapping[str, Parser], name: str
) -> dict[str, Any]:
    """Parse the known keys of a section; reject unknown keys."""
    if not isinstance(section, Mapping):
        raise ConfigurationError(f"[{name}] must be a table.")
    unknown = sorted(set(section) - set(parsers))
    if unknown:
        raise ConfigurationError(f"Unknown key(s) in [{name}]: {', '.join(unknown)}.")
    parsed = {}
    for key, parser in parsers.items():
        if key in section:
            try:
                parsed[key] = parser(section[key])
            except (TypeError, ValueError) as error:
                raise ConfigurationError(f"[{name}] {key}: {error}") from error
    return parsed


_CP_KEYS: Final[dict[str, Parser]] = {
    "n_pulses": _integer,
    "tau": _quantity("s"),
    "t_pi": _quantity("s"),
    "phase_cycle": _string,
    "phases": _list_of(_quantity("rad")),
    "pi_duration_error_fraction": _real,
    "readout_tilt_error": _quantity("rad"),
    "rabi_frequency": _quantity("rad/s"),
}
_AC_KEYS: Final[dict[str, Parser]] = {
    "amplitude": _quantity("T"),
    "frequency": _quantity("Hz"),
    "phase": _quantity("rad"),
}
_DRIVE_KEYS: Final[dict[str, Parser]] = {
    "voltages": _list_of(_real),
    "conversion": lambda value: value,
    "unit": _string,
}
_READOUT_KEYS: Final[dict[str, Parser]] = {
    "t_L": _quantity("s"),
    "n_readouts": _integer,
    "i0": _real,
    "i1": _real,
    "t_read": _quantity("s"),
    "n_seq": _integer,
    "noise": _boolean,
}
_INTEGRATOR_KEYS: Final[dict[str, Parser]] = {
    "rel_tol": _real,
    "abs_tol": _real,
    "max_step": _quantity("s"),
    "initial_step": _quantity("s"),
}
_ANALYSIS_KEYS: Final[dict[str, Parser]] = {
    "orders": _list_of(_integer),
    "max_order": _integer,
    "window_bins": _integer,
    "amplitudes": _list_of(_quantity("T")),
    "fit_method": _string,
    "weighting": _string,
    "exclusion_windows": _list_of(_list_of(_quantity("Hz"))),
    "fast_path": _boolean,
    "workers": _integer,
}
_OUTPUT_KEYS: Final[dict[str, Parser]] = {
    "directory": _string,
    "formats": _list_of(_string),
}
_TOP_KEYS: Final[dict[str, Parser]] = {
    "seed": _integer,
    "mode": _string,
    "cp": lambda value: value,
    "ac": lambda value: value,
    "drive": lambda value: value,
    "readout": lambda value: value,
    "integrator": lambda value: value,
    "analysis": lambda value: value,
    "output": lambda value: value,
}


def _parse_drive(section: Any) -> DriveSection:
    """Parse the optional ``[drive]`` table."""
    values = _take(section, _DRIVE_KEYS, "drive")
    if "voltages" not in values or "conversion" not in values:
        raise ConfigurationError("[drive] needs voltages and conversion.")
    conversion = values["conversion"]
    try:
        coefficient = parse_quantity(conversion, "T/unit")
    except (TypeError, ValueError) as error:
        raise ConfigurationError(f"[drive] conversion: {error}") from error
    unit = values.get("unit") or ratio_denominator(conversion) or "mVpp"
    return DriveSection(values["voltages"], coefficient, unit)


def parse_config(document: Mapping[str, Any]) -> RunConfig:
    """
    Build a :class:`RunConfig` from a parsed TOML document.

    Missing values take the defaults of the reference experiment: N = 16,
    a 500.1 kHz field of 877 nT, t_π = 19.8 ns, XY8 and t_L = 2 µs.
    When ``[cp] tau`` is absent, τ is set to resonance with the field.

    :raises ConfigurationError: for unknown keys or invalid values
    """
    top = _take(document, _TOP_KEYS, "top level")
    try:
        ac_values = _take(top.get("ac", {}), _AC_KEYS, "ac")
        ac = AcField.from_frequency(
            ac_values.get("amplitude", DEFAULT_AMPLITUDE),
            ac_values.get("frequency", DEFAULT_FREQUENCY),
            ac_values.get("phase", 0.0),
        )
        cp_values = _take(top.get("cp", {}), _CP_KEYS, "cp")
        cp_values.setdefault("n_pulses", DEFAULT_N_PULSES)
        cp_values.setdefault("tau", 1 / (2 * ac.frequency))
        cp_values.setdefault("t_pi", DEFAULT_T_PI)
        cp = CpConfig(**cp_values)
        seed = top.get("seed", 0)
        readout_values = _take(top.get("readout", {}), _READOUT_KEYS, "readout")
        noise = readout_values.pop("noise", True)
        readout = ReadoutConfig(rng_seed=seed, **readout_values)
        integrator = IntegratorSettings(
            **_take(top.get("integrator", {}), _INTEGRATOR_KEYS, "integrator")
        )
        analysis = AnalysisSection(
            **_take(top.get("analysis", {}), _ANALYSIS_KEYS, "analysis")
        )
        output = OutputSection(**_take(top.get("output", {}), _OUTPUT_KEYS, "output"))
        drive = _parse_drive(top["drive"]) if "drive" in top else None
        return RunConfig(
            cp=cp,
            ac=ac,
            readout=readout,
            integrator=integrator,
            analysis=analysis,
            output=output,
            drive=drive,
            seed=seed,
            mode=top.get("mode", "analytic"),
            noise=noise,
        )
    except TypeError as error:
        raise ConfigurationError(str(error)) from error


def load_config(path: Optional[Union[str, Path]]) -> RunConfig:
    """
    Read a TOML configuration file; ``None`` gives the default configuration.

    :raises ConfigurationError: for invalid TOML or invalid values
    :raises OSError: if the file cannot be read
    """
    if path is None:
        return parse_config({})
    with open(path, "rb") as stream:
        try:
            document = tomli.load(stream)
        except tomli.TOMLDecodeError as error:
            raise ConfigurationError(f"{path}: {error}") from error
    _logger.debug("configuration read from %s", path)
    return parse_config(document)
