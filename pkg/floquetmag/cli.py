"""Command line front end: simulate, analyze, map and calibrate."""

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

import argparse
import dataclasses
import logging
from collections.abc import Sequence
from datetime import datetime, timezone
from pathlib import Path
from typing import Final, Optional

from rich.logging import RichHandler

from floquetmag._resources import format_quantity
from floquetmag.calibration import (
    fit_bessel_conversion,
    fit_linear_conversion,
    fit_tau_sweep,
)
from floquetmag.config import RunConfig, load_config
from floquetmag.errors import ConfigurationError, FloquetmagError
from floquetmag.jsonsupport import (
    calibration_to_json,
    harmonic_map_to_csv,
    harmonic_map_to_json,
    harmonics_to_csv,
    harmonics_to_json,
    manifest_to_json,
    read_calibration_csv,
    read_series,
    series_to_csv,
    series_to_npz,
    spectrum_to_csv,
    write_atomic,
)
from floquetmag.readout import (
    TimeSeries,
    alias_frequency,
    normalize_counts,
    synthesize_series,
    to_photon_counts,
)
from floquetmag.spectral import (
    build_harmonic_map,
    dft,
    extract_harmonics,
    harmonic_table,
    noise_floor,
)

_logger = logging.getLogger(__name__)

EXIT_SUCCESS: Final[int] = 0
EXIT_USAGE: Final[int] = 1
EXIT_COMPUTATION: Final[int] = 2

COMMANDS: Final[list[str]] = ["simulate", "analyze", "map", "calibrate"]


def configure_logging(verbosity: int) -> None:
    """Send log records to a rich console handler; ``verbosity`` is −1, 0 or 1."""
    level = {-1: logging.WARNING, 0: logging.INFO, 1: logging.DEBUG}[verbosity]
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(show_path=False)],
        force=True,
    )


def _write_manifest(
    config: RunConfig, command: str, files: Sequence[Path]
) -> Path:
    """Write ``manifest.json`` next to the data files of a command."""
    directory = Path(config.output.directory)
    created = datetime.now(timezone.utc).isoformat(timespec="seconds")
    text = manifest_to_json(
        command,
        config.to_dict(),
        config.seed,
        [path.name for path in files],
        created,
    )
    return write_atomic(directory / "manifest.json", text)


def _write_series(
    config: RunConfig, series: TimeSeries, stem: str
) -> list[Path]:
    """Write a series in the configured formats."""
    directory = Path(config.output.directory)
    written = []
    if "csv" in config.output.formats:
        written.append(write_atomic(directory / f"{stem}.csv", series_to_csv(series)))
    if "npz" in config.output.formats:
        written.append(write_atomic(directory / f"{stem}.npz", series_to_npz(series)))
    return written


def cmd_simulate(config: RunConfig) -> list[Path]:
    """
    Synthesize the readout record and write it as probabilities and counts.

    With a ``[drive]`` sweep one record is written per drive level, suffixed
    with its index; the shot noise of level ``i`` uses the seed ``seed + i``.

    :returns: The data files written (the manifest is written as well)
    """
    if config.drive is None:
        levels = [("", config.ac)]
    else:
        levels = [
            (f"_{index}", config.ac.with_amplitude(amplitude))
            for index, amplitude in enumerate(config.drive.field_amplitudes)
        ]
    written: list[Path] = []
    for index, (suffix, field) in enumerate(levels):
        _logger.info(
            "simulating %s model at b_ac = %s",
            config.mode,
            format_quantity(field.b_ac, "T"),
        )
        series = synthesize_series(
            config.mode, config.cp, field, config.readout, config.integrator
        )
        written += _write_series(config, series, f"series_probability{suffix}")
        if config.noise:
            readout = dataclasses.replace(
                config.readout, rng_seed=config.seed + index
            )
            counts = to_photon_counts(series, readout)
            written += _write_series(config, counts, f"series_counts{suffix}")
    _write_manifest(config, "simulate", written)
    return written


def cmd_analyze(series_path: Path, config: RunConfig) -> list[Path]:
    """
    Transform a recorded series and fit the configured harmonics.

    Count series are normalized to probabilities first. Unconverged fits are
    flagged in the table and are not an error.
    """
    series = read_series(series_path)
    if series.unit == "counts":
        series = normalize_counts(series, config.readout)
    spectrum = dft(series)
    alias = alias_frequency(config.ac.omega_ac, series.dt)
    analysis = config.analysis
    harmonics = extract_harmonics(
        spectrum, alias, analysis.orders, analysis.window_bins, analysis.fit_method
    )
    floor = noise_floor(
        spectrum, (analysis.window_bins + 1) * spectrum.bin_width, spectrum.nyquist
    )
    rows = harmonic_table(harmonics, floor)
    for row in rows:
        if not row["converged"]:
            _logger.warning("harmonic k=%d: fit did not converge", row["k"])
    directory = Path(config.output.directory)
    written = []
    if "csv" in config.output.formats:
        written.append(
            write_atomic(directory / "spectrum.csv", spectrum_to_csv(spectrum))
        )
        written.append(
            write_atomic(directory / "harmonics.csv", harmonics_to_csv(rows))
        )
    if "json" in config.output.formats:
        written.append(
            write_atomic(
                directory / "harmonics.json", harmonics_to_json(rows, alias, floor)
            )
        )
    _write_manifest(config, "analyze", written)
    return written


def cmd_map(config: RunConfig) -> list[Path]:
    """
    Build the harmonic map over the configured amplitude sweep.

    The sweep is ``[analysis] amplitudes``, or the field amplitudes of the
    ``[drive]`` sweep.

    :raises ConfigurationError: if no sweep is configured
    """
    amplitudes = list(config.analysis.amplitudes)
    if not amplitudes and config.drive is not None:
        amplitudes = sorted(config.drive.field_amplitudes)
    if not amplitudes:
        raise ConfigurationError(
            "A map needs [analysis] amplitudes or a [drive] sweep."
        )
    harmonic_map = build_harmonic_map(
        config.mode,
        amplitudes,
        config.analysis.max_order,
        config.cp,
        config.ac,
        config.readout,
        config.integrator,
        fast_path=config.analysis.fast_path,
        max_workers=config.analysis.workers,
        window_bins=config.analysis.window_bins,
        method=config.analysis.fit_method,
    )
    directory = Path(config.output.directory)
    written = []
    if "csv" in config.output.formats:
        written.append(
            write_atomic(directory / "map.csv", harmonic_map_to_csv(harmonic_map))
        )
    if "json" in config.output.formats:
        written.append(
            write_atomic(directory / "map.json", harmonic_map_to_json(harmonic_map))
        )
    _write_manifest(config, "map", written)
    return written


def cmd_calibrate(data_path: Path, config: RunConfig) -> list[Path]:
    """
    Fit calibration data; the fit follows from the CSV header.

    ``drive,k,amplitude`` runs the Bessel conversion fit, ``tau,p0`` the τ
    sweep fit and ``drive,field`` the linear conversion fit.

    :raises IllPosedError: if the data cannot determine the parameter
    """
    layout, rows = read_calibration_csv(Path(data_path).read_text(encoding="utf-8"))
    unit = config.drive.unit if config.drive is not None else "unit"
    if layout == "bessel":
        data = [(v, int(k), a) for v, k, a in rows]
        result = fit_bessel_conversion(
            data, config.cp, config.ac.omega_ac, config.analysis.weighting
        )
        text = calibration_to_json(result, "bessel", unit)
    elif layout == "tau":
        estimate = fit_tau_sweep(
            [(tau, p0) for tau, p0 in rows],
            config.cp,
            config.ac.omega_ac,
            config.analysis.exclusion_windows,
        )
        text = calibration_to_json(estimate, "tau")
    else:
        result = fit_linear_conversion([v for v, _ in rows], [b for _, b in rows])
        text = calibration_to_json(result, "linear", unit)
    written = [write_atomic(Path(config.output.directory) / "calibration.json", text)]
    _write_manifest(config, "calibrate", written)
    return written


def build_parser(version: str) -> argparse.ArgumentParser:
    """Return the argument parser."""
    parser = argparse.ArgumentParser(
        prog="floquetmag",
        description="Simulate and analyze CP/XY8 sensing of large AC magnetic fields.",
    )
    parser.add_argument(
        "command",
        nargs="?",
        choices=COMMANDS,
        help="what to do",
    )
    parser.add_argument(
        "input",
        nargs="?",
        metavar="FILE",
        help="series file (analyze) or calibration data (calibrate)",
    )
    parser.add_argument(
        "--config", "-c", metavar="PATH", help="TOML configuration file"
    )
    parser.add_argument("--seed", type=int, metavar="N", help="override the seed")
    parser.add_argument("--out", metavar="DIR", help="override the output directory")
    parser.add_argument(
        "--mode", choices=["analytic", "numeric"], help="override the model"
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument(
        "--verbose", "-v", action="store_true", help="show debugging messages"
    )
    verbosity.add_argument(
        "--quiet", "-q", action="store_true", help="show only warnings and errors"
    )
    parser.add_argument(
        "--copyright",
        action="store_true",
        help="show program's copyright and license information and exit",
    )
    parser.add_argument(
        "--version", action="version", version=f"{parser.prog} version {version}"
    )
    return parser


def main(
    argv: Optional[Sequence[str]] = None,
    license_text: str = "",
    version: str = "",
) -> int:
    """
    Run the command line program and return its exit status.

    0 means success, 1 a usage, configuration or input error and 2 a failed
    computation.
    """
    parser = build_parser(version)
    try:
        args = vars(parser.parse_args(argv))
    except SystemExit as exit_request:
        return EXIT_SUCCESS if exit_request.code == 0 else EXIT_USAGE

    if args["copyright"]:
        print(license_text)
        return EXIT_SUCCESS
    configure_logging(1 if args["verbose"] else -1 if args["quiet"] else 0)
    if args["command"] is None:
        parser.print_usage()
        _logger.error("a command is required")
        return EXIT_USAGE
    if args["command"] in ("analyze", "calibrate") and not args["input"]:
        _logger.error("%s needs an input file", args["command"])
        return EXIT_USAGE

    try:
        config = load_config(args["config"]).with_overrides(
            seed=args["seed"], directory=args["out"], mode=args["mode"]
        )
        if args["command"] == "simulate":
            cmd_simulate(config)
        elif args["command"] == "analyze":
            cmd_analyze(Path(args["input"]), config)
        elif args["command"] == "map":
            cmd_map(config)
        else:
            cmd_calibrate(Path(args["input"]), config)
    except ConfigurationError as error:
        _logger.error("configuration error: %s", error)
        return EXIT_USAGE
    except FloquetmagError as error:
        _logger.error("computation failed: %s", error)
        return EXIT_COMPUTATION
    except (OSError, ValueError) as error:
        _logger.error("cannot read input: %s", error)
        return EXIT_USAGE
    return EXIT_SUCCESS
