"""Import and export of series, spectra, harmonic maps and reports (CSV and JSON)."""

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

import csv
import io
import logging
import math
import os
import tempfile
import zipfile
from collections.abc import Mapping, Sequence
from json import dumps, loads
from pathlib import Path
from typing import Any, Final, Optional, Union

import numpy as np

from floquetmag.calibration import CalibrationResult, FieldEstimate
from floquetmag.readout import TimeSeries
from floquetmag.spectral import HarmonicMap, Spectrum

_logger = logging.getLogger(__name__)

SCHEMA_VERSION: Final[int] = 1
SERIES_COLUMNS: Final[tuple[str, ...]] = ("index", "time_s", "value", "unit")
HARMONIC_COLUMNS: Final[tuple[str, ...]] = (
    "k",
    "frequency",
    "amplitude",
    "phase",
    "converged",
    "detected",
)
CALIBRATION_LAYOUTS: Final[dict[tuple[str, ...], str]] = {
    ("drive", "k", "amplitude"): "bessel",
    ("tau", "p0"): "tau",
    ("drive", "field"): "linear",
}

_ZIP_DATE: Final[tuple[int, int, int, int, int, int]] = (1980, 1, 1, 0, 0, 0)

PathLike = Union[str, os.PathLike]


def _number(value: float) -> str:
    """
    Format a float for CSV output, reproducibly and without loss.

    >>> _number(0.5), _number(2e-06), _number(3)
    ('0.5', '2e-06', '3')
    """
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _finite_or_none(value: float) -> Optional[float]:
    """Return ``value``, or ``None`` when it is not finite."""
    return float(value) if math.isfinite(value) else None


def _envelope(kind: str, payload: Mapping[str, Any]) -> str:
    """Wrap ``payload`` with its kind and the schema version."""
    document = {"schema_version": SCHEMA_VERSION, "kind": kind}
    document.update(payload)
    return dumps(document, indent=2) + "\n"


def _open_envelope(json_text: str, kind: str) -> dict:
    """Parse an envelope and check its kind and schema version."""
    document = loads(json_text)
    if document.get("kind") != kind:
        raise ValueError(f'Expected a "{kind}" document.')
    if document.get("schema_version") != SCHEMA_VERSION:
        version = document.get("schema_version")
        raise ValueError(f"Unsupported schema version {version}.")
    return document


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """Return RFC-4180 style CSV text with a header row."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else _number(v) for v in row])
    return buffer.getvalue()


def write_atomic(path: PathLike, content: Union[str, bytes]) -> Path:
    """Write a file through a temporary file in the same directory and rename it."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    data = content.encode("utf-8") if isinstance(content, str) else content
    handle, temporary = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    try:
        with os.fdopen(handle, "wb") as stream:
            stream.write(data)
        os.replace(temporary, target)
    except BaseException:
        if os.path.exists(temporary):
            os.unlink(temporary)
        raise
    _logger.info("wrote %s", target)
    return target


def series_to_csv(series: TimeSeries) -> str:
    """Return a series as CSV with columns ``index, time_s, value, unit``."""
    rows = [
        (index, index * series.dt, value, series.unit)
        for index, value in enumerate(series.values.tolist())
    ]
    return _csv_text(SERIES_COLUMNS, rows)


def csv_to_series(csv_text: str) -> TimeSeries:
    """Read a series written by :func:`series_to_csv`."""
    reader = csv.reader(io.StringIO(csv_text))
    header = tuple(next(reader, ()))
    if header != SERIES_COLUMNS:
        raise ValueError(f"Expected the columns {', '.join(SERIES_COLUMNS)}.")
    rows = [row for row in reader if row]
    if len(rows) < 2:
        raise ValueError("A series needs at least two samples.")
    units = {row[3] for row in rows}
    if len(units) != 1:
        raise ValueError("A series must have a single unit.")
    values = np.array([float(row[2]) for row in rows])
    dt = float(rows[1][1]) - float(rows[0][1])
    return TimeSeries(values, dt, units.pop())  # type: ignore[arg-type]


def series_to_npz(series: TimeSeries) -> bytes:
    """
    Return a series as ``.npz`` bytes with arrays ``values``, ``dt`` and ``unit``.

    Archive members carry a fixed timestamp, so equal series give equal bytes.
    """
    arrays = {
        "values": series.values,
        "dt": np.array(series.dt),
        "unit": np.array(series.unit),
    }
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as archive:
        for name, array in arrays.items():
            member = io.BytesIO()
            np.lib.format.write_array(member, np.asanyarray(array), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_DATE)
            info.compress_type = zipfile.ZIP_DEFLATED
            archive.writestr(info, member.getvalue())
    return buffer.getvalue()


def npz_to_series(data: bytes) -> TimeSeries:
    """Read a series written by :func:`series_to_npz`."""
    with np.load(io.BytesIO(data), allow_pickle=False) as archive:
        unit = str(archive["unit"])
        return TimeSeries(archive["values"], float(archive["dt"]), unit)  # type: ignore


def read_series(path: PathLike) -> TimeSeries:
    """Read a series from a ``.csv`` or ``.npz`` file."""
    target = Path(path)
    if target.suffix == ".npz":
        return npz_to_series(target.read_bytes())
    return csv_to_series(target.read_text(encoding="utf-8"))


def spectrum_to_csv(spectrum: Spectrum) -> str:
    """
    Return the non-negative frequency half of a spectrum as CSV.

    Columns are ``frequency, real, imag, amplitude`` with
    ``amplitude = 2|X|/T``.
    """
    keep = spectrum.frequencies >= 0
    frequencies = spectrum.frequencies[keep]
    values = spectrum.values[keep]
    order = np.argsort(frequencies, kind="stable")
    amplitudes = 2 * np.abs(values) / spectrum.duration
    rows = [
        (frequencies[i], values[i].real, values[i].imag, amplitudes[i]) for i in order
    ]
    return _csv_text(("frequency", "real", "imag", "amplitude"), rows)


def harmonics_to_csv(rows: Sequence[Mapping[str, Any]]) -> str:
    """Return a harmonic table (see :func:`spectral.harmonic_table`) as CSV."""
    header = [c for c in HARMONIC_COLUMNS if not rows or c in rows[0]]
    return _csv_text(header, [[row[c] for c in header] for row in rows])


def harmonics_to_json(
    rows: Sequence[Mapping[str, Any]], alias_frequency: float, noise_floor: float
) -> str:
    """Return a harmonic table as a JSON envelope."""
    return _envelope(
        "harmonics",
        {
            "alias_frequency": alias_frequency,
            "noise_floor": noise_floor,
            "harmonics": [dict(row) for row in rows],
        },
    )


def harmonic_map_to_json(harmonic_map: HarmonicMap) -> str:
    """
    Return a harmonic map as a JSON envelope with axes and a row-major grid.

    Missing values are written as ``null``.
    """
    return _envelope(
        "harmonic_map",
        {
            "amplitude_unit": "T",
            "amplitudes": [float(b) for b in harmonic_map.amplitudes],
            "orders": [int(k) for k in harmonic_map.orders],
            "grid": [[_finite_or_none(v) for v in row] for row in harmonic_map.grid],
        },
    )


def json_to_harmonic_map(json_text: str) -> HarmonicMap:
    """Read a map written by :func:`harmonic_map_to_json`."""
    document = _open_envelope(json_text, "harmonic_map")
    grid = np.array(
        [[math.nan if v is None else v for v in row] for row in document["grid"]],
        dtype=float,
    ).reshape(len(document["amplitudes"]), len(document["orders"]))
    return HarmonicMap(document["amplitudes"], document["orders"], grid)


def harmonic_map_to_csv(harmonic_map: HarmonicMap) -> str:
    """Return a map in long format: ``b_ac, k, amplitude`` per grid cell."""
    rows = [
        (b, int(k), harmonic_map.grid[i, j])
        for i, b in enumerate(harmonic_map.amplitudes.tolist())
        for j, k in enumerate(harmonic_map.orders.tolist())
    ]
    return _csv_text(("b_ac", "k", "amplitude"), rows)


def calibration_to_json(
    result: Union[CalibrationResult, FieldEstimate], method: str, unit: str = ""
) -> str:
    """Return a calibration report as a JSON envelope."""
    if isinstance(result, FieldEstimate):
        payload: dict[str, Any] = {
            "method": method,
            "field_amplitude": result.amplitude,
            "uncertainty": _finite_or_none(result.uncertainty),
            "n_points": result.n_points,
        }
    else:
        payload = {
            "method": method,
            "conversion_coefficient": result.conversion_coefficient,
            "uncertainty": _finite_or_none(result.uncertainty),
            "unit": f"T/{unit}" if unit else "T/unit",
            "goodness_of_fit": result.goodness_of_fit,
            "field_estimates": [
                {"drive": drive, "field": field}
                for drive, field in result.field_estimates
            ],
            "residuals": list(result.residuals),
        }
    return _envelope("calibration", payload)


def read_calibration_csv(csv_text: str) -> tuple[str, list[tuple[float, ...]]]:
    """
    Read calibration data and detect its layout from the header.

    The layouts are ``drive,k,amplitude`` (Bessel fit), ``tau,p0`` (τ sweep)
    and ``drive,field`` (linear fit).

    >>> read_calibration_csv("tau,p0\\r\\n1e-06,0.25\\r\\n")
    ('tau', [(1e-06, 0.25)])
    """
    reader = csv.reader(io.StringIO(csv_text))
    header = tuple(name.strip().lower() for name in next(reader, ()))
    if header not in CALIBRATION_LAYOUTS:
        raise ValueError(f"Unrecognized calibration columns: {', '.join(header)}.")
    rows = [tuple(float(value) for value in row) for row in reader if row]
    return CALIBRATION_LAYOUTS[header], rows


def manifest_to_json(
    command: str,
    parameters: Mapping[str, Any],
    seed: int,
    files: Sequence[str],
    created: str,
) -> str:
    """
    Return the run manifest.

    ``created`` is the only field that changes between identical runs.
    """
    return _envelope(
        "manifest",
        {
            "command": command,
            "seed": seed,
            "parameters": dict(parameters),
            "files": list(files),
            "created": created,
        },
    )
