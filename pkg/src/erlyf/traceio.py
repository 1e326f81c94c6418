"""Trace container and CSV persistence.

All files are comma-separated with a header row, ``.`` decimals, UTF-8 and
LF line endings.  Frequencies are written in MHz or GHz (linear), fields in
mT, delays in ns; the in-memory containers keep SI/angular units.  Floats
are written with ``repr``, the shortest round-tripping form, so identical
runs produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError, TraceFormatError

TRACE_HEADER = ("detuning_MHz", "amplitude_dB", "phase_rad")
TRACE_HEADER_WITH_DELAY = TRACE_HEADER + ("delay_ns",)


@dataclass(frozen=True)
class OvnaTrace:
    """One heterodyne sweep: probe detuning (Hz), amplitude (dB), phase (rad)."""

    frequency: np.ndarray
    amplitude_db: np.ndarray
    phase_rad: np.ndarray
    weight: np.ndarray | None = None

    def __post_init__(self):
        f = np.asarray(self.frequency, dtype=float)
        if f.size < 8:
            raise InvalidParameterError(f"a trace needs at least 8 points, got {f.size}")
        if not np.all(np.diff(f) > 0.0):
            raise InvalidParameterError("trace frequencies must be strictly increasing")
        for name in ("amplitude_db", "phase_rad"):
            if np.asarray(getattr(self, name)).size != f.size:
                raise InvalidParameterError(f"{name} length does not match the frequency grid")
        if self.weight is not None and np.asarray(self.weight).size != f.size:
            raise InvalidParameterError("weight length does not match the frequency grid")

    @property
    def npoints(self) -> int:
        return np.asarray(self.frequency).size


def _format_row(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def write_table(path, header, columns) -> None:
    """Write named columns as CSV (comma, header row, LF endings)."""
    columns = [np.asarray(c) for c in columns]
    if len(header) != len(columns):
        raise InvalidParameterError("header and column count differ")
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(_format_row(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Read a CSV written by :func:`write_table`; returns (header, rows)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TraceFormatError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise TraceFormatError(f"{path}: row has {len(parts)} fields, header has {len(header)}")
        try:
            rows.append([float(v) for v in parts])
        except ValueError as exc:
            raise TraceFormatError(f"{path}: non-numeric value in row {ln!r}") from exc
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def write_trace(path, trace: OvnaTrace, delay_s: np.ndarray | None = None) -> None:
    """Write a trace; detuning in MHz, optional delay column in ns."""
    columns = [np.asarray(trace.frequency) * 1e-6, trace.amplitude_db, trace.phase_rad]
    header = TRACE_HEADER
    if delay_s is not None:
        header = TRACE_HEADER_WITH_DELAY
        columns.append(np.asarray(delay_s) * 1e9)
    write_table(path, header, columns)


def read_trace(path) -> OvnaTrace:
    """Read a trace CSV (with or without the delay column)."""
    header, rows = read_table(path)
    expected = list(TRACE_HEADER)
    if [h.lower() for h in header[:3]] != [h.lower() for h in expected]:
        raise TraceFormatError(f"{path}: expected columns {expected}, got {header[:3]}")
    if rows.shape[0] == 0:
        raise TraceFormatError(f"{path}: no data rows")
    return OvnaTrace(
        frequency=rows[:, 0] * 1e6,
        amplitude_db=rows[:, 1],
        phase_rad=rows[:, 2],
    )


def write_fit_report(path, parameters, standard_errors, extras=None) -> None:
    """Human-readable fit report: one ``key = value +- stderr`` line each."""
    lines = []
    for key, value in parameters.items():
        err = standard_errors.get(key)
        if err is None:
            lines.append(f"{key} = {value!r} (fixed)")
        elif np.isnan(err):
            lines.append(f"{key} = {value!r} +- unidentifiable")
        else:
            lines.append(f"{key} = {value!r} +- {err!r}")
    for key, value in (extras or {}).items():
        lines.append(f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_fit_csv(path, parameters, standard_errors) -> None:
    """Machine-readable fit report: parameter,value,stderr rows."""
    lines = ["parameter,value,stderr"]
    for key, value in parameters.items():
        err = standard_errors.get(key)
        err_text = "" if err is None else repr(float(err))
        lines.append(f"{key},{float(value)!r},{err_text}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
