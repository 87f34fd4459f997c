"""Plain-text persistence for measures and spectral results.

Every float is written with 17 significant digits, which round-trips a
double exactly.  Both formats end with an ``end`` line so a truncated file
is detected.  See ``docs/formats.md``.
"""

import math

import numpy as np
from scipy.spatial import cKDTree

from .errors import FormatError
from .montecarlo import EmpiricalMeasure
from .transferop import ProjGrid, SpectralResult

MEASURE_HEADER = "# projwalk measure v1"
SPECTRAL_HEADER = "# projwalk spectral v1"


def fmt(x):
    return format(float(x), ".17g")


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def _header(lines, expected):
    if not lines or lines[0].strip() != expected:
        raise FormatError(f"expected header {expected!r}", 1)


def _keyvals(lines, start, keys):
    out = {}
    for i, key in enumerate(keys):
        ln = start + i
        if ln >= len(lines):
            raise FormatError(f"file ends before the {key!r} line", ln + 1)
        name, sep, val = lines[ln].partition("=")
        if not sep or name.strip() != key:
            raise FormatError(f"expected '{key} = ...'", ln + 1)
        out[key] = val.strip()
    return out


def _int(val, line):
    try:
        return int(val)
    except ValueError:
        raise FormatError(f"not an integer: {val!r}", line) from None


def _rows(lines, start, count, width):
    if len(lines) < start + count + 1:
        raise FormatError(f"truncated: expected {count} rows and an 'end' line",
                          len(lines) + 1)
    data = np.empty((count, width))
    for i in range(count):
        ln = start + i
        parts = lines[ln].split()
        if len(parts) != width:
            raise FormatError(f"expected {width} numbers, found {len(parts)}", ln + 1)
        try:
            data[i] = [float(p) for p in parts]
        except ValueError:
            raise FormatError("malformed number", ln + 1) from None
    end = start + count
    if lines[end].strip() != "end":
        raise FormatError("expected 'end'", end + 1)
    return data


def _check_weights(w, line):
    total = math.fsum(w)
    if np.any(w < 0):
        raise FormatError("negative weight", line)
    if abs(total - 1.0) > 1e-12:
        raise FormatError(f"weights sum to {fmt(total)}, deviation {total - 1.0:.3g} from 1", line)


def save_measure(measure, path):
    rows = [MEASURE_HEADER, f"d = {measure.d}", f"count = {measure.size}"]
    for w, x in zip(measure.weights, measure.points):
        rows.append(" ".join([fmt(w), *map(fmt, x)]))
    rows.append("end")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def load_measure(path):
    lines = _lines(path)
    _header(lines, MEASURE_HEADER)
    kv = _keyvals(lines, 1, ["d", "count"])
    d, count = _int(kv["d"], 2), _int(kv["count"], 3)
    data = _rows(lines, 3, count, d + 1)
    _check_weights(data[:, 0], 3)
    try:
        return EmpiricalMeasure(data[:, 1:], data[:, 0])
    except ValueError as exc:
        raise FormatError(str(exc), 3) from None


def save_spectral(result, path):
    g = result.grid
    rows = [SPECTRAL_HEADER,
            f"s = {fmt(result.s)}",
            f"dual = {int(result.dual)}",
            f"kappa = {fmt(result.kappa)}",
            f"gap = {fmt(result.gap)}",
            f"d = {g.d}",
            f"m = {g.m}",
            "# columns: grid weight, point coordinates, r, nu"]
    for w, x, r, nu in zip(g.weights, g.points, result.r, result.nu):
        rows.append(" ".join([fmt(w), *map(fmt, x), fmt(r), fmt(nu)]))
    rows.append("end")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def load_spectral(path):
    """Reload a spectral result; the operator is not stored and comes back as None."""
    lines = _lines(path)
    _header(lines, SPECTRAL_HEADER)
    kv = _keyvals(lines, 1, ["s", "dual", "kappa", "gap", "d", "m"])
    try:
        s, kappa, gap = float(kv["s"]), float(kv["kappa"]), float(kv["gap"])
    except ValueError:
        raise FormatError("malformed number in the header block", 2) from None
    d, m = _int(kv["d"], 6), _int(kv["m"], 7)
    if not lines[7].startswith("#"):
        raise FormatError("expected the column comment", 8)
    data = _rows(lines, 8, m, d + 3)
    _check_weights(data[:, -1], 9)
    pts = data[:, 1:1 + d]
    if d == 2:
        grid = ProjGrid.angles(m)
        if not np.array_equal(pts, grid.points):
            raise FormatError("d = 2 points are not the standard angle grid", 9)
    else:
        grid = ProjGrid(d, m, pts, data[:, 0], cKDTree(np.concatenate([pts, -pts])))
    return SpectralResult(s, kappa, data[:, -2].copy(), data[:, -1].copy(), gap,
                          None, grid, kv["dual"] == "1")
