"""CSV formats for the measurement/reconstruction/tracking pipeline.

Four row formats travel between the pipeline stages: measurement rows,
simulation ground truth, per-row search results, and per-interval trajectory
estimates. All numbers are written with 9 significant digits, '.' decimal
separator, and a bare newline terminator, so identical inputs produce
byte-identical files on every platform. Failed search rows keep their row
(status column) with the numeric cells left empty.

Readers validate eagerly and raise :class:`FormatError` with the offending
file and line number.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .reconstruct import NoSolution, NoSolutionReason, ReflectionSolution
from .routing import IntervalEstimate, TrajectoryEstimate
from .scene import DataPoint, GroundTruth

DATAPOINT_COLUMNS = ("xl", "yl", "zl", "xr", "yr", "zr",
                     "phi", "theta", "t", "xi", "interval")
GROUNDTRUTH_COLUMNS = ("k", "px", "py", "pz", "tau", "r_phi", "r_theta", "interval")
SOLUTION_COLUMNS = ("k", "px", "py", "pz", "tau", "a_phi", "a_theta",
                    "residual_d", "residual_t", "status")
TRAJECTORY_COLUMNS = ("interval", "cx", "cy", "cz", "count", "radius")

_STATUS_OK = "ok"


class FormatError(ValueError):
    """A pipeline file failed structural or semantic validation."""


def _fmt(x):
    return format(float(x), ".9g")


def _open_writer(path):
    f = open(path, "w", newline="")
    return f, csv.writer(f, lineterminator="\n")


def _check_header(path, row, expected):
    if row is None:
        raise FormatError(f"{path} line 1: empty file, expected header "
                          f"{','.join(expected)}")
    if tuple(row) != tuple(expected):
        raise FormatError(f"{path} line 1: bad header {','.join(row)!r}, "
                          f"expected {','.join(expected)}")


def _float_cell(path, line, name, value):
    try:
        x = float(value)
    except ValueError:
        raise FormatError(f"{path} line {line}: column {name} is not a number: "
                          f"{value!r}") from None
    if not np.isfinite(x):
        raise FormatError(f"{path} line {line}: column {name} must be finite")
    return x


def _int_cell(path, line, name, value):
    try:
        return int(value)
    except ValueError:
        raise FormatError(f"{path} line {line}: column {name} is not an integer: "
                          f"{value!r}") from None


def _rows(path, expected):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        _check_header(path, header, expected)
        for row in reader:
            if not row:
                continue
            if len(row) != len(expected):
                raise FormatError(f"{path} line {reader.line_num}: expected "
                                  f"{len(expected)} cells, got {len(row)}")
            yield reader.line_num, row


def write_datapoints(path, datapoints):
    """Write measurement rows; columns are the canonical measurement tuple."""
    f, w = _open_writer(path)
    with f:
        w.writerow(DATAPOINT_COLUMNS)
        for dp in datapoints:
            w.writerow([_fmt(dp.xl), _fmt(dp.yl), _fmt(dp.zl),
                        _fmt(dp.xr), _fmt(dp.yr), _fmt(dp.zr),
                        _fmt(dp.phi), _fmt(dp.theta), _fmt(dp.t), _fmt(dp.xi),
                        str(int(dp.interval))])


def read_datapoints(path):
    """Read and validate measurement rows."""
    out = []
    for line, row in _rows(path, DATAPOINT_COLUMNS):
        vals = [_float_cell(path, line, name, cell)
                for name, cell in zip(DATAPOINT_COLUMNS[:-1], row[:-1])]
        interval = _int_cell(path, line, "interval", row[-1])
        dp = DataPoint(*vals, interval)
        if not dp.t > 0.0:
            raise FormatError(f"{path} line {line}: t must be positive")
        if not dp.xi > 0.0:
            raise FormatError(f"{path} line {line}: xi must be positive")
        if not 0.0 < dp.phi < np.pi:
            raise FormatError(f"{path} line {line}: phi must lie in (0, pi)")
        if not 0.0 <= dp.theta < 2.0 * np.pi:
            raise FormatError(f"{path} line {line}: theta must lie in [0, 2*pi)")
        if interval < 0:
            raise FormatError(f"{path} line {line}: interval must be >= 0")
        out.append(dp)
    return out


def write_groundtruth(path, truths):
    f, w = _open_writer(path)
    with f:
        w.writerow(GROUNDTRUTH_COLUMNS)
        for g in truths:
            w.writerow([str(int(g.k)), _fmt(g.px), _fmt(g.py), _fmt(g.pz),
                        _fmt(g.tau), _fmt(g.r_phi), _fmt(g.r_theta),
                        str(int(g.interval))])


def read_groundtruth(path):
    out = []
    for line, row in _rows(path, GROUNDTRUTH_COLUMNS):
        k = _int_cell(path, line, "k", row[0])
        vals = [_float_cell(path, line, name, cell)
                for name, cell in zip(GROUNDTRUTH_COLUMNS[1:-1], row[1:-1])]
        interval = _int_cell(path, line, "interval", row[-1])
        out.append(GroundTruth(k, *vals, interval))
    return out


@dataclass(frozen=True)
class SolutionRow:
    """One search-result row as stored on disk.

    ``status`` is ``"ok"`` or a failure reason; numeric fields are None for
    failed rows.
    """

    k: int
    px: float | None
    py: float | None
    pz: float | None
    tau: float | None
    a_phi: float | None
    a_theta: float | None
    residual_d: float | None
    residual_t: float | None
    status: str

    @property
    def solved(self):
        return self.status == _STATUS_OK

    @property
    def point(self):
        return np.array([self.px, self.py, self.pz])


def write_solutions(path, results):
    """Write one row per search result, in input order (row index = k)."""
    f, w = _open_writer(path)
    with f:
        w.writerow(SOLUTION_COLUMNS)
        for k, res in enumerate(results):
            if isinstance(res, ReflectionSolution):
                w.writerow([str(k), _fmt(res.px), _fmt(res.py), _fmt(res.pz),
                            _fmt(res.tau), _fmt(res.receiver_phi),
                            _fmt(res.receiver_theta),
                            _fmt(res.residual_distance), _fmt(res.residual_time),
                            _STATUS_OK])
            elif isinstance(res, NoSolution):
                w.writerow([str(k), "", "", "", "", "", "", "", "",
                            res.reason.value])
            else:
                raise FormatError(f"cannot serialize result of type {type(res)!r}")


_VALID_STATUS = {_STATUS_OK} | {r.value for r in NoSolutionReason}


def read_solutions(path):
    out = []
    for line, row in _rows(path, SOLUTION_COLUMNS):
        k = _int_cell(path, line, "k", row[0])
        status = row[-1]
        if status not in _VALID_STATUS:
            raise FormatError(f"{path} line {line}: unknown status {status!r}")
        if status == _STATUS_OK:
            vals = [_float_cell(path, line, name, cell)
                    for name, cell in zip(SOLUTION_COLUMNS[1:-1], row[1:-1])]
            out.append(SolutionRow(k, *vals, status))
        else:
            if any(cell != "" for cell in row[1:-1]):
                raise FormatError(f"{path} line {line}: failed rows must have "
                                  f"empty numeric cells")
            out.append(SolutionRow(k, *([None] * 8), status))
    return out


def write_trajectory(path, estimate: TrajectoryEstimate):
    """Write per-interval centroids; gap intervals keep empty position cells."""
    f, w = _open_writer(path)
    with f:
        w.writerow(TRAJECTORY_COLUMNS)
        for est in estimate.intervals:
            if est.gap:
                w.writerow([str(est.interval), "", "", "", "0", ""])
            else:
                cx, cy, cz = est.centroid
                w.writerow([str(est.interval), _fmt(cx), _fmt(cy), _fmt(cz),
                            str(est.count), _fmt(est.radius)])


def read_trajectory(path):
    out = []
    for line, row in _rows(path, TRAJECTORY_COLUMNS):
        interval = _int_cell(path, line, "interval", row[0])
        count = _int_cell(path, line, "count", row[4])
        if count == 0:
            out.append(IntervalEstimate(interval, 0, None, 0.0))
            continue
        cx = _float_cell(path, line, "cx", row[1])
        cy = _float_cell(path, line, "cy", row[2])
        cz = _float_cell(path, line, "cz", row[3])
        radius = _float_cell(path, line, "radius", row[5])
        out.append(IntervalEstimate(interval, count, (cx, cy, cz), radius))
    return TrajectoryEstimate(tuple(out))
