"""Trajectory container, CSV I/O, resampling and radar-vs-GPS statistics."""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, TooFewSamplesError, ValidationError

SPACING_TOL = 1e-6
DT_DECIMALS = 9
DEFAULT_BIN_GAP = 0.1
DEFAULT_BIN_SPEED = 0.05


class TrajectoryFormat(str, enum.Enum):
    """CSV column layouts.

    ``LEAD_SPEED``: ``time,v,s,v_l``; ``RELATIVE_SPEED``: ``time,v,s,dv``
    with ``v_l`` reconstructed as ``v + dv``.
    """

    LEAD_SPEED = "lead-speed"
    RELATIVE_SPEED = "relative-speed"


_COLUMNS = {
    TrajectoryFormat.LEAD_SPEED: ("time", "v", "s", "v_l"),
    TrajectoryFormat.RELATIVE_SPEED: ("time", "v", "s", "dv"),
}


def _frozen(x):
    a = np.array(x, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled follower speed, space gap and lead speed."""

    dt: float
    v: np.ndarray
    s: np.ndarray
    v_l: np.ndarray
    t0: float = 0.0
    n: int = field(init=False)

    def __post_init__(self):
        v, s, v_l = _frozen(self.v), _frozen(self.s), _frozen(self.v_l)
        if not (v.ndim == s.ndim == v_l.ndim == 1):
            raise DataError("series must be one-dimensional")
        if not (len(v) == len(s) == len(v_l)):
            raise DataError(f"series lengths differ: v={len(v)}, s={len(s)}, v_l={len(v_l)}")
        if len(v) < 2:
            raise TooFewSamplesError(f"need at least 2 samples, got {len(v)}")
        if not float(self.dt) > 0:
            raise ValidationError(f"dt must be > 0, got {self.dt}")
        if not (np.isfinite(v).all() and np.isfinite(s).all() and np.isfinite(v_l).all()):
            raise DataError("series contain non-finite values")
        if not (s > 0).all():
            k = int(np.argmin(s > 0))
            raise DataError(f"non-positive space gap {s[k]} at sample {k}")
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "v_l", v_l)
        object.__setattr__(self, "n", len(v))

    @property
    def time(self):
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def dv(self):
        return self.v_l - self.v

    @property
    def duration(self):
        return self.dt * (self.n - 1)

    def equals(self, other):
        """Exact (bitwise on values) equality."""
        return (self.dt == other.dt and self.t0 == other.t0 and self.n == other.n
                and np.array_equal(self.v, other.v) and np.array_equal(self.s, other.s)
                and np.array_equal(self.v_l, other.v_l))

    def shifted(self, offset):
        return Trajectory(self.dt, self.v, self.s, self.v_l, t0=self.t0 + offset)


def load_trajectory(source, format=TrajectoryFormat.LEAD_SPEED):
    """Parse a headed CSV into a validated :class:`Trajectory`.

    ``source`` may be a path, a text stream or a bytes stream. ``dt`` is the
    first sampling interval rounded to nanoseconds; every other interval must
    match it within 1e-6 s.
    """
    fmt = TrajectoryFormat(format)
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            raw = fh.read()
    else:
        raw = source.read()
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise DataError(f"input is not UTF-8: {exc}") from None

    reader = csv.reader(io.StringIO(raw))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty CSV input") from None
    header = [h.strip() for h in header]
    want = _COLUMNS[fmt]
    missing = [c for c in want if c not in header]
    if missing:
        raise DataError(f"missing column(s) {missing}; header is {header}")
    cols = [header.index(c) for c in want]

    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec or all(not f.strip() for f in rec):
            continue
        if len(rec) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(rec)}")
        try:
            rows.append([float(rec[c]) for c in cols])
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
    if len(rows) < 2:
        raise TooFewSamplesError(f"need at least 2 rows, got {len(rows)}")

    data = np.array(rows)
    t, v, s, last = data.T
    steps = np.diff(t)
    dt = round(float(steps[0]), DT_DECIMALS)
    if not dt > 0:
        raise DataError("timestamps must be strictly increasing")
    bad = np.flatnonzero(np.abs(steps - dt) > SPACING_TOL)
    if bad.size:
        k = int(bad[0])
        raise DataError(f"non-uniform timestamps: interval {steps[k]!r} at row {k + 1}, expected {dt!r}")
    v_l = last if fmt is TrajectoryFormat.LEAD_SPEED else v + last
    return Trajectory(dt, v, s, v_l, t0=float(t[0]))


def _g17(x):
    return format(float(x), ".17g")


def emit_trajectory(traj, dest):
    """Write ``traj`` as ``time,v,s,v_l`` CSV with 17 significant digits."""
    if isinstance(dest, str) or hasattr(dest, "__fspath__"):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            return emit_trajectory(traj, fh)
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(_COLUMNS[TrajectoryFormat.LEAD_SPEED])
    for row in zip(traj.time, traj.v, traj.s, traj.v_l):
        w.writerow([_g17(x) for x in row])


def trajectory_to_csv(traj):
    buf = io.StringIO()
    emit_trajectory(traj, buf)
    return buf.getvalue()


def resample_uniform(times, values, dt_out):
    """Linearly interpolate ``values`` onto ``t0, t0+dt_out, ...`` within the input range."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size == 0:
        raise DataError("cannot resample an empty series")
    if times.shape != values.shape:
        raise DataError("times and values differ in shape")
    if not dt_out > 0:
        raise ValidationError(f"dt_out must be > 0, got {dt_out}")
    if times.size > 1 and not (np.diff(times) > 0).all():
        raise DataError("times must be strictly increasing")
    span = times[-1] - times[0]
    # tolerate float slop in span/dt_out so an exact grid endpoint is kept
    n = int(np.floor(span / dt_out + 1e-9)) + 1
    grid = times[0] + dt_out * np.arange(n)
    return np.interp(grid, times, values)


@dataclass(frozen=True, eq=False)
class Histogram:
    counts: np.ndarray
    edges: np.ndarray

    def to_dict(self):
        return {"counts": self.counts.tolist(), "edges": self.edges.tolist()}


@dataclass(frozen=True, eq=False)
class SensorComparison:
    mean_gap_err: float
    std_gap_err: float
    mean_rel_speed_err: float
    std_rel_speed_err: float
    histogram_gap: Histogram
    histogram_rel_speed: Histogram
    n: int

    def to_dict(self):
        return {
            "n": self.n,
            "mean_gap_err": self.mean_gap_err,
            "std_gap_err": self.std_gap_err,
            "mean_rel_speed_err": self.mean_rel_speed_err,
            "std_rel_speed_err": self.std_rel_speed_err,
            "histogram_gap": self.histogram_gap.to_dict(),
            "histogram_rel_speed": self.histogram_rel_speed.to_dict(),
        }


def centered_histogram(x, bin_width):
    """Histogram whose bins are centred on integer multiples of ``bin_width``."""
    if not bin_width > 0:
        raise ValidationError(f"bin width must be > 0, got {bin_width}")
    x = np.asarray(x, dtype=float)
    lo = int(np.floor(x.min() / bin_width + 0.5))
    hi = int(np.floor(x.max() / bin_width + 0.5))
    edges = (np.arange(lo, hi + 2) - 0.5) * bin_width
    # guard against the extreme samples landing a rounding error outside
    edges[0] = min(edges[0], x.min())
    edges[-1] = max(edges[-1], x.max())
    counts, _ = np.histogram(x, bins=edges)
    return Histogram(counts, edges)


def compare_sensors(radar, gps, bin_width_gap=DEFAULT_BIN_GAP, bin_width_speed=DEFAULT_BIN_SPEED):
    """Radar-minus-GPS differences in gap and relative speed, with population stds."""
    if radar.n != gps.n:
        raise DataError(f"length mismatch: radar n={radar.n}, gps n={gps.n}; resample first")
    if abs(radar.dt - gps.dt) > SPACING_TOL:
        raise DataError(f"sample period mismatch: {radar.dt} vs {gps.dt}")
    gap_err = radar.s - gps.s
    speed_err = radar.dv - gps.dv
    return SensorComparison(
        mean_gap_err=float(gap_err.mean()),
        std_gap_err=float(gap_err.std()),
        mean_rel_speed_err=float(speed_err.mean()),
        std_rel_speed_err=float(speed_err.std()),
        histogram_gap=centered_histogram(gap_err, bin_width_gap),
        histogram_rel_speed=centered_histogram(speed_err, bin_width_speed),
        n=radar.n,
    )
