"""Simulated-vs-measured error metrics."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .simulate import simulate_follower
from .trajectory import Histogram

DEFAULT_BINS = 50


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DataError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size < 1:
        raise DataError("empty series")
    return a, b


def mae(a, b):
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)))


def rmse(a, b):
    a, b = _pair(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def error_histogram(err, bins=DEFAULT_BINS):
    """Equal-width bins over the symmetric range ``[-max|err|, max|err|]``."""
    err = np.asarray(err, dtype=float)
    half = float(np.max(np.abs(err))) if err.size else 0.0
    if half == 0.0:
        half = 1.0
    counts, edges = np.histogram(err, bins=bins, range=(-half, half))
    return Histogram(counts, edges)


@dataclass(frozen=True, eq=False)
class FitReport:
    """Errors are simulated minus measured."""

    mae_speed: float
    mae_spacing: float
    rmse_spacing: float
    pct_err_speed: float
    pct_err_spacing: float
    mean_err_speed: float
    mean_err_spacing: float
    std_err_speed: float
    std_err_spacing: float
    histogram_speed: Histogram
    histogram_spacing: Histogram

    SCALARS = ("mae_speed", "mae_spacing", "rmse_spacing", "pct_err_speed", "pct_err_spacing",
               "mean_err_speed", "mean_err_spacing", "std_err_speed", "std_err_spacing")

    def to_dict(self, histograms=True):
        d = {k: getattr(self, k) for k in self.SCALARS}
        if histograms:
            d["histogram_speed"] = self.histogram_speed.to_dict()
            d["histogram_spacing"] = self.histogram_spacing.to_dict()
        return d

    def csv_row(self, header=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(self.SCALARS)
        w.writerow([format(getattr(self, k), ".17g") for k in self.SCALARS])
        return buf.getvalue()


def fit_report(measured, params, bins=DEFAULT_BINS):
    """Simulate ``params`` from the first measured sample and score it.

    Percent errors are MAE over the mean of the measured series, times 100.
    """
    sim = simulate_follower(params, measured.v_l, measured.v[0], measured.s[0], measured.dt)
    ev = sim.v - measured.v
    es = sim.s - measured.s
    mae_v = float(np.mean(np.abs(ev)))
    mae_s = float(np.mean(np.abs(es)))
    return FitReport(
        mae_speed=mae_v,
        mae_spacing=mae_s,
        rmse_spacing=float(np.sqrt(np.mean(es ** 2))),
        pct_err_speed=100.0 * mae_v / float(np.mean(measured.v)),
        pct_err_spacing=100.0 * mae_s / float(np.mean(measured.s)),
        mean_err_speed=float(ev.mean()),
        mean_err_spacing=float(es.mean()),
        std_err_speed=float(ev.std()),
        std_err_spacing=float(es.std()),
        histogram_speed=error_histogram(ev, bins),
        histogram_spacing=error_histogram(es, bins),
    )
