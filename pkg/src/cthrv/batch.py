"""Simulation-in-the-loop calibration: minimize RMSE spacing error with
multi-start bounded Nelder-Mead."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import kernels
from ._backend import thread_count
from .errors import ValidationError
from .model import ModelParams

DEFAULT_BOUNDS = ((0.001, 2.0), (0.001, 2.0), (0.1, 3.0))


@dataclass(frozen=True)
class BatchConfig:
    bounds: tuple = DEFAULT_BOUNDS
    n_starts: int = 10
    max_evals: int = 2000
    seed: int = 0
    ftol: float = 1e-8
    xtol: float = 1e-8

    def __post_init__(self):
        bounds = tuple(tuple(float(x) for x in b) for b in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if len(bounds) != 3 or any(len(b) != 2 for b in bounds):
            raise ValidationError("bounds must be three (low, high) pairs for k1, k2, tau")
        for lo, hi in bounds:
            if not (0 < lo < hi):
                raise ValidationError(f"bounds need 0 < low < high, got ({lo}, {hi})")
        if self.n_starts < 1:
            raise ValidationError(f"n_starts must be >= 1, got {self.n_starts}")
        if self.max_evals < 100:
            raise ValidationError(f"max_evals must be >= 100, got {self.max_evals}")
        if not (self.ftol > 0 and self.xtol > 0):
            raise ValidationError("ftol and xtol must be > 0")

    def to_dict(self):
        return {"bounds": [list(b) for b in self.bounds], "n_starts": self.n_starts,
                "max_evals": self.max_evals, "seed": self.seed, "ftol": self.ftol, "xtol": self.xtol}

    @classmethod
    def from_dict(cls, d):
        known = {"bounds", "n_starts", "max_evals", "seed", "ftol", "xtol"}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown batch config keys: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True)
class StartRecord:
    initial: ModelParams
    final: ModelParams
    objective: float
    evaluations: int


@dataclass(frozen=True, eq=False)
class BatchResult:
    params: ModelParams
    objective: float
    per_start: list = field(default_factory=list)

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "objective": self.objective,
            "per_start": [
                {"initial": r.initial.to_dict(), "final": r.final.to_dict(),
                 "objective": r.objective, "evaluations": r.evaluations}
                for r in self.per_start
            ],
        }


def _rmse_raw(theta, traj):
    v, s, hit = kernels.euler_follower(theta[0], theta[1], theta[2], traj.v_l,
                                       traj.v[0], traj.s[0], traj.dt)
    if hit >= 0:
        return math.inf
    val = math.sqrt(float(np.mean((traj.s - s) ** 2)))
    return val if math.isfinite(val) else math.inf


def rmse_spacing(params, traj):
    """RMSE between measured gap and the gap simulated from ``(v[0], s[0])``.

    All ``n`` samples count, including the zero-error first one. Returns
    ``inf`` when the simulated gap collapses.
    """
    return _rmse_raw((params.k1, params.k2, params.tau), traj)


def draw_starts(config):
    rng = np.random.default_rng(config.seed)
    lo = np.array([b[0] for b in config.bounds])
    hi = np.array([b[1] for b in config.bounds])
    return lo + (hi - lo) * rng.random((config.n_starts, 3))


def _descend(x0, traj, config, history=None):
    def objective(theta):
        f = _rmse_raw(theta, traj)
        if history is not None:
            history.append(f)
        return f

    with warnings.catch_warnings():
        # inf objectives at simplex vertices are expected near collision regions
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(
            objective, x0, method="Nelder-Mead", bounds=config.bounds,
            options={"maxfev": config.max_evals, "xatol": config.xtol, "fatol": config.ftol},
        )
    return StartRecord(
        initial=ModelParams.unchecked(*x0),
        final=ModelParams.unchecked(*res.x),
        objective=float(res.fun),
        evaluations=int(res.nfev),
    )


def select_best(records):
    """Index of the lowest objective; ties go to the earliest start."""
    best = 0
    for i, r in enumerate(records):
        if r.objective < records[best].objective:
            best = i
    return best


def fit_batch(traj, config=None, threads=None):
    """Multi-start bounded Nelder-Mead on :func:`rmse_spacing`.

    Starts are drawn up front from the seeded RNG and are independent, so
    running them on several threads does not change the result.
    """
    config = config or BatchConfig()
    starts = draw_starts(config)
    workers = min(threads or thread_count(), config.n_starts)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = list(pool.map(lambda x0: _descend(x0, traj, config), starts))
    else:
        records = [_descend(x0, traj, config) for x0 in starts]
    best = records[select_best(records)]
    return BatchResult(params=best.final, objective=best.objective, per_start=records)
