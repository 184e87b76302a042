"""Closed-form least-squares identification of the discrete dynamics.

Only the first row of ``X' = A X + B U`` carries unknowns (``a11, a12, b11``);
the second row is the exact gap update and is not estimated.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankDeficiencyError, TooFewSamplesError
from .model import StateMatrices, params_from_matrices

RANK_RTOL = 1e-10
MIN_SAMPLES = 4


@dataclass(frozen=True, eq=False)
class DataMatrices:
    """Column-stacked snapshots: ``x`` is (v, s) at k, ``u`` is v_l at k, ``x_next`` is (v, s) at k+1."""

    x: np.ndarray
    u: np.ndarray
    x_next: np.ndarray
    dt: float

    @property
    def regressor(self):
        return np.vstack([self.x, self.u])


def assemble_matrices(traj):
    if traj.n < MIN_SAMPLES:
        raise TooFewSamplesError(f"least squares needs at least {MIN_SAMPLES} samples, got {traj.n}")
    state = np.vstack([traj.v, traj.s])
    return DataMatrices(
        x=state[:, :-1],
        u=traj.v_l[np.newaxis, :-1],
        x_next=state[:, 1:],
        dt=traj.dt,
    )


def solve_free_entries(data):
    """Least-squares ``(a11, a12, b11)`` via SVD, refusing rank-deficient regressors."""
    reg = data.regressor.T
    target = data.x_next[0]
    coef, _, _, sv = np.linalg.lstsq(reg, target, rcond=None)
    if sv[-1] < RANK_RTOL * sv[0]:
        raise RankDeficiencyError(
            f"regressor is rank deficient (singular values {sv}); parameters are not identifiable",
            singular_values=sv,
        )
    return coef


def fit_matrices(traj):
    data = assemble_matrices(traj)
    a11, a12, b11 = solve_free_entries(data)
    return StateMatrices.from_free_entries(a11, a12, b11, data.dt)


def fit_least_squares(traj):
    """Estimate ``ModelParams`` from a measured trajectory.

    The result is not projected onto the valid parameter set; a negative
    ``k1`` is returned as-is so identification failure stays visible.
    """
    return params_from_matrices(fit_matrices(traj))
