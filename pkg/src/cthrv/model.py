"""Constant-time-headway relative-velocity (CTH-RV) car-following model.

The follower acceleration is::

    dv/dt = k1 * (s - tau * v) + k2 * dv

with ``dv = v_l - v`` (lead speed minus follower speed) everywhere in this
package. Discretized with forward Euler at step ``dt`` the state
``x = (v, s)`` evolves as ``x[k+1] = A x[k] + B v_l[k]``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDynamicsError, ValidationError

MARGINAL_TOL = 1e-12
DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Parameter triple of the model.

    Attributes
    ----------
    k1 : float
        Gain on the spacing error ``s - tau*v``, 1/s^2. Must be > 0.
    k2 : float
        Gain on relative velocity, 1/s. Must be >= 0.
    tau : float
        Equilibrium time gap, s. Must be > 0.
    """

    k1: float
    k2: float
    tau: float

    def __post_init__(self):
        for name in ("k1", "k2", "tau"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not np.isfinite([self.k1, self.k2, self.tau]).all():
            raise ValidationError(f"non-finite parameters: {self}")
        if not self.k1 > 0:
            raise ValidationError(f"k1 must be > 0, got {self.k1}")
        if not self.k2 >= 0:
            raise ValidationError(f"k2 must be >= 0, got {self.k2}")
        if not self.tau > 0:
            raise ValidationError(f"tau must be > 0, got {self.tau}")

    @classmethod
    def unchecked(cls, k1, k2, tau):
        """Build without validation (zero-gain structural tests, raw fit output)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "k1", float(k1))
        object.__setattr__(obj, "k2", float(k2))
        object.__setattr__(obj, "tau", float(tau))
        return obj

    def as_array(self):
        return np.array([self.k1, self.k2, self.tau])

    def to_dict(self):
        return {"k1": self.k1, "k2": self.k2, "tau": self.tau}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["k1"], d["k2"], d["tau"])
        except KeyError as exc:
            raise ValidationError(f"missing parameter {exc}") from None


@dataclass(frozen=True)
class VehicleState:
    v: float
    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValidationError(f"space gap must be > 0, got {self.s}")
        if not self.v >= 0:
            raise ValidationError(f"speed must be >= 0, got {self.v}")


@dataclass(frozen=True, eq=False)
class StateMatrices:
    """Discrete dynamics pair ``(A, B)`` for state ``(v, s)`` and input ``v_l``."""

    a: np.ndarray
    b: np.ndarray
    dt: float

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(2, 2)
        b = np.array(self.b, dtype=float).reshape(2, 1)
        dt = float(self.dt)
        if not dt > 0:
            raise ValidationError(f"dt must be > 0, got {dt}")
        if a[1, 1] != 1.0 or a[1, 0] != -dt or b[1, 0] != dt:
            raise ValidationError("second row must be the gap identity [-dt, 1 | dt]")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "dt", dt)

    @classmethod
    def from_free_entries(cls, a11, a12, b11, dt):
        """Assemble from the three entries that depend on the parameters."""
        return cls([[a11, a12], [-dt, 1.0]], [[b11], [dt]], dt)

    def step(self, x, u):
        """One recurrence step ``A x + B u`` for state ``x = (v, s)``."""
        return self.a @ np.asarray(x, dtype=float) + self.b[:, 0] * u


class Stability(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class StabilityVerdict:
    lam: float
    classification: Stability

    def to_dict(self):
        return {"lambda": self.lam, "classification": self.classification.value}


def acceleration(params, s, v, dv):
    """Model acceleration; ``dv`` is lead speed minus follower speed.

    Works elementwise on numpy arrays as well as scalars.
    """
    return params.k1 * (s - params.tau * v) + params.k2 * dv


def build_state_matrices(params, dt):
    dt = float(dt)
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    k1, k2, tau = params.k1, params.k2, params.tau
    return StateMatrices.from_free_entries(1.0 - (k1 * tau + k2) * dt, k1 * dt, k2 * dt, dt)


def params_from_matrices(m):
    """Invert :func:`build_state_matrices`.

    Returns an unvalidated :class:`ModelParams`; identified parameters may be
    non-physical (negative k1, say) and the caller should see that rather
    than an exception.
    """
    a11, a12, b11 = m.a[0, 0], m.a[0, 1], m.b[0, 0]
    if abs(a12) < DEGENERATE_TOL:
        raise DegenerateDynamicsError(f"|a[1,2]| = {abs(a12):.3g} < {DEGENERATE_TOL}; tau is undefined")
    return ModelParams.unchecked(a12 / m.dt, b11 / m.dt, (1.0 - b11 - a11) / a12)


def stability_index(k1, k2, tau):
    """Closed-form string-stability index of the model (positive = unstable).

    Accepts scalars or equal-shape arrays.
    """
    if not (np.all(np.greater(k1, 0)) and np.all(np.greater(tau, 0))):
        raise ValidationError(f"stability index needs k1 > 0 and tau > 0, got k1={k1}, tau={tau}")
    return (k1 / (-(k1 ** 3) * tau ** 3)) * (k1 ** 2 * tau ** 2 / 2 + k1 * k2 * tau - k1)


def stability_index_from_partials(f_s, f_v, f_dv):
    """General criterion from the model's partial derivatives.

    ``f_v`` is taken with ``dv`` held fixed.
    """
    return f_s / f_v ** 3 * (f_v ** 2 / 2 - f_dv * f_v - f_s)


def classify(lam, tol=MARGINAL_TOL):
    if lam > tol:
        return Stability.UNSTABLE
    if lam < -tol:
        return Stability.STABLE
    return Stability.MARGINAL


def string_stability(params, tol=MARGINAL_TOL):
    lam = stability_index(params.k1, params.k2, params.tau)
    return StabilityVerdict(float(lam), classify(lam, tol))
