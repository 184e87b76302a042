"""Forward Euler simulation of followers and platoons, and lead speed profiles."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import TrajectoryCollapseError, ValidationError
from .trajectory import Trajectory

BENCHMARK_PARAMS = (0.08, 0.12, 1.5)
BENCHMARK_V0 = 24.4
BENCHMARK_S0 = 62.5


@dataclass(frozen=True)
class LeadEvent:
    """Ramp from the current speed to ``target`` starting at ``start``."""

    start: float
    target: float
    rate: float


@dataclass(frozen=True)
class LeadProfileSpec:
    duration: float
    dt: float
    base_speed: float
    events: tuple = ()
    seed: int = 0
    jitter_std: float = 0.0

    def __post_init__(self):
        events = tuple(e if isinstance(e, LeadEvent) else LeadEvent(*e) for e in self.events)
        object.__setattr__(self, "events", events)
        if not self.duration > 0:
            raise ValidationError(f"duration must be > 0, got {self.duration}")
        if not self.dt > 0:
            raise ValidationError(f"dt must be > 0, got {self.dt}")
        if not self.base_speed >= 0:
            raise ValidationError(f"base_speed must be >= 0, got {self.base_speed}")
        if not self.jitter_std >= 0:
            raise ValidationError(f"jitter_std must be >= 0, got {self.jitter_std}")
        for e in events:
            if not e.rate > 0:
                raise ValidationError(f"ramp rate must be > 0, got {e.rate}")
            if not e.target >= 0:
                raise ValidationError(f"target speed must be >= 0, got {e.target}")

    @property
    def n(self):
        return int(round(self.duration / self.dt))

    def to_dict(self):
        return {
            "duration": self.duration,
            "dt": self.dt,
            "base_speed": self.base_speed,
            "events": [[e.start, e.target, e.rate] for e in self.events],
            "seed": self.seed,
            "jitter_std": self.jitter_std,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                duration=float(d["duration"]),
                dt=float(d["dt"]),
                base_speed=float(d["base_speed"]),
                events=tuple(LeadEvent(*map(float, e)) for e in d.get("events", ())),
                seed=int(d.get("seed", 0)),
                jitter_std=float(d.get("jitter_std", 0.0)),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad lead profile spec: {exc}") from None


def dip_events(starts, base, drop, decel, accel, hold):
    """Dip-and-recover event pairs: ramp down by ``drop``, hold, ramp back up."""
    events = []
    for t in starts:
        low = base - drop
        bottom = t + drop / decel
        events.append(LeadEvent(t, low, decel))
        events.append(LeadEvent(bottom + hold, base, accel))
    return tuple(events)


def benchmark_lead_spec():
    """620 s, 10 Hz synthetic lead profile with three dip-and-recover events."""
    return LeadProfileSpec(
        duration=620.0, dt=0.1, base_speed=24.4,
        events=dip_events((60.0, 240.0, 420.0), 24.4, 6.0, 1.5, 1.0, hold=10.0),
    )


def standard_dip_spec(duration=150.0, dt=0.1):
    """Single 24.4 -> 20 -> 24.4 m/s dip used for platoon string-stability probes."""
    return LeadProfileSpec(
        duration=duration, dt=dt, base_speed=24.4,
        events=dip_events((10.0,), 24.4, 4.4, 1.5, 1.0, hold=5.0),
    )


def generate_lead_profile(spec):
    """Piecewise-linear lead speed, optionally with seeded Gaussian jitter."""
    t = spec.dt * np.arange(spec.n)
    v = np.full(spec.n, float(spec.base_speed))
    speed = float(spec.base_speed)
    prev_end = -np.inf
    for i, e in enumerate(sorted(spec.events, key=lambda e: e.start)):
        if e.start < prev_end:
            raise ValidationError(f"event {i} at t={e.start} starts before the previous ramp ends (t={prev_end})")
        ramp = abs(e.target - speed) / e.rate
        after = t >= e.start
        direction = np.sign(e.target - speed)
        ramped = speed + direction * e.rate * (t[after] - e.start)
        v[after] = np.minimum(ramped, e.target) if direction > 0 else np.maximum(ramped, e.target)
        speed = e.target
        prev_end = e.start + ramp
    if spec.jitter_std > 0:
        rng = np.random.default_rng(spec.seed)
        v = np.maximum(v + rng.normal(0.0, spec.jitter_std, size=v.shape), 0.0)
    return v


def simulate_follower(params, v_l, v0, s0, dt, t0=0.0):
    """Euler-simulate one follower behind the lead speed series ``v_l``.

    Raises
    ------
    TrajectoryCollapseError
        If the space gap becomes non-positive; ``step`` is the sample index.
    """
    v_l = np.asarray(v_l, dtype=float)
    if v_l.ndim != 1 or v_l.size < 2:
        raise ValidationError("lead series must be 1-D with at least 2 samples")
    if not v0 >= 0:
        raise ValidationError(f"initial speed must be >= 0, got {v0}")
    if not s0 > 0:
        raise ValidationError(f"initial gap must be > 0, got {s0}")
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    v, s, hit = kernels.euler_follower(params.k1, params.k2, params.tau, v_l, v0, s0, dt)
    if hit >= 0:
        raise TrajectoryCollapseError(hit)
    return Trajectory(dt, v, s, v_l, t0=t0)


def simulate_matrix_form(matrices, v_l, v0, s0):
    """Reference path: iterate ``x[k+1] = A x[k] + B u[k]`` with numpy matmuls.

    Returns ``(v, s)`` arrays. No collapse detection; this exists to cross-check
    :func:`simulate_follower`.
    """
    v_l = np.asarray(v_l, dtype=float)
    x = np.empty((v_l.size, 2))
    x[0] = (v0, s0)
    for k in range(v_l.size - 1):
        x[k + 1] = matrices.step(x[k], v_l[k])
    return x[:, 0], x[:, 1]


@dataclass(frozen=True, eq=False)
class PlatoonResult:
    lead_speed: np.ndarray
    followers: list
    v_eq: float
    peak_deviation: np.ndarray = field(default=None)

    @property
    def speeds(self):
        """``(n_followers + 1, n)`` speeds; row 0 is the lead."""
        return np.vstack([self.lead_speed] + [f.v for f in self.followers])


def simulate_platoon(params, n_followers, v_l, dt, settle_time=5.0):
    """Homogeneous platoon: follower ``i`` follows follower ``i-1``.

    Followers start at equilibrium behind a lead that must be constant for
    the first ``settle_time`` seconds.
    """
    v_l = np.asarray(v_l, dtype=float)
    if n_followers < 2:
        raise ValidationError(f"need at least 2 followers, got {n_followers}")
    n_settle = int(round(settle_time / dt))
    if v_l.size <= n_settle:
        raise ValidationError("lead series shorter than the settle window")
    v_eq = float(v_l[0])
    if np.any(v_l[: n_settle + 1] != v_eq):
        raise ValidationError(f"lead speed must be constant for the first {settle_time} s")
    s_eq = params.tau * v_eq
    followers = []
    ahead = v_l
    for i in range(n_followers):
        try:
            traj = simulate_follower(params, ahead, v_eq, s_eq, dt)
        except TrajectoryCollapseError as exc:
            raise TrajectoryCollapseError(exc.step, vehicle=i) from None
        followers.append(traj)
        ahead = traj.v
    peaks = np.array([np.max(np.abs(f.v - v_eq)) for f in followers])
    return PlatoonResult(v_l.copy(), followers, v_eq, peaks)
