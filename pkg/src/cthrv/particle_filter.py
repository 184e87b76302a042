"""Joint state/parameter particle filter over the augmented state
``(s, v, k1, k2, tau)``.

Parameters follow a Gaussian random walk; the likelihood is a product of
independent Gaussians on the measured gap and speed; the ensemble is
resampled systematically after every update.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ValidationError, WeightCollapseError
from .model import ModelParams, stability_index

PARAM_FLOOR = 1e-6
DEFAULT_PARAM_PRIOR = (0.1, 0.1, 1.4)
DEFAULT_INIT_STD = (0.5, 0.5, 0.2, 0.2, 0.3)
DEFAULT_Q = (0.2, 0.1, 0.01, 0.01, 0.01)
DEFAULT_R = (0.2, 0.1)
DEGENERATE_POLICIES = ("exclude", "unstable", "stable")


def _vec(x, n, name):
    a = np.asarray(x, dtype=float)
    if a.shape != (n,):
        raise ValidationError(f"{name} must have {n} entries, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValidationError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True, eq=False)
class PFConfig:
    """Filter settings. All noise entries are standard deviations.

    ``init_mean=None`` means ``(s[0], v[0], 0.1, 0.1, 1.4)`` with the first
    two taken from the data.

    ``q_per_sqrt_second`` (default) treats ``q_diag`` as a diffusion
    intensity, so the per-step process noise std is ``q_diag * sqrt(dt)``.
    Set it to False to apply ``q_diag`` per step as given. Per step at
    10 Hz, the parameter random walk outruns the weak information that
    steady-state driving carries about k2, and the ensemble drifts toward
    large k2.
    """

    n_particles: int = 500
    init_mean: tuple | None = None
    init_cov_diag: tuple = DEFAULT_INIT_STD
    q_diag: tuple = DEFAULT_Q
    r_diag: tuple = DEFAULT_R
    seed: int = 0
    degenerate_policy: str = "exclude"
    q_per_sqrt_second: bool = True

    def __post_init__(self):
        if int(self.n_particles) < 2:
            raise ValidationError(f"n_particles must be >= 2, got {self.n_particles}")
        object.__setattr__(self, "n_particles", int(self.n_particles))
        if self.init_mean is not None:
            object.__setattr__(self, "init_mean", tuple(_vec(self.init_mean, 5, "init_mean")))
        for name, n in (("init_cov_diag", 5), ("q_diag", 5), ("r_diag", 2)):
            a = _vec(getattr(self, name), n, name)
            if (a < 0).any():
                raise ValidationError(f"{name} entries must be >= 0")
            object.__setattr__(self, name, tuple(a))
        if min(self.r_diag) <= 0:
            raise ValidationError("r_diag entries must be > 0 (they define the likelihood)")
        if self.degenerate_policy not in DEGENERATE_POLICIES:
            raise ValidationError(f"degenerate_policy must be one of {DEGENERATE_POLICIES}")

    def resolved_mean(self, s0, v0):
        if self.init_mean is not None:
            return np.array(self.init_mean)
        return np.array((s0, v0) + DEFAULT_PARAM_PRIOR)

    def step_q(self, dt):
        """Per-step process noise std."""
        q = np.asarray(self.q_diag)
        return q * np.sqrt(dt) if self.q_per_sqrt_second else q

    def to_dict(self):
        return {
            "n_particles": self.n_particles,
            "init_mean": None if self.init_mean is None else list(self.init_mean),
            "init_cov_diag": list(self.init_cov_diag),
            "q_diag": list(self.q_diag),
            "r_diag": list(self.r_diag),
            "seed": self.seed,
            "degenerate_policy": self.degenerate_policy,
            "q_per_sqrt_second": self.q_per_sqrt_second,
        }

    @classmethod
    def from_dict(cls, d):
        known = {"n_particles", "init_mean", "init_cov_diag", "q_diag", "r_diag", "seed", "degenerate_policy",
                 "q_per_sqrt_second"}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown particle filter config keys: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    states: np.ndarray
    weights: np.ndarray

    @classmethod
    def uniform(cls, states):
        states = np.asarray(states, dtype=float)
        n = states.shape[0]
        return cls(states, np.full(n, 1.0 / n))

    @property
    def size(self):
        return self.states.shape[0]

    def mean(self):
        return self.weights @ self.states

    def std(self):
        d = self.states - self.mean()
        return np.sqrt(np.maximum(self.weights @ (d * d), 0.0))


def pf_predict(ensemble, v_l, dt, q_diag, rng, floor=PARAM_FLOOR):
    """Euler-propagate each particle with its own parameters, add process noise,
    and clamp parameter coordinates at ``floor``."""
    noise = rng.standard_normal(ensemble.states.shape) * np.asarray(q_diag, dtype=float)
    states = kernels.pf_predict(ensemble.states, noise, float(v_l), float(dt), float(floor))
    return ParticleEnsemble(states, ensemble.weights)


def pf_update(ensemble, measurement, r_diag, step=None):
    """Reweight by the Gaussian likelihood of ``measurement = (s, v)``."""
    meas_s, meas_v = measurement
    r_s, r_v = r_diag
    lik = kernels.pf_likelihood(ensemble.states, float(meas_s), float(meas_v), float(r_s), float(r_v))
    w = ensemble.weights * lik
    total = w.sum()
    if not (total > 0 and np.isfinite(total)):
        raise WeightCollapseError(step)
    return ParticleEnsemble(ensemble.states, w / total)


def systematic_resample(weights, rng=None, u=None):
    """Low-variance resampling indices.

    One offset ``u`` in ``[0, 1/N)`` (drawn from ``rng`` unless given) and the
    positions ``u + i/N`` are walked against the cumulative weights.
    """
    weights = np.ascontiguousarray(weights, dtype=float)
    n = weights.shape[0]
    if u is None:
        u = rng.random() / n
    return kernels.systematic(weights, float(u))


def instability_fraction(states, policy="exclude", floor=PARAM_FLOOR):
    """Fraction of particles whose parameters give a positive stability index.

    Returns ``(fraction, n_degenerate)``; degenerate particles have k1 or tau
    at the clamp floor and are handled per ``policy``.
    """
    k1, k2, tau = states[:, 2], states[:, 3], states[:, 4]
    degenerate = (k1 <= floor) | (tau <= floor)
    ok = ~degenerate
    n_deg = int(degenerate.sum())
    unstable = np.zeros(states.shape[0], dtype=bool)
    if ok.any():
        unstable[ok] = stability_index(k1[ok], k2[ok], tau[ok]) > 0
    if policy == "exclude":
        denom = int(ok.sum())
        frac = float(unstable[ok].sum() / denom) if denom else float("nan")
    elif policy == "unstable":
        frac = float((unstable | degenerate).mean())
    else:
        frac = float(unstable.mean())
    return frac, n_deg


@dataclass(frozen=True, eq=False)
class PFResult:
    mean: np.ndarray
    std: np.ndarray
    params: ModelParams
    instability_probability: float
    n_degenerate: int
    clamp_events: int
    ensemble: ParticleEnsemble = field(repr=False)

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "instability_probability": self.instability_probability,
            "n_degenerate": self.n_degenerate,
            "clamp_events": self.clamp_events,
            "final_mean": self.mean[-1].tolist(),
            "final_std": self.std[-1].tolist(),
        }


class ParticleFilter:
    """Incremental filter: push one measurement at a time, read the posterior.

    Parameters
    ----------
    config : PFConfig
    s0, v0 : float
        First measured gap and speed; used as the prior mean when
        ``config.init_mean`` is None.
    dt : float
        Sample period, s.
    """

    def __init__(self, config, s0, v0, dt):
        if not dt > 0:
            raise ValidationError(f"dt must be > 0, got {dt}")
        self.config = config
        self.dt = float(dt)
        self.q_step = config.step_q(self.dt)
        self.rng = np.random.default_rng(config.seed)
        mean = config.resolved_mean(s0, v0)
        std = np.asarray(config.init_cov_diag)
        states = mean + std * self.rng.standard_normal((config.n_particles, 5))
        self.ensemble = ParticleEnsemble.uniform(states)
        self.step = 0
        self.clamp_events = 0
        self._means = [self.ensemble.mean()]
        self._stds = [self.ensemble.std()]

    def push(self, v_l_prev, s, v):
        """Advance one step with the previous lead speed, then assimilate ``(s, v)``."""
        self.step += 1
        cfg = self.config
        ens = pf_predict(self.ensemble, v_l_prev, self.dt, self.q_step, self.rng)
        self.clamp_events += int(np.count_nonzero(ens.states[:, 2:] == PARAM_FLOOR))
        ens = pf_update(ens, (s, v), cfg.r_diag, step=self.step)
        idx = systematic_resample(ens.weights, self.rng)
        self.ensemble = ParticleEnsemble.uniform(ens.states[idx])
        mean, std = self.ensemble.mean(), self.ensemble.std()
        self._means.append(mean)
        self._stds.append(std)
        return mean, std

    def posterior(self):
        return self._means[-1], self._stds[-1]

    def current_params(self):
        k1, k2, tau = self._means[-1][2:]
        return ModelParams.unchecked(k1, k2, tau)

    def result(self):
        frac, n_deg = instability_fraction(self.ensemble.states, self.config.degenerate_policy)
        return PFResult(
            mean=np.array(self._means),
            std=np.array(self._stds),
            params=self.current_params(),
            instability_probability=frac,
            n_degenerate=n_deg,
            clamp_events=self.clamp_events,
            ensemble=self.ensemble,
        )


def fit_particle_filter(traj, config=None):
    config = config or PFConfig()
    pf = ParticleFilter(config, traj.s[0], traj.v[0], traj.dt)
    for k in range(1, traj.n):
        pf.push(traj.v_l[k - 1], traj.s[k], traj.v[k])
    return pf.result()
