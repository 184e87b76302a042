import math

import numpy as np
import pytest

from cthrv.errors import ValidationError, WeightCollapseError
from cthrv.metrics import mae
from cthrv.model import ModelParams
from cthrv.particle_filter import (PARAM_FLOOR, PFConfig, ParticleEnsemble, ParticleFilter,
                                   fit_particle_filter, instability_fraction, pf_predict, pf_update,
                                   systematic_resample)
from cthrv.simulate import simulate_follower


def one(states):
    return ParticleEnsemble.uniform(np.atleast_2d(np.asarray(states, float)))


def test_predict_zero_noise_hand_step():
    rng = np.random.default_rng(0)
    ens = pf_predict(one([62.5, 24.4, 0.08, 0.12, 1.5]), 24.4, 0.1, np.zeros(5), rng)
    np.testing.assert_allclose(ens.states[0], [62.5, 24.6072, 0.08, 0.12, 1.5], rtol=0, atol=1e-12)


def test_predict_zero_noise_keeps_params():
    rng = np.random.default_rng(0)
    states = np.column_stack([np.full(20, 40.0), np.full(20, 24.0), rng.random((20, 3)) + 0.1])
    out = pf_predict(ParticleEnsemble.uniform(states), 23.0, 0.1, np.zeros(5), rng)
    np.testing.assert_array_equal(out.states[:, 2:], states[:, 2:])


def test_predict_seeded_and_clamped():
    states = np.tile([40.0, 24.0, 1e-5, 1e-5, 1e-5], (100, 1))
    q = [0.2, 0.1, 0.01, 0.01, 0.01]
    a = pf_predict(ParticleEnsemble.uniform(states), 24.0, 0.1, q, np.random.default_rng(9))
    b = pf_predict(ParticleEnsemble.uniform(states), 24.0, 0.1, q, np.random.default_rng(9))
    assert np.array_equal(a.states, b.states)
    assert a.states[:, 2:].min() == PARAM_FLOOR


def test_update_identical_particles_stay_uniform():
    ens = ParticleEnsemble.uniform(np.tile([40.0, 24.0, 0.1, 0.1, 1.4], (7, 1)))
    out = pf_update(ens, (40.3, 23.9), (0.2, 0.1))
    np.testing.assert_allclose(out.weights, 1 / 7, rtol=1e-14)


def test_update_gaussian_ratio():
    ens = ParticleEnsemble.uniform([[40.0, 24.0, 0.1, 0.1, 1.4], [42.0, 24.0, 0.1, 0.1, 1.4]])
    out = pf_update(ens, (40.0, 24.0), (0.2, 0.1))
    assert out.weights[1] / out.weights[0] == pytest.approx(math.exp(-50), rel=1e-9)


def test_update_normalizes_arbitrary_weights():
    rng = np.random.default_rng(2)
    states = np.column_stack([rng.normal(40, 1, 50), rng.normal(24, 0.5, 50), np.full((50, 3), 0.1)])
    w = rng.random(50)
    out = pf_update(ParticleEnsemble(states, w / w.sum()), (40.0, 24.0), (0.2, 0.1))
    assert abs(out.weights.sum() - 1) <= 1e-12 and np.all(out.weights >= 0)


def test_update_weight_collapse():
    ens = one([40.0, 24.0, 0.1, 0.1, 1.4])
    with pytest.raises(WeightCollapseError) as ei:
        pf_update(ens, (4000.0, 24.0), (0.2, 0.1), step=17)
    assert ei.value.step == 17


def test_systematic_uniform_weights():
    idx = systematic_resample(np.full(8, 1 / 8), np.random.default_rng(0))
    np.testing.assert_array_equal(idx, np.arange(8))


def test_systematic_point_mass():
    w = np.zeros(6)
    w[0] = 1.0
    np.testing.assert_array_equal(systematic_resample(w, np.random.default_rng(0)), 0)


def test_systematic_hand_example():
    np.testing.assert_array_equal(systematic_resample(np.array([0.5, 0.25, 0.25]), u=0.1), [0, 0, 2])
    idx = systematic_resample(np.array([0.5, 0.25, 0.25, 0.0]), u=0.1)
    np.testing.assert_array_equal(idx, [0, 0, 1, 2])


def test_systematic_nondecreasing():
    rng = np.random.default_rng(4)
    w = rng.random(100)
    idx = systematic_resample(w / w.sum(), rng)
    assert np.all(np.diff(idx) >= 0) and idx.size == 100


def test_resampling_preserves_mean_in_expectation():
    rng = np.random.default_rng(12)
    x = rng.normal(0, 1, 200)
    w = rng.random(200) ** 3
    w /= w.sum()
    target = w @ x
    means = np.array([x[systematic_resample(w, rng)].mean() for _ in range(1000)])
    se = means.std(ddof=1) / np.sqrt(means.size)
    assert abs(means.mean() - target) <= 3 * se


def test_config_validation():
    with pytest.raises(ValidationError):
        PFConfig(n_particles=1)
    with pytest.raises(ValidationError):
        PFConfig(r_diag=(0.0, 0.1))
    with pytest.raises(ValidationError):
        PFConfig(q_diag=(0.1, 0.1, -0.1, 0.1, 0.1))
    with pytest.raises(ValidationError):
        PFConfig(init_mean=(1, 2, 3))
    with pytest.raises(ValidationError):
        PFConfig(degenerate_policy="maybe")
    with pytest.raises(ValidationError):
        PFConfig.from_dict({"particles": 10})


def test_step_noise_scaling():
    cfg = PFConfig()
    np.testing.assert_allclose(cfg.step_q(0.1), np.array(cfg.q_diag) * math.sqrt(0.1))
    np.testing.assert_array_equal(PFConfig(q_per_sqrt_second=False).step_q(0.1), cfg.q_diag)


def test_instability_fraction_policies():
    states = np.array([
        [0, 0, 0.08, 0.12, 1.5],       # unstable
        [0, 0, 0.5, 0.5, 2.0],         # stable
        [0, 0, PARAM_FLOOR, 0.1, 1.0],  # degenerate
        [0, 0, 0.08, 0.12, 1.5],
    ])
    assert instability_fraction(states, "exclude") == (pytest.approx(2 / 3), 1)
    assert instability_fraction(states, "unstable")[0] == pytest.approx(3 / 4)
    assert instability_fraction(states, "stable")[0] == pytest.approx(2 / 4)


def test_zero_noise_tracks_data_exactly(benchmark_traj, theta_true):
    tr = benchmark_traj
    cfg = PFConfig(n_particles=16, init_mean=(tr.s[0], tr.v[0], 0.08, 0.12, 1.5),
                   init_cov_diag=(0,) * 5, q_diag=(0,) * 5, seed=1)
    res = fit_particle_filter(tr, cfg)
    np.testing.assert_allclose(res.mean[:, 0], tr.s, rtol=1e-12)
    np.testing.assert_allclose(res.mean[:, 1], tr.v, rtol=1e-12)
    np.testing.assert_allclose(res.params.as_array(), theta_true.as_array(), rtol=1e-12)
    assert np.all(np.isfinite(res.std)) and np.all(res.std >= 0)
    assert res.instability_probability == 1.0


@pytest.fixture(scope="module")
def short_traj(benchmark_traj):
    from cthrv.trajectory import Trajectory
    return Trajectory(0.1, benchmark_traj.v[:1200], benchmark_traj.s[:1200], benchmark_traj.v_l[:1200])


def test_weights_stay_on_simplex(short_traj):
    pf = ParticleFilter(PFConfig(n_particles=200, seed=3), short_traj.s[0], short_traj.v[0], 0.1)
    rng = pf.rng
    ens = pf.ensemble
    for k in range(1, 300):
        ens = pf_predict(ens, short_traj.v_l[k - 1], 0.1, pf.q_step, rng)
        ens = pf_update(ens, (short_traj.s[k], short_traj.v[k]), pf.config.r_diag, step=k)
        assert abs(ens.weights.sum() - 1.0) <= 1e-12 and ens.weights.min() >= 0
        ens = ParticleEnsemble.uniform(ens.states[systematic_resample(ens.weights, rng)])


def test_deterministic(short_traj):
    cfg = PFConfig(n_particles=100, seed=7)
    a, b = fit_particle_filter(short_traj, cfg), fit_particle_filter(short_traj, cfg)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.std, b.std)
    assert a.params == b.params and a.instability_probability == b.instability_probability


def test_streaming_matches_batch_call(short_traj):
    cfg = PFConfig(n_particles=50, seed=2)
    pf = ParticleFilter(cfg, short_traj.s[0], short_traj.v[0], short_traj.dt)
    for k in range(1, short_traj.n):
        mean, std = pf.push(short_traj.v_l[k - 1], short_traj.s[k], short_traj.v[k])
        assert np.all(std >= 0)
    assert np.array_equal(pf.result().mean, fit_particle_filter(short_traj, cfg).mean)
    assert np.array_equal(pf.posterior()[0], mean)


def test_scaled_noise_contract(short_traj):
    base = PFConfig(n_particles=100, seed=4)
    cfg = PFConfig(n_particles=100, seed=4, q_diag=np.array(base.q_diag) * 10, r_diag=np.array(base.r_diag) * 10)
    res = fit_particle_filter(short_traj, cfg)
    assert res.mean.shape == (short_traj.n, 5)
    assert abs(res.ensemble.weights.sum() - 1) <= 1e-12
    assert 0.0 <= res.instability_probability <= 1.0


def test_pf_benchmark_accuracy(benchmark_traj):
    res = fit_particle_filter(benchmark_traj, PFConfig(seed=0))
    sim = simulate_follower(res.params, benchmark_traj.v_l, benchmark_traj.v[0], benchmark_traj.s[0], 0.1)
    assert mae(sim.v, benchmark_traj.v) <= 0.5
    assert mae(sim.s, benchmark_traj.s) <= 3.5
    assert res.instability_probability >= 0.9
    assert isinstance(res.params, ModelParams)
