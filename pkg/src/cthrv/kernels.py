"""Hot numeric kernels.

Every kernel exists twice: a loop form compiled with numba (``*_nb``) and a
pure-numpy / plain-Python form (``*_np``). The public names bind to one of
them at import time according to :mod:`cthrv._backend`. Both forms are kept
importable so tests and the benchmark can compare them directly.

Array layout for particle ensembles is ``(n_particles, 5)`` with columns
``(s, v, k1, k2, tau)``.
"""
import numpy as np

from ._backend import USE_NUMBA, njit

S, V, K1, K2, TAU = range(5)


# ---------------------------------------------------------------------------
# Forward Euler follower


def _euler_follower_loop(k1, k2, tau, v_l, v0, s0, dt, v_out, s_out):
    n = v_l.shape[0]
    v_out[0] = v0
    s_out[0] = s0
    if not s0 > 0.0:
        return 0
    v = v0
    s = s0
    for k in range(n - 1):
        dv = v_l[k] - v
        acc = k1 * (s - tau * v) + k2 * dv
        v_next = v + dt * acc
        s_next = s + dt * dv
        v_out[k + 1] = v_next
        s_out[k + 1] = s_next
        if not s_next > 0.0:
            return k + 1
        v = v_next
        s = s_next
    return -1


_euler_follower_jit = njit(_euler_follower_loop)


def euler_follower_nb(k1, k2, tau, v_l, v0, s0, dt):
    v_l = np.ascontiguousarray(v_l, dtype=np.float64)
    v_out = np.empty_like(v_l)
    s_out = np.empty_like(v_l)
    hit = _euler_follower_jit(float(k1), float(k2), float(tau), v_l,
                              float(v0), float(s0), float(dt), v_out, s_out)
    if hit >= 0:
        v_out[hit + 1:] = np.nan
        s_out[hit + 1:] = np.nan
    return v_out, s_out, int(hit)


def euler_follower_np(k1, k2, tau, v_l, v0, s0, dt):
    """Same recurrence on Python floats (the recurrence is serial)."""
    vl = np.asarray(v_l, dtype=np.float64).tolist()
    n = len(vl)
    vs = [0.0] * n
    ss = [0.0] * n
    k1, k2, tau, dt = float(k1), float(k2), float(tau), float(dt)
    v, s = float(v0), float(s0)
    vs[0], ss[0] = v, s
    hit = -1 if s > 0.0 else 0
    if hit < 0:
        for k in range(n - 1):
            dv = vl[k] - v
            acc = k1 * (s - tau * v) + k2 * dv
            v = v + dt * acc
            s = s + dt * dv
            vs[k + 1] = v
            ss[k + 1] = s
            if not s > 0.0:
                hit = k + 1
                break
    v_out = np.array(vs)
    s_out = np.array(ss)
    if hit >= 0:
        v_out[hit + 1:] = np.nan
        s_out[hit + 1:] = np.nan
    return v_out, s_out, hit


# ---------------------------------------------------------------------------
# Particle filter predict / likelihood


def _pf_predict_loop(states, noise, v_l, dt, floor):
    n = states.shape[0]
    out = np.empty_like(states)
    for i in range(n):
        s = states[i, 0]
        v = states[i, 1]
        k1 = states[i, 2]
        k2 = states[i, 3]
        tau = states[i, 4]
        dv = v_l - v
        acc = k1 * (s - tau * v) + k2 * dv
        out[i, 0] = s + dt * dv + noise[i, 0]
        out[i, 1] = v + dt * acc + noise[i, 1]
        for j in range(2, 5):
            p = states[i, j] + noise[i, j]
            out[i, j] = p if p > floor else floor
    return out


pf_predict_nb = njit(_pf_predict_loop)


def pf_predict_np(states, noise, v_l, dt, floor):
    s = states[:, S]
    v = states[:, V]
    dv = v_l - v
    acc = states[:, K1] * (s - states[:, TAU] * v) + states[:, K2] * dv
    out = np.empty_like(states)
    out[:, S] = s + dt * dv + noise[:, S]
    out[:, V] = v + dt * acc + noise[:, V]
    out[:, K1:] = np.maximum(states[:, K1:] + noise[:, K1:], floor)
    return out


def _pf_likelihood_loop(states, meas_s, meas_v, r_s, r_v):
    n = states.shape[0]
    out = np.empty(n)
    c = 1.0 / (2.0 * np.pi * r_s * r_v)
    for i in range(n):
        zs = (meas_s - states[i, 0]) / r_s
        zv = (meas_v - states[i, 1]) / r_v
        out[i] = c * np.exp(-0.5 * (zs * zs + zv * zv))
    return out


pf_likelihood_nb = njit(_pf_likelihood_loop)


def pf_likelihood_np(states, meas_s, meas_v, r_s, r_v):
    zs = (meas_s - states[:, S]) / r_s
    zv = (meas_v - states[:, V]) / r_v
    return np.exp(-0.5 * (zs * zs + zv * zv)) / (2.0 * np.pi * r_s * r_v)


# ---------------------------------------------------------------------------
# Systematic resampling


def _systematic_loop(weights, u):
    n = weights.shape[0]
    cum = np.cumsum(weights)
    total = cum[n - 1]
    idx = np.empty(n, dtype=np.int64)
    j = 0
    for i in range(n):
        pos = (u + i / n) * total
        while j < n - 1 and cum[j] <= pos:
            j += 1
        idx[i] = j
    return idx


systematic_nb = njit(_systematic_loop)


def systematic_np(weights, u):
    n = weights.shape[0]
    cum = np.cumsum(weights)
    positions = (u + np.arange(n) / n) * cum[-1]
    idx = np.searchsorted(cum, positions, side="right")
    return np.minimum(idx, n - 1).astype(np.int64)


if USE_NUMBA:
    euler_follower = euler_follower_nb
    pf_predict = pf_predict_nb
    pf_likelihood = pf_likelihood_nb
    systematic = systematic_nb
else:
    euler_follower = euler_follower_np
    pf_predict = pf_predict_np
    pf_likelihood = pf_likelihood_np
    systematic = systematic_np
