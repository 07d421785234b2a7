import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abmt.marl import compute_gae


def brute_force_gae(r, v, d, boot, gamma, lam):
    """A_t = sum_l (gamma*lam)^l * prod(1-d) * delta_{t+l}, expanded as an explicit double sum."""
    T = len(r)
    vn = np.append(v[1:], boot)
    delta = [r[t] + gamma * (1 - d[t]) * vn[t] - v[t] for t in range(T)]
    adv = np.zeros(T)
    for t in range(T):
        total = 0.0
        for s in range(t, T):
            w = 1.0
            for k in range(t, s):
                w *= gamma * lam * (1 - d[k])
            total += w * delta[s]
        adv[t] = total
    return adv


def _traj(rng, T=10):
    return (
        rng.standard_normal(T),
        rng.standard_normal(T),
        (rng.random(T) < 0.2).astype(np.float64),
        float(rng.standard_normal()),
        float(rng.uniform(0.5, 1.0)),
        float(rng.uniform(0.0, 1.0)),
    )


@given(st.integers(0, 2**32 - 1))
def test_gae_matches_double_sum(seed):
    r, v, d, boot, gamma, lam = _traj(np.random.default_rng(seed))
    adv, ret = compute_gae(r, v, d, np.float64(boot), gamma, lam)
    assert np.max(np.abs(adv - brute_force_gae(r, v, d, boot, gamma, lam))) < 1e-10
    assert np.allclose(ret, adv + v, atol=0)


def test_undiscounted_telescoping():
    r = np.arange(1.0, 6.0)
    adv, _ = compute_gae(r, np.zeros(5), np.zeros(5), np.float64(0.0), 1.0, 1.0)
    assert np.array_equal(adv, np.cumsum(r[::-1])[::-1])


def test_lambda_zero_is_one_step():
    rng = np.random.default_rng(0)
    r, v, d, boot, gamma, _ = _traj(rng)
    adv, _ = compute_gae(r, v, d, np.float64(boot), gamma, 0.0)
    vn = np.append(v[1:], boot)
    assert np.allclose(adv, r + gamma * (1 - d) * vn - v, atol=1e-15)


def test_done_cuts_bootstrap():
    r = np.array([1.0, 1.0])
    v = np.array([0.0, 5.0])
    adv, _ = compute_gae(r, v, np.array([1.0, 0.0]), np.float64(100.0), 0.9, 0.9)
    assert adv[0] == pytest.approx(1.0)


def test_batched_axes():
    rng = np.random.default_rng(1)
    r = rng.standard_normal((10, 4, 3))
    v = rng.standard_normal((10, 4, 3))
    d = (rng.random((10, 4, 1)) < 0.2) * np.ones((1, 1, 3))
    boot = rng.standard_normal((4, 3))
    adv, _ = compute_gae(r, v, d, boot, 0.99, 0.95)
    for e in range(4):
        for n in range(3):
            ref = brute_force_gae(r[:, e, n], v[:, e, n], d[:, e, n], boot[e, n], 0.99, 0.95)
            assert np.max(np.abs(adv[:, e, n] - ref)) < 1e-10
