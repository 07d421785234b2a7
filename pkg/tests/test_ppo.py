import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abmt.env import ConfigError, ScenarioConfig, VecEnv, make_rng, reduced_scenario
from abmt.marl import MAPPO, PpoConfig, collect_rollout, fill_gae, init_policy, ppo_update
from abmt.marl.ppo import minibatch_loss, normalize
from abmt.nn.optim import AdamState


def test_config_validation():
    for kw in ({"gamma": 0.0}, {"gamma": 1.5}, {"gae_lambda": -0.1}, {"clip_eps": 0.0}, {"minibatches": 3}):
        with pytest.raises(ConfigError):
            PpoConfig(**kw)
    with pytest.raises(ConfigError, match="bogus"):
        PpoConfig.from_dict({"bogus": 1})
    assert PpoConfig.from_dict(PpoConfig().to_dict()) == PpoConfig()


def test_defaults():
    c = PpoConfig()
    assert (c.gamma, c.gae_lambda, c.clip_eps, c.epochs, c.minibatches) == (0.99, 0.95, 0.2, 4, 4)
    assert (c.rollout_length, c.n_envs, c.entropy_coef, c.value_coef) == (128, 16, 0.01, 0.5)
    assert c.value_clip and c.normalize_advantages
    assert c.steps_per_update == 2048


@given(st.integers(0, 2**32 - 1), st.integers(2, 400))
def test_normalize(seed, n):
    rng = np.random.default_rng(seed)
    a = normalize(rng.standard_normal(n) * rng.uniform(0.01, 100) + rng.uniform(-50, 50))
    assert abs(a.mean()) < 1e-10
    assert abs(a.std() - 1.0) < 1e-6


def _single_sample(adv, ratio, eps=0.2):
    cfg = reduced_scenario()
    pol = init_policy(cfg, MAPPO, 0)
    obs = np.random.default_rng(0).standard_normal((1, 1, cfg.obs_dim))
    gs = np.random.default_rng(1).standard_normal((1, cfg.state_dim))
    act, logp = pol.act_batch(obs, np.random.default_rng(2))
    old = logp - math.log(ratio)
    ppo = PpoConfig(clip_eps=eps)
    _, stats = minibatch_loss(
        pol, obs, gs, act, old, np.array([[adv]]), np.zeros((1, 1)), np.zeros((1, 1)), ppo
    )
    return stats


def test_clip_formula_hand_case():
    stats = _single_sample(adv=2.0, ratio=1.5)
    assert stats["policy_loss"] == pytest.approx(-2.4, abs=1e-12)
    assert stats["clip_frac"] == 1.0


def test_zero_advantage_zero_policy_loss():
    for ratio in (0.5, 1.0, 1.7):
        assert _single_sample(adv=0.0, ratio=ratio)["policy_loss"] == 0.0


def test_value_loss_clipping():
    cfg = reduced_scenario()
    pol = init_policy(cfg, MAPPO, 0)
    obs = np.zeros((1, 1, cfg.obs_dim))
    gs = np.zeros((1, cfg.state_dim))
    act, logp = pol.act_batch(obs, None, deterministic=True)
    v = float(pol.values_batch(gs)[0])
    ret = np.array([[v + 1.0]])
    old_v = np.array([[v + 0.9]])
    on = PpoConfig(value_clip=True)
    off = PpoConfig(value_clip=False)
    _, s_on = minibatch_loss(pol, obs, gs, act, logp, np.zeros((1, 1)), ret, old_v, on)
    _, s_off = minibatch_loss(pol, obs, gs, act, logp, np.zeros((1, 1)), ret, old_v, off)
    assert s_off["value_loss"] == pytest.approx(0.5 * 1.0, abs=1e-12)
    # clipped prediction old_v - 0.2 sits 0.3 below the return
    assert s_on["value_loss"] == pytest.approx(0.5 * max(1.0, 0.3**2), abs=1e-12)


def _update(variant=MAPPO, seed=0, cfg=None, **kw):
    cfg = cfg or ScenarioConfig()
    ppo = PpoConfig(rollout_length=16, n_envs=4, **kw)
    pol = init_policy(cfg, variant, seed, hidden=32, embed_dim=16, heads=2)
    venv = VecEnv(cfg, ppo.n_envs, seed)
    buf = fill_gae(collect_rollout(venv, pol, ppo.rollout_length, make_rng(seed, 1)), ppo.gamma, ppo.gae_lambda)
    stats = ppo_update(buf, pol, ppo, AdamState(lr=ppo.lr), make_rng(seed, 2))
    return buf, pol, stats


@pytest.mark.parametrize("variant", ["mappo", "ab-mappo"])
def test_ratio_one_identity(variant):
    _, _, s = _update(variant)
    assert s.first_clip_frac == 0.0
    assert abs(s.first_policy_loss + s.first_adv_mean) < 1e-6
    assert abs(s.adv_mean) < 1e-10 and abs(s.adv_std - 1.0) < 1e-6


def test_update_changes_parameters():
    cfg = reduced_scenario()
    before = init_policy(cfg, MAPPO, 0, hidden=32)
    _, after, _ = _update(cfg=cfg)
    assert any(not np.array_equal(a.value, b.value) for a, b in zip(before.parameters(), after.parameters()))


def test_update_requires_advantages():
    cfg = reduced_scenario()
    pol = init_policy(cfg, MAPPO, 0)
    buf = collect_rollout(VecEnv(cfg, 2, 0), pol, 4, make_rng(0))
    with pytest.raises(ValueError):
        ppo_update(buf, pol, PpoConfig(rollout_length=4, n_envs=2, minibatches=2), AdamState(), make_rng(0))


def test_parameter_sharing():
    cfg = ScenarioConfig()
    pol = init_policy(cfg, MAPPO, 3)
    o = np.random.default_rng(0).standard_normal(cfg.obs_dim)
    obs = np.stack([o, o, o])[None]
    a, lp = pol.act_batch(obs, None, deterministic=True)
    assert np.array_equal(a[0, 0], a[0, 1]) and np.array_equal(a[0, 1], a[0, 2])
    assert lp[0, 0] == lp[0, 2]
