import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abmt.env import READY, ScenarioConfig, global_state, global_tokens, observe, reset, step, tokens_from_flat
from abmt.env.world import TOKEN_TYPES, TOKEN_WIDTH

CFG = ScenarioConfig()


def _walk(cfg, seed, n):
    s, _ = reset(cfg, seed)
    rng = np.random.default_rng(seed)
    for _ in range(n):
        step(cfg, s, rng.uniform(-1, 1, (cfg.n_agents, 2)))
    return s


@given(st.integers(0, 1000), st.integers(1, 5))
def test_shapes_constant(seed, n_agents):
    cfg = ScenarioConfig(n_agents=n_agents)
    s = _walk(cfg, seed, 5)
    for i in range(n_agents):
        o = observe(cfg, s, i)
        assert o.flat.shape == (5 + 4 * (n_agents - 1) + 4 * cfg.n_machines + 2,)
        assert o.tokens.shape == (1 + (n_agents - 1) + cfg.n_machines + 1, TOKEN_WIDTH)
    assert global_state(cfg, s).shape == (5 * n_agents + 4 * cfg.n_machines + 2 + 1,)


def test_flat_equals_token_payloads():
    """Flat view = token payloads in entity order with the type one-hots stripped."""
    s = _walk(CFG, 0, 30)
    for i in range(CFG.n_agents):
        o = observe(CFG, s, i)
        widths = [5] + [4] * (CFG.n_agents - 1) + [4] * CFG.n_machines + [2]
        rebuilt = np.concatenate([tok[TOKEN_TYPES:TOKEN_TYPES + w] for tok, w in zip(o.tokens, widths)])
        assert np.array_equal(rebuilt, o.flat)
        onehots = o.tokens[:, :TOKEN_TYPES]
        assert np.all(onehots.sum(axis=1) == 1)
        assert np.array_equal(np.argmax(onehots, axis=1), [0] + [1] * 2 + [2] * 4 + [3])
        # padding stays zero
        for tok, w in zip(o.tokens, widths):
            assert not tok[TOKEN_TYPES + w:].any()


def test_relative_quantities_and_ready_flags():
    s = _walk(CFG, 1, 10)
    s.phase[0] = READY
    s.timer[0] = 0
    i = 1
    o = observe(CFG, s, i)
    others = [j for j in range(CFG.n_agents) if j != i]
    off = 5
    for j in others:
        assert np.allclose(o.flat[off:off + 2], s.pos[j] - s.pos[i])
        assert np.allclose(o.flat[off + 2:off + 4], s.vel[j] - s.vel[i])
        off += 4
    ap = np.array(CFG.machines[0].access_point)
    assert np.allclose(o.flat[off:off + 2], ap - s.pos[i])
    assert o.flat[off + 2] == 1.0 and o.flat[off + 3] == 0.0
    ttr = o.flat[off + 4 + 3:off + 4 * CFG.n_machines:4]
    assert np.all((ttr >= 0) & (ttr <= 1))
    assert np.allclose(o.flat[-2:], np.array(CFG.storage_center) - s.pos[i])


def test_observe_index_error():
    s, _ = reset(CFG, 0)
    with pytest.raises(IndexError):
        observe(CFG, s, 3)


def test_global_state_layout():
    s = _walk(CFG, 2, 20)
    g = global_state(CFG, s)
    for i in range(3):
        assert np.array_equal(g[5 * i:5 * i + 2], s.pos[i])
        assert np.array_equal(g[5 * i + 2:5 * i + 4], s.vel[i])
    assert g[-1] == pytest.approx(20 / CFG.max_steps)
    assert np.allclose(g[-3:-1], CFG.storage_center)


def test_global_state_agent_permutation_moves_blocks_only():
    s = _walk(CFG, 4, 15)
    perm = [2, 0, 1]
    t = s.copy()
    t.pos, t.vel, t.carrying = s.pos[perm], s.vel[perm], s.carrying[perm]
    g, h = global_state(CFG, s), global_state(CFG, t)
    for k, p in enumerate(perm):
        assert np.array_equal(h[5 * k:5 * k + 5], g[5 * p:5 * p + 5])
    assert np.array_equal(h[15:], g[15:])


def test_equal_states_equal_vectors():
    a = _walk(CFG, 9, 12)
    b = _walk(CFG, 9, 12)
    assert global_state(CFG, a).tobytes() == global_state(CFG, b).tobytes()


def test_token_helpers_batch():
    s = _walk(CFG, 3, 3)
    flat = np.stack([observe(CFG, s, i).flat for i in range(3)])
    tok = tokens_from_flat(flat, 3, 4)
    assert tok.shape == (3, 8, TOKEN_WIDTH)
    gt = global_tokens(global_state(CFG, s)[None], 3, 4)
    assert gt.shape[:2] == (1, 3 + 4 + 1)
