"""The twelve acceptance criteria, each at its stated tolerance.

Every criterion records one PASS/FAIL line that is printed in the terminal
summary (and immediately, when run with ``-s``).
"""
import json
import math
import re
import time
from contextlib import contextmanager

import numpy as np
import pytest

from abmt.cli import main as cli_main
from abmt.env import ScenarioConfig, VecEnv, make_rng, reduced_scenario, reset, step
from abmt.harness.checkpoint import CheckpointError, decode_checkpoint, encode_checkpoint
from abmt.hil import BridgeConfig, ChannelModel, run_bridge
from abmt.hil.channel import CENTRAL, GOSSIP, ChannelState, comm_tick
from abmt.hil.frames import FRAME_SIZE, POSE_REPORT, WAYPOINT, BridgeFrame, FrameError
from abmt.hil.graycode import GrayCodeSchedule, LocalizerState, gray_decode, gray_encode, localize_tick
from abmt.marl import AB_MAPPO, MAPPO, PpoConfig, RandomPolicy, StationaryPolicy, compute_gae, evaluate, init_policy
from abmt.marl.train import train
from abmt.nn.gradcheck import run_suite
from abmt.nn.layers import AttentionEncoderSpec, attention_encode, init_attention

from .conftest import ACCEPTANCE_RESULTS


@contextmanager
def criterion(number: int, name: str):
    t0 = time.perf_counter()
    detail = {}
    try:
        yield detail
    except BaseException:
        line = f"criterion {number:2d} FAIL  {name}"
        raise
    else:
        extra = " ".join(f"{k}={v}" for k, v in detail.items())
        line = f"criterion {number:2d} PASS  {name}  ({time.perf_counter() - t0:.1f} s{', ' + extra if extra else ''})"
    finally:
        ACCEPTANCE_RESULTS[number] = line
        print(line)


TINY = dict(rollout_length=32, n_envs=4, minibatches=2, epochs=2, hidden=32, embed_dim=16, heads=2)


def test_c01_determinism(tmp_path):
    with criterion(1, "train twice -> identical metrics and checkpoints; env bit-identical over 500 steps") as d:
        t0 = time.perf_counter()
        cfg = ScenarioConfig()
        ppo = PpoConfig(total_steps=128 * 3, checkpoint_every=1, eval_every=2, eval_episodes=2, **TINY)
        for variant in (MAPPO, AB_MAPPO):
            train(cfg, ppo, variant, 11, tmp_path / variant / "a")
            train(cfg, ppo, variant, 11, tmp_path / variant / "b")
            files = sorted(p.name for p in (tmp_path / variant / "a").iterdir())
            assert "metrics.csv" in files and sum(f.endswith(".abmt") for f in files) == 3
            for name in files:
                assert (tmp_path / variant / "a" / name).read_bytes() == (tmp_path / variant / "b" / name).read_bytes()

        def trajectory():
            s, _ = reset(cfg, 123)
            rng = make_rng(123, 9)
            out = []
            for _ in range(500):
                step(cfg, s, rng.uniform(-1, 1, (cfg.n_agents, 2)))
                out.append(s.copy())
            return out

        assert all(x.equals(y) for x, y in zip(trajectory(), trajectory()))
        elapsed = time.perf_counter() - t0
        d["runtime"] = f"{elapsed:.1f}s"
        assert elapsed < 60


def test_c02_gradient_suite():
    with criterion(2, "gradient suite, 100 draws per architecture, max rel err < 1e-4") as d:
        t0 = time.perf_counter()
        report = run_suite(draws=100, seed=0)
        d["max_rel_err"] = f"{max(report.values()):.2e}"
        assert len(report) == 3
        assert max(report.values()) < 1e-4
        assert time.perf_counter() - t0 < 60


def _double_sum(r, v, done, boot, gamma, lam):
    T = len(r)
    vn = np.append(v[1:], boot)
    delta = r + gamma * (1 - done) * vn - v
    adv = np.zeros(T)
    for t in range(T):
        for s in range(t, T):
            adv[t] += (gamma * lam) ** (s - t) * np.prod(1 - done[t:s]) * delta[s]
    return adv


def test_c03_gae_oracle():
    with criterion(3, "GAE vs brute-force double sum on 1000 random 10-step trajectories, tol 1e-10") as d:
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(1000):
            r, v = rng.standard_normal(10), rng.standard_normal(10)
            done = (rng.random(10) < 0.15).astype(np.float64)
            boot = float(rng.standard_normal())
            gamma, lam = rng.uniform(0.8, 1.0), rng.uniform(0.0, 1.0)
            adv, _ = compute_gae(r, v, done, np.float64(boot), gamma, lam)
            worst = max(worst, float(np.max(np.abs(adv - _double_sum(r, v, done, boot, gamma, lam)))))
        d["max_abs_err"] = f"{worst:.1e}"
        assert worst < 1e-10


def test_c04_ratio_one_identity(tmp_path):
    with criterion(4, "first minibatch of every update: clip frac 0, loss = -mean(norm adv) within 1e-6") as d:
        worst = 0.0
        for variant in (MAPPO, AB_MAPPO):
            res = train(ScenarioConfig(), PpoConfig(total_steps=128 * 4, eval_every=0, **TINY), variant, 0,
                        tmp_path / variant)
            assert len(res.stats) == 4
            for s in res.stats:
                assert s.first_clip_frac == 0.0
                worst = max(worst, abs(s.first_policy_loss + s.first_adv_mean))
        d["max_dev"] = f"{worst:.1e}"
        assert worst < 1e-6


def test_c05_attention_permutation_invariance():
    with criterion(5, "attention pooled output under 100 token permutations, dev < 1e-10") as d:
        spec = AttentionEncoderSpec(token_width=7, embed_dim=16, heads=4, out_dim=16)
        rng = np.random.default_rng(5)
        params = init_attention(spec, rng, "enc")
        tok = rng.standard_normal((4, 8, 7))
        mask = rng.random((4, 8)) < 0.75
        mask[:, 0] = True
        base = attention_encode(spec, params, tok, mask, "enc").value
        worst = 0.0
        for _ in range(100):
            p = rng.permutation(8)
            out = attention_encode(spec, params, tok[:, p], mask[:, p], "enc").value
            worst = max(worst, float(np.max(np.abs(out - base))))
        d["max_dev"] = f"{worst:.1e}"
        assert worst < 1e-10


def test_c06_parts_conservation():
    with criterion(6, "parts produced = delivered + carried at every step of 100 random episodes") as d:
        cfg = ScenarioConfig()
        rng = make_rng(6, 0)
        delivered = 0
        for ep in range(100):
            s, _ = reset(cfg, ep)
            for _ in range(cfg.max_steps):
                out = step(cfg, s, rng.uniform(-1, 1, (cfg.n_agents, 2)))
                assert int(s.parts_produced.sum()) == s.delivered_total + int(s.carrying.sum())
                if out.terminated:
                    break
            delivered += s.delivered_total
        d["delivered"] = delivered


def test_c07_graycode():
    with criterion(7, "gray code exhaustive b<=12, Hamming-1 neighbors, stationary bound on 1000 poses") as d:
        for b in range(1, 13):
            codes = [gray_encode(n, b) for n in range(1 << b)]
            assert [gray_decode(c, b) for c in codes] == list(range(1 << b))
            assert all(bin(x ^ y).count("1") == 1 for x, y in zip(codes, codes[1:]))
        sch = GrayCodeSchedule()
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(1000):
            pose = (*rng.uniform(-0.5, 0.5, 2), rng.uniform(-math.pi, math.pi))
            loc = LocalizerState.at((0.0, 0.0, 0.0))
            fixed = [localize_tick(loc, pose, sch, t) for t in range(sch.fix_ticks)]
            assert fixed[-1] and not any(fixed[:-1])
            worst = max(worst, math.hypot(loc.estimate[0] - pose[0], loc.estimate[1] - pose[1]))
        d["max_err_over_half_diag"] = f"{worst / (sch.cell_diagonal / 2):.3f}"
        assert worst <= sch.cell_diagonal / 2


def test_c08_staleness_scaling():
    with criterion(8, "central C=1 mean station age (n-1)/2 exactly; full-mesh gossip ages 0; n in {1,3,9}") as d:
        for n in (1, 3, 9):
            pos = np.random.default_rng(n).uniform(-0.2, 0.2, (n, 2))
            central = ChannelModel(CENTRAL, capacity=1)
            st = ChannelState.create(n, 0)
            means = [comm_tick(central, st, [b"p"] * n, t, pos).station_age.mean() for t in range(20 * n + 20)]
            assert all(m == (n - 1) / 2 for m in means[n:])
            gossip = ChannelModel(GOSSIP, neighbor_radius=0.6, link_prob=1.0)
            st = ChannelState.create(n, 0)
            assert all(not comm_tick(gossip, st, [b"p"] * n, t, pos).neighbor_age.any() for t in range(100))
            d[f"n{n}"] = (n - 1) / 2


def test_c09_bridge_tracking():
    with criterion(9, "oracle localization, lossless comm, static waypoints: within 0.01 m, distance decreasing") as d:
        cfg = ScenarioConfig()
        bc = BridgeConfig(localization="oracle", channel=ChannelModel(GOSSIP, link_prob=1.0))
        probe, _ = run_bridge(cfg, StationaryPolicy(), bc, duration_ticks=1, seed=3)
        starts = [
            (probe.target[0, i, 0] - 0.12 * math.cos(i), probe.target[0, i, 1] - 0.12 * math.sin(i), math.pi - i)
            for i in range(cfg.n_agents)
        ]
        tr, _ = run_bridge(cfg, StationaryPolicy(), bc, duration_ticks=600, seed=3, initial_poses=starts)
        dist = np.linalg.norm(tr.robot_pose[:, :, :2] - tr.waypoint, axis=-1)
        first = int(np.argmax(np.isfinite(dist[:, 0])))
        K = bc.robot.alignment_ticks()
        for i in range(cfg.n_agents):
            trace = dist[first + K :, i]
            outside = trace[:-1] >= bc.robot.deadband
            assert np.all(np.diff(trace)[outside] < 0)
        final = dist[-1]
        d["final_max_m"] = f"{final.max():.4f}"
        assert np.all(final < 0.01)


SMOKE_SEED = 1


def test_c10_training_smoke(tmp_path):
    with criterion(10, "reduced scenario, MAPPO, 200k steps: deliveries >= 3x random baseline") as d:
        t0 = time.perf_counter()
        cfg = reduced_scenario()
        res = train(cfg, PpoConfig(total_steps=200_000, eval_every=0), MAPPO, SMOKE_SEED, tmp_path)
        trained = evaluate(res.policy, cfg, 20, 10_000 + SMOKE_SEED, deterministic=True)
        baseline = evaluate(RandomPolicy(), cfg, 20, 10_000 + SMOKE_SEED)
        d["trained"] = f"{trained.mean_deliveries:.2f}"
        d["random"] = f"{baseline.mean_deliveries:.2f}"
        d["train_time"] = f"{time.perf_counter() - t0:.0f}s"
        assert trained.mean_deliveries >= 3 * baseline.mean_deliveries
        assert trained.mean_deliveries > 0


def test_c11_comparison_harness(tmp_path, monkeypatch):
    with criterion(11, "one command trains both variants x 3 seeds and writes the three-panel plot") as d:
        monkeypatch.delenv("ABMT_OUTPUT_DIR", raising=False)
        cfg = tmp_path / "compare.json"
        ppo = dict(n_envs=4, rollout_length=128, total_steps=2048, eval_every=0, checkpoint_every=100)
        cfg.write_text(json.dumps({"scenario": "default", "ppo": ppo, "output_dir": "cmp"}))
        assert cli_main(["compare", "--config", str(cfg), "--seeds", "3"]) == 0
        out = tmp_path / "cmp"
        svg = (out / "comparison.svg").read_text()
        assert svg.count('<g id="panel-') == 3
        for key in ("mean_return", "deliveries", "collisions"):
            panel = svg.split(f'<g id="panel-{key}">')[1].split("</g>")[0]
            assert set(re.findall(r'data-variant="([^"]+)"', panel)) == {MAPPO, AB_MAPPO}
        runs = sorted(p.parent.relative_to(out).as_posix() for p in out.rglob("metrics.csv"))
        assert runs == [f"{v}/seed_{s}" for v in (AB_MAPPO, MAPPO) for s in range(3)]
        d["summary_rows"] = len((out / "summary.csv").read_text().splitlines()) - 1


def test_c12_codecs():
    with criterion(12, "checkpoint and frame codecs bit-exact; malformed inputs rejected with named fields") as d:
        cfg = ScenarioConfig()
        for variant in (MAPPO, AB_MAPPO):
            pol = init_policy(cfg, variant, 12).rounded_to_float32()
            data = encode_checkpoint(pol, cfg)
            back = decode_checkpoint(data, cfg)
            assert encode_checkpoint(back, cfg) == data
            assert all(a.value.tobytes() == b.value.tobytes() for a, b in zip(pol.parameters(), back.parameters()))
        bad = {
            "magic": b"NOPE" + data[4:],
            "version": data[:4] + (7).to_bytes(4, "little") + data[8:],
            "trailer": data + b"x",
        }
        for field, blob in bad.items():
            with pytest.raises(CheckpointError) as e:
                decode_checkpoint(blob)
            assert e.value.field == field
        with pytest.raises(CheckpointError) as e:
            decode_checkpoint(data, ScenarioConfig(n_agents=2))
        assert e.value.field == "fingerprint"
        with pytest.raises(CheckpointError, match="truncated"):
            decode_checkpoint(data[:-3])

        rng = np.random.default_rng(12)
        for _ in range(1000):
            kind = int(rng.integers(0, 2))
            f = BridgeFrame(kind, int(rng.integers(0, 256)), int(rng.integers(0, 2**32)), int(rng.integers(0, 2**32)),
                            int(rng.integers(-(2**31), 2**31)), int(rng.integers(-(2**31), 2**31)),
                            0 if kind == WAYPOINT else int(rng.integers(-3142, 3143)))
            raw = f.encode()
            assert len(raw) == FRAME_SIZE and BridgeFrame.decode(raw) == f and BridgeFrame.decode(raw).encode() == raw
        for blob, field in ((raw[:-1], "length"), (bytes([7]) + raw[1:], "msg_type")):
            with pytest.raises(FrameError) as e:
                BridgeFrame.decode(blob)
            assert e.value.field == field
        with pytest.raises(FrameError) as e:
            BridgeFrame(POSE_REPORT, 300, 0, 0, 0, 0, 0).encode()
        assert e.value.field == "robot_id"
        d["frame_bytes"] = FRAME_SIZE
