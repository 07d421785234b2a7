import struct

import numpy as np
import pytest

from abmt.env import ScenarioConfig, reduced_scenario
from abmt.harness.checkpoint import MAGIC, CheckpointError, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from abmt.marl import AB_MAPPO, MAPPO, evaluate, init_policy


@pytest.mark.parametrize("variant", [MAPPO, AB_MAPPO])
def test_roundtrip_bit_exact(tmp_path, variant):
    cfg = ScenarioConfig()
    pol = init_policy(cfg, variant, 3, hidden=16, embed_dim=8, heads=2).rounded_to_float32()
    data = encode_checkpoint(pol, cfg)
    back = decode_checkpoint(data, cfg)
    assert back.variant == variant and (back.hidden, back.embed_dim, back.heads) == (16, 8, 2)
    assert encode_checkpoint(back, cfg) == data
    for a, b in zip(pol.parameters(), back.parameters()):
        assert a.value.tobytes() == b.value.tobytes()
    path = save_checkpoint(pol, cfg, tmp_path / "x.abmt")
    assert path.read_bytes() == data
    r1 = evaluate(pol, cfg, 2, 0, deterministic=True)
    r2 = evaluate(load_checkpoint(path, cfg), cfg, 2, 0, deterministic=True)
    assert r1.rows == r2.rows


def _good():
    cfg = reduced_scenario()
    return cfg, encode_checkpoint(init_policy(cfg, MAPPO, 0, hidden=8), cfg)


def _expect(data, field, cfg=None):
    with pytest.raises(CheckpointError) as e:
        decode_checkpoint(data, cfg)
    assert e.value.field == field
    return e.value


def test_bad_magic():
    _, data = _good()
    _expect(b"XBMT" + data[4:], "magic")


def test_bad_version():
    _, data = _good()
    _expect(data[:4] + struct.pack("<I", 99) + data[8:], "version")


def test_unknown_variant():
    _, data = _good()
    _expect(data[:8] + bytes([5]) + b"qmix!" + data[14:], "variant")


@pytest.mark.parametrize("cut,field", [(2, "magic"), (6, "version"), (20, "fingerprint")])
def test_truncation_names_field(cut, field):
    _, data = _good()
    assert "truncated" in str(_expect(data[:cut], field))


def test_truncated_anywhere_rejected():
    _, data = _good()
    for cut in range(0, len(data), 37):
        with pytest.raises(CheckpointError, match="truncated"):
            decode_checkpoint(data[:cut])


def test_trailing_bytes():
    _, data = _good()
    _expect(data + b"\0", "trailer")


def test_fingerprint_mismatch():
    three = ScenarioConfig()
    data = encode_checkpoint(init_policy(three, MAPPO, 0), three)
    _expect(data, "fingerprint", ScenarioConfig(n_agents=2))
    assert decode_checkpoint(data).n_agents == 3


def test_unknown_tensor_name():
    cfg, data = _good()
    pol = init_policy(cfg, MAPPO, 0, hidden=8)
    pol.params = {("zz." + k if i == 0 else k): v for i, (k, v) in enumerate(pol.params.items())}
    _expect(encode_checkpoint(pol, cfg), "name", cfg)


def test_wrong_shape():
    cfg = reduced_scenario()
    pol = init_policy(cfg, MAPPO, 0, hidden=8)
    name = next(iter(pol.params))
    from abmt.nn import autodiff as ad

    pol.params[name] = ad.parameter(np.zeros((1, 1)))
    err = _expect(encode_checkpoint(pol, cfg), f"{name}: dims", cfg)
    assert name in str(err)
