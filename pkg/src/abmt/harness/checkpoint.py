"""Binary checkpoint format.

Layout (little-endian)::

    magic       4 bytes  b"ABMT"
    version     u32
    variant     u8 length + ASCII tag ("mappo" | "ab-mappo")
    fingerprint 32 bytes SHA-256 of the canonical scenario JSON
    count       u32 number of tensor records
    record      u16 name length, name (UTF-8), u8 rank, rank x u32 dims,
                prod(dims) x float32 data

The architecture sizes travel as the ``meta.arch`` record
``[hidden, embed_dim, heads, n_agents, n_machines]``.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..env.scenario import ScenarioConfig
from ..marl.policy import VARIANTS, PolicyBundle
from ..nn import autodiff as ad

MAGIC = b"ABMT"
VERSION = 1
META = "meta.arch"


class CheckpointError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"checkpoint {field}: {message}")
        self.field = field


def encode_checkpoint(bundle: PolicyBundle, scenario: ScenarioConfig) -> bytes:
    tag = bundle.variant.encode("ascii")
    out = [MAGIC, struct.pack("<I", VERSION), struct.pack("<B", len(tag)), tag, scenario.fingerprint()]
    meta = np.array(
        [bundle.hidden, bundle.embed_dim, bundle.heads, bundle.n_agents, bundle.n_machines], dtype=np.float64
    )
    records = [(META, meta)] + [(name, p.value) for name, p in bundle.params.items()]
    out.append(struct.pack("<I", len(records)))
    for name, value in records:
        nb = name.encode("utf-8")
        arr = np.asarray(value, dtype="<f4")
        out.append(struct.pack("<H", len(nb)) + nb + struct.pack("<B", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes(order="C"))
    return b"".join(out)


def save_checkpoint(bundle: PolicyBundle, scenario: ScenarioConfig, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_checkpoint(bundle, scenario))
    except OSError as e:
        raise OSError(f"cannot write checkpoint {path}: {e}") from e
    return path


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, field: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(field, f"truncated file (need {n} bytes at offset {self.pos})")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, field: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), field))


def decode_checkpoint(data: bytes, scenario: ScenarioConfig | None = None) -> PolicyBundle:
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise CheckpointError("magic", f"expected {MAGIC!r}")
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise CheckpointError("version", f"unsupported version {version}, expected {VERSION}")
    (tag_len,) = r.unpack("<B", "variant")
    try:
        variant = r.take(tag_len, "variant").decode("ascii")
    except UnicodeDecodeError:
        raise CheckpointError("variant", "tag is not ASCII") from None
    if variant not in VARIANTS:
        raise CheckpointError("variant", f"unknown variant tag {variant!r}")
    fingerprint = r.take(32, "fingerprint")
    if scenario is not None and fingerprint != scenario.fingerprint():
        raise CheckpointError("fingerprint", "scenario fingerprint mismatch (checkpoint trained on another scenario)")
    (count,) = r.unpack("<I", "count")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H", "name length")
        try:
            name = r.take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError("name", "tensor name is not UTF-8") from None
        (rank,) = r.unpack("<B", f"{name}: rank")
        dims = r.unpack(f"<{rank}I", f"{name}: dims")
        n = int(np.prod(dims)) if rank else 1
        raw = r.take(4 * n, f"{name}: data")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float64)
    if r.pos != len(data):
        raise CheckpointError("trailer", f"{len(data) - r.pos} unexpected trailing bytes")
    if META not in tensors:
        raise CheckpointError("name", f"missing tensor {META!r}")
    hidden, embed_dim, heads, n_agents, n_machines = (int(v) for v in tensors.pop(META))
    if scenario is not None and (n_agents, n_machines) != (scenario.n_agents, scenario.n_machines):
        raise CheckpointError("fingerprint", "agent/machine counts differ from the scenario")
    bundle = PolicyBundle(variant, n_agents, n_machines, hidden, embed_dim, heads)
    expected = bundle.expected_shapes()
    for name in tensors:
        if name not in expected:
            raise CheckpointError("name", f"unknown tensor name {name!r}")
    missing = [name for name in expected if name not in tensors]
    if missing:
        raise CheckpointError("name", f"missing tensor(s) {', '.join(missing)}")
    for name, shape in expected.items():
        if tensors[name].shape != shape:
            raise CheckpointError(f"{name}: dims", f"shape {tensors[name].shape} != expected {shape}")
    bundle.params = {name: ad.parameter(tensors[name]) for name in expected}
    return bundle


def load_checkpoint(path: str | Path, scenario: ScenarioConfig | None = None) -> PolicyBundle:
    """Read a checkpoint; with ``scenario`` the fingerprint must match."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise OSError(f"cannot read checkpoint {path}: {e}") from e
    return decode_checkpoint(data, scenario)
