"""Binary checkpoints: magic "CNVD", version, JSON header, named tensors.

Layout (all integers little-endian):

    magic      4 bytes  b"CNVD"
    version    u32      currently 1
    header_len u64      followed by that many bytes of UTF-8 JSON
    n_tensors  u32
    per tensor:
        name_len u32, name (UTF-8)
        dtype    u8   (0 = float64, 1 = float32)
        ndim     u8
        dims     u32 * ndim
        nbytes   u64, raw row-major data

The header carries config, vocabulary, stage provenance, the init seed, and
any attached low-rank adapter metadata. Tensors are written sorted by name
and floats round-trip exactly, so save -> load -> save is byte-identical.
"""

from __future__ import annotations

import io
import json
import os
import struct
from pathlib import Path

import numpy as np

from tinymmt.errors import CheckpointError
from tinymmt.model.config import ModelConfig
from tinymmt.model.lora import lora_attach
from tinymmt.model.multimodal import MultimodalModel
from tinymmt.model.vocab import Vocabulary

MAGIC = b"CNVD"
FORMAT_VERSION = 1
_DTYPE_CODES = {np.dtype(np.float64): 0, np.dtype(np.float32): 1}
_CODE_DTYPES = {code: dt for dt, code in _DTYPE_CODES.items()}


def _header(model: MultimodalModel) -> dict:
    lora = None
    if model.lora_adapters:
        first = next(iter(model.lora_adapters.values()))
        lora = {"targets": sorted(model.lora_adapters), "r": first.r, "alpha": first.alpha}
    return {
        "config": model.config.to_dict(),
        "vocab": model.vocab.to_dict(),
        "provenance": model.provenance,
        "seed": model.seed,
        "lora": lora,
    }


def save_checkpoint(model: MultimodalModel, path) -> None:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    header = json.dumps(_header(model), ensure_ascii=False, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<Q", len(header)))
    buf.write(header)
    names = model.params.names()
    buf.write(struct.pack("<I", len(names)))
    for name in names:
        data = np.ascontiguousarray(model.params[name].data)
        if data.dtype not in _DTYPE_CODES:
            raise CheckpointError(f"parameter {name!r} has unsupported dtype {data.dtype}")
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<I", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<BB", _DTYPE_CODES[data.dtype], data.ndim))
        buf.write(struct.pack(f"<{data.ndim}I", *data.shape))
        raw = data.tobytes()
        buf.write(struct.pack("<Q", len(raw)))
        buf.write(raw)

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(buf.getvalue())
    os.replace(tmp, path)


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.blob):
            raise CheckpointError(f"{self.path}: truncated or corrupt checkpoint")
        out = self.blob[self.pos: self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path) -> MultimodalModel:
    """Rebuild a model from a checkpoint; any corruption raises before a
    partially loaded model can escape."""
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    if reader.take(4) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint format version {version} "
            f"(this build reads version {FORMAT_VERSION})"
        )
    (header_len,) = reader.unpack("<Q")
    try:
        header = json.loads(reader.take(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc

    try:
        config = ModelConfig.from_dict(header["config"])
        vocab = Vocabulary.from_dict(header["vocab"])
        seed = int(header["seed"])
        provenance = header["provenance"]
        lora_meta = header.get("lora")
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: incomplete header: {exc}") from exc

    model = MultimodalModel(config, vocab, seed=seed)
    if lora_meta:
        lora_attach(model, targets=list(lora_meta["targets"]),
                    r=int(lora_meta["r"]), alpha=float(lora_meta["alpha"]))
    model.provenance = list(provenance)

    (n_tensors,) = reader.unpack("<I")
    expected = set(model.params.names())
    seen: set[str] = set()
    for _ in range(n_tensors):
        (name_len,) = reader.unpack("<I")
        name = reader.take(name_len).decode("utf-8")
        dtype_code, ndim = reader.unpack("<BB")
        if dtype_code not in _CODE_DTYPES:
            raise CheckpointError(f"{path}: tensor {name!r} has unknown dtype code {dtype_code}")
        dims = reader.unpack(f"<{ndim}I")
        (nbytes,) = reader.unpack("<Q")
        dtype = _CODE_DTYPES[dtype_code]
        count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        if nbytes != count * dtype.itemsize:
            raise CheckpointError(
                f"{path}: tensor {name!r} length field {nbytes} does not match "
                f"shape {tuple(dims)} ({count * dtype.itemsize} bytes expected)"
            )
        data = np.frombuffer(reader.take(nbytes), dtype=dtype).reshape(dims).copy()
        if name not in expected:
            raise CheckpointError(f"{path}: unexpected tensor {name!r} for this config")
        if model.params[name].data.shape != data.shape:
            raise CheckpointError(
                f"{path}: tensor {name!r} shape {data.shape} conflicts with the "
                f"embedded config (expected {model.params[name].data.shape})"
            )
        model.params[name].data = data.astype(config.np_dtype, copy=False)
        seen.add(name)
    if reader.pos != len(reader.blob):
        raise CheckpointError(f"{path}: trailing bytes after the last tensor")
    missing = expected - seen
    if missing:
        raise CheckpointError(f"{path}: missing tensors: {sorted(missing)[:5]}")
    return model
