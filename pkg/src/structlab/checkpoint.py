"""Versioned binary checkpoint container.

Layout: magic ``SLCK``, u32 format version, u64 manifest length, manifest
JSON (config echo plus a tensor table with name/shape/dtype/offset/nbytes),
then the raw little-endian tensor payloads back to back.  Reloading restores
bit-identical parameters at the same precision.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import DataError

MAGIC = b"SLCK"
VERSION = 1


def save_checkpoint(path, config_dict, named_tensors):
    """Write config and an iterable of (name, Tensor) pairs to `path`."""
    entries = []
    payloads = []
    offset = 0
    for name, tensor in named_tensors:
        arr = tensor.data
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = le.tobytes()  # C-order bytes regardless of memory layout
        entries.append({"name": name, "shape": list(arr.shape),
                        "dtype": arr.dtype.name, "offset": offset,
                        "nbytes": len(raw)})
        payloads.append(raw)
        offset += len(raw)
    manifest = json.dumps({"config": config_dict, "tensors": entries},
                          sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(manifest)))
        fh.write(manifest)
        for raw in payloads:
            fh.write(raw)


def load_checkpoint(path):
    """Read a checkpoint; returns (config_dict, {name: array})."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise DataError(f"{path}: not a checkpoint file")
        version = struct.unpack("<I", fh.read(4))[0]
        if version != VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        (mlen,) = struct.unpack("<Q", fh.read(8))
        manifest = json.loads(fh.read(mlen).decode("utf-8"))
        payload = fh.read()
    tensors = {}
    for entry in manifest["tensors"]:
        raw = payload[entry["offset"]: entry["offset"] + entry["nbytes"]]
        dt = np.dtype(entry["dtype"]).newbyteorder("<")
        arr = np.frombuffer(raw, dtype=dt).reshape(entry["shape"])
        tensors[entry["name"]] = arr.astype(entry["dtype"])
    return manifest["config"], tensors


def save_model(path, model, vocab_tokens=None):
    blob = {"model": model.config.to_dict(), "vocab": vocab_tokens}
    save_checkpoint(path, blob, model.named_parameters())


def load_model(path):
    """Rebuild (model, vocab tokens) from a checkpoint; forward passes are
    bit-identical to the saved model at the same precision."""
    from .model import ModelConfig, StructuredTransformer

    blob, tensors = load_checkpoint(path)
    config_dict, vocab_tokens = blob["model"], blob.get("vocab")
    model = StructuredTransformer(ModelConfig(**config_dict))
    names = set()
    for name, tensor in model.named_parameters():
        if name not in tensors:
            raise DataError(f"{path}: checkpoint is missing tensor {name!r}")
        arr = tensors[name]
        if tuple(arr.shape) != tensor.shape or arr.dtype != tensor.dtype:
            raise DataError(
                f"{path}: tensor {name!r} has shape {arr.shape}/{arr.dtype}, "
                f"model expects {tensor.shape}/{tensor.dtype}")
        tensor.data = arr.copy()
        names.add(name)
    extra = set(tensors) - names
    if extra:
        raise DataError(f"{path}: checkpoint has unknown tensors {sorted(extra)}")
    return model, vocab_tokens
