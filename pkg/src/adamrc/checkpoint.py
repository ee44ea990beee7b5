"""Checkpoint container: JSON manifest + one little-endian float32 blob.

Layout: 6-byte magic, u64-le manifest length, manifest JSON (UTF-8), then
the raw concatenated float32 payload. The manifest's tensor table records
{name, dtype, shape, byte_offset, byte_len} per tensor; every byte range
is validated on load so truncation or shape drift fails loudly with the
offending tensor's name.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from typing import Mapping

import numpy as np
import torch

MAGIC = b"AMRC1\n"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Unreadable, corrupt, or version-incompatible checkpoint."""


def save_checkpoint(params: Mapping[str, np.ndarray], manifest: dict,
                    path: str | os.PathLike) -> None:
    """Write params + manifest atomically (temp file then rename).

    ``manifest`` holds caller metadata (config snapshot, epoch, dev
    metrics); the tensor table and format version are added here.
    """
    table = []
    chunks = []
    offset = 0
    for name in params:
        arr = np.ascontiguousarray(params[name], dtype="<f4")
        raw = arr.tobytes()
        table.append({"name": name, "dtype": "f4", "shape": list(arr.shape),
                      "byte_offset": offset, "byte_len": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    full = dict(manifest)
    full["format_version"] = FORMAT_VERSION
    full["tensors"] = table
    blob = json.dumps(full, sort_keys=True).encode("utf-8")

    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            for raw in chunks:
                fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str | os.PathLike
                    ) -> tuple[dict[str, np.ndarray], dict]:
    """Read back (params, manifest); corrupt payloads name the bad tensor."""
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
        if head != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
        (mlen,) = struct.unpack("<Q", fh.read(8))
        try:
            manifest = json.loads(fh.read(mlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{path}: unreadable manifest: {e}") from e
        payload = fh.read()

    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format_version {version!r} unsupported "
            f"(expected {FORMAT_VERSION})")
    params: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        name = entry["name"]
        shape = tuple(entry["shape"])
        expected = int(np.prod(shape, dtype=np.int64)) * 4
        if entry["dtype"] != "f4":
            raise CheckpointError(f"{path}: tensor {name}: dtype "
                                  f"{entry['dtype']!r} unsupported")
        if entry["byte_len"] != expected:
            raise CheckpointError(
                f"{path}: tensor {name}: byte_len {entry['byte_len']} does "
                f"not match shape {shape}")
        lo, hi = entry["byte_offset"], entry["byte_offset"] + entry["byte_len"]
        if hi > len(payload):
            raise CheckpointError(
                f"{path}: tensor {name}: payload truncated "
                f"(need {hi} bytes, have {len(payload)})")
        params[name] = np.frombuffer(payload[lo:hi], dtype="<f4").reshape(shape)
    return params, manifest


def module_params(module: torch.nn.Module, prefix: str = ""
                  ) -> dict[str, np.ndarray]:
    """state_dict as float32 numpy arrays, optionally name-prefixed."""
    out = {}
    for name, tensor in module.state_dict().items():
        out[prefix + name] = tensor.detach().cpu().numpy().astype("<f4")
    return out


def load_module_params(module: torch.nn.Module,
                       params: Mapping[str, np.ndarray],
                       prefix: str = "") -> None:
    state = {}
    for name in module.state_dict():
        key = prefix + name
        if key not in params:
            raise CheckpointError(f"checkpoint is missing tensor {key}")
        state[name] = torch.as_tensor(np.array(params[key]))
    module.load_state_dict(state)
