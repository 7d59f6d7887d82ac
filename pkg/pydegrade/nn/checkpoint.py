"""
Named-tensor archives for parameters and optimizer state.

Layout (all integers little-endian)::

    magic      8 bytes  b"PDGARCH\\0"
    version    uint32
    meta_len   uint32, then meta_len bytes of UTF-8 JSON metadata
    count      uint32
    count x entry:
        name_len uint16, name (UTF-8)
        ndim     uint8, then ndim x uint32 dims
        data     prod(dims) x float32
"""
from __future__ import annotations

import io
import json
import struct
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
import torch

from pydegrade.errors import ArchiveFormatError

ARCHIVE_MAGIC = b"PDGARCH\0"
ARCHIVE_VERSION = 1


def _read_exact(stream: io.BufferedIOBase, size: int, what: str) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise ArchiveFormatError(f"Truncated archive while reading {what}")
    return data


def write_archive(
    stream: io.BufferedIOBase,
    tensors: Mapping[str, torch.Tensor],
    metadata: Optional[Mapping[str, Any]] = None,
) -> None:
    meta = json.dumps(dict(metadata or {}), sort_keys=True).encode("utf-8")
    stream.write(ARCHIVE_MAGIC)
    stream.write(struct.pack("<II", ARCHIVE_VERSION, len(meta)))
    stream.write(meta)
    stream.write(struct.pack("<I", len(tensors)))
    for name, tensor in tensors.items():
        encoded = name.encode("utf-8")
        values = tensor.detach().cpu().numpy().astype("<f4")
        stream.write(struct.pack("<H", len(encoded)))
        stream.write(encoded)
        stream.write(struct.pack("<B", values.ndim))
        stream.write(struct.pack(f"<{values.ndim}I", *values.shape))
        stream.write(values.tobytes())


def read_archive(stream: io.BufferedIOBase) -> Tuple[Dict[str, torch.Tensor], Dict[str, Any]]:
    if _read_exact(stream, len(ARCHIVE_MAGIC), "magic") != ARCHIVE_MAGIC:
        raise ArchiveFormatError("Not a pydegrade archive (bad magic)")
    version, meta_len = struct.unpack("<II", _read_exact(stream, 8, "header"))
    if version != ARCHIVE_VERSION:
        raise ArchiveFormatError(f"Unsupported archive version {version}")
    try:
        metadata = json.loads(_read_exact(stream, meta_len, "metadata").decode("utf-8"))
    except ValueError as e:
        raise ArchiveFormatError("Archive metadata is not valid JSON") from e

    (count,) = struct.unpack("<I", _read_exact(stream, 4, "entry count"))
    tensors: Dict[str, torch.Tensor] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", _read_exact(stream, 2, "name length"))
        name = _read_exact(stream, name_len, "name").decode("utf-8")
        (ndim,) = struct.unpack("<B", _read_exact(stream, 1, f"rank of {name}"))
        shape = struct.unpack(f"<{ndim}I", _read_exact(stream, 4 * ndim, f"shape of {name}"))
        size = int(np.prod(shape, dtype=np.int64))
        raw = _read_exact(stream, 4 * size, f"data of {name}")
        values = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(shape)
        tensors[name] = torch.from_numpy(values.copy())
    if stream.read(1):
        raise ArchiveFormatError("Trailing bytes after the last archive entry")
    return tensors, metadata


def save_archive(path: str, tensors: Mapping[str, torch.Tensor], metadata=None) -> None:
    with open(path, "wb") as f:
        write_archive(f, tensors, metadata)


def load_archive(path: str) -> Tuple[Dict[str, torch.Tensor], Dict[str, Any]]:
    with open(path, "rb") as f:
        return read_archive(f)


def _optimizer_entries(name: str, optimizer: torch.optim.Optimizer):
    state = optimizer.state_dict()
    tensors = {}
    scalars: Dict[str, Dict[str, Any]] = {}
    for index, param_state in state["state"].items():
        for key, value in param_state.items():
            if isinstance(value, torch.Tensor):
                tensors[f"optim/{name}/{index}/{key}"] = value
            else:
                scalars.setdefault(str(index), {})[key] = value
    return tensors, {"param_groups": state["param_groups"], "scalars": scalars}


def save_checkpoint(
    path: str,
    modules: Mapping[str, torch.nn.Module],
    optimizers: Optional[Mapping[str, torch.optim.Optimizer]] = None,
    metadata: Optional[Mapping[str, Any]] = None,
) -> None:
    """
    Write module parameters and buffers, optimizer state and JSON-serializable
    `metadata` (learning rates, scheduler state, hyperparameters) to one archive.
    """
    tensors: Dict[str, torch.Tensor] = {}
    for module_name, module in modules.items():
        for key, value in module.state_dict().items():
            tensors[f"module/{module_name}/{key}"] = value

    optimizer_meta = {}
    for optimizer_name, optimizer in (optimizers or {}).items():
        entries, meta = _optimizer_entries(optimizer_name, optimizer)
        tensors.update(entries)
        optimizer_meta[optimizer_name] = meta

    save_archive(
        path,
        tensors,
        {"user": dict(metadata or {}), "optimizers": optimizer_meta},
    )


def load_checkpoint(
    path: str,
    modules: Mapping[str, torch.nn.Module],
    optimizers: Optional[Mapping[str, torch.optim.Optimizer]] = None,
) -> Dict[str, Any]:
    """Restore `modules` and `optimizers` in place and return the user metadata."""
    tensors, metadata = load_archive(path)

    for module_name, module in modules.items():
        prefix = f"module/{module_name}/"
        state = {k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)}
        if not state:
            raise ArchiveFormatError(f"Checkpoint {path} has no entries for '{module_name}'")
        module.load_state_dict(state)

    for optimizer_name, optimizer in (optimizers or {}).items():
        if optimizer_name not in metadata.get("optimizers", {}):
            raise ArchiveFormatError(
                f"Checkpoint {path} has no state for optimizer '{optimizer_name}'"
            )
        meta = metadata["optimizers"][optimizer_name]
        prefix = f"optim/{optimizer_name}/"
        param_state: Dict[int, Dict[str, Any]] = {}
        for key, value in tensors.items():
            if key.startswith(prefix):
                index, field = key[len(prefix):].split("/", 1)
                param_state.setdefault(int(index), {})[field] = value
        for index, scalars in meta["scalars"].items():
            param_state.setdefault(int(index), {}).update(scalars)
        optimizer.load_state_dict(
            {"state": param_state, "param_groups": meta["param_groups"]}
        )

    return metadata.get("user", {})
