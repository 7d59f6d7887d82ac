"""
Representation pools: stored degradation representations sampled at synthesis time.

Pool file layout (all integers little-endian)::

    magic    8 bytes  b"PDGPOOL\\0"
    version  uint32
    count    uint32
    dim      uint32 (512)
    count x dim float32 rows
    count x label record: uint16 length (0xFFFF for no label) + UTF-8 bytes
    count x source record: uint16 length + UTF-8 bytes
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import torch

from pydegrade.errors import ArchiveFormatError, ShapeError
from pydegrade.imaging.filters import augment, random_augmentation
from pydegrade.imaging.tensor import ImageTensor
from pydegrade.models.encoder import OMEGA_DIM, DegradationEncoder, extract_representation
from pydegrade.training.data import derive_seed

POOL_MAGIC = b"PDGPOOL\0"
POOL_VERSION = 1
_NO_LABEL = 0xFFFF

PoolItem = Tuple[ImageTensor, ImageTensor, Optional[str]]
SamplingStrategy = Literal["uniform", "by_label"]


@dataclass
class RepresentationPool:
    omegas: torch.Tensor = field(default_factory=lambda: torch.zeros(0, OMEGA_DIM))
    labels: List[Optional[str]] = field(default_factory=list)
    source_ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.omegas = torch.as_tensor(self.omegas, dtype=torch.float32).detach().reshape(-1, OMEGA_DIM)
        n = self.omegas.shape[0]
        if not self.labels:
            self.labels = [None] * n
        if not self.source_ids:
            self.source_ids = [str(i) for i in range(n)]
        if len(self.labels) != n or len(self.source_ids) != n:
            raise ShapeError(
                f"Pool has {n} representations but {len(self.labels)} labels and "
                f"{len(self.source_ids)} source ids"
            )

    def __len__(self) -> int:
        return self.omegas.shape[0]

    def distinct_labels(self) -> List[str]:
        return sorted({label for label in self.labels if label is not None})


def build_pool(
    pairs: Sequence[PoolItem],
    encoder: DegradationEncoder,
    source_ids: Optional[Sequence[str]] = None,
) -> RepresentationPool:
    """
    Extract one representation per aligned (LQ, HQ, label) item, keeping labels.

    Args:
        pairs: Sequence[Tuple[ImageTensor, ImageTensor, Optional[str]]]
            - Aligned pairs; a size mismatch raises ShapeError.
        encoder: DegradationEncoder
            - Trained encoder.
        source_ids: Optional[Sequence[str]]
            - Identifier per pair, defaults to the pair index.
    """
    omegas = []
    with torch.no_grad():
        for lq, hq, _ in pairs:
            omegas.append(extract_representation(lq, hq, encoder, align=False).float())
    return RepresentationPool(
        torch.stack(omegas) if omegas else torch.zeros(0, OMEGA_DIM),
        [label for _, _, label in pairs],
        list(source_ids) if source_ids is not None else [str(i) for i in range(len(pairs))],
    )


def augment_pairs(
    pairs: Sequence[PoolItem],
    copies: int,
    seed: int,
    *,
    rescale_range: Tuple[float, float] = (0.5, 1.0),
) -> List[PoolItem]:
    """
    Enlarge the degradation space of face pairs: each pair is followed by `copies`
    rotated and resampled versions, with identical parameters on LQ and HQ.
    """
    if copies < 0:
        raise ValueError("copies must be a non-negative integer")
    out: List[PoolItem] = []
    for i, (lq, hq, label) in enumerate(pairs):
        if lq.shape != hq.shape:
            raise ShapeError(f"Pair {i} is not aligned: {lq.shape} vs {hq.shape}")
        out.append((lq, hq, label))
        for c in range(copies):
            rng = np.random.default_rng(derive_seed(seed, i, c))
            params = random_augmentation(
                hq.height, hq.width, min(hq.height, hq.width) // 2, rng, rescale_range=rescale_range
            )
            out.append(
                (
                    augment(lq, params.rotation_quarter_turns, params.rescale).clip(),
                    augment(hq, params.rotation_quarter_turns, params.rescale).clip(),
                    label,
                )
            )
    return out


def sample_pool_indices(
    pool: RepresentationPool,
    count: int,
    seed: int,
    strategy: SamplingStrategy = "uniform",
) -> np.ndarray:
    if len(pool) == 0:
        raise ValueError("Cannot sample from an empty pool")
    rng = np.random.default_rng(seed)
    if strategy == "uniform":
        return rng.integers(len(pool), size=count)
    if strategy == "by_label":
        # Unlabelled items form their own bucket, distinct from an empty label.
        buckets: Dict[Optional[str], List[int]] = {}
        for index, label in enumerate(pool.labels):
            buckets.setdefault(label, []).append(index)
        members = list(buckets.values())
        chosen = rng.integers(len(members), size=count)
        return np.array([rng.choice(members[bucket]) for bucket in chosen], dtype=np.int64)
    raise NotImplementedError(
        f"Unknown pool sampling strategy '{strategy}'. Available strategies are ['uniform', 'by_label']"
    )


def sample_pool_index(pool: RepresentationPool, seed: int, strategy: SamplingStrategy = "uniform") -> int:
    return int(sample_pool_indices(pool, 1, seed, strategy)[0])


def sample_pool(pool: RepresentationPool, seed: int, strategy: SamplingStrategy = "uniform") -> torch.Tensor:
    """A stored representation, returned unmodified."""
    return pool.omegas[sample_pool_index(pool, seed, strategy)]


def _pack_text(text: Optional[str]) -> bytes:
    if text is None:
        return struct.pack("<H", _NO_LABEL)
    encoded = text.encode("utf-8")
    if len(encoded) >= _NO_LABEL:
        raise ValueError("Pool labels and source ids must be shorter than 65535 bytes")
    return struct.pack("<H", len(encoded)) + encoded


def pool_to_bytes(pool: RepresentationPool) -> bytes:
    parts = [
        POOL_MAGIC,
        struct.pack("<III", POOL_VERSION, len(pool), OMEGA_DIM),
        pool.omegas.numpy().astype("<f4").tobytes(),
    ]
    parts.extend(_pack_text(label) for label in pool.labels)
    parts.extend(_pack_text(source) for source in pool.source_ids)
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.data):
            raise ArchiveFormatError(f"Truncated pool file while reading {what}")
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def text(self, what: str) -> Optional[str]:
        (length,) = struct.unpack("<H", self.take(2, what))
        if length == _NO_LABEL:
            return None
        return self.take(length, what).decode("utf-8")


def pool_from_bytes(data: bytes) -> RepresentationPool:
    reader = _Reader(data)
    if reader.take(len(POOL_MAGIC), "magic") != POOL_MAGIC:
        raise ArchiveFormatError("Not a pydegrade pool file (bad magic)")
    version, count, dim = struct.unpack("<III", reader.take(12, "header"))
    if version != POOL_VERSION:
        raise ArchiveFormatError(f"Unsupported pool version {version}")
    if dim != OMEGA_DIM:
        raise ArchiveFormatError(f"Pool dimension must be {OMEGA_DIM}, got {dim}")
    rows = np.frombuffer(reader.take(4 * count * dim, "representations"), dtype="<f4")
    omegas = torch.from_numpy(rows.astype(np.float32).reshape(count, dim))
    labels = [reader.text("labels") for _ in range(count)]
    sources = [reader.text("source ids") or "" for _ in range(count)]
    if reader.offset != len(data):
        raise ArchiveFormatError("Trailing bytes after the pool label table")
    return RepresentationPool(omegas, labels, sources)


def save_pool(pool: RepresentationPool, path: str) -> None:
    with open(path, "wb") as f:
        f.write(pool_to_bytes(pool))


def load_pool(path: str) -> RepresentationPool:
    with open(path, "rb") as f:
        return pool_from_bytes(f.read())
