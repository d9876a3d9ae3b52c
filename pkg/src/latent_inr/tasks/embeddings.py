"""``.lemb`` embedding tables: string ids, float32 vectors, optional labels.

Layout (little-endian)::

    b"LEMB"  u16 version  u32 count  u32 dim
    count x [u16 id_len, id bytes (UTF-8), dim x f32]

Labels live in an optional sidecar ``<file>.labels.json`` mapping id to
``{"class": ..., "segment": ..., "video": ...}``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"LEMB"
VERSION = 1


class EmbeddingFormatError(ValueError):
    pass


@dataclass
class EmbeddingTable:
    ids: list
    vectors: np.ndarray
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2 or len(self.ids) != len(self.vectors):
            raise EmbeddingFormatError("need one vector per id in a [count, dim] array")
        if len(set(self.ids)) != len(self.ids):
            raise EmbeddingFormatError("ids must be unique")
        if not np.all(np.isfinite(self.vectors)):
            raise EmbeddingFormatError("embedding vectors must be finite")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def row(self, key: str) -> np.ndarray:
        return self.vectors[self.ids.index(key)]

    def to_bytes(self) -> bytes:
        parts = [MAGIC, struct.pack("<HII", VERSION, len(self.ids), self.dim)]
        vecs = self.vectors.astype("<f4")
        for key, vec in zip(self.ids, vecs):
            raw = key.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise EmbeddingFormatError(f"id too long: {key[:40]}...")
            parts.append(struct.pack("<H", len(raw)))
            parts.append(raw)
            parts.append(vec.tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes, labels: dict | None = None) -> "EmbeddingTable":
        if len(data) < 14 or data[:4] != MAGIC:
            raise EmbeddingFormatError("not an embedding table (bad magic)")
        version, count, dim = struct.unpack_from("<HII", data, 4)
        if version != VERSION:
            raise EmbeddingFormatError(f"unsupported embedding table version {version}")
        pos = 14
        ids, rows = [], []
        for _ in range(count):
            if pos + 2 > len(data):
                raise EmbeddingFormatError("truncated embedding table")
            (n,) = struct.unpack_from("<H", data, pos)
            pos += 2
            end = pos + n + 4 * dim
            if end > len(data):
                raise EmbeddingFormatError("truncated embedding table")
            ids.append(data[pos:pos + n].decode("utf-8"))
            rows.append(np.frombuffer(data, dtype="<f4", count=dim, offset=pos + n))
            pos = end
        if pos != len(data):
            raise EmbeddingFormatError(f"{len(data) - pos} trailing bytes in embedding table")
        vectors = np.stack(rows) if rows else np.zeros((0, dim), dtype=np.float32)
        return cls(ids, vectors.astype(np.float32), labels or {})


def labels_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".labels.json")


def save_embeddings(table: EmbeddingTable, path) -> None:
    Path(path).write_bytes(table.to_bytes())
    if table.labels:
        labels_path(path).write_text(json.dumps(table.labels, indent=2, sort_keys=True))


def load_embeddings(path) -> EmbeddingTable:
    path = Path(path)
    sidecar = labels_path(path)
    labels = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    return EmbeddingTable.from_bytes(path.read_bytes(), labels)


def frame_id(t: int) -> str:
    return f"frame_{t:06d}"


def latents_table(model) -> EmbeddingTable:
    z = model.latents.data
    return EmbeddingTable([frame_id(t) for t in range(len(z))], z.astype(np.float32))


def export_latents(model, path) -> EmbeddingTable:
    """Write the model's latent dictionary as an embedding table."""
    table = latents_table(model)
    save_embeddings(table, path)
    return table
