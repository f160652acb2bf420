"""Embedding layer: canonical JSON rendering, a deterministic local embedder,
a remote-embedder client, and brute-force cosine top-k.

The local embedder is signed feature hashing: lowercase alphanumeric tokens,
64-bit FNV-1a per token, count accumulated into bucket (hash mod dim) with
the sign taken from hash bit 32, then L2 normalization. It is reproducible
and order-insensitive; it makes no claim to the semantic quality of a real
language embedding model. Index files use the QVIX binary layout described
in save_index().
"""

from __future__ import annotations

import json
import os
import re
import struct
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path

import httpx
import numpy as np

from .model import PlmComponent, QualificationCard, RuleTable, format_decimal

LOCAL_DIM = 256
LOCAL_TAG = f"local-fnv1a-{LOCAL_DIM}"
DEFAULT_REMOTE_MODEL = "multilingual-e5-large-instruct"

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class EmbedderMismatch(ValueError):
    """Query embedder differs from the one that built the index."""


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def to_canonical_json(
    entity: PlmComponent | QualificationCard, rules: RuleTable
) -> str:
    """Byte-deterministic JSON: sorted keys, optionals omitted, minimal-digit
    decimals, canonical manufacturer."""
    if isinstance(entity, PlmComponent):
        fields: dict[str, object] = {
            "part_number": entity.part_number,
            "package_code": entity.package_code,
            "subpackage_code": entity.subpackage_code,
            "manufacturer": rules.lookup(entity.manufacturer_name),
            "family": entity.family,
            "pitch": format_decimal(entity.pitch),
            "pin_dimension_um": format_decimal(entity.pin_dimension),
            "lead_finish": entity.lead_finish,
            "raw_material": entity.raw_material,
            "package_length_mm": _optional_decimal(entity.package_length),
            "package_width_mm": _optional_decimal(entity.package_width),
            "package_height_mm": _optional_decimal(entity.package_height),
            "assembly_type": entity.assembly_type,
            "generic_pn": entity.generic_pn,
        }
    else:
        fields = {
            "number": entity.number,
            "package_code": entity.package_code,
            "subpackage_code": entity.subpackage_code,
            "manufacturer": rules.lookup(entity.manufacturer_name),
            "status": entity.status.value,
            "qualification_type": entity.qualification_type,
            "description": entity.description,
            "documentation": entity.documentation,
            "conformal_coating": entity.conformal_coating,
            "substrate_material": entity.substrate_material,
            "assembly_type": entity.assembly_type,
            "pitch": _optional_decimal(entity.pitch),
            "pin_dimension_um": _optional_decimal(entity.pin_dimension),
            "family": entity.family,
            "notes": entity.notes,
        }
    present = {k: v for k, v in fields.items() if v is not None}
    return json.dumps(present, sort_keys=True, separators=(",", ":"))


def _optional_decimal(value: Decimal | None) -> str | None:
    return None if value is None else format_decimal(value)


class LocalEmbedder:
    dimension = LOCAL_DIM
    tag = LOCAL_TAG

    def __init__(self) -> None:
        self._token_cache: dict[str, tuple[int, float]] = {}

    def embed(self, text: str) -> np.ndarray:
        vector = np.zeros(self.dimension, dtype=np.float64)
        for token in _TOKEN_RE.findall(text.lower()):
            cached = self._token_cache.get(token)
            if cached is None:
                h = _fnv1a64(token.encode("utf-8"))
                bucket = h % self.dimension
                sign = -1.0 if (h >> 32) & 1 else 1.0
                cached = (bucket, sign)
                self._token_cache[token] = cached
            vector[cached[0]] += cached[1]
        return _normalize(vector)


class RemoteEmbedder:
    """Client for an embedding endpoint: POST {model, input: [text]} returning
    {data: [{embedding: [...]}]}. Vectors are normalized on receipt."""

    def __init__(
        self,
        endpoint: str | None = None,
        model: str | None = None,
        timeout_s: float = 60.0,
        client: httpx.Client | None = None,
    ):
        self.endpoint = endpoint or os.environ.get("EMBED_ENDPOINT", "")
        if not self.endpoint:
            raise ValueError("embedding endpoint not configured (EMBED_ENDPOINT)")
        self.model = model or os.environ.get("EMBED_MODEL", DEFAULT_REMOTE_MODEL)
        self.tag = f"remote-{self.model}"
        self.dimension: int | None = None
        self._client = client or httpx.Client(timeout=timeout_s)

    def embed(self, text: str) -> np.ndarray:
        response = self._client.post(
            self.endpoint, json={"model": self.model, "input": [text]}
        )
        response.raise_for_status()
        values = np.asarray(
            response.json()["data"][0]["embedding"], dtype=np.float64
        )
        if not np.all(np.isfinite(values)):
            raise ValueError("remote embedding contains non-finite entries")
        if self.dimension is None:
            self.dimension = values.shape[0]
        elif values.shape[0] != self.dimension:
            raise ValueError(
                f"remote embedding dimension changed: {values.shape[0]} != {self.dimension}"
            )
        return _normalize(values)


def _normalize(vector: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        out = np.zeros_like(vector)
        out[0] = 1.0
        return out
    return vector / norm


@dataclass
class VectorIndex:
    ids: list[str]
    matrix: np.ndarray  # (n, dim), rows unit-normalized
    embedder_tag: str

    def __post_init__(self) -> None:
        if len(self.ids) != self.matrix.shape[0]:
            raise ValueError("id count does not match matrix rows")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate entity ids in index")

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[1])


def build_index(
    entries: list[tuple[str, str]], embedder: LocalEmbedder | RemoteEmbedder
) -> VectorIndex:
    """entries: (entity_id, canonical JSON text)."""
    if entries:
        matrix = np.vstack([embedder.embed(text) for _, text in entries])
    else:
        dim = embedder.dimension or LOCAL_DIM
        matrix = np.zeros((0, dim), dtype=np.float64)
    return VectorIndex(
        ids=[entity_id for entity_id, _ in entries],
        matrix=matrix,
        embedder_tag=embedder.tag,
    )


def top_k(
    query: np.ndarray,
    index: VectorIndex,
    k: int,
    candidate_filter: set[str] | None = None,
    query_tag: str | None = None,
) -> list[tuple[str, float]]:
    """Best-k by cosine, descending, ties broken by entity id ascending."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if query_tag is not None and query_tag != index.embedder_tag:
        raise EmbedderMismatch(
            f"query embedder {query_tag!r} != index embedder {index.embedder_tag!r}"
        )
    if query.shape[0] != index.dimension:
        raise EmbedderMismatch(
            f"query dimension {query.shape[0]} != index dimension {index.dimension}"
        )
    if candidate_filter is not None:
        positions = [i for i, eid in enumerate(index.ids) if eid in candidate_filter]
    else:
        positions = range(len(index.ids))
    scored = [
        (float(index.matrix[i] @ query), index.ids[i]) for i in positions
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [(eid, score) for score, eid in scored[:k]]


_MAGIC = b"QVIX"
_VERSION = 1


def save_index(index: VectorIndex, path: Path) -> None:
    """Binary layout: magic 'QVIX', u16 version, u16 dim, u32 count,
    u16 tag length + tag bytes, then per entry u16 id length + id bytes and
    dim little-endian float32 values."""
    tag = index.embedder_tag.encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(_MAGIC)
        handle.write(struct.pack("<HHI", _VERSION, index.dimension, len(index.ids)))
        handle.write(struct.pack("<H", len(tag)))
        handle.write(tag)
        as32 = index.matrix.astype("<f4")
        for i, entity_id in enumerate(index.ids):
            raw = entity_id.encode("utf-8")
            handle.write(struct.pack("<H", len(raw)))
            handle.write(raw)
            handle.write(as32[i].tobytes())


def load_index(path: Path) -> VectorIndex:
    with open(path, "rb") as handle:
        magic = handle.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not an index file (magic {magic!r})")
        version, dim, count = struct.unpack("<HHI", handle.read(8))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported index version {version}")
        (tag_len,) = struct.unpack("<H", handle.read(2))
        tag = handle.read(tag_len).decode("utf-8")
        ids = []
        rows = np.zeros((count, dim), dtype=np.float64)
        for i in range(count):
            (id_len,) = struct.unpack("<H", handle.read(2))
            ids.append(handle.read(id_len).decode("utf-8"))
            rows[i] = np.frombuffer(handle.read(4 * dim), dtype="<f4")
    return VectorIndex(ids=ids, matrix=rows, embedder_tag=tag)
