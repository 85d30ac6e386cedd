"""Embedding providers shared by stream preparation and evaluation.

Real CLIP/BGE-style models are out of reach here, so the default provider
hashes its input into a seeded Gaussian vector. In ``"tokens"`` mode each
whitespace token is hashed separately and the vectors are summed, so texts
that share words have correlated embeddings; ``"whole"`` hashes the full
string. A file-backed provider serves precomputed vectors.
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import Protocol

import numpy as np


class EmbeddingProvider(Protocol):
    provider_id: str
    dimension: int
    deterministic: bool

    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_frame(self, frame) -> np.ndarray: ...


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def cosine_matrix(a, b) -> np.ndarray:
    """Pairwise cosine between the rows of ``a`` and ``b``."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    if (na == 0).any() or (nb == 0).any():
        raise ValueError("cosine similarity is undefined for a zero vector")
    return np.clip((a / na) @ (b / nb).T, -1.0, 1.0)


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalise a zero vector")
    return v / n


_TOKEN = re.compile(r"\w+")


class HashEmbedder:
    provider_id = "hash"
    deterministic = True

    def __init__(self, dimension: int = 64, seed: int = 0, mode: str = "tokens"):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        if mode not in ("tokens", "whole"):
            raise ValueError("mode must be 'tokens' or 'whole'")
        self.dimension = dimension
        self.seed = seed
        self.mode = mode

    def _vector(self, key: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}\x00{key}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.standard_normal(self.dimension)

    def embed_text(self, text: str) -> np.ndarray:
        if not isinstance(text, str) or not text.strip():
            raise ValueError("cannot embed empty text")
        if self.mode == "whole":
            return normalize(self._vector("text:" + text))
        tokens = _TOKEN.findall(text.lower()) or [text.strip()]
        return normalize(sum(self._vector("tok:" + t) for t in tokens))

    def embed_frame(self, frame) -> np.ndarray:
        """Embed a frame id (int) or a frame descriptor (str, shares the text space)."""
        if isinstance(frame, str):
            return self.embed_text(frame)
        if frame is None or isinstance(frame, bool):
            raise ValueError("cannot embed an empty frame")
        return normalize(self._vector(f"frame:{int(frame)}"))


class FileEmbedder:
    """Vectors read from JSONL lines ``{"kind": "text"|"frame", "key": ..., "vector": [...]}``."""

    provider_id = "file"
    deterministic = True

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._table: dict[tuple[str, str], np.ndarray] = {}
        dims = set()
        for line in self.path.read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            vec = normalize(rec["vector"])
            dims.add(vec.shape[0])
            self._table[(rec.get("kind", "text"), str(rec["key"]))] = vec
        if len(dims) != 1:
            raise ValueError(f"{path}: vectors must share one dimension, found {sorted(dims)}")
        self.dimension = dims.pop()

    def _lookup(self, kind, key):
        try:
            return self._table[(kind, str(key))]
        except KeyError:
            raise KeyError(f"no {kind} vector for {key!r} in {self.path}") from None

    def embed_text(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        return self._lookup("text", text)

    def embed_frame(self, frame) -> np.ndarray:
        if frame is None or frame == "":
            raise ValueError("cannot embed an empty frame")
        return self._lookup("frame", frame)


def make_embedder(kind: str = "hash", path: str | Path | None = None, **kwargs) -> EmbeddingProvider:
    if kind == "hash":
        return HashEmbedder(**kwargs)
    if kind == "file":
        if path is None:
            raise ValueError("the file embedder needs a vectors path")
        return FileEmbedder(path)
    raise ValueError(f"unknown embedder {kind!r}")
