"""Rotary position encoding and the two position-indexing schemes.

Pairs are interleaved: coordinates ``(2i, 2i+1)`` rotate together with
frequency ``base ** (-2i / head_dim)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class Modality(str, enum.Enum):
    VISUAL = "visual"
    REASONING = "reasoning"
    PROMPT = "prompt"

    @property
    def is_text(self) -> bool:
        return self is not Modality.VISUAL


class Scheme(str, enum.Enum):
    MONOLITHIC = "monolithic"
    DECOUPLED = "decoupled"


@dataclass(frozen=True)
class RotationSpec:
    head_dim: int
    base: float = 10000.0

    def __post_init__(self):
        if self.head_dim <= 0 or self.head_dim % 2:
            raise ValueError(f"head dimension must be a positive even number, got {self.head_dim}")
        if not self.base > 1.0:
            raise ValueError("frequency base must be > 1")

    @property
    def frequencies(self) -> np.ndarray:
        return self.base ** (-np.arange(0, self.head_dim, 2, dtype=np.float64) / self.head_dim)


def rotate(vector, position, spec: RotationSpec) -> np.ndarray:
    """Rotate ``vector`` (last axis = head_dim) by ``position``.

    ``position`` broadcasts against ``vector.shape[:-1]``, so a whole
    ``(heads, tokens, head_dim)`` block can be rotated in one call.
    """
    v = np.asarray(vector)
    if v.shape[-1] % 2:
        raise ValueError("cannot rotate an odd-length vector")
    if v.shape[-1] != spec.head_dim:
        raise ValueError(f"vector length {v.shape[-1]} != head_dim {spec.head_dim}")
    dtype = v.dtype if np.issubdtype(v.dtype, np.floating) else np.float64
    angles = np.asarray(position, dtype=np.float64)[..., None] * spec.frequencies
    cos = np.cos(angles).astype(dtype)
    sin = np.sin(angles).astype(dtype)
    even, odd = v[..., 0::2], v[..., 1::2]
    out = np.empty(np.broadcast_shapes(v.shape, cos.shape[:-1] + (spec.head_dim,)), dtype=dtype)
    out[..., 0::2] = even * cos - odd * sin
    out[..., 1::2] = even * sin + odd * cos
    return out


@dataclass(frozen=True)
class PositionAssignment:
    positions: np.ndarray
    modalities: tuple[Modality, ...]

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if pos.ndim != 1 or len(pos) != len(self.modalities):
            raise ValueError("one position per token is required")
        if (pos < 0).any():
            raise ValueError("positions must be non-negative")

    def __len__(self):
        return len(self.modalities)

    def of(self, modality: Modality) -> np.ndarray:
        sel = np.array([m is modality for m in self.modalities], dtype=bool)
        return self.positions[sel]


def assign_positions(
    layout: Iterable[Modality | str],
    scheme: Scheme | str,
    *,
    visual_start: int = 0,
    text_start: int = 0,
) -> PositionAssignment:
    """Index a modality-tagged layout.

    Monolithic: one global counter. Decoupled: visual tokens count on their
    own axis, prompt and reasoning tokens share a second axis. The ``*_start``
    offsets continue counting from an existing prefix (monolithic starts at
    their sum).
    """
    mods = tuple(Modality(m) for m in layout)
    if not mods:
        raise ValueError("layout must be non-empty")
    scheme = Scheme(scheme)
    if scheme is Scheme.MONOLITHIC:
        start = visual_start + text_start
        return PositionAssignment(np.arange(start, start + len(mods)), mods)
    counters = {False: visual_start, True: text_start}
    out = []
    for m in mods:
        out.append(counters[m.is_text])
        counters[m.is_text] += 1
    return PositionAssignment(np.array(out), mods)


def attention_score(q, k, pos_q: int, pos_k: int, spec: RotationSpec) -> float:
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if q.shape != k.shape:
        raise ValueError(f"dimension mismatch: {q.shape} vs {k.shape}")
    return float(rotate(q, pos_q, spec) @ rotate(k, pos_k, spec))


def layout_of(counts: Sequence[tuple[Modality | str, int]]) -> list[Modality]:
    """Expand ``[(modality, n), ...]`` runs into a flat layout."""
    return [Modality(m) for m, n in counts for _ in range(n)]
