"""Video/text KV caches, zero-copy merged snapshots, and the monolithic cache.

The dual caches store each append as an immutable block and never copy it
again. A :class:`MergedView` is a tuple of block references captured under the
writer lock, so later appends cannot change what it exposes.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from tays.numerics import KVEntries
from tays.positional import Modality

PROMPT_SEGMENT = -1


def _check_entries(entries: KVEntries, n_layers: int | None):
    if not isinstance(entries, KVEntries) or len(entries) == 0:
        raise ValueError("entries must be a non-empty KVEntries")
    if n_layers is not None and entries.n_layers != n_layers:
        raise ValueError(f"expected {n_layers} layers, got {entries.n_layers}")
    for k, v in zip(entries.keys, entries.values):
        if k.flags.writeable or v.flags.writeable:
            raise ValueError("cache entries must be read-only arrays")


@dataclass(frozen=True)
class _Block:
    entries: KVEntries
    tag: int
    positions: tuple[int, ...]

    def __len__(self):
        return len(self.entries)


class _AppendOnlyCache:
    def __init__(self, n_layers: int | None = None):
        self.n_layers = n_layers
        self._blocks: list[_Block] = []
        self._length = 0
        self._lock = threading.Lock()

    def __len__(self):
        return self._length

    @property
    def payload_count(self) -> int:
        """Number of token entries physically stored."""
        return sum(len(b) for b in self._blocks)

    @property
    def last_tag(self):
        return self._blocks[-1].tag if self._blocks else None

    def _append(self, entries: KVEntries, tag: int, positions) -> int:
        _check_entries(entries, self.n_layers)
        positions = tuple(int(p) for p in (positions if positions is not None else ()))
        if positions and len(positions) != len(entries):
            raise ValueError("one position per entry is required")
        with self._lock:
            if self.n_layers is None:
                self.n_layers = entries.n_layers
            self._blocks.append(_Block(entries, tag, positions))
            self._length += len(entries)
            return self._length

    def _snapshot(self, max_blocks: int | None = None) -> tuple[_Block, ...]:
        with self._lock:
            blocks = self._blocks if max_blocks is None else self._blocks[:max_blocks]
            return tuple(blocks)

    def layer_blocks(self, layer: int):
        return [(b.entries.keys[layer], b.entries.values[layer]) for b in self._blocks]

    def tags(self) -> list[int]:
        """Per-entry tag (frame or segment index)."""
        return [b.tag for b in self._blocks for _ in range(len(b))]

    @property
    def n_blocks(self) -> int:
        return len(self._blocks)


class VideoCache(_AppendOnlyCache):
    """Visual entries; one writer (ingest), readers go through snapshots."""

    def append(self, entries: KVEntries, frame_index: int, positions=None) -> int:
        last = self.last_tag
        if last is not None and frame_index <= last:
            raise ValueError(f"frame {frame_index} appended after frame {last}")
        return self._append(entries, frame_index, positions)

    @property
    def n_frames(self) -> int:
        return self.n_blocks

    def frame_indices(self) -> list[int]:
        return [b.tag for b in self._blocks]


class TextCache(_AppendOnlyCache):
    """Prompt and reasoning entries, owned by the decode loop.

    Prompt entries carry segment index -1.
    """

    def append(self, entries: KVEntries, segment_index: int, positions=None) -> int:
        last = self.last_tag
        if segment_index < PROMPT_SEGMENT:
            raise ValueError("segment index must be >= -1")
        if last is not None and segment_index < last:
            raise ValueError(f"segment {segment_index} appended after segment {last}")
        return self._append(entries, segment_index, positions)


@dataclass(frozen=True, eq=False)
class MergedView:
    """Frozen ``[video | text]`` prefix of the two caches."""

    video: VideoCache
    text: TextCache
    video_blocks: tuple[_Block, ...]
    text_blocks: tuple[_Block, ...]
    n_video: int = field(init=False)
    n_text: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n_video", sum(len(b) for b in self.video_blocks))
        object.__setattr__(self, "n_text", sum(len(b) for b in self.text_blocks))

    def __len__(self):
        return self.n_video + self.n_text

    def layer_blocks(self, layer: int):
        return [(b.entries.keys[layer], b.entries.values[layer])
                for b in self.video_blocks + self.text_blocks]

    @property
    def frames(self) -> tuple[int, ...]:
        return tuple(b.tag for b in self.video_blocks)

    @property
    def n_frames(self) -> int:
        return len(self.video_blocks)


class DualCache:
    """Owns the two caches and counts snapshots."""

    def __init__(self, n_layers: int | None = None):
        self.video = VideoCache(n_layers)
        self.text = TextCache(n_layers)
        self.snapshot_count = 0

    def merge(self, max_frames: int | None = None) -> MergedView:
        view = merge(self.video, self.text, max_frames=max_frames)
        self.snapshot_count += 1
        return view

    @property
    def payload_count(self) -> int:
        return self.video.payload_count + self.text.payload_count

    def stats(self) -> dict:
        return {
            "video_len": len(self.video),
            "text_len": len(self.text),
            "frames": self.video.n_frames,
            "snapshots": self.snapshot_count,
            "payload_entries": self.payload_count,
        }


def merge(video: VideoCache, text: TextCache, max_frames: int | None = None) -> MergedView:
    """Snapshot both caches without copying payloads.

    ``max_frames`` limits the video prefix to the first frames, which lets a
    scheduler expose exactly the frames that were due at the merge instant even
    if ingest has run ahead.
    """
    return MergedView(video, text, video._snapshot(max_frames), text._snapshot())


def split(view: MergedView) -> tuple[VideoCache, TextCache]:
    """Return the live caches behind ``view``; the view itself stays frozen."""
    return view.video, view.text


class MonolithicCache:
    """Single physically contiguous cache used by the batch and interleaved paths."""

    def __init__(self, n_layers: int, n_heads: int, head_dim: int, dtype=np.float64, capacity: int = 64):
        self.n_layers = n_layers
        shape = (n_layers, n_heads, capacity, head_dim)
        self._k = np.zeros(shape, dtype=dtype)
        self._v = np.zeros(shape, dtype=dtype)
        self._length = 0
        self._n_visual = 0
        self.modalities: list[Modality] = []
        self.tags: list[int] = []

    def __len__(self):
        return self._length

    @property
    def payload_count(self) -> int:
        return self._length

    @property
    def n_visual(self) -> int:
        return self._n_visual

    @property
    def n_text(self) -> int:
        return self._length - self.n_visual

    def _grow(self, need: int):
        cap = self._k.shape[2]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        for name in ("_k", "_v"):
            old = getattr(self, name)
            new = np.zeros(old.shape[:2] + (cap,) + old.shape[3:], dtype=old.dtype)
            new[:, :, : self._length] = old[:, :, : self._length]
            setattr(self, name, new)

    def append(self, entries: KVEntries, modality: Modality | str, tag: int) -> int:
        _check_entries(entries, self.n_layers)
        n = len(entries)
        self._grow(self._length + n)
        for li in range(self.n_layers):
            self._k[li, :, self._length : self._length + n] = entries.keys[li]
            self._v[li, :, self._length : self._length + n] = entries.values[li]
        self._length += n
        modality = Modality(modality)
        if modality is Modality.VISUAL:
            self._n_visual += n
        self.modalities.extend([modality] * n)
        self.tags.extend([tag] * n)
        return self._length

    def layer_blocks(self, layer: int):
        if not self._length:
            return []
        return [(self._k[layer, :, : self._length], self._v[layer, :, : self._length])]

    def stats(self) -> dict:
        return {"monolithic_len": self._length, "payload_entries": self._length,
                "video_len": self.n_visual, "text_len": self.n_text, "snapshots": 0}


def concatenate(view, n_layers: int) -> MonolithicCache:
    """Physically copy any cache view into a fresh contiguous cache (test oracle)."""
    H, _, hd = view.layer_blocks(0)[0][0].shape
    out = MonolithicCache(n_layers, H, hd, dtype=view.layer_blocks(0)[0][0].dtype, capacity=max(len(view), 1))
    keys = [np.concatenate([k for k, _ in view.layer_blocks(li)], axis=1) for li in range(n_layers)]
    values = [np.concatenate([v for _, v in view.layer_blocks(li)], axis=1) for li in range(n_layers)]
    for a in keys + values:
        a.setflags(write=False)
    out.append(KVEntries(tuple(keys), tuple(values)), Modality.VISUAL, 0)
    return out
