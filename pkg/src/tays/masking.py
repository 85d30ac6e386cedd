"""Causal and streaming visibility masks.

Layouts are ``[visual | reasoning]``: columns ``0..n_visual-1`` are visual keys,
the rest are reasoning (text) keys. Indices are 0-based; ``True`` means the
query may attend to the key.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class MaskSpec:
    visibility: np.ndarray

    def __post_init__(self):
        vis = np.array(self.visibility, dtype=bool)
        if vis.ndim != 2:
            raise ValueError("mask must be a 2-D boolean matrix")
        vis.setflags(write=False)
        object.__setattr__(self, "visibility", vis)

    @property
    def n_rows(self) -> int:
        return self.visibility.shape[0]

    @property
    def n_cols(self) -> int:
        return self.visibility.shape[1]

    def __eq__(self, other):
        return isinstance(other, MaskSpec) and np.array_equal(self.visibility, other.visibility)

    __hash__ = None

    def rows(self, start: int, stop: int, n_cols: int | None = None) -> "MaskSpec":
        """Slice a row block, optionally truncated to the first ``n_cols`` keys."""
        return MaskSpec(self.visibility[start:stop, : self.n_cols if n_cols is None else n_cols])

    def to_rle(self) -> dict:
        """Row-wise run-length form: each row is ``[first_value, run, run, ...]``."""
        rows = []
        for row in self.visibility:
            change = np.flatnonzero(np.diff(row.astype(np.int8))) + 1
            bounds = np.concatenate([[0], change, [len(row)]])
            rows.append([int(row[0]) if len(row) else 0, *np.diff(bounds).astype(int).tolist()])
        return {"n_rows": self.n_rows, "n_cols": self.n_cols, "rows": rows}

    @classmethod
    def from_rle(cls, data: dict) -> "MaskSpec":
        vis = np.zeros((data["n_rows"], data["n_cols"]), dtype=bool)
        for i, (first, *runs) in enumerate(data["rows"]):
            value, col = bool(first), 0
            for run in runs:
                vis[i, col : col + run] = value
                col += run
                value = not value
        return cls(vis)

    def to_json(self) -> str:
        return json.dumps(self.to_rle(), separators=(",", ":"))


@dataclass(frozen=True)
class FrameBoundaryMap:
    """Visual tokens visible to each reasoning row (non-decreasing)."""

    widths: np.ndarray

    def __post_init__(self):
        w = np.array(self.widths, dtype=np.int64).reshape(-1)
        if (w < 0).any():
            raise ValueError("window widths must be non-negative")
        if (np.diff(w) < 0).any():
            raise ValueError("window widths must be non-decreasing")
        w.setflags(write=False)
        object.__setattr__(self, "widths", w)

    def __len__(self):
        return len(self.widths)

    def __getitem__(self, t):
        return int(self.widths[t])

    @classmethod
    def one_token_per_step(cls, n_reasoning: int) -> "FrameBoundaryMap":
        return cls(np.arange(1, n_reasoning + 1))

    @classmethod
    def from_segments(cls, segment_lengths: Sequence[int], frames_visible: Sequence[int],
                      tokens_per_frame: int = 1) -> "FrameBoundaryMap":
        """Expand per-segment frame counts to per-row widths."""
        if len(segment_lengths) != len(frames_visible):
            raise ValueError("one frame count per segment is required")
        return cls(np.repeat(np.asarray(frames_visible) * tokens_per_frame, segment_lengths))


def causal_mask(n: int) -> MaskSpec:
    if n < 1:
        raise ValueError("causal mask needs n >= 1")
    return MaskSpec(np.tril(np.ones((n, n), dtype=bool)))


def streaming_mask(
    n_visual: int,
    n_reasoning: int,
    boundaries: FrameBoundaryMap | Sequence[int],
    *,
    visual_reasoning_counts: Sequence[int] | None = None,
) -> MaskSpec:
    """Mask over ``[visual | reasoning]`` for streaming decoding.

    Visual rows are causal over visual keys. Reasoning row ``t`` sees visual
    keys ``0..w(t)-1`` and reasoning keys ``0..t``. By default visual rows never
    see reasoning keys; passing ``visual_reasoning_counts`` (one count per
    visual row, non-decreasing) lets visual row ``s`` read the first ``r(s)``
    reasoning keys.
    """
    if not isinstance(boundaries, FrameBoundaryMap):
        boundaries = FrameBoundaryMap(boundaries)
    if len(boundaries) != n_reasoning:
        raise ValueError(f"need {n_reasoning} window widths, got {len(boundaries)}")
    vis = streaming_mask_batch(n_visual, n_reasoning, boundaries.widths[None, :])[0]
    if visual_reasoning_counts is not None:
        r = np.asarray(visual_reasoning_counts, dtype=np.int64)
        if r.shape != (n_visual,) or (r < 0).any() or (r > n_reasoning).any():
            raise ValueError("visual_reasoning_counts must give 0..n_reasoning per visual row")
        vis[:n_visual, n_visual:] = np.arange(n_reasoning)[None, :] < r[:, None]
    return MaskSpec(vis)


def streaming_mask_batch(n_visual: int, n_reasoning: int, widths) -> np.ndarray:
    """Visibility for many window sequences at once: ``(batch, n, n)`` booleans.

    ``widths`` is ``(batch, n_reasoning)``; each row must already be a valid
    (non-decreasing) window sequence.
    """
    w = np.asarray(widths, dtype=np.int64)
    if w.ndim != 2 or w.shape[1] != n_reasoning:
        raise ValueError(f"widths must be (batch, {n_reasoning}), got {w.shape}")
    if w.size and (w.max() > n_visual or w.min() < 0):
        raise ValueError(f"window width {int(w.max())} exceeds n_visual={n_visual}")
    n = n_visual + n_reasoning
    vis = np.zeros((w.shape[0], n, n), dtype=bool)
    vis[:, :n_visual, :n_visual] = np.tril(np.ones((n_visual, n_visual), dtype=bool))
    vis[:, n_visual:, :n_visual] = np.arange(n_visual)[None, None, :] < w[:, :, None]
    vis[:, n_visual:, n_visual:] = np.tril(np.ones((n_reasoning, n_reasoning), dtype=bool))
    return vis


def incremental_mask(n_cached: int, n_new: int, *, hidden: slice | None = None) -> MaskSpec:
    """Rows for ``n_new`` tokens appended after ``n_cached`` keys.

    All cached keys are visible except the column range ``hidden``; new rows
    are causal among themselves.
    """
    vis = np.zeros((n_new, n_cached + n_new), dtype=bool)
    vis[:, :n_cached] = True
    if hidden is not None:
        vis[:, hidden] = False
    vis[:, n_cached:] = np.tril(np.ones((n_new, n_new), dtype=bool))
    return MaskSpec(vis)


def visible_keys(mask: MaskSpec, row: int) -> list[int]:
    if not 0 <= row < mask.n_rows:
        raise IndexError(f"row {row} outside mask with {mask.n_rows} rows")
    return np.flatnonzero(mask.visibility[row]).tolist()
