"""Turn annotated videos into frame-aligned streaming supervision.

Pipeline per video: anchor each keyframe caption to its most similar frame,
resample onto a fixed grid while snapping grid points to nearby anchors,
screen reasoning units by question/reasoning consistency, keep relevant and
non-redundant keyframes, then emit one target per grid frame (reasoning text
closed by ``</EOT>``, or ``<SKIP>``).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from tays.embeddings import EmbeddingProvider, cosine, cosine_matrix

log = logging.getLogger(__name__)

EOT = "</EOT>"
SKIP = "<SKIP>"
EOT_SPELLINGS = frozenset({"<EOT>", "</EOT>"})


@dataclass(frozen=True)
class Keyframe:
    caption: str
    start: float
    end: float


@dataclass(frozen=True)
class ReasoningUnit:
    text: str
    keyframe: int
    evidence: str = ""


@dataclass(frozen=True)
class AnnotatedVideo:
    video_id: str
    timestamps: tuple[float, ...]
    keyframes: tuple[Keyframe, ...]
    question: str
    reasoning: tuple[ReasoningUnit, ...] = ()
    answer: str = ""
    options: tuple[str, ...] = ()
    frame_content: tuple[str, ...] | None = None

    def __post_init__(self):
        ts = self.timestamps
        if not ts:
            raise ValueError(f"{self.video_id}: video has no frames")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"{self.video_id}: frame timestamps must be increasing")
        for k in self.keyframes:
            if k.start > k.end or k.start < ts[0] - 1e-9 or k.end > ts[-1] + 1e-9:
                raise ValueError(f"{self.video_id}: keyframe interval outside the video")
        for r in self.reasoning:
            if not 0 <= r.keyframe < len(self.keyframes):
                raise ValueError(f"{self.video_id}: reasoning unit references unknown keyframe")

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotatedVideo":
        frames = sorted(d["frames"], key=lambda f: f["index"])
        content = [f.get("content") for f in frames]
        return cls(
            video_id=str(d["video_id"]),
            timestamps=tuple(float(f["timestamp"]) for f in frames),
            keyframes=tuple(Keyframe(k["caption"], float(k["start"]), float(k["end"])) for k in d["keyframes"]),
            question=d["question"],
            reasoning=tuple(
                ReasoningUnit(r["text"], int(r["keyframe"]), r.get("evidence", "")) for r in d.get("reasoning", [])
            ),
            answer=d.get("answer", ""),
            options=tuple(d.get("options", ())),
            frame_content=tuple(content) if all(c is not None for c in content) else None,
        )

    def frame_key(self, index: int):
        if self.frame_content is not None:
            return self.frame_content[index]
        return f"{self.video_id}/{index}"


@dataclass(frozen=True)
class ResampleConfig:
    delta: float = 0.5
    epsilon: float = 0.1
    max_duration: float = 30.0
    mode: str = "snap"

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("grid interval must be > 0")
        if not 0 <= self.epsilon < self.delta / 2:
            raise ValueError(
                f"anchor tolerance must satisfy 0 <= epsilon < delta/2 "
                f"(epsilon={self.epsilon}, delta={self.delta})"
            )
        if not self.max_duration > 0:
            raise ValueError("max_duration must be > 0")
        if self.mode not in ("snap", "interval"):
            raise ValueError("mode must be 'snap' or 'interval'")


@dataclass(frozen=True)
class FilterConfig:
    tau_q: float = 0.7
    tau_adj: float = 0.9
    tau_consistency: float = 0.7

    def __post_init__(self):
        for name in ("tau_q", "tau_adj", "tau_consistency"):
            if not -1 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [-1, 1]")


@dataclass(frozen=True)
class Anchor:
    keyframe: int
    frame: int
    timestamp: float


@dataclass(frozen=True)
class GridFrame:
    grid_index: int
    timestamp: float
    source_frame: int
    is_anchor: bool
    anchor_keyframes: tuple[int, ...] = ()

    def to_dict(self):
        return {
            "grid_index": self.grid_index,
            "timestamp": self.timestamp,
            "source_frame": self.source_frame,
            "is_anchor": self.is_anchor,
        }


def anchor_keyframes(frame_embeddings, caption_embeddings, timestamps: Sequence[float] | None = None) -> list[Anchor]:
    """Most similar frame per caption; ties go to the earliest frame."""
    f = np.atleast_2d(np.asarray(frame_embeddings, dtype=np.float64))
    g = np.atleast_2d(np.asarray(caption_embeddings, dtype=np.float64))
    if f.size == 0 or f.shape[0] == 0:
        raise ValueError("need at least one frame")
    if np.asarray(caption_embeddings).size == 0:
        return []
    if f.shape[1] != g.shape[1]:
        raise ValueError("frame and caption embeddings differ in dimension")
    sims = cosine_matrix(g, f)
    best = np.argmax(sims, axis=1)
    ts = timestamps if timestamps is not None else range(f.shape[0])
    return [Anchor(k, int(t), float(ts[int(t)])) for k, t in enumerate(best)]


def grid_points(last_timestamp: float, config: ResampleConfig, first_timestamp: float = 0.0) -> np.ndarray:
    """``k * delta`` for every grid point inside the clip and under ``max_duration``."""
    limit = min(last_timestamp, first_timestamp + config.max_duration)
    n = 0
    while n * config.delta <= limit + 1e-12 and n * config.delta < config.max_duration:
        n += 1
    return np.arange(n) * config.delta


def resample(video: AnnotatedVideo, anchors: Sequence[Anchor], config: ResampleConfig | None = None) -> list[GridFrame]:
    """Select one source frame per grid point.

    ``snap`` mode: a grid point within epsilon of an anchor timestamp takes the
    anchor's frame (nearest anchor, then earliest frame, on conflict) and
    records every anchor that reached it. Other
    points take the nearest frame, earliest on ties. ``interval`` mode uses the
    annotated keyframe interval containing the grid point instead of the
    epsilon window.
    """
    config = config or ResampleConfig()
    ts = np.asarray(video.timestamps, dtype=np.float64)
    for a in anchors:
        if not 0 <= a.frame < len(ts) or not 0 <= a.keyframe < max(len(video.keyframes), 1):
            raise ValueError(f"anchor {a} does not belong to video {video.video_id}")
    out = []
    for gi, g in enumerate(grid_points(ts[-1], config)):
        hits = []
        for a in anchors:
            if config.mode == "snap":
                d = abs(g - a.timestamp)
                if d <= config.epsilon:
                    hits.append((d, a.frame, a.keyframe))
            else:
                kf = video.keyframes[a.keyframe]
                if kf.start <= g <= kf.end:
                    hits.append((abs(g - a.timestamp), a.frame, a.keyframe))
        if hits:
            hits.sort()
            frame = hits[0][1]
            # every anchor that reached this point is represented by it
            keys = tuple(sorted(k for _, _, k in hits))
            out.append(GridFrame(gi, float(g), frame, True, keys))
        else:
            out.append(GridFrame(gi, float(g), int(np.argmin(np.abs(ts - g))), False))
    return out


def consistency(q_embedding, r_embedding) -> float:
    return cosine(q_embedding, r_embedding)


def filter_trajectory(
    question: str,
    captions: Sequence[tuple[str, float]],
    embedder: EmbeddingProvider,
    config: FilterConfig | None = None,
) -> list[int]:
    """Relevance screening then adjacent de-duplication; returns caption indices."""
    config = config or FilterConfig()
    if not captions:
        return []
    q = embedder.embed_text(question)
    emb = [embedder.embed_text(text) for text, _ in captions]
    relevant = [k for k, e in enumerate(emb) if cosine(q, e) >= config.tau_q]
    relevant.sort(key=lambda k: captions[k][1])
    kept: list[int] = []
    for k in relevant:
        if not kept or cosine(emb[kept[-1]], emb[k]) < config.tau_adj:
            kept.append(k)
    return kept


def format_supervision(frames: Sequence[GridFrame] | int, retained: dict[int, str]) -> list[str]:
    n = frames if isinstance(frames, int) else len(frames)
    for idx in retained:
        if not 0 <= idx < n:
            raise IndexError(f"retained index {idx} outside {n} resampled frames")
    return [f"{retained[i]}{EOT}" if i in retained else SKIP for i in range(n)]


@dataclass
class Trajectory:
    video_id: str
    frames: list[GridFrame]
    supervision: list[str]
    question: str
    answer: str
    options: list[str]
    retained_keyframes: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "frames": [f.to_dict() for f in self.frames],
            "supervision": self.supervision,
            "question": self.question,
            "answer": self.answer,
            "options": self.options,
        }


def prepare_video(
    video: AnnotatedVideo,
    embedder: EmbeddingProvider,
    resample_config: ResampleConfig | None = None,
    filter_config: FilterConfig | None = None,
) -> Trajectory:
    resample_config = resample_config or ResampleConfig()
    filter_config = filter_config or FilterConfig()
    n_frames = len(video.timestamps)
    f_emb = np.stack([embedder.embed_frame(video.frame_key(i)) for i in range(n_frames)])
    anchors = []
    if video.keyframes:
        c_emb = np.stack([embedder.embed_text(k.caption) for k in video.keyframes])
        anchors = anchor_keyframes(f_emb, c_emb, video.timestamps)
    for a in anchors:
        kf = video.keyframes[a.keyframe]
        if not kf.start <= a.timestamp <= kf.end:
            log.info("%s: keyframe %d anchored at %.3fs outside its annotated interval [%.3f, %.3f]",
                     video.video_id, a.keyframe, a.timestamp, kf.start, kf.end)
    grid = resample(video, anchors, resample_config)

    q = embedder.embed_text(video.question)
    units: dict[int, list[str]] = {}
    for unit in video.reasoning:
        if consistency(q, embedder.embed_text(unit.text)) >= filter_config.tau_consistency:
            units.setdefault(unit.keyframe, []).append(unit.text)
        else:
            log.debug("%s: dropped low-consistency unit %r", video.video_id, unit.text)

    captions = [(k.caption, anchors[i].timestamp if anchors else k.start) for i, k in enumerate(video.keyframes)]
    kept = filter_trajectory(video.question, captions, embedder, filter_config)

    retained: dict[int, str] = {}
    for k in kept:
        if k not in units:
            continue
        gi = _grid_slot(grid, anchors[k])
        if gi is None:
            continue
        text = " ".join(units[k])
        retained[gi] = f"{retained[gi]} {text}" if gi in retained else text
    return Trajectory(
        video.video_id, grid, format_supervision(grid, retained), video.question, video.answer,
        list(video.options), kept,
    )


def _grid_slot(grid: Sequence[GridFrame], anchor: Anchor) -> int | None:
    for g in grid:
        if g.is_anchor and anchor.keyframe in g.anchor_keyframes:
            return g.grid_index
    if not grid:
        return None
    # anchor not reachable within epsilon: nearest grid point
    return min(grid, key=lambda g: (abs(g.timestamp - anchor.timestamp), g.grid_index)).grid_index


def read_annotations(path: str | Path) -> list[AnnotatedVideo]:
    videos = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if line.strip():
            try:
                videos.append(AnnotatedVideo.from_dict(json.loads(line)))
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{n}: malformed annotation ({exc})") from exc
    return videos


def prepare(
    videos: Iterable[AnnotatedVideo],
    embedder: EmbeddingProvider,
    resample_config: ResampleConfig | None = None,
    filter_config: FilterConfig | None = None,
) -> list[Trajectory]:
    return [prepare_video(v, embedder, resample_config, filter_config) for v in videos]


def dumps_jsonl(trajectories: Iterable[Trajectory]) -> str:
    return "".join(json.dumps(t.to_dict(), sort_keys=True) + "\n" for t in trajectories)
