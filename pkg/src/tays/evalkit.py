"""Objective judging, latency metrics and temporal analytics over run outputs."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from tays.embeddings import EmbeddingProvider, cosine


class Verdict(str, enum.Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"

    def __bool__(self):
        return self is Verdict.CORRECT


@dataclass(frozen=True)
class JudgeConfig:
    tau: float = 0.8

    def __post_init__(self):
        if not 0 <= self.tau <= 1:
            raise ValueError("tau must lie in [0, 1]")


@dataclass(frozen=True)
class EvalCase:
    prediction: str
    reference: str
    options: tuple[str, ...]
    correct_index: int
    category: str = "all"
    case_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        if len(self.options) != 4:
            raise ValueError(f"expected 4 options, got {len(self.options)}")
        if not 0 <= self.correct_index < 4:
            raise ValueError("correct_index must be 0..3")


def judge_scores(s_ref: float, s_opt: float, s_neg_max: float, tau: float = 0.8) -> Verdict:
    """Reference gate, then the correct option must clear tau and strictly beat every distractor."""
    if s_ref < tau:
        return Verdict.INCORRECT
    if s_opt >= tau and s_opt > s_neg_max:
        return Verdict.CORRECT
    return Verdict.INCORRECT


def judge(case: EvalCase, embedder: EmbeddingProvider, config: JudgeConfig | None = None) -> Verdict:
    config = config or JudgeConfig()
    pred = embedder.embed_text(case.prediction)
    s_ref = cosine(pred, embedder.embed_text(case.reference))
    scores = [cosine(pred, embedder.embed_text(o)) for o in case.options]
    s_opt = scores[case.correct_index]
    s_neg = max(s for j, s in enumerate(scores) if j != case.correct_index)
    return judge_scores(s_ref, s_opt, s_neg, config.tau)


@dataclass(frozen=True)
class AccuracyReport:
    overall: float
    per_category: dict[str, float]
    counts: dict[str, tuple[int, int]]

    def to_dict(self):
        return {
            "overall": self.overall,
            "per_category": dict(self.per_category),
            "counts": {k: {"correct": c, "total": n} for k, (c, n) in self.counts.items()},
        }


def accuracy(results: Iterable[tuple[str, bool]]) -> AccuracyReport:
    """Percentages from ``(category, correct)`` pairs."""
    total, correct = Counter(), Counter()
    for category, ok in results:
        total[category] += 1
        correct[category] += bool(ok)
    n = sum(total.values())
    if n == 0:
        raise ValueError("accuracy needs at least one result")
    per = {c: 100.0 * correct[c] / total[c] for c in sorted(total)}
    counts = {c: (correct[c], total[c]) for c in sorted(total)}
    return AccuracyReport(100.0 * sum(correct.values()) / n, per, counts)


def _first_ns(timeline, kind):
    e = timeline.first(kind)
    return None if e is None else e.t_ns


def ttft(timeline, mode: str = "end_to_end") -> float:
    """Seconds to first token from first frame arrival, or from decode start."""
    first_token = _first_ns(timeline, "token_emitted")
    if first_token is None:
        raise ValueError("timeline has no emitted token")
    if mode == "end_to_end":
        origin = _first_ns(timeline, "frame_arrival")
    elif mode == "decoder_level":
        origin = _first_ns(timeline, "decode_start")
    else:
        raise ValueError(f"unknown TTFT mode {mode!r}")
    if origin is None:
        raise ValueError(f"timeline lacks the reference event for {mode}")
    return (first_token - origin) / 1e9


def overall_delay(timeline) -> float:
    done = _first_ns(timeline, "answer_done")
    if done is None:
        raise ValueError("timeline has no answer_done event")
    return (done - _first_ns(timeline, "frame_arrival")) / 1e9


@dataclass(frozen=True)
class AlignmentReport:
    deltas: tuple[float, ...]
    mean_abs: float
    within_1s: float

    def to_dict(self):
        return {"deltas": list(self.deltas), "mean_abs_dt": self.mean_abs, "within_1s": self.within_1s}


def _segment_times(transcript) -> list[float]:
    if hasattr(transcript, "segments"):
        return [s.start_time for s in transcript.segments]
    return [float(t) for t in transcript]


def temporal_deviation(transcript, keyframe_timestamps: Sequence[float], window: float = 1.0) -> AlignmentReport:
    """Signed distance from each segment's start to its nearest keyframe.

    ``transcript`` is a Transcript or a plain sequence of segment times.
    """
    times = np.asarray(_segment_times(transcript), dtype=np.float64)
    keys = np.asarray(keyframe_timestamps, dtype=np.float64)
    if times.size == 0 or keys.size == 0:
        raise ValueError("need at least one segment and one keyframe")
    diffs = times[:, None] - keys[None, :]
    deltas = diffs[np.arange(len(times)), np.argmin(np.abs(diffs), axis=1)]
    absd = np.abs(deltas)
    return AlignmentReport(tuple(deltas.tolist()), float(absd.mean()), float(np.mean(absd <= window + 1e-12)))


def _segment_texts(transcript) -> list[str]:
    if hasattr(transcript, "segments"):
        return [s.text for s in transcript.segments if len(s)]
    return list(transcript)


def coherence_profile(transcript, embedder: EmbeddingProvider) -> np.ndarray:
    """Cosine similarity between consecutive segments' texts."""
    texts = _segment_texts(transcript)
    if len(texts) < 2:
        raise ValueError("coherence needs at least two segments")
    vecs = [embedder.embed_text(t) for t in texts]
    return np.array([cosine(a, b) for a, b in zip(vecs, vecs[1:])])


def coherence_histogram(similarities, bins: int = 10) -> dict:
    counts, edges = np.histogram(np.asarray(similarities), bins=bins, range=(-1.0, 1.0))
    return {"edges": edges.tolist(), "counts": counts.tolist()}
