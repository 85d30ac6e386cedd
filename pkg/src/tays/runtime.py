"""Batch, interleaved and parallel (dual-cache) execution over a frame stream.

Times are integer nanoseconds internally so simulated latencies are exact;
``*_time`` / ``*_s`` accessors convert to seconds. Under the simulated clock
the wall time spent computing is ignored and each encoded frame / decoded
token advances its worker's clock by the :class:`CostModel` amount.
"""

from __future__ import annotations

import bisect
import enum
import json
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from tays.kvcache import PROMPT_SEGMENT, DualCache, MergedView, MonolithicCache
from tays.masking import incremental_mask
from tays.numerics import BOS_ID, EOT_ID, PAYLOAD_DIM, ModelParameters, forward
from tays.positional import Modality, Scheme, assign_positions

NS_PER_S = 1_000_000_000


def to_ns(seconds: float) -> int:
    return int(round(float(seconds) * NS_PER_S))


def to_s(ns: int) -> float:
    return ns / NS_PER_S


# --------------------------------------------------------------------------- streams


@dataclass(frozen=True)
class Frame:
    id: int
    timestamp: float
    payload_seed: int


@dataclass(frozen=True)
class FrameStream:
    frames: tuple[Frame, ...]
    fps: float

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.fps > 0:
            raise ValueError("fps must be > 0")
        ts = [f.timestamp for f in self.frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("frame timestamps must be strictly increasing")

    def __len__(self):
        return len(self.frames)

    @property
    def duration(self) -> float:
        return self.frames[-1].timestamp - self.frames[0].timestamp if self.frames else 0.0

    @classmethod
    def from_dict(cls, data: dict) -> "FrameStream":
        frames = tuple(
            Frame(int(f["id"]), float(f["timestamp"]), int(f["payload_seed"])) for f in data["frames"]
        )
        return cls(frames, float(data["fps"]))

    @classmethod
    def from_json(cls, path: str | Path) -> "FrameStream":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "fps": self.fps,
            "frames": [
                {"id": f.id, "timestamp": f.timestamp, "payload_seed": f.payload_seed}
                for f in self.frames
            ],
        }

    def resample(self, fps: float, max_frames: int | None = None) -> "FrameStream":
        """Pick the nearest source frame for each point of a ``1/fps`` grid.

        Ties go to the earlier frame. Output timestamps are the grid points.
        """
        if not fps > 0:
            raise ValueError("fps must be > 0")
        if not self.frames:
            return FrameStream((), fps)
        ts = np.array([f.timestamp for f in self.frames])
        t0 = ts[0]
        n = int(np.floor((ts[-1] - t0) * fps + 1e-9)) + 1
        if max_frames is not None:
            n = min(n, max_frames)
        out = []
        for k in range(n):
            g = t0 + k / fps
            j = int(np.argmin(np.abs(ts - g)))
            src = self.frames[j]
            out.append(Frame(src.id, float(g), src.payload_seed))
        return FrameStream(tuple(out), fps)

    def head(self, n: int) -> "FrameStream":
        return FrameStream(self.frames[:n], self.fps)


def synthetic_stream(n_frames: int = 20, fps: float = 2.0, seed: int = 0) -> FrameStream:
    frames = tuple(Frame(i, i / fps, seed * 1_000_003 + i) for i in range(n_frames))
    return FrameStream(frames, fps)


def bundled_stream() -> FrameStream:
    """The packaged 30 s synthetic source stream (10 fps native)."""
    text = resources.files("tays.data").joinpath("synthetic_stream.json").read_text()
    return FrameStream.from_dict(json.loads(text))


# --------------------------------------------------------------------------- configuration


@dataclass(frozen=True)
class CostModel:
    encode_cost_per_frame: float = 0.1
    decode_cost_per_token: float = 0.02

    def __post_init__(self):
        if self.encode_cost_per_frame < 0 or self.decode_cost_per_token < 0:
            raise ValueError("costs must be >= 0")

    @property
    def encode_ns(self) -> int:
        return to_ns(self.encode_cost_per_frame)

    @property
    def decode_ns(self) -> int:
        return to_ns(self.decode_cost_per_token)


class Paradigm(str, enum.Enum):
    BATCH = "batch"
    INTERLEAVED = "interleaved"
    PARALLEL = "parallel"


DEFAULT_SCHEME = {
    Paradigm.BATCH: Scheme.MONOLITHIC,
    Paradigm.INTERLEAVED: Scheme.MONOLITHIC,
    Paradigm.PARALLEL: Scheme.DECOUPLED,
}


@dataclass(frozen=True)
class RuntimeConfig:
    """Knobs shared by all paradigms.

    ``merge_schedule`` only affects the parallel paradigm: ``"eager"`` merges
    whenever the previous segment ended and a new frame is ready, ``"final"``
    takes a single merge after the last frame is encoded.
    """

    tokens_per_frame: int = 4
    max_tokens: int = 32
    stop_on_eot: bool = True
    pos_scheme: Scheme | str | None = None
    prebuffered: bool = False
    merge_schedule: str = "eager"
    threaded: bool = True
    prompt: tuple[int, ...] = (BOS_ID, 3)

    def __post_init__(self):
        if self.tokens_per_frame < 1:
            raise ValueError("tokens_per_frame must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.merge_schedule not in ("eager", "final"):
            raise ValueError("merge_schedule must be 'eager' or 'final'")
        if not self.prompt:
            raise ValueError("prompt must contain at least one token")
        if self.pos_scheme is not None:
            object.__setattr__(self, "pos_scheme", Scheme(self.pos_scheme))

    def scheme_for(self, paradigm: Paradigm) -> Scheme:
        return self.pos_scheme or DEFAULT_SCHEME[paradigm]


# --------------------------------------------------------------------------- clocks


class SimulatedClock:
    """Discrete-event clock: only waits and modelled costs move time."""

    name = "simulated"
    simulated = True

    def __init__(self, start_ns: int = 0):
        self._now = start_ns

    def start(self):
        self._now = 0
        return self

    def now(self) -> int:
        return self._now

    def wait_until(self, t_ns: int):
        self._now = max(self._now, t_ns)

    def spend(self, cost_ns: int):
        self._now += cost_ns

    def fork(self) -> "SimulatedClock":
        return SimulatedClock(self._now)


class WallClock:
    """Real time. Stream timestamps are scaled by ``time_scale`` before waiting;
    with ``emulate_costs`` the cost model is slept on top of real compute."""

    name = "wall"
    simulated = False

    def __init__(self, time_scale: float = 1.0, emulate_costs: bool = False):
        if time_scale < 0:
            raise ValueError("time_scale must be >= 0")
        self.time_scale = time_scale
        self.emulate_costs = emulate_costs
        self._origin: int | None = None

    def start(self):
        self._origin = time.perf_counter_ns()
        return self

    def now(self) -> int:
        if self._origin is None:
            self.start()
        return time.perf_counter_ns() - self._origin

    def wait_until(self, t_ns: int):
        target = int(t_ns * self.time_scale)
        delay = target - self.now()
        if delay > 0:
            time.sleep(delay / NS_PER_S)

    def spend(self, cost_ns: int):
        if self.emulate_costs and cost_ns > 0:
            time.sleep(cost_ns * self.time_scale / NS_PER_S)

    def fork(self) -> "WallClock":
        return self


def make_clock(clock) -> SimulatedClock | WallClock:
    if clock is None or clock == "simulated":
        return SimulatedClock()
    if clock == "wall":
        return WallClock()
    if isinstance(clock, (SimulatedClock, WallClock)):
        return clock
    raise ValueError(f"unknown clock {clock!r}")


# --------------------------------------------------------------------------- records


class EventKind(str, enum.Enum):
    FRAME_ARRIVAL = "frame_arrival"
    ENCODE_START = "encode_start"
    ENCODE_DONE = "encode_done"
    DECODE_START = "decode_start"
    TOKEN_EMITTED = "token_emitted"
    ANSWER_DONE = "answer_done"


_KIND_ORDER = {k: i for i, k in enumerate(EventKind)}


@dataclass(frozen=True)
class Event:
    kind: EventKind
    t_ns: int
    frame: int | None = None
    segment: int | None = None
    token: int | None = None

    @property
    def time(self) -> float:
        return to_s(self.t_ns)


class Timeline:
    def __init__(self, events: Sequence[Event] = ()):
        self._events = list(events)
        self._lock = threading.Lock()

    def record(self, kind: EventKind, t_ns: int, **ref):
        with self._lock:
            self._events.append(Event(EventKind(kind), int(t_ns), **ref))

    @property
    def events(self) -> list[Event]:
        with self._lock:
            return sorted(self._events, key=lambda e: (e.t_ns, _KIND_ORDER[e.kind]))

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self._events)

    def of(self, kind: EventKind | str) -> list[Event]:
        kind = EventKind(kind)
        return [e for e in self.events if e.kind is kind]

    def first(self, kind: EventKind | str) -> Event | None:
        found = self.of(kind)
        return found[0] if found else None

    def to_list(self) -> list[dict]:
        out = []
        for e in self.events:
            d = {"kind": e.kind.value, "time": e.time}
            for k in ("frame", "segment", "token"):
                if getattr(e, k) is not None:
                    d[k] = getattr(e, k)
            out.append(d)
        return out


@dataclass(frozen=True)
class ReasoningSegment:
    segment_index: int
    tokens: tuple[int, ...]
    emit_ns: tuple[int, ...]
    frames_visible_at_start: int
    merge_ns: int
    end_ns: int
    attended_frames: tuple[int, ...]
    stopped_by_eot: bool

    def __len__(self):
        return len(self.tokens)

    @property
    def emit_times(self) -> tuple[float, ...]:
        return tuple(to_s(t) for t in self.emit_ns)

    @property
    def merge_time(self) -> float:
        return to_s(self.merge_ns)

    @property
    def start_time(self) -> float:
        """First emission, or the merge instant for an empty segment."""
        return to_s(self.emit_ns[0] if self.emit_ns else self.merge_ns)

    @property
    def end_time(self) -> float:
        return to_s(self.end_ns)

    @property
    def text(self) -> str:
        return detokenize(self.tokens)


@dataclass(frozen=True)
class Transcript:
    segments: tuple[ReasoningSegment, ...]

    def __len__(self):
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def __getitem__(self, i):
        return self.segments[i]

    @property
    def tokens(self) -> list[int]:
        return [t for s in self.segments for t in s.tokens]


def detokenize(tokens: Sequence[int]) -> str:
    return " ".join(f"t{t}" for t in tokens)


@dataclass
class RunResult:
    paradigm: Paradigm
    transcript: Transcript
    timeline: Timeline
    clock: str
    pos_scheme: Scheme
    n_frames: int
    cache_stats: dict
    n_visual: int
    text_windows: list[int] = field(default_factory=list)
    physical_layout: list[Modality] = field(default_factory=list)

    def __iter__(self):
        yield self.transcript
        yield self.timeline


# --------------------------------------------------------------------------- compute primitives


def encode_frame(frame: Frame, model: ModelParameters, tokens_per_frame: int = 4) -> np.ndarray:
    """Visual token embeddings: a fixed projection of a seeded per-frame payload."""
    rng = np.random.default_rng(int(frame.payload_seed) % 2**64)
    payload = rng.standard_normal((tokens_per_frame, PAYLOAD_DIM))
    return (payload @ model.frame_projection).astype(model.dtype)


class MonolithicContext:
    """Decode/ingest context over a single monolithic cache."""

    def __init__(self, cache: MonolithicCache):
        self.cache = cache
        self.windows: list[int] = []

    def __len__(self):
        return len(self.cache)

    def layer_blocks(self, layer):
        return self.cache.layer_blocks(layer)

    @property
    def n_visual(self):
        return self.cache.n_visual

    @property
    def n_text(self):
        return self.cache.n_text

    hidden = None

    def append_text(self, entries, modality, segment_index, positions):
        self.windows.extend([self.cache.n_visual] * len(entries))
        self.cache.append(entries, modality, segment_index)


class ViewContext:
    """Decode context: a frozen merged view plus the text appended since the merge.

    Only the decode loop appends to the text cache, so reading its tail here is
    race-free. ``window`` limits visible visual tokens (default: the whole view).
    """

    def __init__(self, view: MergedView, window: int | None = None):
        self.view = view
        self.window = view.n_video if window is None else window
        if not 0 <= self.window <= view.n_video:
            raise ValueError("window must lie within the merged video prefix")
        self._n_text_blocks = len(view.text_blocks)
        self._gathered: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self.windows: list[int] = []

    def _tail(self):
        return self.view.text._blocks[self._n_text_blocks :]

    def __len__(self):
        return self.view.n_video + self.n_text

    def layer_blocks(self, layer):
        # The snapshot never changes during a segment, so its blocks are
        # gathered once into a decode-side scratch pair instead of per step.
        if layer not in self._gathered and len(self.view):
            blocks = self.view.layer_blocks(layer)
            self._gathered[layer] = (np.concatenate([k for k, _ in blocks], axis=1),
                                     np.concatenate([v for _, v in blocks], axis=1))
        head = [self._gathered[layer]] if len(self.view) else []
        return head + [(b.entries.keys[layer], b.entries.values[layer]) for b in self._tail()]

    @property
    def n_visual(self):
        return self.view.n_video

    @property
    def n_text(self):
        return self.view.n_text + sum(len(b) for b in self._tail())

    @property
    def hidden(self):
        return slice(self.window, self.view.n_video) if self.window < self.view.n_video else None

    def append_text(self, entries, modality, segment_index, positions):
        self.windows.extend([self.window] * len(entries))
        self.view.text.append(entries, segment_index, positions)


def feed_tokens(model, context, token_ids, modality, segment_index, scheme, trace=None):
    """Run text tokens through the decoder against ``context`` and cache them."""
    emb = model.embed_tokens(token_ids)
    positions = assign_positions(
        [modality] * len(token_ids), scheme, visual_start=context.n_visual, text_start=context.n_text
    )
    mask = incremental_mask(len(context), len(token_ids), hidden=context.hidden)
    logits, entries = forward(model, emb, positions, mask, context)
    if trace is not None:
        trace(emb, positions, mask, context, logits)
    context.append_text(entries, modality, segment_index, positions.positions)
    return logits


def generate_segment(
    model: ModelParameters,
    context,
    max_tokens: int,
    *,
    prefix: Sequence[int],
    segment_index: int,
    scheme: Scheme | str = Scheme.DECOUPLED,
    stop_on_eot: bool = True,
    prefix_is_prompt: bool = False,
    on_step=None,
    trace=None,
) -> tuple[list[int], bool]:
    """Greedy-decode one reasoning segment.

    ``prefix`` (the prompt, or the boundary token closing the previous unit) is
    fed first so that it sees the current visual window. Every emitted token is
    fed back into the text cache. ``on_step(token)`` is called once per greedy
    step, including a terminating ``<EOT>``. Returns ``(tokens, stopped_by_eot)``.
    """
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    if not isinstance(context, (ViewContext, MonolithicContext)):
        context = ViewContext(context)
    scheme = Scheme(scheme)
    if prefix_is_prompt:
        logits = feed_tokens(model, context, list(prefix), Modality.PROMPT, PROMPT_SEGMENT, scheme, trace)
    else:
        logits = feed_tokens(model, context, list(prefix), Modality.REASONING, segment_index, scheme, trace)
    tokens: list[int] = []
    for _ in range(max_tokens):
        tok = int(np.argmax(logits[-1]))
        if on_step is not None:
            on_step(tok)
        if stop_on_eot and tok == EOT_ID:
            return tokens, True
        tokens.append(tok)
        logits = feed_tokens(model, context, [tok], Modality.REASONING, segment_index, scheme, trace)
    return tokens, False


def ingest_frame(model, cache, frame_index, frame, tokens_per_frame, scheme):
    """Encode a frame and append its visual entries (causal over visual history)."""
    emb = encode_frame(frame, model, tokens_per_frame)
    if isinstance(cache, MonolithicCache):
        n_vis, n_text = cache.n_visual, cache.n_text
    else:
        n_vis, n_text = len(cache), 0
    positions = assign_positions(
        [Modality.VISUAL] * tokens_per_frame, scheme, visual_start=n_vis, text_start=n_text
    )
    mask = incremental_mask(len(cache), tokens_per_frame)
    _, entries = forward(model, emb, positions, mask, cache)
    if isinstance(cache, MonolithicCache):
        cache.append(entries, Modality.VISUAL, frame_index)
    else:
        cache.append(entries, frame_index, positions.positions)


# --------------------------------------------------------------------------- paradigms


def _arrivals(stream: FrameStream, cfg: RuntimeConfig) -> list[int]:
    ts = [to_ns(f.timestamp) for f in stream.frames]
    return [ts[0]] * len(ts) if cfg.prebuffered else ts


def _record_arrivals(timeline, arrivals, clock):
    scale = 1.0 if clock.simulated else clock.time_scale
    for i, a in enumerate(arrivals):
        timeline.record(EventKind.FRAME_ARRIVAL, int(a * scale), frame=i)


def _check(stream):
    if not len(stream):
        raise ValueError("frame stream is empty")


def _decode_timed(model, context, clock, costs, timeline, cfg, scheme, seg_idx, prefix, is_prompt, trace):
    """Generate a segment while advancing ``clock``; returns (tokens, emit_ns, eot)."""
    emits: list[int] = []

    def on_step(tok):
        clock.spend(costs.decode_ns)
        if cfg.stop_on_eot and tok == EOT_ID:
            return
        now = clock.now()
        emits.append(now)
        timeline.record(EventKind.TOKEN_EMITTED, now, segment=seg_idx, token=tok)

    tokens, eot = generate_segment(
        model, context, cfg.max_tokens, prefix=prefix, segment_index=seg_idx, scheme=scheme,
        stop_on_eot=cfg.stop_on_eot, prefix_is_prompt=is_prompt, on_step=on_step, trace=trace,
    )
    return tokens, emits, eot


def _new_mono(model):
    c = model.config
    return MonolithicCache(c.n_layers, c.n_heads, c.head_dim, dtype=model.dtype)


def run_batch(stream: FrameStream, model: ModelParameters, costs: CostModel | None = None,
              clock=None, config: RuntimeConfig | None = None, trace=None) -> RunResult:
    """Wait for the whole stream, encode every frame, then reason once."""
    _check(stream)
    cfg, costs, clock = config or RuntimeConfig(), costs or CostModel(), make_clock(clock).start()
    scheme = cfg.scheme_for(Paradigm.BATCH)
    timeline = Timeline()
    arrivals = _arrivals(stream, cfg)
    mono = _new_mono(model)
    _record_arrivals(timeline, arrivals, clock)
    clock.wait_until(arrivals[-1])
    for i, frame in enumerate(stream.frames):
        timeline.record(EventKind.ENCODE_START, clock.now(), frame=i)
        ingest_frame(model, mono, i, frame, cfg.tokens_per_frame, scheme)
        clock.spend(costs.encode_ns)
        timeline.record(EventKind.ENCODE_DONE, clock.now(), frame=i)
    ctx = MonolithicContext(mono)
    start = clock.now()
    timeline.record(EventKind.DECODE_START, start, segment=0)
    tokens, emits, eot = _decode_timed(model, ctx, clock, costs, timeline, cfg, scheme, 0,
                                       cfg.prompt, True, trace)
    end = clock.now()
    timeline.record(EventKind.ANSWER_DONE, end)
    seg = ReasoningSegment(0, tuple(tokens), tuple(emits), len(stream), start, end,
                           tuple(range(len(stream))), eot)
    return RunResult(Paradigm.BATCH, Transcript((seg,)), timeline, clock.name, scheme, len(stream),
                     mono.stats(), mono.n_visual, ctx.windows, list(mono.modalities))


def run_interleaved(stream: FrameStream, model: ModelParameters, costs: CostModel | None = None,
                    clock=None, config: RuntimeConfig | None = None, trace=None) -> RunResult:
    """Alternate F1, R1, F2, R2, ... in one monolithic causal stream.

    Encoding frame t+1 waits for segment t to finish.
    """
    _check(stream)
    cfg, costs, clock = config or RuntimeConfig(), costs or CostModel(), make_clock(clock).start()
    scheme = cfg.scheme_for(Paradigm.INTERLEAVED)
    timeline = Timeline()
    arrivals = _arrivals(stream, cfg)
    mono = _new_mono(model)
    ctx = MonolithicContext(mono)
    _record_arrivals(timeline, arrivals, clock)
    segments = []
    for i, frame in enumerate(stream.frames):
        clock.wait_until(arrivals[i])
        timeline.record(EventKind.ENCODE_START, clock.now(), frame=i)
        ingest_frame(model, mono, i, frame, cfg.tokens_per_frame, scheme)
        clock.spend(costs.encode_ns)
        timeline.record(EventKind.ENCODE_DONE, clock.now(), frame=i)
        start = clock.now()
        timeline.record(EventKind.DECODE_START, start, segment=i)
        prefix, is_prompt = (cfg.prompt, True) if i == 0 else ((EOT_ID,), False)
        tokens, emits, eot = _decode_timed(model, ctx, clock, costs, timeline, cfg, scheme, i,
                                           prefix, is_prompt, trace)
        segments.append(ReasoningSegment(i, tuple(tokens), tuple(emits), i + 1, start, clock.now(),
                                         tuple(range(i + 1)), eot))
    timeline.record(EventKind.ANSWER_DONE, clock.now())
    return RunResult(Paradigm.INTERLEAVED, Transcript(tuple(segments)), timeline, clock.name, scheme,
                     len(stream), mono.stats(), mono.n_visual, ctx.windows, list(mono.modalities))


class _IngestWorker:
    """Encodes frames into the video cache and publishes their completion times.

    Threaded: runs on its own thread and never waits for the decoder.
    Unthreaded: frames are encoded lazily when the decoder asks about them;
    the simulated timing is identical because ingest timing does not depend
    on decoding.
    """

    def __init__(self, model, stream, arrivals, dual, clock, costs, cfg, scheme, timeline, threaded):
        self.model, self.stream, self.arrivals = model, stream, arrivals
        self.dual, self.clock, self.costs, self.cfg = dual, clock, costs, cfg
        self.scheme, self.timeline, self.threaded = scheme, timeline, threaded
        self.done_ns: list[int] = []
        self._cond = threading.Condition()
        self._error: BaseException | None = None
        self._thread = None

    @property
    def n(self):
        return len(self.stream)

    def _step(self):
        i = len(self.done_ns)
        frame = self.stream.frames[i]
        self.clock.wait_until(self.arrivals[i])
        self.timeline.record(EventKind.ENCODE_START, self.clock.now(), frame=i)
        ingest_frame(self.model, self.dual.video, i, frame, self.cfg.tokens_per_frame, self.scheme)
        self.clock.spend(self.costs.encode_ns)
        done = self.clock.now()
        self.timeline.record(EventKind.ENCODE_DONE, done, frame=i)
        with self._cond:
            self.done_ns.append(done)
            self._cond.notify_all()

    def _run(self):
        try:
            while len(self.done_ns) < self.n:
                self._step()
        except BaseException as exc:  # surfaced on the decode side
            with self._cond:
                self._error = exc
                self._cond.notify_all()

    def start(self):
        if self.threaded:
            self._thread = threading.Thread(target=self._run, name="tays-ingest", daemon=True)
            self._thread.start()

    def join(self):
        if self._thread is not None:
            self._thread.join()
        if self._error is not None:
            raise self._error

    def _published(self) -> int:
        with self._cond:
            return len(self.done_ns)

    def wait_for(self, j: int) -> int:
        """Block until frame ``j`` is encoded; return its completion time."""
        if not self.threaded:
            while len(self.done_ns) <= j:
                self._step()
            return self.done_ns[j]
        with self._cond:
            self._cond.wait_for(lambda: len(self.done_ns) > j or self._error is not None)
            if self._error is not None:
                raise self._error
            return self.done_ns[j]

    def count_done_by(self, t_ns: int) -> int:
        """Frames whose encode finished at or before ``t_ns``."""
        if not self.clock.simulated:
            return self._published()
        while True:
            n = self._published()
            if n == self.n or self.done_ns[n - 1] > t_ns:
                return bisect.bisect_right(self.done_ns[:n], t_ns)
            self.wait_for(n)


def run_parallel(stream: FrameStream, model: ModelParameters, costs: CostModel | None = None,
                 clock=None, config: RuntimeConfig | None = None, trace=None) -> RunResult:
    """Dual-cache merge-generate-split loop.

    Ingest appends to the video cache independently. The decoder merges a
    snapshot when its previous segment ended and at least one new frame is
    encoded (idling until one is), decodes a segment against the snapshot,
    and repeats until every frame has been merged.
    """
    _check(stream)
    cfg, costs = config or RuntimeConfig(), costs or CostModel()
    clock = make_clock(clock).start()
    scheme = cfg.scheme_for(Paradigm.PARALLEL)
    timeline = Timeline()
    arrivals = _arrivals(stream, cfg)
    _record_arrivals(timeline, arrivals, clock)
    dual = DualCache(model.config.n_layers)
    ingest = _IngestWorker(model, stream, arrivals, dual, clock.fork(), costs, cfg, scheme,
                           timeline, threaded=cfg.threaded)
    ingest.start()
    windows: list[int] = []
    segments = []
    merged = 0
    seg_idx = 0
    try:
        while merged < len(stream):
            target = len(stream) - 1 if cfg.merge_schedule == "final" else merged
            clock.wait_until(ingest.wait_for(target))
            m = clock.now()
            due = ingest.count_done_by(m)
            view = dual.merge(max_frames=due)
            timeline.record(EventKind.DECODE_START, m, segment=seg_idx)
            ctx = ViewContext(view)
            prefix, is_prompt = (cfg.prompt, True) if seg_idx == 0 else ((EOT_ID,), False)
            tokens, emits, eot = _decode_timed(model, ctx, clock, costs, timeline, cfg, scheme,
                                               seg_idx, prefix, is_prompt, trace)
            windows.extend(ctx.windows)
            segments.append(ReasoningSegment(seg_idx, tuple(tokens), tuple(emits), view.n_frames, m,
                                             clock.now(), view.frames, eot))
            merged = view.n_frames
            seg_idx += 1
    finally:
        ingest.join()
    timeline.record(EventKind.ANSWER_DONE, clock.now())
    layout = [Modality.VISUAL] * len(dual.video) + [Modality.REASONING] * len(dual.text)
    return RunResult(Paradigm.PARALLEL, Transcript(tuple(segments)), timeline, clock.name, scheme,
                     len(stream), dual.stats(), len(dual.video), windows, layout)


RUNNERS = {
    Paradigm.BATCH: run_batch,
    Paradigm.INTERLEAVED: run_interleaved,
    Paradigm.PARALLEL: run_parallel,
}


def run(paradigm: Paradigm | str, stream, model, costs=None, clock=None, config=None, trace=None) -> RunResult:
    return RUNNERS[Paradigm(paradigm)](stream, model, costs, clock, config, trace)
