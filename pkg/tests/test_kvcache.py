import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tays.kvcache import (
    DualCache,
    MonolithicCache,
    TextCache,
    VideoCache,
    concatenate,
    merge,
    split,
)
from tays.numerics import KVEntries
from tays.positional import Modality

H, HD, L = 2, 4, 2


def entries(n, fill=0.0, rng=None):
    def arr():
        a = rng.standard_normal((H, n, HD)) if rng is not None else np.full((H, n, HD), fill)
        a.setflags(write=False)
        return a

    return KVEntries(tuple(arr() for _ in range(L)), tuple(arr() for _ in range(L)))


def test_merge_is_zero_copy():
    video, text = VideoCache(L), TextCache(L)
    e = entries(4, 1.0)
    video.append(e, 0)
    text.append(entries(2, 2.0), -1)
    view = merge(video, text)
    k, v = view.layer_blocks(1)[0]
    assert k is e.keys[1] and v is e.values[1]
    assert (view.n_video, view.n_text, len(view)) == (4, 2, 6)


def test_snapshot_ignores_later_appends():
    video, text = VideoCache(L), TextCache(L)
    video.append(entries(4), 0)
    view = merge(video, text)
    video.append(entries(4), 1)
    text.append(entries(1), 0)
    assert (len(view), view.frames) == (4, (0,))
    assert len(video) == 8 and len(text) == 1


def test_max_frames_limits_the_video_prefix():
    video, text = VideoCache(L), TextCache(L)
    for i in range(3):
        video.append(entries(4), i)
    view = merge(video, text, max_frames=2)
    assert view.frames == (0, 1) and view.n_frames == 2 and view.n_video == 8


def test_split_returns_live_caches():
    dual = DualCache(L)
    view = dual.merge()
    v, t = split(view)
    assert v is dual.video and t is dual.text
    assert dual.snapshot_count == 1


def test_video_order_and_validation():
    video = VideoCache(L)
    video.append(entries(4), 0)
    with pytest.raises(ValueError, match="after frame"):
        video.append(entries(4), 0)
    writable = entries(1)
    writable = KVEntries(tuple(k.copy() for k in writable.keys), writable.values)
    with pytest.raises(ValueError, match="read-only"):
        video.append(writable, 1)
    with pytest.raises(ValueError, match="layers"):
        video.append(KVEntries(entries(1).keys[:1], entries(1).values[:1]), 1)
    with pytest.raises(ValueError, match="one position"):
        video.append(entries(2), 1, positions=[0])


def test_text_segments_are_non_decreasing():
    text = TextCache(L)
    text.append(entries(2), -1)
    text.append(entries(1), 0)
    text.append(entries(1), 0)
    with pytest.raises(ValueError):
        text.append(entries(1), -1)
    with pytest.raises(ValueError):
        TextCache(L).append(entries(1), -2)
    assert text.tags() == [-1, -1, 0, 0]


def test_dual_stats():
    dual = DualCache(L)
    dual.video.append(entries(4), 0)
    dual.text.append(entries(3), -1)
    dual.merge()
    assert dual.stats() == {"video_len": 4, "text_len": 3, "frames": 1, "snapshots": 1, "payload_entries": 7}


@settings(deadline=None, max_examples=30)
@given(st.lists(st.tuples(st.booleans(), st.integers(1, 5)), min_size=1, max_size=12), st.integers(0, 2**32))
def test_concatenate_oracle_and_monolithic_growth(ops, seed):
    rng = np.random.default_rng(seed)
    video, text = VideoCache(L), TextCache(L)
    mono = MonolithicCache(L, H, HD, capacity=1)
    frame = 0
    for is_video, n in ops:
        e = entries(n, rng=rng)
        if is_video:
            video.append(e, frame)
            frame += 1
        else:
            text.append(e, 0)
    view = merge(video, text)
    flat = concatenate(view, L)
    assert len(flat) == len(view)
    for li in range(L):
        ks = np.concatenate([k for k, _ in view.layer_blocks(li)], axis=1)
        np.testing.assert_array_equal(flat.layer_blocks(li)[0][0], ks)
    # monolithic growth keeps contents intact
    for is_video, n in ops:
        mono.append(entries(n, float(n)), Modality.VISUAL if is_video else Modality.REASONING, 0)
    expected = np.concatenate([np.full((H, n, HD), float(n)) for _, n in ops], axis=1)
    np.testing.assert_array_equal(mono.layer_blocks(0)[0][0], expected)
    assert mono.n_visual == sum(n for v, n in ops if v)
    assert mono.n_text == len(mono) - mono.n_visual


def test_monolithic_stats():
    mono = MonolithicCache(L, H, HD)
    assert mono.layer_blocks(0) == []
    mono.append(entries(4), "visual", 0)
    mono.append(entries(2), "prompt", -1)
    assert mono.stats() == {"monolithic_len": 6, "payload_entries": 6, "video_len": 4, "text_len": 2, "snapshots": 0}
    assert mono.modalities[-1] is Modality.PROMPT


def test_concurrent_writer_and_readers_see_frame_prefixes():
    dual = DualCache(L)
    n_frames = 200
    seen = []
    errors = []

    def writer():
        for i in range(n_frames):
            dual.video.append(entries(4, float(i)), i)

    def reader():
        try:
            for _ in range(300):
                view = dual.merge()
                frames = view.frames
                assert frames == tuple(range(len(frames)))
                assert view.n_video == 4 * len(frames)
                seen.append(len(frames))
        except AssertionError as exc:  # pragma: no cover - reported below
            errors.append(exc)

    threads = [threading.Thread(target=writer)] + [threading.Thread(target=reader) for _ in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert dual.merge().n_frames == n_frames
    assert dual.payload_count == 4 * n_frames
