"""From annotated clips to per-grid-point supervision strings.

Run with ``python demos/streamprep_walkthrough.py``.
"""

# %%
from importlib import resources

from tays.embeddings import HashEmbedder
from tays.streamprep import dumps_jsonl, prepare, read_annotations

videos = read_annotations(resources.files("tays.data").joinpath("annotations.jsonl"))
embedder = HashEmbedder()
for v in videos:
    print(f"{v.video_id}: {len(v.timestamps)} frames, {len(v.keyframes)} keyframes, q={v.question!r}")

# %%
# Each clip is resampled to a 0.5 s grid with keyframes snapped in, then
# keyframes that are off-topic or near-duplicates of their predecessor are dropped.
trajectories = prepare(videos, embedder)
for t in trajectories:
    print(f"\n{t.video_id}: {len(t.frames)} grid points, retained keyframes {t.retained_keyframes}")
    for g, sup in zip(t.frames, t.supervision):
        if sup != "<SKIP>":
            print(f"  grid {g.grid_index:>2} t={g.timestamp:4.1f}s frame {g.source_frame:>2}  {sup}")

# %%
# The JSONL written by ``tays prepare`` is byte-stable for a fixed embedder.
assert dumps_jsonl(prepare(videos, embedder)) == dumps_jsonl(trajectories)
print("\nrerun is byte-identical")
