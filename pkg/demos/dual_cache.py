"""The dual KV cache: two append-only stores and zero-copy merged views.

Run with ``python demos/dual_cache.py``.
"""

# %%
import numpy as np

from tays.kvcache import DualCache, concatenate
from tays.numerics import ToyModelConfig, forward, init_model
from tays.masking import causal_mask

model = init_model(ToyModelConfig(d_model=16, n_heads=2, n_layers=2, seed=1))
rng = np.random.default_rng(0)


def entries(n):
    _, kv = forward(model, rng.standard_normal((n, 16)), np.arange(n), causal_mask(n))
    return kv


cache = DualCache(model.config.n_layers)
cache.video.append(entries(4), 0)      # frame 0, four tokens
cache.text.append(entries(2), -1)      # the prompt is segment -1
print("after frame 0:", cache.stats())

# %%
# A view is a frozen tuple of block references. Later appends do not show up in it.
view = cache.merge()
cache.video.append(entries(4), 1)
print("view frames:", view.frames, "len", len(view))
print("live cache :", cache.stats())

# %%
# No payload was copied: the view's blocks are the cache's own arrays.
k_view = view.layer_blocks(0)[0][0]
k_live = cache.video.layer_blocks(0)[0][0]
print("shares memory:", np.shares_memory(k_view, k_live))

# %%
# A merge can stop short of the newest frame, which is how the decoder hides
# a frame that is still being encoded at the merge instant.
partial = cache.merge(max_frames=1)
full = cache.merge()
print("partial frames", partial.frames, "full frames", full.frames, "snapshots", cache.snapshot_count)

# %%
# Physically concatenating a view gives the monolithic layout used by batch decoding.
mono = concatenate(full, model.config.n_layers)
print("monolithic length", len(mono), "== view length", len(full))
