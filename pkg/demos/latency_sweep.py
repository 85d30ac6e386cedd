"""Latency of the three decoding paradigms as the frame rate grows.

Run with ``python demos/latency_sweep.py``. Every number is simulated time:
encoding a frame costs 0.1 s and each decode step 0.02 s.
"""

# %%
import numpy as np

from tays.evalkit import overall_delay, ttft
from tays.numerics import ToyModelConfig, init_model
from tays.runtime import CostModel, Paradigm, RuntimeConfig, bundled_stream, run

model = init_model(ToyModelConfig(seed=0))
costs = CostModel(0.1, 0.02)
cfg = RuntimeConfig(stop_on_eot=False)   # fixed 32-token answers
source = bundled_stream()
print(f"source stream: {len(source.frames)} frames over {source.frames[-1].timestamp:.1f}s")

# %%
# Batch waits for the whole clip, interleaved alternates encode and decode,
# parallel overlaps the two.
delays = {}
print(f"{'paradigm':<12}{'fps':>4}{'frames':>8}{'ttft_s':>10}{'delay_s':>10}")
for paradigm in Paradigm:
    for fps in range(1, 6):
        stream = source.resample(fps, max_frames=30 * fps)
        res = run(paradigm, stream, model, costs, config=cfg)
        d = overall_delay(res.timeline)
        delays.setdefault(paradigm.value, []).append(d)
        print(f"{paradigm.value:<12}{fps:>4}{len(stream.frames):>8}{ttft(res.timeline):>10.2f}{d:>10.2f}")

# %%
# Parallel delay barely moves with fps; the others grow with the frame count.
for name, d in delays.items():
    d = np.array(d)
    print(f"{name:<12} spread {(d.max() - d.min()) / d.mean():6.1%}")
