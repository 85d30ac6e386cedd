"""Streaming attention masks and the two position schemes, printed small.

Run with ``python demos/masks_and_positions.py``.
"""

# %%
import numpy as np

from tays.masking import FrameBoundaryMap, causal_mask, streaming_mask
from tays.positional import Modality, RotationSpec, Scheme, assign_positions, attention_score, layout_of, rotate


def show(mask, n_visual):
    for i, row in enumerate(mask.visibility):
        cells = "".join("#" if v else "." for v in row)
        tag = "v" if i < n_visual else "r"
        print(f"  {tag}{i:<3}{cells[:n_visual]}|{cells[n_visual:]}")


# %%
# Three frames of one visual token each, then reasoning. Rows 0..1 were
# decoded after the first frame, rows 2..4 after all three.
widths = FrameBoundaryMap.from_segments([2, 3], [1, 3])
print("window widths:", widths.widths.tolist())
show(streaming_mask(3, 5, widths), 3)

# %%
print("plain causal mask for comparison")
show(causal_mask(8), 3)

# %%
# Positions: monolithic numbers every token in order, decoupled keeps
# visual and text on separate axes.
layout = layout_of([(Modality.VISUAL, 3), (Modality.PROMPT, 2), (Modality.REASONING, 3)])
for scheme in Scheme:
    print(f"{scheme.value:<11}", assign_positions(layout, scheme).positions.tolist())

# %%
# Growing the visual prefix shifts every text position under the monolithic
# scheme. Under the decoupled scheme text positions do not move, so the
# rotated text queries and keys stay bit-identical as frames arrive.
spec = RotationSpec(8)
q = np.random.default_rng(0).standard_normal(8)
for scheme in Scheme:
    rotated = []
    for n_v in (3, 30):
        lay = layout_of([(Modality.VISUAL, n_v), (Modality.PROMPT, 2), (Modality.REASONING, 3)])
        text_pos = assign_positions(lay, scheme).positions[n_v:]
        rotated.append(rotate(q, text_pos[-1], spec))
        print(f"{scheme.value:<11} n_visual={n_v:<3} text positions {text_pos.tolist()}")
    print(f"{'':<11} last text query unchanged: {np.array_equal(*rotated)}")

# %%
# Scores depend only on the offset between positions, in either scheme.
k = np.random.default_rng(1).standard_normal(8)
print([round(attention_score(q, k, 5 + c, 2 + c, spec), 9) for c in (0, 7, 100)])
