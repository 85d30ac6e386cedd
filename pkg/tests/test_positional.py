import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import rope_complex
from tays.positional import (
    Modality,
    RotationSpec,
    Scheme,
    assign_positions,
    attention_score,
    layout_of,
    rotate,
)

SPEC = RotationSpec(8)
vectors = st.lists(st.floats(-10, 10), min_size=8, max_size=8).map(np.array)
positions = st.integers(0, 100_000)

V, R, P = Modality.VISUAL, Modality.REASONING, Modality.PROMPT


def test_rotation_spec_validation():
    with pytest.raises(ValueError):
        RotationSpec(7)
    with pytest.raises(ValueError):
        RotationSpec(8, base=1.0)


def test_frequencies():
    np.testing.assert_allclose(SPEC.frequencies, [1.0, 10000**-0.25, 10000**-0.5, 10000**-0.75])


def test_rotate_rejects_odd_and_mismatched_lengths():
    with pytest.raises(ValueError, match="odd"):
        rotate(np.ones(7), 1, SPEC)
    with pytest.raises(ValueError):
        rotate(np.ones(6), 1, SPEC)


@given(vectors, positions)
def test_rotate_matches_complex_oracle(v, p):
    np.testing.assert_allclose(rotate(v, p, SPEC), rope_complex(v, p), atol=1e-9)


@given(vectors, positions)
def test_rotate_preserves_norm(v, p):
    assert abs(np.linalg.norm(rotate(v, p, SPEC)) - np.linalg.norm(v)) <= 1e-9 * (1 + np.linalg.norm(v))


@given(vectors, st.integers(0, 1000), st.integers(0, 1000))
def test_rotations_compose(v, a, b):
    np.testing.assert_allclose(rotate(rotate(v, a, SPEC), b, SPEC), rotate(v, a + b, SPEC), atol=1e-9)


def test_rotate_zero_is_identity_and_broadcasts():
    v = np.arange(2 * 3 * 8, dtype=float).reshape(2, 3, 8)
    np.testing.assert_array_equal(rotate(v, 0, SPEC), v)
    out = rotate(v, np.arange(3)[None, :], SPEC)
    np.testing.assert_allclose(out[1, 2], rotate(v[1, 2], 2, SPEC))


@given(vectors, vectors, st.integers(0, 5000), st.integers(0, 5000), st.integers(0, 5000))
def test_attention_score_is_shift_invariant(q, k, m, n, c):
    a = attention_score(q, k, m, n, SPEC)
    b = attention_score(q, k, m + c, n + c, SPEC)
    assert abs(a - b) <= 1e-6 * (1 + abs(a))


def test_monolithic_is_one_global_counter():
    pa = assign_positions([V, V, P, R, R], "monolithic")
    assert pa.positions.tolist() == [0, 1, 2, 3, 4]
    assert assign_positions([R], Scheme.MONOLITHIC, visual_start=8, text_start=3).positions.tolist() == [11]


def test_decoupled_separates_visual_and_text_axes():
    pa = assign_positions([V, V, P, R, V, R], "decoupled")
    assert pa.positions.tolist() == [0, 1, 0, 1, 2, 2]
    assert pa.of(V).tolist() == [0, 1, 2]
    assert pa.of(R).tolist() == [1, 2]
    pa = assign_positions([R, R], "decoupled", visual_start=40, text_start=5)
    assert pa.positions.tolist() == [5, 6]


@given(st.lists(st.sampled_from([V, R, P]), min_size=1, max_size=40))
def test_decoupled_counts_each_axis_densely(layout):
    pa = assign_positions(layout, "decoupled")
    vis = pa.of(V).tolist()
    text = [p for p, m in zip(pa.positions.tolist(), layout) if m.is_text]
    assert vis == list(range(len(vis)))
    assert text == list(range(len(text)))


@given(st.integers(1, 60), st.integers(1, 60), st.integers(0, 500))
def test_text_positions_invariant_to_visual_growth_only_when_decoupled(n_text, n_vis, extra):
    small = assign_positions([R] * n_text, "decoupled", visual_start=n_vis)
    big = assign_positions([R] * n_text, "decoupled", visual_start=n_vis + extra)
    assert small.positions.tolist() == big.positions.tolist()
    mono_small = assign_positions([R] * n_text, "monolithic", visual_start=n_vis)
    mono_big = assign_positions([R] * n_text, "monolithic", visual_start=n_vis + extra)
    assert (mono_big.positions - mono_small.positions == extra).all()


def test_empty_layout_and_bad_scheme():
    with pytest.raises(ValueError):
        assign_positions([], "decoupled")
    with pytest.raises(ValueError):
        assign_positions([V], "sinusoidal")


def test_layout_of():
    assert layout_of([("visual", 2), ("prompt", 1)]) == [V, V, P]


def test_attention_score_dimension_mismatch():
    with pytest.raises(ValueError):
        attention_score(np.ones(8), np.ones(6), 0, 0, SPEC)
