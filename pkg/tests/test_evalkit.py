import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from generators import DictEmbedder
from oracles import judge_oracle
from tays.evalkit import (
    EvalCase,
    JudgeConfig,
    Verdict,
    accuracy,
    coherence_histogram,
    coherence_profile,
    judge,
    judge_scores,
    overall_delay,
    temporal_deviation,
    ttft,
)
from tays.runtime import EventKind, RuntimeConfig, Timeline, run_batch, synthetic_stream

sim = st.floats(-1, 1)


@given(sim, sim, sim, st.floats(0, 1))
def test_judge_scores_match_oracle(s_ref, s_opt, s_neg, tau):
    assert bool(judge_scores(s_ref, s_opt, s_neg, tau)) == judge_oracle(s_ref, s_opt, s_neg, tau)


def test_judge_boundaries():
    assert judge_scores(0.8, 0.8, 0.79) is Verdict.CORRECT
    assert judge_scores(0.8, 0.9, 0.9) is Verdict.INCORRECT  # tie with a distractor
    assert judge_scores(0.7999, 0.9, 0.1) is Verdict.INCORRECT


def test_judge_with_embeddings():
    table = {"pred": [1, 0, 0], "ref": [1, 0.1, 0], "A": [1, 0.2, 0], "B": [0, 1, 0], "C": [0, 0, 1], "D": [0, 1, 1]}
    case = EvalCase("pred", "ref", ["A", "B", "C", "D"], 0)
    assert judge(case, DictEmbedder(table)) is Verdict.CORRECT
    assert judge(EvalCase("pred", "ref", ["B", "A", "C", "D"], 0), DictEmbedder(table)) is Verdict.INCORRECT
    assert judge(case, DictEmbedder(table), JudgeConfig(tau=0.999)) is Verdict.INCORRECT


def test_case_and_config_validation():
    with pytest.raises(ValueError):
        EvalCase("p", "r", ["a", "b", "c"], 0)
    with pytest.raises(ValueError):
        EvalCase("p", "r", ["a", "b", "c", "d"], 4)
    with pytest.raises(ValueError):
        JudgeConfig(tau=1.5)


def test_accuracy():
    rep = accuracy([("obj", True), ("obj", False), ("act", True), ("act", True)])
    assert rep.overall == 75.0
    assert rep.per_category == {"act": 100.0, "obj": 50.0}
    assert rep.to_dict()["counts"]["obj"] == {"correct": 1, "total": 2}
    with pytest.raises(ValueError):
        accuracy([])


def test_latency_metrics_from_timeline():
    tl = Timeline()
    tl.record(EventKind.FRAME_ARRIVAL, 1_000_000_000, frame=0)
    tl.record(EventKind.DECODE_START, 3_000_000_000, segment=0)
    tl.record(EventKind.TOKEN_EMITTED, 3_020_000_000, segment=0, token=5)
    tl.record(EventKind.ANSWER_DONE, 4_000_000_000)
    assert ttft(tl) == 2.02
    assert ttft(tl, "decoder_level") == 0.02
    assert overall_delay(tl) == 3.0
    with pytest.raises(ValueError):
        ttft(tl, "median")
    with pytest.raises(ValueError):
        ttft(Timeline())
    with pytest.raises(ValueError):
        overall_delay(Timeline())


def test_ttft_on_a_run(model):
    res = run_batch(synthetic_stream(20), model, config=RuntimeConfig(prebuffered=True))
    assert ttft(res.timeline) == 2.02


def test_temporal_deviation():
    rep = temporal_deviation([1.0, 4.0, 9.5], [1.2, 3.0, 8.0])
    np.testing.assert_allclose(rep.deltas, [-0.2, 1.0, 1.5])
    assert rep.mean_abs == pytest.approx(0.9)
    assert rep.within_1s == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        temporal_deviation([], [1.0])


def test_coherence():
    table = {"a": [1, 0], "b": [1, 1], "c": [0, 1]}
    sims = coherence_profile(["a", "b", "c"], DictEmbedder(table))
    np.testing.assert_allclose(sims, [2**-0.5, 2**-0.5])
    hist = coherence_histogram(sims, bins=4)
    assert hist["counts"] == [0, 0, 0, 2]
    with pytest.raises(ValueError):
        coherence_profile(["a"], DictEmbedder(table))


def test_judge_truth_table_exhaustive():
    for r, o, n in itertools.product([0.7, 0.8, 0.9], repeat=3):
        assert bool(judge_scores(r, o, n)) == (r >= 0.8 and o >= 0.8 and o > n)
