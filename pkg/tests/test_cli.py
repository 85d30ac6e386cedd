import json
import subprocess
import sys
from importlib import resources

import pytest

from tays import reports
from tays.cli import build_parser, main, parse_fps
from tays.masking import MaskSpec

FIXTURE = str(resources.files("tays.data").joinpath("annotations.jsonl"))


def run_cli(*args):
    return main([str(a) for a in args])


def test_simulate_default_batch(tmp_path):
    out = tmp_path / "r.json"
    assert run_cli("simulate", "--out", out) == 0
    report = json.loads(out.read_text())
    reports.validate(report, reports.RUN_REPORT_SCHEMA)
    assert report["ttft_s"] == 2.02
    assert report["n_frames"] == 20 and report["paradigm"] == "batch"


def test_simulate_parallel_fps3_and_mask_dump(tmp_path):
    out, masks = tmp_path / "r.json", tmp_path / "m.json"
    assert run_cli("simulate", "--paradigm", "parallel", "--fps", 3, "--out", out, "--dump-masks", masks) == 0
    report = json.loads(out.read_text())
    vis = [s["frames_visible_at_start"] for s in report["segments"]]
    assert vis == sorted(vis)
    mask = MaskSpec.from_rle(json.loads(masks.read_text()))
    n = report["cache_stats"]["video_len"] + report["cache_stats"]["text_len"]
    assert mask.n_rows == n
    assert report["pos_scheme"] == "decoupled"


def test_unknown_paradigm_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli("simulate", "--paradigm", "sequential")
    assert exc.value.code == 2


def test_seed_env_override(tmp_path, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run_cli("simulate", "--seed", 1, "--out", a)
    monkeypatch.setenv("TAYS_SEED", "1")
    run_cli("simulate", "--seed", 99, "--out", b)
    assert json.loads(a.read_text()) == json.loads(b.read_text())
    monkeypatch.setenv("TAYS_SEED", "x")
    assert run_cli("simulate", "--out", b) == 2


def test_simulate_missing_stream_is_io_error(tmp_path):
    assert run_cli("simulate", "--stream", tmp_path / "nope.json") == 1


def test_prepare_fixture_and_rerun(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run_cli("prepare", "--annotations", FIXTURE, "--out", a) == 0
    assert run_cli("prepare", "--annotations", FIXTURE, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert len(lines) == 3
    for line in lines:
        reports.validate(json.loads(line), reports.TRAJECTORY_SCHEMA)


def test_prepare_epsilon_config_error(tmp_path, capsys):
    assert run_cli("prepare", "--annotations", FIXTURE, "--epsilon", 0.25, "--out", tmp_path / "x") == 2
    assert "epsilon" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()


def test_eval_end_to_end(tmp_path):
    cases = tmp_path / "cases.jsonl"
    preds = tmp_path / "pred.jsonl"
    cases.write_text("\n".join(json.dumps(c) for c in [
        {"id": "1", "reference": "a red ball", "options": ["a red ball", "a stick", "a frisbee", "a bone"],
         "correct": 0, "category": "object", "keyframes": [4.8]},
        {"id": "2", "reference": "the hood", "options": ["a tire", "the hood", "the trunk", "a door"],
         "correct": 1, "category": "object"},
    ]))
    preds.write_text("\n".join(json.dumps(p) for p in [
        {"id": "1", "prediction": "a red ball", "segments": [{"time": 5.0, "text": "dog runs"}, {"time": 6.5, "text": "dog catches ball"}]},
        {"id": "2", "prediction": "a tire"},
    ]))
    out = tmp_path / "eval.json"
    assert run_cli("eval", "--pred", preds, "--cases", cases, "--out", out) == 0
    rep = json.loads(out.read_text())
    reports.validate(rep, reports.EVAL_REPORT_SCHEMA)
    assert rep["accuracy"]["overall"] == 50.0
    assert rep["temporal"]["mean_abs_dt"] == pytest.approx((0.2 + 1.7) / 2)
    assert sum(rep["coherence"]["counts"]) == 1


def test_eval_missing_prediction(tmp_path):
    cases = tmp_path / "c.jsonl"
    cases.write_text(json.dumps({"id": "1", "reference": "r", "options": ["a", "b", "c", "d"], "correct": 0}))
    preds = tmp_path / "p.jsonl"
    preds.write_text("")
    assert run_cli("eval", "--pred", preds, "--cases", cases) == 2


def test_parse_fps():
    assert parse_fps("1..5") == [1.0, 2.0, 3.0, 4.0, 5.0]
    assert parse_fps("2,4") == [2.0, 4.0]
    for bad in ("0..3", "6", "5..1", "x"):
        with pytest.raises(Exception):
            parse_fps(bad)


def test_bench_rejects_out_of_range_fps():
    with pytest.raises(SystemExit) as exc:
        run_cli("bench", "--fps", "1..6")
    assert exc.value.code == 2


def test_bench_small_sweep(tmp_path):
    csv_path, js = tmp_path / "b.csv", tmp_path / "b.json"
    assert run_cli("bench", "--fps", "1,2", "--duration", 6, "--out", csv_path, "--json", js) == 0
    raw = csv_path.read_bytes()
    assert b"\r" not in raw and raw.startswith(b"paradigm,fps,ttft_s,delay_s\n")
    rows = reports.parse_bench_csv(raw.decode())
    assert len(rows) == 6
    doc = json.loads(js.read_text())
    reports.validate(doc, reports.BENCH_SCHEMA)
    again = tmp_path / "c.csv"
    run_cli("bench", "--fps", "1,2", "--duration", 6, "--out", again, "--single-thread")
    assert again.read_bytes() == raw


def test_help_lists_defaults():
    text = build_parser()._subparsers._group_actions[0].choices["simulate"].format_help()
    assert "default: batch" in text and "default: 0.02" in text


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tays.cli", "simulate", "--frames", "2"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["n_frames"] == 2
