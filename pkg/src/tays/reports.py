"""JSON schemas for every artifact the command line writes, and report builders."""

from __future__ import annotations

import csv
import io

import jsonschema

from tays import evalkit
from tays.masking import MaskSpec, causal_mask, streaming_mask
from tays.runtime import CostModel, Paradigm, RunResult, RuntimeConfig

_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}
_INT = {"type": "integer"}

CACHE_STATS_SCHEMA = {
    "type": "object",
    "required": ["video_len", "text_len", "snapshots", "payload_entries"],
    "properties": {
        "video_len": _INT,
        "text_len": _INT,
        "snapshots": _INT,
        "payload_entries": _INT,
        "frames": _INT,
        "monolithic_len": _INT,
    },
}

SEGMENT_SCHEMA = {
    "type": "object",
    "required": ["segment_index", "tokens", "emit_times_s", "frames_visible_at_start"],
    "properties": {
        "segment_index": _INT,
        "tokens": {"type": "array", "items": _INT},
        "emit_times_s": {"type": "array", "items": _NUM},
        "frames_visible_at_start": _INT,
        "merge_time_s": _NUM,
        "end_time_s": _NUM,
        "stopped_by_eot": {"type": "boolean"},
    },
}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["d_model", "n_heads", "n_layers", "vocab_size", "seed"],
    "properties": {k: _INT for k in ("d_model", "n_heads", "n_layers", "vocab_size", "seed", "tokens_per_frame")},
}

RUN_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "run report",
    "type": "object",
    "required": ["paradigm", "fps", "ttft_s", "delay_s", "segments", "cache_stats", "clock"],
    "properties": {
        "paradigm": {"enum": [p.value for p in Paradigm]},
        "fps": _NUM,
        "ttft_s": _NUM_OR_NULL,
        "ttft_decoder_s": _NUM_OR_NULL,
        "delay_s": _NUM,
        "segments": {"type": "array", "items": SEGMENT_SCHEMA},
        "cache_stats": CACHE_STATS_SCHEMA,
        "clock": {"enum": ["simulated", "wall"]},
        "pos_scheme": {"enum": ["monolithic", "decoupled"]},
        "n_frames": _INT,
        "model": MODEL_SCHEMA,
        "cost_model": {"type": "object"},
    },
}

BENCH_ROW_SCHEMA = {
    "type": "object",
    "required": ["paradigm", "fps", "ttft_s", "delay_s"],
    "properties": {
        "paradigm": {"enum": [p.value for p in Paradigm]},
        "fps": _NUM,
        "ttft_s": _NUM_OR_NULL,
        "delay_s": _NUM,
        "ttft_decoder_s": _NUM_OR_NULL,
        "n_frames": _INT,
    },
}

BENCH_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "bench report",
    "type": "object",
    "required": ["rows", "model", "cost_model", "clock"],
    "properties": {
        "rows": {"type": "array", "items": BENCH_ROW_SCHEMA, "minItems": 1},
        "model": MODEL_SCHEMA,
        "cost_model": {"type": "object"},
        "clock": {"enum": ["simulated", "wall"]},
    },
}

BENCH_CSV_COLUMNS = ("paradigm", "fps", "ttft_s", "delay_s")

TRAJECTORY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "trajectory line",
    "type": "object",
    "required": ["video_id", "frames", "supervision", "question", "answer", "options"],
    "properties": {
        "video_id": {"type": "string"},
        "frames": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["grid_index", "timestamp", "source_frame", "is_anchor"],
                "properties": {
                    "grid_index": _INT,
                    "timestamp": _NUM,
                    "source_frame": _INT,
                    "is_anchor": {"type": "boolean"},
                },
            },
        },
        "supervision": {"type": "array", "items": {"type": "string", "pattern": r"(</EOT>$)|(^<SKIP>$)"}},
        "question": {"type": "string"},
        "answer": {"type": "string"},
        "options": {"type": "array", "items": {"type": "string"}},
    },
}

EVAL_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "evaluation report",
    "type": "object",
    "required": ["provider", "threshold", "n_cases", "accuracy", "temporal", "coherence"],
    "properties": {
        "provider": {"type": "string"},
        "threshold": _NUM,
        "n_cases": _INT,
        "accuracy": {
            "type": "object",
            "required": ["overall", "per_category"],
            "properties": {"overall": _NUM, "per_category": {"type": "object"}},
        },
        "temporal": {
            "type": "object",
            "required": ["mean_abs_dt", "within_1s"],
            "properties": {"mean_abs_dt": _NUM_OR_NULL, "within_1s": _NUM_OR_NULL},
        },
        "coherence": {
            "type": "object",
            "required": ["edges", "counts"],
            "properties": {"edges": {"type": "array"}, "counts": {"type": "array"}},
        },
    },
}


def validate(document, schema) -> None:
    jsonschema.validate(document, schema)


def _maybe(fn, *args):
    try:
        return fn(*args)
    except ValueError:
        return None


def model_info(model, cfg: RuntimeConfig) -> dict:
    info = model.config.to_dict()
    info["tokens_per_frame"] = cfg.tokens_per_frame
    return info


def run_report(result: RunResult, fps: float, model, costs: CostModel, cfg: RuntimeConfig) -> dict:
    segments = [
        {
            "segment_index": s.segment_index,
            "tokens": list(s.tokens),
            "emit_times_s": list(s.emit_times),
            "frames_visible_at_start": s.frames_visible_at_start,
            "merge_time_s": s.merge_time,
            "end_time_s": s.end_time,
            "stopped_by_eot": s.stopped_by_eot,
        }
        for s in result.transcript
    ]
    return {
        "paradigm": result.paradigm.value,
        "fps": fps,
        "ttft_s": _maybe(evalkit.ttft, result.timeline, "end_to_end"),
        "ttft_decoder_s": _maybe(evalkit.ttft, result.timeline, "decoder_level"),
        "delay_s": evalkit.overall_delay(result.timeline),
        "segments": segments,
        "cache_stats": result.cache_stats,
        "clock": result.clock,
        "pos_scheme": result.pos_scheme.value,
        "n_frames": result.n_frames,
        "model": model_info(model, cfg),
        "cost_model": {
            "encode_cost_per_frame": costs.encode_cost_per_frame,
            "decode_cost_per_token": costs.decode_cost_per_token,
        },
    }


def run_masks(result: RunResult) -> MaskSpec:
    """Full visibility matrix over the run's final physical cache layout."""
    n_text = len(result.text_windows)
    if result.paradigm is Paradigm.PARALLEL:
        return streaming_mask(result.n_visual, n_text, result.text_windows)
    return causal_mask(result.n_visual + n_text)


def bench_row(result: RunResult, fps: float) -> dict:
    return {
        "paradigm": result.paradigm.value,
        "fps": fps,
        "ttft_s": _maybe(evalkit.ttft, result.timeline, "end_to_end"),
        "delay_s": evalkit.overall_delay(result.timeline),
        "ttft_decoder_s": _maybe(evalkit.ttft, result.timeline, "decoder_level"),
        "n_frames": result.n_frames,
    }


def _fmt(x):
    if x is None:
        return ""
    return repr(x) if isinstance(x, float) else str(x)


def bench_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in BENCH_CSV_COLUMNS])
    return buf.getvalue()


def parse_bench_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != BENCH_CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    rows = []
    for r in reader:
        rows.append({
            "paradigm": r["paradigm"],
            "fps": float(r["fps"]),
            "ttft_s": float(r["ttft_s"]) if r["ttft_s"] else None,
            "delay_s": float(r["delay_s"]),
        })
    return rows
