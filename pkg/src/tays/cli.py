"""``tays`` command line: simulate, prepare, eval and bench."""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from pathlib import Path

from tays import evalkit, reports, streamprep
from tays.embeddings import make_embedder
from tays.numerics import ToyModelConfig, init_model
from tays.runtime import (
    CostModel,
    FrameStream,
    Paradigm,
    RuntimeConfig,
    WallClock,
    bundled_stream,
    run,
)

log = logging.getLogger("tays")

EXIT_OK, EXIT_IO, EXIT_USAGE = 0, 1, 2
PARADIGMS = [p.value for p in Paradigm]


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _seed(args, fallback: int = 0) -> int:
    env = os.environ.get("TAYS_SEED")
    if env is None:
        return fallback if args.seed is None else args.seed
    try:
        return int(env)
    except ValueError:
        raise CliError(f"TAYS_SEED must be an integer, got {env!r}") from None


def _model(args):
    try:
        base = ToyModelConfig.from_json(args.model_config) if args.model_config else ToyModelConfig()
        cfg = ToyModelConfig(**{**base.to_dict(), "seed": _seed(args, base.seed)})
    except OSError as exc:
        raise CliError(f"cannot read model config: {exc}", EXIT_IO) from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"invalid model config: {exc}") from exc
    return init_model(cfg)


def _costs(args) -> CostModel:
    try:
        return CostModel(args.encode_cost, args.decode_cost)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _clock(args):
    if args.clock == "simulated":
        return "simulated"
    return WallClock(time_scale=args.time_scale, emulate_costs=True)


def _write(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True)
    with open(p, "w", newline="\n") as fh:
        fh.write(text)


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_fps(text: str) -> list[float]:
    """``"1..5"`` is an inclusive integer range; otherwise a comma list."""
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if lo > hi:
            raise argparse.ArgumentTypeError(f"empty fps range {text!r}")
        values = [float(v) for v in range(lo, hi + 1)]
    else:
        try:
            values = [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad fps list {text!r}") from None
    if not values or any(v not in (1.0, 2.0, 3.0, 4.0, 5.0) for v in values):
        raise argparse.ArgumentTypeError(f"bench fps values must lie in 1..5, got {text!r}")
    return values


def _paradigm_list(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in PARADIGMS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown paradigm(s) {bad}; choose from {PARADIGMS}")
    return names


def _add_model_args(p):
    p.add_argument("--seed", type=int, default=None,
                   help="model seed, default 0 or the config file's seed (TAYS_SEED overrides)")
    p.add_argument("--model-config", metavar="PATH", help="toy model config JSON")
    p.add_argument("--encode-cost", type=float, default=0.1, help="seconds per encoded frame")
    p.add_argument("--decode-cost", type=float, default=0.02, help="seconds per decoded token")
    p.add_argument("--tokens-per-frame", type=int, default=4, help="visual tokens per encoded frame")
    p.add_argument("--max-tokens", type=int, default=32, help="token budget per reasoning segment")
    p.add_argument("--clock", choices=["simulated", "wall"], default="simulated", help="time source")
    p.add_argument("--time-scale", type=float, default=1.0, help="wall clock: real seconds per simulated second")
    p.add_argument("--single-thread", action="store_true", help="run ingest on the decode thread")


class _DefaultsFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Show defaults, except ``None`` ones whose help text explains the fallback."""

    def _get_help_string(self, action):
        if action.default is None:
            return action.help
        return super()._get_help_string(action)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tays", description="Streaming video reasoning simulator and data tools.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = _DefaultsFormatter

    s = sub.add_parser("simulate", help="run one paradigm and emit a JSON report", formatter_class=fmt)
    s.add_argument("--stream", metavar="PATH", help="frame stream JSON (default: bundled stream)")
    s.add_argument("--paradigm", choices=PARADIGMS, default="batch", help="inference paradigm")
    s.add_argument("--fps", type=float, default=None,
                   help="resample the stream to this rate (default: 2 for the bundled stream, native otherwise)")
    s.add_argument("--frames", type=int, default=20, help="frames taken from the bundled stream")
    s.add_argument("--pos-scheme", choices=["monolithic", "decoupled"], default=None,
                   help="default: monolithic for batch/interleaved, decoupled for parallel")
    s.add_argument("--arrival", choices=["prebuffered", "live"], default="prebuffered",
                   help="frames all available at t=0, or arriving at their timestamps")
    s.add_argument("--merge-schedule", choices=["eager", "final"], default="eager",
                   help="parallel only: merge as frames become ready, or once after the last frame")
    s.add_argument("--stop-on-eot", action=argparse.BooleanOptionalAction, default=True,
                   help="end a segment when the model emits EOT")
    s.add_argument("--dump-masks", metavar="PATH", help="write the run's visibility mask as RLE JSON")
    s.add_argument("--out", default="-", help="report path, '-' for stdout")
    _add_model_args(s)

    p = sub.add_parser("prepare", help="build streaming supervision from annotations", formatter_class=fmt)
    p.add_argument("--annotations", required=True, metavar="PATH", help="annotation JSONL")
    p.add_argument("--delta", type=float, default=0.5, help="grid interval in seconds")
    p.add_argument("--epsilon", type=float, default=0.1, help="anchor snap tolerance in seconds")
    p.add_argument("--max-duration", type=float, default=30.0, help="grid cutoff in seconds")
    p.add_argument("--mode", choices=["snap", "interval"], default="snap", help="how grid points lock to anchors")
    p.add_argument("--tau-q", type=float, default=0.7, help="question relevance threshold")
    p.add_argument("--tau-adj", type=float, default=0.9, help="adjacent redundancy threshold")
    p.add_argument("--tau-consistency", type=float, default=0.7, help="question/reasoning consistency threshold")
    p.add_argument("--embedder", choices=["hash", "file"], default="hash", help="embedding provider")
    p.add_argument("--vectors", metavar="PATH", help="JSONL vectors for --embedder file")
    p.add_argument("--embed-dim", type=int, default=64, help="hash embedder dimension")
    p.add_argument("--seed", type=int, default=0, help="hash embedder seed (TAYS_SEED overrides)")
    p.add_argument("--out", default="-", help="trajectory JSONL path, '-' for stdout")

    e = sub.add_parser("eval", help="judge predictions and report accuracy and alignment", formatter_class=fmt)
    e.add_argument("--pred", required=True, metavar="PATH", help="predictions JSONL")
    e.add_argument("--cases", required=True, metavar="PATH", help="cases JSONL")
    e.add_argument("--threshold", type=float, default=0.8, help="judge similarity threshold")
    e.add_argument("--embedder", choices=["hash", "file"], default="hash", help="embedding provider")
    e.add_argument("--vectors", metavar="PATH", help="JSONL vectors for --embedder file")
    e.add_argument("--embed-dim", type=int, default=64, help="hash embedder dimension")
    e.add_argument("--seed", type=int, default=0, help="hash embedder seed (TAYS_SEED overrides)")
    e.add_argument("--out", default="-", help="report path, '-' for stdout")

    b = sub.add_parser("bench", help="latency sweep over fps and paradigms", formatter_class=fmt)
    b.add_argument("--fps", type=parse_fps, default="1..5", help="'lo..hi' or comma list within 1..5")
    b.add_argument("--paradigms", type=_paradigm_list, default=",".join(PARADIGMS), help="comma-separated paradigms")
    b.add_argument("--stream", metavar="PATH", help="frame stream JSON (default: bundled 30 s stream)")
    b.add_argument("--duration", type=float, default=30.0, help="seconds of stream to replay")
    b.add_argument("--stop-on-eot", action=argparse.BooleanOptionalAction, default=False,
                   help="end segments at EOT instead of spending the full token budget")
    b.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    b.add_argument("--json", metavar="PATH", help="JSON sidecar with extra fields")
    _add_model_args(b)
    return parser


def _runtime_config(args, **extra) -> RuntimeConfig:
    try:
        return RuntimeConfig(
            tokens_per_frame=args.tokens_per_frame,
            max_tokens=args.max_tokens,
            stop_on_eot=args.stop_on_eot,
            threaded=not args.single_thread,
            **extra,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _load_stream(path):
    if path is None:
        return bundled_stream()
    try:
        return FrameStream.from_json(path)
    except OSError as exc:
        raise CliError(f"cannot read stream {path}: {exc}", EXIT_IO) from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"invalid stream {path}: {exc}") from exc


def cmd_simulate(args) -> int:
    stream = _load_stream(args.stream)
    if args.stream is None:
        stream = stream.resample(args.fps or 2.0, max_frames=args.frames)
    elif args.fps is not None:
        stream = stream.resample(args.fps)
    model = _model(args)
    cfg = _runtime_config(
        args,
        pos_scheme=args.pos_scheme,
        prebuffered=args.arrival == "prebuffered",
        merge_schedule=args.merge_schedule,
    )
    costs = _costs(args)
    result = run(args.paradigm, stream, model, costs, _clock(args), cfg)
    report = reports.run_report(result, stream.fps, model, costs, cfg)
    reports.validate(report, reports.RUN_REPORT_SCHEMA)
    if args.dump_masks:
        _write(args.dump_masks, reports.run_masks(result).to_json() + "\n")
    _write(args.out, _dumps(report))
    return EXIT_OK


def cmd_prepare(args) -> int:
    try:
        rcfg = streamprep.ResampleConfig(args.delta, args.epsilon, args.max_duration, args.mode)
        fcfg = streamprep.FilterConfig(args.tau_q, args.tau_adj, args.tau_consistency)
        embedder = make_embedder(args.embedder, args.vectors, **_hash_kw(args))
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    try:
        videos = streamprep.read_annotations(args.annotations)
    except OSError as exc:
        raise CliError(f"cannot read annotations: {exc}", EXIT_IO) from exc
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    trajectories = streamprep.prepare(videos, embedder, rcfg, fcfg)
    for t in trajectories:
        reports.validate(t.to_dict(), reports.TRAJECTORY_SCHEMA)
    _write(args.out, streamprep.dumps_jsonl(trajectories))
    return EXIT_OK


def _hash_kw(args):
    if args.embedder != "hash":
        return {}
    return {"dimension": args.embed_dim, "seed": _seed(args)}


def _read_jsonl(path):
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    try:
        return [json.loads(line) for line in lines if line.strip()]
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: {exc}") from exc


def cmd_eval(args) -> int:
    try:
        embedder = make_embedder(args.embedder, args.vectors, **_hash_kw(args))
        jcfg = evalkit.JudgeConfig(args.threshold)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    preds = {str(p["id"]): p for p in _read_jsonl(args.pred)}
    results, deltas, sims, verdicts = [], [], [], []
    cases = _read_jsonl(args.cases)
    for c in cases:
        cid = str(c["id"])
        if cid not in preds:
            raise CliError(f"no prediction for case {cid!r}")
        pred = preds[cid]
        case = evalkit.EvalCase(pred["prediction"], c["reference"], c["options"], int(c["correct"]),
                                c.get("category", "all"), cid)
        verdict = evalkit.judge(case, embedder, jcfg)
        verdicts.append({"id": cid, "verdict": verdict.value})
        results.append((case.category, bool(verdict)))
        segs = pred.get("segments") or []
        if segs and c.get("keyframes"):
            deltas.extend(evalkit.temporal_deviation([s["time"] for s in segs], c["keyframes"]).deltas)
        texts = [s["text"] for s in segs if s.get("text")]
        if len(texts) >= 2:
            sims.extend(evalkit.coherence_profile(texts, embedder).tolist())
    try:
        acc = evalkit.accuracy(results)
    except ValueError as exc:
        raise CliError(f"{args.cases}: {exc}") from exc
    absd = [abs(d) for d in deltas]
    report = {
        "provider": embedder.provider_id,
        "threshold": jcfg.tau,
        "n_cases": len(cases),
        "accuracy": acc.to_dict(),
        "verdicts": verdicts,
        "temporal": {
            "mean_abs_dt": sum(absd) / len(absd) if absd else None,
            "within_1s": sum(d <= 1.0 + 1e-12 for d in absd) / len(absd) if absd else None,
        },
        "coherence": evalkit.coherence_histogram(sims),
    }
    reports.validate(report, reports.EVAL_REPORT_SCHEMA)
    _write(args.out, _dumps(report))
    return EXIT_OK


def cmd_bench(args) -> int:
    fps_values = args.fps if isinstance(args.fps, list) else parse_fps(args.fps)
    paradigms = args.paradigms if isinstance(args.paradigms, list) else _paradigm_list(args.paradigms)
    source = _load_stream(args.stream)
    model = _model(args)
    costs = _costs(args)
    cfg = _runtime_config(args)
    rows = []
    for fps in fps_values:
        n = max(1, int(round(args.duration * fps)))
        stream = source.resample(fps, max_frames=n)
        for name in paradigms:
            result = run(name, stream, model, costs, _clock(args), cfg)
            rows.append(reports.bench_row(result, fps))
    doc = {
        "rows": rows,
        "model": reports.model_info(model, cfg),
        "cost_model": {
            "encode_cost_per_frame": costs.encode_cost_per_frame,
            "decode_cost_per_token": costs.decode_cost_per_token,
        },
        "clock": args.clock,
        "max_tokens": cfg.max_tokens,
        "stop_on_eot": cfg.stop_on_eot,
        "duration_s": args.duration,
    }
    reports.validate(doc, reports.BENCH_SCHEMA)
    _write(args.out, reports.bench_csv(rows))
    if args.json:
        _write(args.json, _dumps(doc))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "prepare": cmd_prepare, "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"tays {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"tays {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except reports.jsonschema.ValidationError as exc:
        print(f"tays {args.command}: report failed schema validation: {exc.message}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
