"""Command-line entry point.

Subcommands: ``synth`` (generate a labelled stream), ``track`` (run the
engine over a stream), ``eval`` (score results against the stream's labels),
``stability`` (scalar convergence study), ``bench`` (matching throughput).

Exit codes: 0 success, 2 usage, 3 malformed input/config, 4 runtime failure.
Engine settings resolve as CLI flag > config file > built-in default.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from .engine import EngineConfig, IdentityEngine
from .errors import (ConfigError, DescriptorError, RennTrackError,
                     StreamFormatError)
from .matching import Observation, renn_match
from .memory import MemoryStore
from .metrics import EvalReport, GtEntry, PredEntry, evaluate_frames
from .stability import DEFAULT_OFFSETS, StabilityConfig, stability_sim
from .streams import (SynthConfig, read_header, read_results, read_stream,
                      rotating_schedule, synth_stream, write_results)

_SCHEMA_ERRORS = (StreamFormatError, DescriptorError, ConfigError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except _SCHEMA_ERRORS as exc:
        _emit_error(exc)
        return 3
    except (RennTrackError, OSError) as exc:
        _emit_error(exc)
        return 4


def _emit_error(exc: Exception) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record), file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="renntrack",
        description="Online identity tracking over descriptor streams.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic stream")
    p_synth.add_argument("--output", required=True)
    p_synth.add_argument("--identities", type=int, default=5)
    p_synth.add_argument("--frames", type=int, default=2000)
    p_synth.add_argument("--dim", type=int, default=64)
    p_synth.add_argument("--sigma", type=float, default=0.1)
    p_synth.add_argument("--min-separation", type=float, default=60.0,
                         help="minimum pairwise mean angle, degrees")
    p_synth.add_argument("--miss-rate", type=float, default=0.02)
    p_synth.add_argument("--clutter-rate", type=float, default=0.01)
    p_synth.add_argument("--seed", type=int, default=1)
    p_synth.add_argument("--schedule", choices=["rotating", "none"],
                         default="rotating",
                         help="per-identity exit/re-entry pattern")
    p_synth.set_defaults(handler=cmd_synth)

    p_track = sub.add_parser("track", help="run the engine over a stream")
    p_track.add_argument("--input", required=True)
    p_track.add_argument("--output", required=True,
                         help="results file (line records)")
    p_track.add_argument("--snapshot", default=None,
                         help="final memory snapshot path "
                              "(default: <output>.memory)")
    p_track.add_argument("--config", default=None,
                         help="flat key=value engine config file")
    _add_engine_flags(p_track)
    p_track.set_defaults(handler=cmd_track)

    p_eval = sub.add_parser("eval", help="score results against labels")
    p_eval.add_argument("--input", required=True, help="labelled stream")
    p_eval.add_argument("--results", required=True)
    p_eval.add_argument("--output", required=True, help="text report path")
    p_eval.add_argument("--jsonl-output", default=None,
                        help="line-record report (default: <output>.jsonl)")
    p_eval.add_argument("--gt-mode", choices=["key", "iou"], default="key")
    p_eval.add_argument("--iou-threshold", type=float, default=0.5)
    p_eval.add_argument("--figures", default=None,
                        help="directory for rendered figures")
    p_eval.set_defaults(handler=cmd_eval)

    p_stab = sub.add_parser("stability",
                            help="scalar convergence study")
    p_stab.add_argument("--output", required=True,
                        help="directory for histogram/trace/summary files")
    p_stab.add_argument("--offsets", default=None,
                        help="comma-separated source offsets "
                             f"(default {','.join(str(o) for o in DEFAULT_OFFSETS)})")
    p_stab.add_argument("--iterations", type=int, default=1000)
    p_stab.add_argument("--bin-width", type=float, default=0.5)
    p_stab.add_argument("--rho-bar", type=float, default=0.7)
    p_stab.add_argument("--seed", type=int, default=7)
    p_stab.add_argument("--figures", default=None,
                        help="directory for rendered figures")
    p_stab.set_defaults(handler=cmd_stability)

    p_bench = sub.add_parser("bench", help="matching throughput")
    p_bench.add_argument("--memory-items", type=int, default=50_000)
    p_bench.add_argument("--observations", type=int, default=10)
    p_bench.add_argument("--dim", type=int, default=256)
    p_bench.add_argument("--frames", type=int, default=20,
                         help="frames timed per run")
    p_bench.add_argument("--repeats", type=int, default=5)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.set_defaults(handler=cmd_bench)

    return parser


def _add_engine_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rho-bar", type=float, default=None)
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--e-bar", type=float, default=None)
    parser.add_argument("--capacity", type=int, default=None)
    parser.add_argument("--tau-abs", type=float, default=None)
    parser.add_argument("--confirm-consecutive", type=int, default=None)
    parser.add_argument("--confirm-window", type=int, default=None)
    parser.add_argument("--dim", type=int, default=None,
                        help="expected stream dimension (validated)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--no-normalize", action="store_true",
                        help="skip L2 normalization of descriptors")


_BOOL_VALUES = {"true": True, "1": True, "yes": True,
                "false": False, "0": False, "no": False}


def parse_config_file(path) -> dict:
    """Read a flat ``key = value`` file mirroring the engine config fields."""
    types = {f.name: f.type for f in fields(EngineConfig)}
    casts = {"int": int, "float": float, "bool": None, "str": str}
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            type_name = str(types[key])
            try:
                if "bool" in type_name:
                    out[key] = _BOOL_VALUES[value.lower()]
                elif "int" in type_name:
                    out[key] = int(value)
                else:
                    out[key] = float(value)
            except (KeyError, ValueError):
                raise ConfigError(
                    f"{path}:{lineno}: bad value {value!r} for {key}")
    return out


def resolve_engine_config(args, dimension: int) -> EngineConfig:
    """Merge defaults, config file, and CLI flags (flags win)."""
    settings: dict = {}
    if getattr(args, "config", None):
        settings.update(parse_config_file(args.config))
    flag_map = {
        "rho_bar": args.rho_bar,
        "alpha": args.alpha,
        "e_bar": args.e_bar,
        "capacity": args.capacity,
        "tau_abs": args.tau_abs,
        "confirm_consecutive": args.confirm_consecutive,
        "confirm_window": args.confirm_window,
        "seed": args.seed,
    }
    settings.update({k: v for k, v in flag_map.items() if v is not None})
    if args.no_normalize:
        settings["normalize"] = False
    settings["dimension"] = dimension
    try:
        return EngineConfig(**settings)
    except ValueError as exc:
        raise ConfigError(str(exc))


# -- subcommand handlers -----------------------------------------------------

def cmd_synth(args) -> int:
    presence = {}
    if args.schedule == "rotating":
        presence = rotating_schedule(args.identities, args.frames)
    cfg = SynthConfig(
        n_identities=args.identities, dimension=args.dim, frames=args.frames,
        sigma=args.sigma, min_separation_deg=args.min_separation,
        miss_rate=args.miss_rate, clutter_rate=args.clutter_rate,
        seed=args.seed, presence=presence)
    synth_stream(cfg, args.output)
    print(json.dumps({"stream": str(args.output), "frames": cfg.frames,
                      "identities": cfg.n_identities,
                      "dimension": cfg.dimension}))
    return 0


def cmd_track(args) -> int:
    header = read_header(args.input)
    dimension = header["dimension"]
    if args.dim is not None and args.dim != dimension:
        raise StreamFormatError(
            f"stream dimension {dimension} != requested {args.dim}")
    config = resolve_engine_config(args, dimension)
    engine = IdentityEngine(config)

    def run():
        for frame in read_stream(args.input):
            yield engine.process_frame(frame.observations(), frame.frame)

    write_results(args.output, run(), dimension=dimension)
    snapshot = args.snapshot or f"{args.output}.memory"
    engine.store.save(snapshot)
    print(json.dumps({"results": str(args.output),
                      "snapshot": str(snapshot),
                      "frames": engine.last_frame + 1
                      if engine.last_frame is not None else 0,
                      "memory_size": len(engine.store),
                      "identities_issued": engine.store.next_id}))
    return 0


def _aligned_eval_frames(stream_path, results_path):
    preds, gts = [], []
    results = {res.frame: res for res in read_results(results_path)}
    for frame in read_stream(stream_path):
        res = results.get(frame.frame)
        if res is None:
            raise StreamFormatError(
                f"results file has no record for frame {frame.frame}")
        gts.append([GtEntry(key=d.det, label=d.gt, bbox=d.bbox)
                    for d in frame.detections if d.gt is not None])
        frame_preds = []
        for a in res.assignments:
            if a.identity is None:
                continue
            det = frame.detections[a.obs_index]
            frame_preds.append(PredEntry(key=a.det_key or det.det,
                                         identity=a.identity,
                                         bbox=det.bbox))
        preds.append(frame_preds)
    return preds, gts


def format_report_text(report: EvalReport) -> str:
    counts = report.counts
    motp_text = f"{report.motp:.2f}" if report.motp is not None else "n/a"
    lines = [
        f"frames evaluated   : {report.frames}",
        f"GT / FN / FP / IDS : {counts.total_gt} / {counts.total_fn} / "
        f"{counts.total_fp} / {counts.total_ids}",
        f"MOTA               : {report.mota:.4f}",
        f"MOTP (%)           : {motp_text}",
        f"weighted purity    : {report.purity.weighted_purity:.4f} "
        f"over {report.purity.total} labelled detections",
        "",
        f"{'id':>6} {'size':>6} {'purity':>8}  top label",
    ]
    for c in report.purity.clusters:
        lines.append(f"{c.identity:>6} {c.size:>6} {c.purity:>8.4f}  "
                     f"{c.top_label}")
    return "\n".join(lines) + "\n"


def report_records(report: EvalReport) -> list[dict]:
    records = [report.summary_dict()]
    for c in report.purity.clusters:
        records.append({"type": "cluster", "id": c.identity, "size": c.size,
                        "purity": c.purity, "top_label": c.top_label})
    return records


def cmd_eval(args) -> int:
    preds, gts = _aligned_eval_frames(args.input, args.results)
    report = evaluate_frames(preds, gts, mode=args.gt_mode,
                             iou_threshold=args.iou_threshold)
    text = format_report_text(report)
    Path(args.output).write_text(text, encoding="utf-8")
    jsonl_path = args.jsonl_output or f"{args.output}.jsonl"
    with open(jsonl_path, "w", encoding="utf-8") as fh:
        for record in report_records(report):
            fh.write(json.dumps(record) + "\n")
    if args.figures:
        from .figures import render_eval_figure
        fig_dir = Path(args.figures)
        fig_dir.mkdir(parents=True, exist_ok=True)
        render_eval_figure(report, fig_dir / "eval.png")
    sys.stdout.write(text)
    return 0


def cmd_stability(args) -> int:
    offsets = DEFAULT_OFFSETS
    if args.offsets:
        offsets = tuple(float(v) for v in args.offsets.split(","))
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_path = out_dir / "summary.jsonl"
    with open(summary_path, "w", encoding="utf-8") as summary:
        summary.write(json.dumps({"type": "stability", "version": 1}) + "\n")
        for offset in offsets:
            cfg = StabilityConfig(offset=offset, iterations=args.iterations,
                                  bin_width=args.bin_width,
                                  rho_bar=args.rho_bar, seed=args.seed)
            result = stability_sim(cfg)
            tag = f"{offset:g}".replace(".", "p")
            hist_path = out_dir / f"histogram_offset{tag}.txt"
            with open(hist_path, "w", encoding="utf-8") as fh:
                fh.write("# bin_lo bin_hi count\n")
                for lo, hi, count in zip(result.bin_edges[:-1],
                                         result.bin_edges[1:],
                                         result.hist_counts):
                    fh.write(f"{lo!r} {hi!r} {int(count)}\n")
            trace_path = out_dir / f"traces_offset{tag}.txt"
            with open(trace_path, "w", encoding="utf-8") as fh:
                fh.write("# item_key step eligibility\n")
                for key in sorted(result.eligibility_traces):
                    for step, value in result.eligibility_traces[key]:
                        fh.write(f"{key} {step} {value!r}\n")
            record = {
                "type": "run", "offset": offset,
                "iterations": args.iterations,
                "l1_distinctive": result.l1_distinctive,
                "l1_non_distinctive": result.l1_non_distinctive,
                "l1_uniform_baseline": result.l1_uniform_baseline,
                "cross_assignments": result.cross_assignments,
                "memory_items": int(result.hist_counts.sum()),
                "histogram": str(hist_path), "traces": str(trace_path),
            }
            summary.write(json.dumps(record) + "\n")
            print(json.dumps(record))
            if args.figures:
                from .figures import render_stability_figure
                fig_dir = Path(args.figures)
                fig_dir.mkdir(parents=True, exist_ok=True)
                mu2 = cfg.distinctive_mean + offset * cfg.distinctive_std
                render_stability_figure(
                    result, cfg.distinctive_mean, cfg.distinctive_std,
                    mu2, cfg.non_distinctive_std,
                    fig_dir / f"stability_offset{tag}.png")
    return 0


def build_bench_store(n_items: int, dim: int, seed: int) -> MemoryStore:
    store = MemoryStore(dim, capacity=n_items, normalize=True)
    rng = np.random.default_rng(seed)
    for _ in range(n_items):
        store.insert(rng.standard_normal(dim), store.next_id)
    return store


def bench_matching(memory_items: int, observations: int, dim: int,
                   frames: int = 20, repeats: int = 5, seed: int = 0) -> dict:
    """Median matching throughput over several timed runs."""
    store = build_bench_store(memory_items, dim, seed)
    rng = np.random.default_rng(seed + 1)
    fps_runs = []
    for _ in range(repeats):
        batches = []
        for _ in range(frames):
            batch = rng.standard_normal((observations, dim))
            batch /= np.linalg.norm(batch, axis=1, keepdims=True)
            batches.append([Observation(obs_index=i, descriptor=batch[i])
                            for i in range(observations)])
        start = time.perf_counter()
        for frame in batches:
            renn_match(store, frame, rho_bar=1.6, alpha=0.01, tau_abs=1.0)
        elapsed = time.perf_counter() - start
        fps_runs.append(frames / elapsed)
    return {
        "memory_items": memory_items,
        "observations": observations,
        "dim": dim,
        "frames_per_run": frames,
        "repeats": repeats,
        "fps_median": statistics.median(fps_runs),
        "fps_runs": fps_runs,
    }


def cmd_bench(args) -> int:
    record = bench_matching(args.memory_items, args.observations, args.dim,
                            frames=args.frames, repeats=args.repeats,
                            seed=args.seed)
    print(json.dumps(record))
    return 0


if __name__ == "__main__":
    sys.exit(main())
