"""Stream file formats and the synthetic benchmark generator.

All files are UTF-8 line-delimited JSON with a header object on the first
line. Descriptor components are serialized through Python's float repr, so
every value round-trips bit-exactly.

Input stream format (header ``{"dimension": d, "version": 1}``)::

    {"frame": 0, "detections": [{"det": "0:0", "bbox": [x, y, w, h],
                                 "desc": [...d floats...], "gt": "id00"}]}

Results files mirror the engine's per-frame ledger one record per line.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field

import numpy as np

from .engine import Assignment, FrameResult
from .errors import ConfigError, StreamFormatError
from .matching import Observation

STREAM_VERSION = 1


@dataclass
class Detection:
    det: str
    desc: np.ndarray
    bbox: tuple[float, float, float, float] | None = None
    gt: str | None = None

    def __eq__(self, other):
        if not isinstance(other, Detection):
            return NotImplemented
        return (self.det == other.det and self.bbox == other.bbox
                and self.gt == other.gt
                and np.array_equal(self.desc, other.desc))


@dataclass
class FrameRecord:
    frame: int
    detections: list[Detection]

    def observations(self) -> list[Observation]:
        return [
            Observation(obs_index=i, descriptor=d.desc, bbox=d.bbox,
                        gt_label=d.gt, det_key=d.det)
            for i, d in enumerate(self.detections)
        ]


# -- input streams -----------------------------------------------------------

def read_header(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if not first:
        raise StreamFormatError("empty file, expected a header record", line=1)
    header = _parse_json(first, 1)
    if "dimension" not in header or "version" not in header:
        raise StreamFormatError("header must carry dimension and version",
                                line=1)
    return header


def read_stream(path) -> Iterator[FrameRecord]:
    """Yield frames lazily, validating order and descriptor dimensions."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise StreamFormatError("empty file, expected a header record",
                                    line=1)
        header = _parse_json(first, 1)
        dim = header.get("dimension")
        if not isinstance(dim, int) or dim < 1:
            raise StreamFormatError("header dimension must be a positive "
                                    "integer", line=1)
        previous = None
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            rec = _parse_json(line, lineno)
            frame = _frame_record(rec, dim, lineno)
            if previous is not None and frame.frame <= previous:
                raise StreamFormatError(
                    f"frame {frame.frame} out of order after {previous}",
                    line=lineno)
            previous = frame.frame
            yield frame


def _parse_json(line: str, lineno: int) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise StreamFormatError(f"invalid JSON: {exc.msg}", line=lineno)
    if not isinstance(rec, dict):
        raise StreamFormatError("record must be a JSON object", line=lineno)
    return rec


def _frame_record(rec: dict, dim: int, lineno: int) -> FrameRecord:
    if "frame" not in rec or "detections" not in rec:
        raise StreamFormatError("record must carry frame and detections",
                                line=lineno)
    detections = []
    for d in rec["detections"]:
        desc = d.get("desc")
        if desc is None or len(desc) != dim:
            raise StreamFormatError(
                f"descriptor length {0 if desc is None else len(desc)} "
                f"!= header dimension {dim}", line=lineno)
        bbox = d.get("bbox")
        if bbox is not None:
            bbox = tuple(float(v) for v in bbox)
            if len(bbox) != 4:
                raise StreamFormatError("bbox must be [x, y, w, h]",
                                        line=lineno)
            if bbox[2] <= 0 or bbox[3] <= 0:
                raise StreamFormatError("bbox must have positive size",
                                        line=lineno)
        detections.append(Detection(
            det=str(d["det"]),
            desc=np.array(desc, dtype=np.float64),
            bbox=bbox,
            gt=d.get("gt"),
        ))
    return FrameRecord(frame=int(rec["frame"]), detections=detections)


def write_stream(path, dimension: int, frames: Iterable[FrameRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"dimension": dimension,
                             "version": STREAM_VERSION}) + "\n")
        for frame in frames:
            fh.write(_frame_line(frame) + "\n")


def _frame_line(frame: FrameRecord) -> str:
    dets = []
    for d in frame.detections:
        dets.append({
            "det": d.det,
            "bbox": list(d.bbox) if d.bbox is not None else None,
            "desc": [float(v) for v in d.desc],
            "gt": d.gt,
        })
    return json.dumps({"frame": frame.frame, "detections": dets})


# -- results files -----------------------------------------------------------

def write_results(path, results: Iterable[FrameResult],
                  dimension: int | None = None) -> None:
    """Write one line-record per frame; reread with :func:`read_results`."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"type": "results", "version": STREAM_VERSION}
        if dimension is not None:
            header["dimension"] = dimension
        fh.write(json.dumps(header) + "\n")
        for res in results:
            fh.write(json.dumps(_result_dict(res)) + "\n")


def _result_dict(res: FrameResult) -> dict:
    return {
        "frame": res.frame,
        "assignments": [
            {"obs": a.obs_index, "det": a.det_key, "id": a.identity,
             "status": a.status, "support": a.support, "mean_d1": a.mean_d1,
             "fallback": a.fallback}
            for a in res.assignments
        ],
        "new_ids": list(res.new_ids),
        "confirmed_ids": list(res.confirmed_ids),
        "discarded_ids": list(res.discarded_ids),
        "decays": [[k, e] for k, e in res.decays],
        "removed_keys": list(res.removed_keys),
        "rolled_back_keys": list(res.rolled_back_keys),
        "evicted_keys": list(res.evicted_keys),
        "memory_size": res.memory_size,
    }


def read_results(path) -> Iterator[FrameResult]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise StreamFormatError("empty file, expected a header record",
                                    line=1)
        header = _parse_json(first, 1)
        if header.get("type") != "results":
            raise StreamFormatError("not a results file", line=1)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            rec = _parse_json(line, lineno)
            try:
                yield _result_from_dict(rec)
            except (KeyError, TypeError) as exc:
                raise StreamFormatError(f"malformed result record: {exc}",
                                        line=lineno)


def _result_from_dict(rec: dict) -> FrameResult:
    assignments = tuple(
        Assignment(obs_index=a["obs"], det_key=a["det"], identity=a["id"],
                   status=a["status"], support=a["support"],
                   mean_d1=a["mean_d1"], fallback=a["fallback"])
        for a in rec["assignments"])
    return FrameResult(
        frame=rec["frame"],
        assignments=assignments,
        new_ids=tuple(rec["new_ids"]),
        confirmed_ids=tuple(rec["confirmed_ids"]),
        discarded_ids=tuple(rec["discarded_ids"]),
        decays=tuple((k, e) for k, e in rec["decays"]),
        removed_keys=tuple(rec["removed_keys"]),
        rolled_back_keys=tuple(rec["rolled_back_keys"]),
        evicted_keys=tuple(rec["evicted_keys"]),
        memory_size=rec["memory_size"],
    )


# -- synthetic streams -------------------------------------------------------

@dataclass
class SynthConfig:
    """Generator settings for a desk-scale labelled descriptor stream.

    Each identity is a fixed unit mean direction; its detections are the
    mean plus an isotropic Gaussian perturbation of total scale ``sigma``
    (so ``sigma`` is roughly the angular jitter in radians), re-normalized.
    ``presence`` maps identity -> list of half-open [enter, exit) frame
    intervals; identities without an entry are present in every frame.
    """

    n_identities: int = 5
    dimension: int = 64
    frames: int = 2000
    sigma: float = 0.1
    min_separation_deg: float = 60.0
    miss_rate: float = 0.02
    clutter_rate: float = 0.01
    seed: int = 1
    presence: dict[int, list[tuple[int, int]]] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_identities < 1 or self.dimension < 1 or self.frames < 1:
            raise ConfigError("n_identities, dimension, frames must be >= 1")
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if not 0 <= self.miss_rate < 1 or not 0 <= self.clutter_rate < 1:
            raise ConfigError("noise rates must lie in [0, 1)")


def rotating_schedule(n_identities: int, frames: int, warmup: int = 300,
                      absence: int = 150, spacing: int = 120
                      ) -> dict[int, list[tuple[int, int]]]:
    """Presence schedule where each identity takes one staggered leave."""
    schedule = {}
    for ident in range(n_identities):
        start = warmup + ident * (absence + spacing)
        stop = min(start + absence, frames)
        if start >= frames:
            schedule[ident] = [(0, frames)]
            continue
        schedule[ident] = [(0, start), (stop, frames)]
    return schedule


def separated_means(n: int, dimension: int, min_separation_deg: float,
                    rng: np.random.Generator, max_tries: int = 20_000
                    ) -> np.ndarray:
    """Sample n unit vectors with pairwise angles >= the requested minimum."""
    min_cos = math.cos(math.radians(min_separation_deg))
    means: list[np.ndarray] = []
    tries = 0
    while len(means) < n:
        if tries >= max_tries:
            raise ConfigError(
                f"cannot place {n} means {min_separation_deg} degrees apart "
                f"in dimension {dimension}")
        tries += 1
        v = rng.standard_normal(dimension)
        v /= np.linalg.norm(v)
        if all(float(np.dot(v, m)) <= min_cos for m in means):
            means.append(v)
    return np.stack(means)


def _present(cfg: SynthConfig, ident: int, frame: int) -> bool:
    intervals = cfg.presence.get(ident)
    if not intervals:
        return True
    return any(start <= frame < stop for start, stop in intervals)


def synth_frames(cfg: SynthConfig) -> Iterator[FrameRecord]:
    """Generate labelled frames deterministically from the config seed."""
    rng = np.random.default_rng(cfg.seed)
    means = separated_means(cfg.n_identities, cfg.dimension,
                            cfg.min_separation_deg, rng)
    scale = cfg.sigma / math.sqrt(cfg.dimension)
    for frame in range(cfg.frames):
        detections = []
        for ident in range(cfg.n_identities):
            if not _present(cfg, ident, frame):
                continue
            if cfg.miss_rate > 0 and rng.random() < cfg.miss_rate:
                continue
            if cfg.sigma == 0:
                desc = means[ident].copy()
            else:
                desc = means[ident] + scale * rng.standard_normal(cfg.dimension)
                desc /= np.linalg.norm(desc)
            bbox = (40.0 + 130.0 * ident + float(rng.uniform(-3, 3)),
                    60.0 + float(rng.uniform(-3, 3)), 64.0, 64.0)
            detections.append(Detection(
                det=f"{frame}:{len(detections)}", desc=desc, bbox=bbox,
                gt=f"id{ident:02d}"))
        if cfg.clutter_rate > 0 and rng.random() < cfg.clutter_rate:
            junk = rng.standard_normal(cfg.dimension)
            junk /= np.linalg.norm(junk)
            bbox = (float(rng.uniform(0, 600)), float(rng.uniform(0, 400)),
                    48.0, 48.0)
            detections.append(Detection(
                det=f"{frame}:{len(detections)}", desc=junk, bbox=bbox,
                gt=None))
        yield FrameRecord(frame=frame, detections=detections)


def synth_stream(cfg: SynthConfig, path) -> None:
    """Write the generated stream to *path*; identical seeds give identical
    bytes."""
    write_stream(path, cfg.dimension, synth_frames(cfg))
