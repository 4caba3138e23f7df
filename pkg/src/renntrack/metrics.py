"""Tracking evaluation: accuracy, localization, switches, cluster purity.

The evaluation consumes one prediction set and one ground-truth set per
frame. Because results are always produced before the engine trains on the
same frame, folding these per-frame counts yields a prequential
(test-then-train) measurement by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import MetricUndefinedError

Box = tuple[float, float, float, float]  # (x, y, w, h)


@dataclass(frozen=True)
class PredEntry:
    """One predicted detection: shared key, assigned identity, optional box."""

    key: str
    identity: int
    bbox: Box | None = None


@dataclass(frozen=True)
class GtEntry:
    """One ground-truth detection: shared key, true label, optional box."""

    key: str
    label: str
    bbox: Box | None = None


@dataclass(frozen=True)
class MatchedPair:
    identity: int
    label: str
    iou: float | None


@dataclass
class EvalCounts:
    """Per-frame tallies plus running sums."""

    gt: list[int] = field(default_factory=list)
    fn: list[int] = field(default_factory=list)
    fp: list[int] = field(default_factory=list)
    ids: list[int] = field(default_factory=list)

    def add_frame(self, gt: int, fn: int, fp: int, ids: int) -> None:
        for name, value in (("gt", gt), ("fn", fn), ("fp", fp), ("ids", ids)):
            if value < 0:
                raise ValueError(f"{name} count must be >= 0, got {value}")
        self.gt.append(gt)
        self.fn.append(fn)
        self.fp.append(fp)
        self.ids.append(ids)

    @property
    def total_gt(self) -> int:
        return sum(self.gt)

    @property
    def total_fn(self) -> int:
        return sum(self.fn)

    @property
    def total_fp(self) -> int:
        return sum(self.fp)

    @property
    def total_ids(self) -> int:
        return sum(self.ids)


@dataclass(frozen=True)
class ClusterStat:
    identity: int
    size: int
    purity: float
    top_label: str


@dataclass(frozen=True)
class PurityReport:
    clusters: tuple[ClusterStat, ...]
    total: int
    weighted_purity: float


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two (x, y, w, h) boxes."""
    ax1, ay1, aw, ah = a
    bx1, by1, bw, bh = b
    ix = max(0.0, min(ax1 + aw, bx1 + bw) - max(ax1, bx1))
    iy = max(0.0, min(ay1 + ah, by1 + bh) - max(ay1, by1))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def correspond(predictions: list[PredEntry], gts: list[GtEntry],
               mode: str = "key", iou_threshold: float = 0.5
               ) -> tuple[list[MatchedPair], int, int]:
    """Match one frame's predictions against its ground truth.

    ``key`` mode joins on the shared detection key (the native case when
    predictions were made on the very detections that carry labels).
    ``iou`` mode greedily pairs boxes by decreasing overlap, accepting pairs
    at or above *iou_threshold*. Returns ``(matched pairs, fn, fp)``.
    """
    if mode == "key":
        gt_by_key = {g.key: g for g in gts}
        if len(gt_by_key) != len(gts):
            raise MetricUndefinedError("duplicate ground-truth detection keys")
        pairs = []
        matched_keys = set()
        for p in predictions:
            g = gt_by_key.get(p.key)
            if g is None:
                continue
            matched_keys.add(p.key)
            pair_iou = iou(p.bbox, g.bbox) if p.bbox and g.bbox else None
            pairs.append(MatchedPair(p.identity, g.label, pair_iou))
        fn = len(gts) - len(matched_keys)
        fp = len(predictions) - len(matched_keys)
        return pairs, fn, fp
    if mode == "iou":
        if any(p.bbox is None for p in predictions) or any(
                g.bbox is None for g in gts):
            raise MetricUndefinedError(
                "iou correspondence requires bounding boxes on both sides")
        scored = []
        for i, p in enumerate(predictions):
            for j, g in enumerate(gts):
                overlap = iou(p.bbox, g.bbox)
                if overlap >= iou_threshold:
                    scored.append((-overlap, i, j))
        scored.sort()
        used_p: set[int] = set()
        used_g: set[int] = set()
        pairs = []
        for neg_overlap, i, j in scored:
            if i in used_p or j in used_g:
                continue
            used_p.add(i)
            used_g.add(j)
            pairs.append(MatchedPair(predictions[i].identity, gts[j].label,
                                     -neg_overlap))
        return pairs, len(gts) - len(used_g), len(predictions) - len(used_p)
    raise ValueError(f"unknown correspondence mode {mode!r}")


def mota(counts: EvalCounts) -> float:
    """1 - (FN + FP + IDS) / GT over the whole stream."""
    total_gt = counts.total_gt
    if total_gt == 0:
        raise MetricUndefinedError("MOTA is undefined with zero ground truth")
    errors = counts.total_fn + counts.total_fp + counts.total_ids
    return 1.0 - errors / total_gt


def motp(pairs: list[MatchedPair]) -> float:
    """Mean IoU of matched pairs, in percent."""
    overlaps = [p.iou for p in pairs if p.iou is not None]
    if not overlaps:
        raise MetricUndefinedError("MOTP needs at least one boxed match")
    return 100.0 * math.fsum(overlaps) / len(overlaps)


class SwitchCounter:
    """Counts changes in the ground-truth label matched by each identity."""

    def __init__(self):
        self._last_label: dict[int, str] = {}

    def update(self, pairs: list[MatchedPair]) -> int:
        switches = 0
        for p in pairs:
            previous = self._last_label.get(p.identity)
            if previous is not None and previous != p.label:
                switches += 1
            self._last_label[p.identity] = p.label
        return switches


def id_switches(frames: list[list[MatchedPair]]) -> list[int]:
    """Per-frame identity-switch counts over a sequence of matched pairs."""
    counter = SwitchCounter()
    return [counter.update(pairs) for pairs in frames]


def weighted_purity(pairs: list[tuple[int, str]]) -> PurityReport:
    """Size-weighted purity of the identity clusters over a whole run.

    Clusters are the predicted identities; each cluster's purity is the
    share of its most frequent ground-truth label. Only labelled detections
    count.
    """
    labels_by_ident: dict[int, dict[str, int]] = {}
    for ident, label in pairs:
        hist = labels_by_ident.setdefault(ident, {})
        hist[label] = hist.get(label, 0) + 1
    total = sum(sum(h.values()) for h in labels_by_ident.values())
    clusters = []
    weighted = 0.0
    for ident in sorted(labels_by_ident):
        hist = labels_by_ident[ident]
        size = sum(hist.values())
        top_label = min(hist, key=lambda lbl: (-hist[lbl], lbl))
        purity = hist[top_label] / size
        weighted += size * purity
        clusters.append(ClusterStat(ident, size, purity, top_label))
    w = weighted / total if total else 0.0
    return PurityReport(tuple(clusters), total, w)


@dataclass
class EvalReport:
    """Aggregate of one evaluation run, plus per-frame cumulative MOTA."""

    frames: int
    counts: EvalCounts
    mota: float
    motp: float | None
    purity: PurityReport
    mota_curve: list[float]

    def summary_dict(self) -> dict:
        return {
            "type": "summary",
            "frames": self.frames,
            "gt": self.counts.total_gt,
            "fn": self.counts.total_fn,
            "fp": self.counts.total_fp,
            "ids": self.counts.total_ids,
            "mota": self.mota,
            "motp": self.motp,
            "weighted_purity": self.purity.weighted_purity,
            "clusters": len(self.purity.clusters),
        }


def evaluate_frames(prediction_frames: list[list[PredEntry]],
                    gt_frames: list[list[GtEntry]],
                    mode: str = "key",
                    iou_threshold: float = 0.5) -> EvalReport:
    """Fold an aligned sequence of prediction/ground-truth frames."""
    if len(prediction_frames) != len(gt_frames):
        raise MetricUndefinedError(
            f"{len(prediction_frames)} prediction frames vs "
            f"{len(gt_frames)} ground-truth frames")
    counts = EvalCounts()
    counter = SwitchCounter()
    all_pairs: list[MatchedPair] = []
    purity_pairs: list[tuple[int, str]] = []
    mota_curve: list[float] = []
    errors = 0
    seen_gt = 0
    for preds, gts in zip(prediction_frames, gt_frames):
        pairs, fn, fp = correspond(preds, gts, mode=mode,
                                   iou_threshold=iou_threshold)
        switches = counter.update(pairs)
        counts.add_frame(len(gts), fn, fp, switches)
        all_pairs.extend(pairs)
        purity_pairs.extend((p.identity, p.label) for p in pairs)
        errors += fn + fp + switches
        seen_gt += len(gts)
        mota_curve.append(1.0 - errors / seen_gt if seen_gt else float("nan"))
    overlaps = [p.iou for p in all_pairs if p.iou is not None]
    return EvalReport(
        frames=len(gt_frames),
        counts=counts,
        mota=mota(counts),
        motp=motp(all_pairs) if overlaps else None,
        purity=weighted_purity(purity_pairs),
        mota_curve=mota_curve,
    )
