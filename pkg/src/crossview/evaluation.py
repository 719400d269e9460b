"""Panoptic quality evaluation: segment matching and SQ / RQ / PQ reports.

Matching follows the standard panoptic-metric conventions: segments are
maximal same-(category, instance id) pixel sets, a prediction matches a
ground-truth segment of the same category at IoU > 0.5 (computed after
removing ground-truth void pixels from the union), predicted segments mostly
covering void are deleted rather than counted as false positives, and stuff
is one segment per category and image.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .catalog import ClassCatalog
from .errors import ValidationError
from .maps import PanopticMap

MATCH_IOU = 0.5
VOID_DELETE_FRACTION = 0.5


@dataclass(frozen=True)
class Segment:
    category: int
    instance_id: int
    area: int

    @property
    def key(self) -> tuple[int, int]:
        return (self.category, self.instance_id)


@dataclass(frozen=True)
class SegmentMatches:
    """Matched (pred, gt, iou) triples plus the unmatched remainders.

    Matches are sorted by (category, gt instance id, pred instance id) so
    downstream accumulation is order-canonical.
    """

    matches: tuple[tuple[Segment, Segment, float], ...]
    unmatched_pred: tuple[Segment, ...]
    unmatched_gt: tuple[Segment, ...]


def _segments_by_key(keys: np.ndarray) -> dict[int, int]:
    uniq, counts = np.unique(keys, return_counts=True)
    return {int(k): int(n) for k, n in zip(uniq, counts)}


def match_segments(
    pred: PanopticMap, gt: PanopticMap, catalog: ClassCatalog
) -> SegmentMatches:
    """Uniquely match predicted and ground-truth segments at IoU > 0.5."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise ValidationError(
            f"prediction {(pred.height, pred.width)} does not match "
            f"ground truth {(gt.height, gt.width)}"
        )
    void_key = catalog.void_id * 65536
    pred_keys = pred.segment_keys()
    gt_keys = gt.segment_keys()
    pred_areas = _segments_by_key(pred_keys)
    gt_areas = _segments_by_key(gt_keys)
    pred_areas.pop(void_key, None)
    gt_areas.pop(void_key, None)

    combined = gt_keys.ravel().astype(np.uint64) << np.uint64(32)
    combined |= pred_keys.ravel().astype(np.uint64)
    uniq, counts = np.unique(combined, return_counts=True)
    intersections = {int(k): int(n) for k, n in zip(uniq, counts)}

    def void_overlap(pred_key: int) -> int:
        return intersections.get(void_key << 32 | pred_key, 0)

    candidate = []
    for pair_key, inter in intersections.items():
        gt_key = pair_key >> 32
        pred_key = pair_key & 0xFFFFFFFF
        if gt_key == void_key or pred_key == void_key:
            continue
        if gt_key >> 16 != pred_key >> 16:  # category mismatch
            continue
        union = (
            gt_areas[gt_key] + pred_areas[pred_key] - inter - void_overlap(pred_key)
        )
        iou = inter / union
        if iou > MATCH_IOU:
            candidate.append((gt_key, pred_key, iou))

    matched_gt: set[int] = set()
    matched_pred: set[int] = set()
    matches = []
    # IoU > 0.5 makes the match unique; the assertions hold by construction
    for gt_key, pred_key, iou in sorted(candidate, key=lambda c: (c[0], c[1])):
        assert gt_key not in matched_gt, "ground-truth segment matched twice"
        assert pred_key not in matched_pred, "predicted segment matched twice"
        matched_gt.add(gt_key)
        matched_pred.add(pred_key)
        matches.append(
            (
                Segment(pred_key >> 16, pred_key & 0xFFFF, pred_areas[pred_key]),
                Segment(gt_key >> 16, gt_key & 0xFFFF, gt_areas[gt_key]),
                iou,
            )
        )
    matches.sort(key=lambda m: (m[1].category, m[1].instance_id, m[0].instance_id))

    unmatched_gt = tuple(
        Segment(k >> 16, k & 0xFFFF, a)
        for k, a in sorted(gt_areas.items())
        if k not in matched_gt
    )
    unmatched_pred = tuple(
        Segment(k >> 16, k & 0xFFFF, a)
        for k, a in sorted(pred_areas.items())
        if k not in matched_pred
        and void_overlap(k) / a <= VOID_DELETE_FRACTION
    )
    return SegmentMatches(tuple(matches), unmatched_pred, unmatched_gt)


@dataclass
class CategoryStats:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    iou_sum: float = 0.0

    def merge(self, other: "CategoryStats"):
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        self.iou_sum += other.iou_sum

    @property
    def empty(self) -> bool:
        return self.tp == 0 and self.fp == 0 and self.fn == 0


@dataclass(frozen=True)
class CategoryReport:
    sq: float
    rq: float
    pq: float
    tp: int
    fp: int
    fn: int
    iou_sum: float


@dataclass(frozen=True)
class PQReport:
    per_category: dict[int, CategoryReport]
    msq: float
    mrq: float
    mpq: float

    def to_dict(self, catalog: ClassCatalog | None = None) -> dict:
        per_cat = {}
        for c in sorted(self.per_category):
            r = self.per_category[c]
            entry = {
                "sq": r.sq,
                "rq": r.rq,
                "pq": r.pq,
                "tp": r.tp,
                "fp": r.fp,
                "fn": r.fn,
                "iou_sum": r.iou_sum,
            }
            if catalog is not None:
                entry["name"] = catalog.name_of(c)
            per_cat[str(c)] = entry
        return {
            "per_category": per_cat,
            "msq": self.msq,
            "mrq": self.mrq,
            "mpq": self.mpq,
        }


def accumulate_matches(matches: SegmentMatches) -> dict[int, CategoryStats]:
    """Per-category TP/FP/FN and IoU totals for one image pair."""
    stats: dict[int, CategoryStats] = {}

    def stat(cat: int) -> CategoryStats:
        return stats.setdefault(cat, CategoryStats())

    for pred_seg, _gt_seg, iou in matches.matches:
        s = stat(pred_seg.category)
        s.tp += 1
        s.iou_sum += iou
    for seg in matches.unmatched_pred:
        stat(seg.category).fp += 1
    for seg in matches.unmatched_gt:
        stat(seg.category).fn += 1
    return stats


def merge_stats(
    into: dict[int, CategoryStats], update: dict[int, CategoryStats]
) -> dict[int, CategoryStats]:
    for cat in sorted(update):
        into.setdefault(cat, CategoryStats()).merge(update[cat])
    return into


def report_from_stats(stats: dict[int, CategoryStats]) -> PQReport:
    """SQ = iou_sum/TP, RQ = TP/(TP + FP/2 + FN/2), PQ = SQ * RQ; categories
    with no TP, FP or FN are excluded from the means."""
    per_category: dict[int, CategoryReport] = {}
    sqs, rqs, pqs = [], [], []
    for cat in sorted(stats):
        s = stats[cat]
        if s.empty:
            continue
        sq = s.iou_sum / s.tp if s.tp > 0 else 0.0
        denom = s.tp + 0.5 * s.fp + 0.5 * s.fn
        rq = s.tp / denom if denom > 0 else 0.0
        pq = sq * rq
        per_category[cat] = CategoryReport(sq, rq, pq, s.tp, s.fp, s.fn, s.iou_sum)
        sqs.append(sq)
        rqs.append(rq)
        pqs.append(pq)
    if sqs:
        msq = sum(sqs) / len(sqs)
        mrq = sum(rqs) / len(rqs)
        mpq = sum(pqs) / len(pqs)
    else:
        msq = mrq = mpq = 0.0
    return PQReport(per_category, msq, mrq, mpq)


def pq_per_class(matches: SegmentMatches) -> PQReport:
    """Report for a single image pair's match results."""
    return report_from_stats(accumulate_matches(matches))


def evaluate_pair(pred: PanopticMap, gt: PanopticMap, catalog: ClassCatalog) -> PQReport:
    return pq_per_class(match_segments(pred, gt, catalog))


def evaluate_dataset(
    pairs: Iterable[tuple[PanopticMap, PanopticMap]],
    catalog: ClassCatalog,
    stats_list: Sequence[dict[int, CategoryStats]] | None = None,
) -> PQReport:
    """Accumulate TP/FP/FN/IoU over all (pred, gt) pairs before computing the
    per-category and mean qualities. ``stats_list`` allows passing per-image
    statistics already computed (e.g. in parallel); merging is commutative
    addition done in image order."""
    if stats_list is None:
        stats_list = [
            accumulate_matches(match_segments(pred, gt, catalog))
            for pred, gt in pairs
        ]
    if not stats_list:
        raise ValidationError("evaluation needs at least one image pair")
    totals: dict[int, CategoryStats] = {}
    for stats in stats_list:
        merge_stats(totals, stats)
    return report_from_stats(totals)


def mean_pq_over(report: PQReport, categories: Iterable[int]) -> float:
    """Mean PQ over the given categories, counting only those present in the
    report; 0.0 when none are present."""
    vals = [report.per_category[c].pq for c in categories if c in report.per_category]
    return sum(vals) / len(vals) if vals else 0.0


def format_report_table(report: PQReport, catalog: ClassCatalog) -> str:
    """Aligned text table: category, SQ, RQ, PQ, TP, FP, FN plus mean row."""
    headers = ["category", "SQ", "RQ", "PQ", "TP", "FP", "FN"]
    rows = []
    for c in sorted(report.per_category):
        r = report.per_category[c]
        rows.append(
            [
                catalog.name_of(c),
                f"{r.sq:.4f}",
                f"{r.rq:.4f}",
                f"{r.pq:.4f}",
                str(r.tp),
                str(r.fp),
                str(r.fn),
            ]
        )
    rows.append(
        [
            "mean",
            f"{report.msq:.4f}",
            f"{report.mrq:.4f}",
            f"{report.mpq:.4f}",
            "",
            "",
            "",
        ]
    )
    widths = [
        max(len(headers[i]), *(len(row[i]) for row in rows)) for i in range(len(headers))
    ]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(v.ljust(widths[i]) for i, v in enumerate(row)))
    return "\n".join(lines)
