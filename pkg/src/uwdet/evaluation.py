"""COCO-style detection metrics: AP over IoU 0.50:0.95, AP50, AP75, and
average recall overall plus small/medium/large area buckets.

Matching is class-blind (the target datasets are single-category; multi-
class inputs are pooled) and greedy: predictions claim ground truth in
descending score order, each taking the highest-IoU unmatched box at or
above the threshold.  AP uses 101-point interpolated precision.  Buckets
with no ground truth report the sentinel -1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boxes import iou_matrix
from .ingest import InputError, load_annotations
from .postprocess import read_detections

__all__ = [
    "EvalReport",
    "IOU_THRESHOLDS",
    "AREA_RANGES",
    "match",
    "average_precision",
    "average_recall",
    "interpolated_pr_curve",
    "evaluate_detections",
    "full_report",
]

IOU_THRESHOLDS = tuple(0.5 + 0.05 * i for i in range(10))

SMALL_MAX = 32.0**2
MEDIUM_MAX = 96.0**2
AREA_RANGES = {
    "all": (0.0, float("inf")),
    "small": (0.0, SMALL_MAX),
    "medium": (SMALL_MAX, MEDIUM_MAX),
    "large": (MEDIUM_MAX, float("inf")),
}

EMPTY_BUCKET = -1.0


@dataclass(frozen=True)
class EvalReport:
    ap: float
    ap50: float
    ap75: float
    ar: float
    ar_small: float
    ar_medium: float
    ar_large: float
    per_threshold_ap: tuple

    def to_dict(self) -> dict:
        return {
            "ap": self.ap,
            "ap50": self.ap50,
            "ap75": self.ap75,
            "ar": self.ar,
            "ar_small": self.ar_small,
            "ar_medium": self.ar_medium,
            "ar_large": self.ar_large,
            "per_threshold_ap": list(self.per_threshold_ap),
        }


def match(pred_boxes, pred_scores, gt_boxes, iou_thresh: float):
    """Greedy per-image matching.

    Returns ``(tp, matched_gt, gt_matched)``: a TP flag and claimed gt index
    (-1 for FP) per prediction in input order, plus per-gt matched flags.
    Predictions are visited in descending score order (stable on ties); gt
    ties resolve to the lowest index.
    """
    pred_boxes = np.asarray(pred_boxes, dtype=np.float64).reshape(-1, 4)
    gt_boxes = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 4)
    scores = np.asarray(pred_scores, dtype=np.float64).reshape(-1)
    if scores.shape[0] != pred_boxes.shape[0]:
        raise ValueError("one score per prediction box required")

    n_pred, n_gt = pred_boxes.shape[0], gt_boxes.shape[0]
    tp = np.zeros(n_pred, dtype=bool)
    matched_gt = np.full(n_pred, -1, dtype=np.int64)
    gt_matched = np.zeros(n_gt, dtype=bool)
    if n_pred == 0 or n_gt == 0:
        return tp, matched_gt, gt_matched

    ious = iou_matrix(pred_boxes, gt_boxes)
    order = sorted(range(n_pred), key=lambda i: (-scores[i], i))
    for i in order:
        free = ~gt_matched
        if not free.any():
            break
        row = np.where(free, ious[i], -1.0)
        g = int(np.argmax(row))
        if row[g] >= iou_thresh:
            tp[i] = True
            matched_gt[i] = g
            gt_matched[g] = True
    return tp, matched_gt, gt_matched


def average_precision(tp_flags, scores, total_gt: int) -> float:
    """101-point interpolated AP from pooled per-prediction flags.

    Conventions: with no ground truth, AP is 0 if any predictions exist and
    1 if none do (nothing to find, nothing claimed).
    """
    tp_flags = np.asarray(tp_flags, dtype=bool).reshape(-1)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if total_gt < 0:
        raise ValueError("total_gt must be nonnegative")
    if total_gt == 0:
        return 0.0 if tp_flags.size else 1.0
    if tp_flags.size == 0:
        return 0.0

    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    flags = tp_flags[order]
    cum_tp = np.cumsum(flags).astype(np.int64)
    positions = np.arange(1, len(flags) + 1)
    precision = cum_tp / positions

    # make precision monotone non-increasing from the right
    precision = np.maximum.accumulate(precision[::-1])[::-1]

    # sample at recall points k/100: recall >= k/100 iff 100*cum_tp >= k*total_gt,
    # compared in exact integer arithmetic to avoid float boundary flips
    targets = np.arange(101, dtype=np.int64) * int(total_gt)
    idx = np.searchsorted(100 * cum_tp, targets, side="left")
    ap = np.where(idx < len(precision), precision[np.minimum(idx, len(precision) - 1)], 0.0)
    return float(ap.mean())


def interpolated_pr_curve(preds_by_image, gts_by_image, thresh=0.5, max_dets=100):
    """(recall, precision) sampled at the 101 canonical recall points."""
    flags, scores = [], []
    total_gt = 0
    for image_id, entry in gts_by_image.items():
        gt_boxes = _gt_boxes_of(entry)
        total_gt += gt_boxes.shape[0]
        dets = _top_dets(preds_by_image.get(image_id, []), max_dets)
        if not dets:
            continue
        boxes = np.array([d.box for d in dets])
        det_scores = np.array([d.score for d in dets])
        tp, _, _ = match(boxes, det_scores, gt_boxes, thresh)
        flags.extend(tp.tolist())
        scores.extend(det_scores.tolist())

    recall_points = np.linspace(0.0, 1.0, 101)
    if total_gt == 0 or not flags:
        return recall_points, np.zeros(101)
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    sorted_flags = np.array(flags, dtype=bool)[order]
    cum_tp = np.cumsum(sorted_flags).astype(np.int64)
    precision = cum_tp / np.arange(1, len(sorted_flags) + 1)
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    targets = np.arange(101, dtype=np.int64) * int(total_gt)
    idx = np.searchsorted(100 * cum_tp, targets, side="left")
    interp = np.where(idx < len(precision), precision[np.minimum(idx, len(precision) - 1)], 0.0)
    return recall_points, interp


def _gt_boxes_of(entry) -> np.ndarray:
    boxes = entry[0] if isinstance(entry, tuple) else entry
    return np.asarray(boxes, dtype=np.float64).reshape(-1, 4)


def _top_dets(dets, max_dets: int):
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    return [dets[i] for i in order[:max_dets]]


def average_recall(preds_by_image, gts_by_image, area_range=(0.0, float("inf")), max_dets=100) -> float:
    """Dataset recall of in-range gts, averaged over the ten IoU thresholds.

    Ground truth outside ``[lo, hi)`` is excluded from matching entirely.
    Returns the -1 sentinel when the range holds no ground truth at all.
    """
    lo, hi = area_range
    filtered: dict = {}
    total_gt = 0
    for image_id, entry in gts_by_image.items():
        boxes = _gt_boxes_of(entry)
        if boxes.shape[0]:
            areas = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
            boxes = boxes[(areas >= lo) & (areas < hi)]
        filtered[image_id] = boxes
        total_gt += boxes.shape[0]
    if total_gt == 0:
        return EMPTY_BUCKET

    recalls = []
    for thresh in IOU_THRESHOLDS:
        matched = 0
        for image_id, gt_boxes in filtered.items():
            if gt_boxes.shape[0] == 0:
                continue
            dets = _top_dets(preds_by_image.get(image_id, []), max_dets)
            if dets:
                boxes = np.array([d.box for d in dets])
                scores = np.array([d.score for d in dets])
                _, _, gt_matched = match(boxes, scores, gt_boxes, thresh)
                matched += int(gt_matched.sum())
        recalls.append(matched / total_gt)
    return float(np.mean(recalls))


def _ap_at_threshold(preds_by_image, gts_by_image, thresh: float, max_dets: int) -> float:
    flags, scores = [], []
    total_gt = 0
    for image_id, entry in gts_by_image.items():
        gt_boxes = _gt_boxes_of(entry)
        total_gt += gt_boxes.shape[0]
        dets = _top_dets(preds_by_image.get(image_id, []), max_dets)
        if not dets:
            continue
        boxes = np.array([d.box for d in dets])
        det_scores = np.array([d.score for d in dets])
        tp, _, _ = match(boxes, det_scores, gt_boxes, thresh)
        flags.extend(tp.tolist())
        scores.extend(det_scores.tolist())
    return average_precision(np.array(flags, dtype=bool), np.array(scores), total_gt)


def evaluate_detections(preds_by_image, gts_by_image, max_dets=100) -> EvalReport:
    """Compute the seven-column report from in-memory structures."""
    unknown = set(preds_by_image) - set(gts_by_image)
    if unknown:
        raise InputError(f"predictions reference unknown image ids: {sorted(unknown)[:5]}")
    per_threshold = tuple(
        _ap_at_threshold(preds_by_image, gts_by_image, t, max_dets) for t in IOU_THRESHOLDS
    )
    return EvalReport(
        ap=float(np.mean(per_threshold)),
        ap50=per_threshold[0],
        ap75=per_threshold[5],
        ar=average_recall(preds_by_image, gts_by_image, AREA_RANGES["all"], max_dets),
        ar_small=average_recall(preds_by_image, gts_by_image, AREA_RANGES["small"], max_dets),
        ar_medium=average_recall(preds_by_image, gts_by_image, AREA_RANGES["medium"], max_dets),
        ar_large=average_recall(preds_by_image, gts_by_image, AREA_RANGES["large"], max_dets),
        per_threshold_ap=per_threshold,
    )


def full_report(pred_file, gt_file, gt_format="auto", max_dets=100) -> EvalReport:
    """Evaluate a JSON-lines prediction file against an annotation file."""
    gts = load_annotations(gt_file, fmt=gt_format)
    try:
        preds = read_detections(pred_file)
    except ValueError as exc:
        raise InputError(f"{pred_file}: {exc}") from exc
    return evaluate_detections(preds, gts, max_dets=max_dets)
