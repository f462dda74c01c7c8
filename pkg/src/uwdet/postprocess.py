"""Prediction-box screening and fusion.

Three class-aware stages, each a pure function over detection lists:

* ``diou_nms``: greedy suppression in descending score order using DIoU as
  the overlap criterion, so nearby boxes with distant centers survive.
* ``wbf``: weighted boxes fusion; overlapping same-class boxes cluster
  against the running fused box and each cluster collapses to the
  score-weighted average of its members.
* ``iterative_refine``: alternate fusion and suppression until the set
  stops moving or the iteration cap is reached.

Detections serialize as JSON lines with keys image_id, x_min, y_min, x_max,
y_max, score, class_id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .boxes import diou, iou_matrix

__all__ = [
    "Detection",
    "RefineConfig",
    "diou_nms",
    "wbf",
    "iterative_refine",
    "detections_to_jsonl",
    "jsonl_to_detections",
    "write_detections",
    "read_detections",
]


@dataclass(frozen=True)
class Detection:
    box: np.ndarray
    score: float
    class_id: int = 0

    def __post_init__(self):
        box = np.asarray(self.box, dtype=np.float64).reshape(4)
        if box[2] < box[0] or box[3] < box[1]:
            raise ValueError("invalid box corners")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must lie in [0, 1]")
        if self.class_id < 0:
            raise ValueError("class_id must be nonnegative")
        box.setflags(write=False)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "score", float(self.score))
        object.__setattr__(self, "class_id", int(self.class_id))


@dataclass(frozen=True)
class RefineConfig:
    wbf_iou_thresh: float = 0.55
    nms_diou_thresh: float = 0.45
    score_floor: float = 0.0
    max_iterations: int = 3000
    stability_epsilon: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.wbf_iou_thresh < 1.0:
            raise ValueError("wbf_iou_thresh must lie in (0, 1)")
        if not 0.0 < self.nms_diou_thresh < 1.0:
            raise ValueError("nms_diou_thresh must lie in (0, 1)")
        if not 0.0 <= self.score_floor < 1.0:
            raise ValueError("score_floor must lie in [0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.stability_epsilon <= 0.0:
            raise ValueError("stability_epsilon must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "RefineConfig":
        default = cls()
        return cls(
            wbf_iou_thresh=float(d.get("wbf_iou_thresh", default.wbf_iou_thresh)),
            nms_diou_thresh=float(d.get("nms_diou_thresh", default.nms_diou_thresh)),
            score_floor=float(d.get("score_floor", default.score_floor)),
            max_iterations=int(d.get("max_iterations", default.max_iterations)),
            stability_epsilon=float(d.get("stability_epsilon", default.stability_epsilon)),
        )

    def to_dict(self) -> dict:
        return {
            "wbf_iou_thresh": self.wbf_iou_thresh,
            "nms_diou_thresh": self.nms_diou_thresh,
            "score_floor": self.score_floor,
            "max_iterations": self.max_iterations,
            "stability_epsilon": self.stability_epsilon,
        }


def _score_order(dets):
    # descending score, ties broken by lower original index
    return sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))


def _iou_one_vs_many(box: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    """IoU of one box against (N, 4) boxes; inputs already validated."""
    ix = np.minimum(box[2], boxes[:, 2]) - np.maximum(box[0], boxes[:, 0])
    iy = np.minimum(box[3], boxes[:, 3]) - np.maximum(box[1], boxes[:, 1])
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    area = (box[2] - box[0]) * (box[3] - box[1])
    areas = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
    union = area + areas - inter
    return np.where(union > 0.0, inter / np.where(union > 0.0, union, 1.0), 0.0)


def diou_nms(dets, thresh: float):
    """Greedy DIoU suppression within each class.

    A candidate is removed when its DIoU with an already-kept box of the
    same class exceeds ``thresh``.  Output keeps descending score order.
    """
    if not 0.0 < thresh < 1.0:
        raise ValueError("thresh must lie in (0, 1)")
    if not dets:
        return []
    order = _score_order(dets)
    boxes = np.array([dets[i].box for i in order])
    classes = np.array([dets[i].class_id for i in order])
    n = len(order)
    alive = np.ones(n, dtype=bool)
    kept: list[Detection] = []
    indices = np.arange(n)
    for i in range(n):
        if not alive[i]:
            continue
        kept.append(dets[order[i]])
        rest = alive & (indices > i) & (classes == classes[i])
        if rest.any():
            js = indices[rest]
            overlaps = np.asarray(diou(boxes[i], boxes[js]))
            alive[js[overlaps > thresh]] = False
    return kept


def wbf(det_lists, iou_thresh: float):
    """Weighted boxes fusion over M detection lists.

    Detections are pooled and visited in descending score order.  Each joins
    the same-class cluster whose current fused box overlaps it most, if that
    IoU exceeds ``iou_thresh``; otherwise it seeds a new cluster.  A fused
    box is the score-weighted average of member coordinates; the fused score
    is the mean member score scaled by min(T, M)/M where T is the cluster
    size.  Output is sorted by descending fused score.
    """
    if not 0.0 < iou_thresh < 1.0:
        raise ValueError("iou_thresh must lie in (0, 1)")
    det_lists = list(det_lists)
    m = len(det_lists)
    if m < 1:
        raise ValueError("need at least one detection list")

    pooled = [d for lst in det_lists for d in lst]
    order = _score_order(pooled)
    n = len(pooled)

    # cluster state in preallocated arrays (at most one cluster per detection)
    fused = np.empty((n, 4))
    class_ids = np.empty(n, dtype=np.int64)
    weight_sums = np.zeros(n)
    coord_sums = np.zeros((n, 4))
    score_sums = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    n_clusters = 0

    for i in order:
        d = pooled[i]
        best = -1
        if n_clusters:
            same = class_ids[:n_clusters] == d.class_id
            if same.any():
                overlaps = _iou_one_vs_many(d.box, fused[:n_clusters])
                overlaps = np.where(same, overlaps, -1.0)
                ci = int(np.argmax(overlaps))
                if overlaps[ci] > iou_thresh:
                    best = ci
        if best < 0:
            best = n_clusters
            n_clusters += 1
            fused[best] = d.box
            class_ids[best] = d.class_id
        weight_sums[best] += d.score
        coord_sums[best] += d.score * d.box
        score_sums[best] += d.score
        counts[best] += 1
        if weight_sums[best] > 0.0:
            fused[best] = coord_sums[best] / weight_sums[best]
        else:  # all members scored zero: keep the seed box
            fused[best] = d.box

    # Fused boxes can drift to within the threshold of each other even though
    # their members never did; merge such clusters to a fixpoint so that no
    # same-class output pair overlaps above the threshold.  This is what makes
    # wbf exactly idempotent on its own output.  Each sweep snapshots all
    # above-threshold pairs and applies the disjoint ones in descending
    # overlap; merged boxes move, so sweeps repeat until none fire.
    alive = np.ones(n_clusters, dtype=bool)
    while alive.sum() > 1:
        idxs = np.flatnonzero(alive)
        found = []
        for a_pos, ci in enumerate(idxs):
            rest = idxs[a_pos + 1 :]
            rest = rest[class_ids[rest] == class_ids[ci]]
            if rest.size == 0:
                continue
            overlaps = _iou_one_vs_many(fused[ci], fused[rest])
            hits = overlaps > iou_thresh
            found.extend(
                (float(overlaps[k]), int(ci), int(rest[k])) for k in np.flatnonzero(hits)
            )
        if not found:
            break
        found.sort(key=lambda t: (-t[0], t[1], t[2]))
        touched = set()
        for _, ci, cj in found:
            if ci in touched or cj in touched:
                continue
            weight_sums[ci] += weight_sums[cj]
            coord_sums[ci] += coord_sums[cj]
            score_sums[ci] += score_sums[cj]
            counts[ci] += counts[cj]
            if weight_sums[ci] > 0.0:
                fused[ci] = coord_sums[ci] / weight_sums[ci]
            alive[cj] = False
            touched.update((ci, cj))

    out = []
    for ci in np.flatnonzero(alive[:n_clusters]) if n_clusters else []:
        t = int(counts[ci])
        score = (score_sums[ci] / t) * (min(t, m) / m)
        out.append(Detection(box=fused[ci].copy(), score=float(score), class_id=int(class_ids[ci])))
    return sorted(out, key=lambda d: -d.score)


def _greedy_pairs(a, b):
    """Greedy max-IoU pairing between two same-length detection lists."""
    if not a or not b:
        return []
    boxes_a = np.array([d.box for d in a])
    boxes_b = np.array([d.box for d in b])
    cls_a = np.array([d.class_id for d in a])
    cls_b = np.array([d.class_id for d in b])
    overlap = iou_matrix(boxes_a, boxes_b)
    overlap[cls_a[:, None] != cls_b[None, :]] = -np.inf
    flat = np.argsort(-overlap, axis=None, kind="stable")  # tie order: (i, j)
    used_a, used_b, pairs = set(), set(), []
    limit = min(len(a), len(b))
    for f in flat:
        if len(pairs) == limit:
            break
        i, j = divmod(int(f), len(b))
        if not np.isfinite(overlap[i, j]) or i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((i, j))
    return pairs


def _stable(prev, cur, eps: float) -> bool:
    if len(prev) != len(cur):
        return False
    pairs = _greedy_pairs(prev, cur)
    if len(pairs) != len(prev):
        return False
    for i, j in pairs:
        if np.max(np.abs(prev[i].box - cur[j].box)) >= eps:
            return False
        if abs(prev[i].score - cur[j].score) >= eps:
            return False
    return True


def iterative_refine(dets, cfg: RefineConfig):
    """Alternate WBF and DIoU-NMS until the detection set is stable.

    One iteration is fuse, suppress, then drop scores below the floor.
    Stability means equal cardinality with matched boxes drifting less than
    ``stability_epsilon`` in every coordinate and in score.  Returns the
    final list and the number of iterations used (always <= the cap).
    """
    cur = list(dets)
    iterations = 0
    for _ in range(cfg.max_iterations):
        iterations += 1
        nxt = wbf([cur], cfg.wbf_iou_thresh)
        nxt = diou_nms(nxt, cfg.nms_diou_thresh)
        nxt = [d for d in nxt if d.score >= cfg.score_floor]
        if _stable(cur, nxt, cfg.stability_epsilon):
            return nxt, iterations
        cur = nxt
    return cur, iterations


# ---------------------------------------------------------------------------
# JSON-lines serialization
# ---------------------------------------------------------------------------

def detections_to_jsonl(per_image: dict) -> str:
    """Serialize {image_id: [Detection, ...]} as canonical JSON lines."""
    lines = []
    for image_id in per_image:
        for d in per_image[image_id]:
            obj = {
                "image_id": image_id,
                "x_min": float(d.box[0]),
                "y_min": float(d.box[1]),
                "x_max": float(d.box[2]),
                "y_max": float(d.box[3]),
                "score": d.score,
                "class_id": d.class_id,
            }
            lines.append(json.dumps(obj, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def jsonl_to_detections(text: str) -> dict:
    """Parse JSON lines into {image_id: [Detection, ...]}, preserving order."""
    out: dict = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            obj = json.loads(raw)
            det = Detection(
                box=(obj["x_min"], obj["y_min"], obj["x_max"], obj["y_max"]),
                score=float(obj["score"]),
                class_id=int(obj.get("class_id", 0)),
            )
            image_id = obj["image_id"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"bad detection record on line {ln}: {exc}") from exc
        out.setdefault(image_id, []).append(det)
    return out


def write_detections(path, per_image: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(detections_to_jsonl(per_image))


def read_detections(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return jsonl_to_detections(fh.read())
