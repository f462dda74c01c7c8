"""Independent oracles used to cross-check the library.

Nothing in this module imports from :mod:`uwdet`.  The implementations are
deliberately written from first principles (pixel-raster counting, plain
scalar formulas, central finite differences, exhaustive-loop metrics) so a
bug in the library cannot hide in a shared code path.
"""

from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------------------
# random pair generation (shared by unit and acceptance tests)
# ---------------------------------------------------------------------------

def random_box_pairs(n, seed, lo=0.0, hi=100.0, min_side=1.0, quantum=None):
    """Draw n pairs of valid boxes inside [lo, hi]^2.

    With ``quantum`` set, coordinates are snapped to that grid so raster
    counting at the same resolution is exact.  Returns two (n, 4) arrays.
    """
    rng = np.random.default_rng(seed)

    def draw(count):
        x1 = rng.uniform(lo, hi - min_side, count)
        y1 = rng.uniform(lo, hi - min_side, count)
        w = rng.uniform(min_side, hi - x1)
        h = rng.uniform(min_side, hi - y1)
        b = np.stack([x1, y1, x1 + w, y1 + h], axis=-1)
        if quantum is not None:
            b = np.round(b / quantum) * quantum
            # snapping can shave a side below min_side; re-widen those
            b[:, 2] = np.maximum(b[:, 2], b[:, 0] + min_side)
            b[:, 3] = np.maximum(b[:, 3], b[:, 1] + min_side)
        return b

    return draw(n), draw(n)


def random_smooth_pairs(n, seed, lo=0.0, hi=100.0, min_side=1.0, margin=1e-4):
    """Box pairs safe for central finite differences.

    Rejects configurations within ``margin`` of a kink of the intersection /
    enclosing-box terms (coincident or exactly-touching edges), where a
    two-sided difference quotient straddles the non-smooth point.
    """
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < n:
        x1, y1 = rng.uniform(lo, hi - min_side, 2)
        w = rng.uniform(min_side, hi - x1)
        h = rng.uniform(min_side, hi - y1)
        a = np.array([x1, y1, x1 + w, y1 + h])
        x1, y1 = rng.uniform(lo, hi - min_side, 2)
        w = rng.uniform(min_side, hi - x1)
        h = rng.uniform(min_side, hi - y1)
        b = np.array([x1, y1, x1 + w, y1 + h])
        edge_gaps = [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
        ix = min(a[2], b[2]) - max(a[0], b[0])
        iy = min(a[3], b[3]) - max(a[1], b[1])
        if min(abs(g) for g in edge_gaps + [ix, iy]) > margin:
            pairs.append((a, b))
    return pairs


# ---------------------------------------------------------------------------
# raster (pixel-counting) area oracle
# ---------------------------------------------------------------------------

def _axis_samples(lo, hi, resolution):
    k0 = math.floor(lo / resolution) - 1
    k1 = math.ceil(hi / resolution) + 1
    return (np.arange(k0, k1) + 0.5) * resolution


def raster_iou(a, b, resolution=0.01):
    """IoU by counting raster cell centers inside each box.

    The indicator of an axis-aligned box factorizes over the axes, so the 2D
    center count equals the product of the two 1D counts; this keeps the
    oracle exact while staying O(window / resolution).
    """
    xs = _axis_samples(min(a[0], b[0]), max(a[2], b[2]), resolution)
    ys = _axis_samples(min(a[1], b[1]), max(a[3], b[3]), resolution)

    def count(samples, lo, hi):
        return int(np.count_nonzero((samples >= lo) & (samples <= hi)))

    cell = resolution * resolution
    area_a = count(xs, a[0], a[2]) * count(ys, a[1], a[3]) * cell
    area_b = count(xs, b[0], b[2]) * count(ys, b[1], b[3]) * cell
    inter = (
        count(xs, max(a[0], b[0]), min(a[2], b[2]))
        * count(ys, max(a[1], b[1]), min(a[3], b[3]))
        * cell
    )
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def raster_area(box, resolution=0.01):
    xs = _axis_samples(box[0], box[2], resolution)
    ys = _axis_samples(box[1], box[3], resolution)
    nx = int(np.count_nonzero((xs >= box[0]) & (xs <= box[2])))
    ny = int(np.count_nonzero((ys >= box[1]) & (ys <= box[3])))
    return nx * ny * resolution * resolution


def raster_iou_2d(a, b, resolution=0.01):
    """Literal 2D meshgrid raster; only affordable for small windows."""
    xs = _axis_samples(min(a[0], b[0]), max(a[2], b[2]), resolution)
    ys = _axis_samples(min(a[1], b[1]), max(a[3], b[3]), resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    in_a = (gx >= a[0]) & (gx <= a[2]) & (gy >= a[1]) & (gy <= a[3])
    in_b = (gx >= b[0]) & (gx <= b[2]) & (gy >= b[1]) & (gy <= b[3])
    inter = np.count_nonzero(in_a & in_b)
    union = np.count_nonzero(in_a | in_b)
    return inter / union if union > 0 else 0.0


def raster_enclosing_area(a, b, resolution=0.01):
    enc = (min(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), max(a[3], b[3]))
    return raster_area(enc, resolution)


# ---------------------------------------------------------------------------
# scalar-formula oracle for the similarity family
# ---------------------------------------------------------------------------

def scalar_iou(a, b):
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        inter = 0.0
    else:
        inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    if union <= 0:
        return 0.0
    return inter / union


def scalar_giou(a, b):
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    inter = iw * ih if (iw > 0 and ih > 0) else 0.0
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    enclosing = (max(a[2], b[2]) - min(a[0], b[0])) * (max(a[3], b[3]) - min(a[1], b[1]))
    if enclosing <= 0:
        return scalar_iou(a, b)
    return scalar_iou(a, b) - (enclosing - union) / enclosing


def scalar_center_distance_sq(a, b):
    ax = (a[0] + a[2]) / 2.0
    ay = (a[1] + a[3]) / 2.0
    bx = (b[0] + b[2]) / 2.0
    by = (b[1] + b[3]) / 2.0
    return (ax - bx) ** 2 + (ay - by) ** 2


def scalar_enclosing_diag_sq(a, b):
    cw = max(a[2], b[2]) - min(a[0], b[0])
    ch = max(a[3], b[3]) - min(a[1], b[1])
    return cw * cw + ch * ch


def scalar_diou(a, b):
    rho2 = scalar_center_distance_sq(a, b)
    c2 = scalar_enclosing_diag_sq(a, b)
    term = rho2 / c2 if c2 > 0 else 0.0
    return scalar_iou(a, b) - term


def scalar_aspect_v(a, b):
    qa = math.atan((a[2] - a[0]) / (a[3] - a[1]))
    qb = math.atan((b[2] - b[0]) / (b[3] - b[1]))
    return (4.0 / math.pi**2) * (qb - qa) ** 2


def scalar_ciou(a, b, beta="standard_v"):
    i = scalar_iou(a, b)
    rho2 = scalar_center_distance_sq(a, b)
    c2 = scalar_enclosing_diag_sq(a, b)
    v = scalar_aspect_v(a, b)
    denom = (1.0 - i) + (v if beta == "standard_v" else float(beta))
    aspect = (v * v / denom) if denom > 0 else 0.0
    return i - rho2 / c2 - aspect


# ---------------------------------------------------------------------------
# brute-force detection metrics
# ---------------------------------------------------------------------------

METRIC_THRESHOLDS = [0.5 + 0.05 * i for i in range(10)]


def oracle_match(preds, gts, thresh):
    """Greedy matching with plain loops.

    ``preds`` is a list of (box, score); ``gts`` a list of boxes.  Returns
    (tp flags per pred in input order, per-gt matched flags).
    """
    order = sorted(range(len(preds)), key=lambda i: (-preds[i][1], i))
    taken = [False] * len(gts)
    tp = [False] * len(preds)
    for i in order:
        best_j, best_iou = -1, -1.0
        for j in range(len(gts)):
            if taken[j]:
                continue
            v = scalar_iou(preds[i][0], gts[j])
            if v > best_iou:
                best_iou, best_j = v, j
        if best_j >= 0 and best_iou >= thresh:
            taken[best_j] = True
            tp[i] = True
    return tp, taken


def oracle_average_precision(flag_score_pairs, total_gt):
    """101-point interpolated AP by literal scanning."""
    if total_gt == 0:
        return 0.0 if flag_score_pairs else 1.0
    if not flag_score_pairs:
        return 0.0
    order = sorted(range(len(flag_score_pairs)), key=lambda i: (-flag_score_pairs[i][1], i))
    tps = fps = 0
    curve = []  # (precision, cum_tp)
    for i in order:
        if flag_score_pairs[i][0]:
            tps += 1
        else:
            fps += 1
        curve.append((tps / (tps + fps), tps))
    total = 0.0
    for k in range(101):
        best = 0.0
        for j in range(len(curve)):
            # recall >= k/100, compared in integers
            if 100 * curve[j][1] >= k * total_gt:
                best = max(p for p, _ in curve[j:])
                break
        total += best
    return total / 101.0


def _oracle_top(preds, max_dets):
    order = sorted(range(len(preds)), key=lambda i: (-preds[i][1], i))
    return [preds[i] for i in order[:max_dets]]


def _box_area_scalar(b):
    return (b[2] - b[0]) * (b[3] - b[1])


def oracle_average_recall(preds_by_image, gts_by_image, lo, hi, max_dets=100):
    filtered = {
        iid: [g for g in gts if lo <= _box_area_scalar(g) < hi]
        for iid, gts in gts_by_image.items()
    }
    total = sum(len(v) for v in filtered.values())
    if total == 0:
        return -1.0
    per_threshold = []
    for t in METRIC_THRESHOLDS:
        matched = 0
        for iid, gts in filtered.items():
            if not gts:
                continue
            preds = _oracle_top(preds_by_image.get(iid, []), max_dets)
            _, taken = oracle_match(preds, gts, t)
            matched += sum(taken)
        per_threshold.append(matched / total)
    return float(np.mean(per_threshold))


def oracle_report(preds_by_image, gts_by_image, max_dets=100):
    """Full seven-column report with loops only.

    ``preds_by_image``: {id: [(box, score), ...]}; ``gts_by_image``:
    {id: [box, ...]}.
    """
    per_threshold = []
    for t in METRIC_THRESHOLDS:
        pool = []
        total_gt = 0
        for iid, gts in gts_by_image.items():
            total_gt += len(gts)
            preds = _oracle_top(preds_by_image.get(iid, []), max_dets)
            tp, _ = oracle_match(preds, gts, t)
            pool.extend((tp[i], preds[i][1]) for i in range(len(preds)))
        per_threshold.append(oracle_average_precision(pool, total_gt))
    inf = float("inf")
    return {
        "ap": float(np.mean(per_threshold)),
        "ap50": per_threshold[0],
        "ap75": per_threshold[5],
        "ar": oracle_average_recall(preds_by_image, gts_by_image, 0.0, inf, max_dets),
        "ar_small": oracle_average_recall(preds_by_image, gts_by_image, 0.0, 32.0**2, max_dets),
        "ar_medium": oracle_average_recall(preds_by_image, gts_by_image, 32.0**2, 96.0**2, max_dets),
        "ar_large": oracle_average_recall(preds_by_image, gts_by_image, 96.0**2, inf, max_dets),
        "per_threshold_ap": per_threshold,
    }


# ---------------------------------------------------------------------------
# naive dense-block oracles (explicit loops, no shared code)
# ---------------------------------------------------------------------------

def se_oracle(x, w1, w2):
    """Squeeze-excitation forward with explicit per-element loops."""
    n, c, h, w = x.shape
    cr = len(w1)
    out = np.zeros_like(x, dtype=np.float64)
    for ni in range(n):
        z = [float(x[ni, ci].sum()) / (h * w) for ci in range(c)]
        a = [sum(w1[j][ci] * z[ci] for ci in range(c)) for j in range(cr)]
        e = [max(v, 0.0) for v in a]
        b = [sum(w2[ci][j] * e[j] for j in range(cr)) for ci in range(c)]
        s = [1.0 / (1.0 + math.exp(-v)) for v in b]
        for ci in range(c):
            out[ni, ci] = s[ci] * x[ni, ci]
    return out


def conv_oracle(x, kernel, dilation=1, stride=1, padding=0):
    """Plain cross-correlation with seven explicit loops."""
    n, c, h, w = x.shape
    co, ci, k, _ = kernel.shape
    xp = np.zeros((n, c, h + 2 * padding, w + 2 * padding))
    xp[:, :, padding : padding + h, padding : padding + w] = x
    extent = k + (k - 1) * (dilation - 1)
    ho = (h + 2 * padding - extent) // stride + 1
    wo = (w + 2 * padding - extent) // stride + 1
    out = np.zeros((n, co, ho, wo))
    for ni in range(n):
        for o in range(co):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for cc in range(ci):
                        for u in range(k):
                            for v in range(k):
                                acc += (
                                    xp[ni, cc, i * stride + u * dilation, j * stride + v * dilation]
                                    * kernel[o, cc, u, v]
                                )
                    out[ni, o, i, j] = acc
    return out


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def fd_gradient(f, x, step=1e-5):
    """Central-difference gradient of scalar f at flat array x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += step
        xm.flat[i] -= step
        grad.flat[i] = (f(xp) - f(xm)) / (2.0 * step)
    return grad


def max_rel_error(analytic, numeric, floor=1e-6):
    """Elementwise |a - n| / max(|a|, |n|, floor), reduced with max."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))
