"""Axis-aligned box arithmetic and the IoU similarity family.

Boxes are corner-form arrays ``(x_min, y_min, x_max, y_max)`` in continuous
pixel coordinates.  All similarity functions broadcast over leading
dimensions, so they accept single boxes of shape ``(4,)`` as well as stacks
of shape ``(N, 4)``.  Center-form ``(cx, cy, w, h)`` input is supported via
the conversion helpers; everything downstream works in corner form because
intersection math is simplest there.

Conventions for degenerate inputs:

* ``iou`` returns 0 when the union area is 0 (both boxes degenerate).
* ``diou`` treats the center-distance term as 0 when the enclosing diagonal
  is 0 (identical point boxes).
* ``ciou`` requires strictly positive widths and heights because its aspect
  term is built from ``w/h`` ratios; degenerate input raises ``ValueError``.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "box_area",
    "cxcywh_to_xyxy",
    "xyxy_to_cxcywh",
    "iou",
    "giou",
    "diou",
    "ciou",
    "ciou_gradient",
    "iou_matrix",
    "diou_matrix",
]

# 4 / pi^2, the normalizer of the aspect-consistency term.
_ASPECT_NORM = 4.0 / math.pi**2


def _as_boxes(b) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    if b.shape[-1] != 4:
        raise ValueError(f"boxes must have last dimension 4, got shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("box coordinates must be finite")
    if np.any(b[..., 2] < b[..., 0]) or np.any(b[..., 3] < b[..., 1]):
        raise ValueError("boxes must satisfy x_min <= x_max and y_min <= y_max")
    return b


def _maybe_scalar(x: np.ndarray):
    return float(x) if x.ndim == 0 else x


def cxcywh_to_xyxy(b) -> np.ndarray:
    """Convert ``(cx, cy, w, h)`` boxes to corner form."""
    b = np.asarray(b, dtype=np.float64)
    cx, cy, w, h = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], axis=-1)


def xyxy_to_cxcywh(b) -> np.ndarray:
    """Convert corner-form boxes to ``(cx, cy, w, h)``."""
    b = _as_boxes(b)
    x1, y1, x2, y2 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack([(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1], axis=-1)


def box_area(b):
    """Area ``(x_max - x_min) * (y_max - y_min)``; zero for degenerate boxes."""
    b = _as_boxes(b)
    return _maybe_scalar((b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1]))


def _inter_union(a: np.ndarray, b: np.ndarray):
    ix = np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0])
    iy = np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1])
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    union = area_a + area_b - inter
    return inter, union


def iou(a, b):
    """Intersection over union in ``[0, 1]``; 0 when the union area is 0."""
    a, b = _as_boxes(a), _as_boxes(b)
    inter, union = _inter_union(a, b)
    out = np.where(union > 0.0, inter / np.where(union > 0.0, union, 1.0), 0.0)
    return _maybe_scalar(out)


def giou(a, b):
    """Generalized IoU: IoU minus the enclosing-box slack, in ``[-1, 1]``."""
    a, b = _as_boxes(a), _as_boxes(b)
    inter, union = _inter_union(a, b)
    iou_val = np.where(union > 0.0, inter / np.where(union > 0.0, union, 1.0), 0.0)
    cw = np.maximum(a[..., 2], b[..., 2]) - np.minimum(a[..., 0], b[..., 0])
    ch = np.maximum(a[..., 3], b[..., 3]) - np.minimum(a[..., 1], b[..., 1])
    enclose = cw * ch
    slack = np.where(enclose > 0.0, (enclose - union) / np.where(enclose > 0.0, enclose, 1.0), 0.0)
    return _maybe_scalar(iou_val - slack)


def _center_terms(a: np.ndarray, b: np.ndarray):
    dx = (a[..., 0] + a[..., 2]) / 2 - (b[..., 0] + b[..., 2]) / 2
    dy = (a[..., 1] + a[..., 3]) / 2 - (b[..., 1] + b[..., 3]) / 2
    rho2 = dx * dx + dy * dy
    cw = np.maximum(a[..., 2], b[..., 2]) - np.minimum(a[..., 0], b[..., 0])
    ch = np.maximum(a[..., 3], b[..., 3]) - np.minimum(a[..., 1], b[..., 1])
    c2 = cw * cw + ch * ch
    return rho2, c2


def diou(a, b):
    """Distance IoU: IoU minus the normalized squared center distance."""
    a, b = _as_boxes(a), _as_boxes(b)
    inter, union = _inter_union(a, b)
    iou_val = np.where(union > 0.0, inter / np.where(union > 0.0, union, 1.0), 0.0)
    rho2, c2 = _center_terms(a, b)
    dist = np.where(c2 > 0.0, rho2 / np.where(c2 > 0.0, c2, 1.0), 0.0)
    return _maybe_scalar(iou_val - dist)


def _require_nondegenerate(b: np.ndarray, name: str) -> None:
    if np.any(b[..., 2] - b[..., 0] <= 0.0) or np.any(b[..., 3] - b[..., 1] <= 0.0):
        raise ValueError(f"{name} must have positive width and height for the aspect term")


def _aspect_v(a: np.ndarray, b: np.ndarray):
    wa, ha = a[..., 2] - a[..., 0], a[..., 3] - a[..., 1]
    wb, hb = b[..., 2] - b[..., 0], b[..., 3] - b[..., 1]
    return _ASPECT_NORM * (np.arctan(wb / hb) - np.arctan(wa / ha)) ** 2


def ciou(a, b, beta="standard_v"):
    """Complete IoU combining overlap, center distance, and aspect consistency.

    ``ciou = iou - rho^2/c^2 - v^2 / ((1 - iou) + beta)`` where ``v`` is the
    arctan aspect-consistency term.  With ``beta="standard_v"`` the
    denominator uses ``beta = v``, the standard trade-off; a fixed
    nonnegative float can be supplied instead.

    Both boxes must have positive width and height.
    """
    a, b = _as_boxes(a), _as_boxes(b)
    _require_nondegenerate(a, "first box")
    _require_nondegenerate(b, "second box")
    inter, union = _inter_union(a, b)
    iou_val = inter / union
    rho2, c2 = _center_terms(a, b)
    dist = rho2 / c2  # c2 > 0 because both boxes have positive extent
    v = _aspect_v(a, b)
    denom = (1.0 - iou_val) + (v if beta == "standard_v" else _checked_beta(beta))
    # denom == 0 only for identical boxes (iou 1, v 0); the term vanishes there.
    aspect = np.where(denom > 0.0, v * v / np.where(denom > 0.0, denom, 1.0), 0.0)
    return _maybe_scalar(iou_val - dist - aspect)


def _checked_beta(beta) -> float:
    beta = float(beta)
    if beta < 0.0:
        raise ValueError("fixed beta must be nonnegative")
    return beta


def ciou_gradient(pred, gt, beta="standard_v") -> np.ndarray:
    """Analytic gradient of ``ciou(pred, gt)`` w.r.t. pred's four coordinates.

    The gradient is the true derivative of the implemented scalar function,
    including the dependence of the aspect-term denominator on IoU and v, so
    it matches central finite differences away from kinks.

    At configurations where the boxes touch along an edge or corner the
    intersection area is not differentiable; those raise ``ValueError`` and
    the caller is expected to perturb.  Coincident edges of overlapping boxes
    use the one-sided derivative from the overlapping side.
    """
    p = _as_boxes(pred)
    g = _as_boxes(gt)
    if p.shape != (4,) or g.shape != (4,):
        raise ValueError("ciou_gradient operates on single (4,) boxes")
    _require_nondegenerate(p, "pred")
    _require_nondegenerate(g, "gt")

    px1, py1, px2, py2 = p
    gx1, gy1, gx2, gy2 = g
    w, h = px2 - px1, py2 - py1

    ix = min(px2, gx2) - max(px1, gx1)
    iy = min(py2, gy2) - max(py1, gy1)
    if (ix == 0.0 and iy >= 0.0) or (iy == 0.0 and ix >= 0.0):
        raise ValueError("boxes touch exactly; gradient undefined, perturb the input")

    area_p = w * h
    area_g = (gx2 - gx1) * (gy2 - gy1)

    if ix > 0.0 and iy > 0.0:
        inter = ix * iy
        d_inter = np.array([
            -iy * (1.0 if px1 >= gx1 else 0.0),
            -ix * (1.0 if py1 >= gy1 else 0.0),
            iy * (1.0 if px2 <= gx2 else 0.0),
            ix * (1.0 if py2 <= gy2 else 0.0),
        ])
    else:
        inter = 0.0
        d_inter = np.zeros(4)

    d_area_p = np.array([-h, -w, h, w])
    union = area_p + area_g - inter
    d_union = d_area_p - d_inter
    iou_val = inter / union
    d_iou = (d_inter * union - inter * d_union) / union**2

    dx = (px1 + px2) / 2 - (gx1 + gx2) / 2
    dy = (py1 + py2) / 2 - (gy1 + gy2) / 2
    rho2 = dx * dx + dy * dy
    d_rho2 = np.array([dx, dy, dx, dy])

    cw = max(px2, gx2) - min(px1, gx1)
    ch = max(py2, gy2) - min(py1, gy1)
    c2 = cw * cw + ch * ch
    d_c2 = np.array([
        -2.0 * cw * (1.0 if px1 <= gx1 else 0.0),
        -2.0 * ch * (1.0 if py1 <= gy1 else 0.0),
        2.0 * cw * (1.0 if px2 >= gx2 else 0.0),
        2.0 * ch * (1.0 if py2 >= gy2 else 0.0),
    ])
    d_dist = (d_rho2 * c2 - rho2 * d_c2) / c2**2

    q_p = math.atan(w / h)
    q_g = math.atan((gx2 - gx1) / (gy2 - gy1))
    delta = q_g - q_p
    v = _ASPECT_NORM * delta * delta
    wh2 = w * w + h * h
    d_qp = np.array([-h / wh2, w / wh2, h / wh2, -w / wh2])
    d_v = -2.0 * _ASPECT_NORM * delta * d_qp

    if beta == "standard_v":
        denom = (1.0 - iou_val) + v
        d_denom = -d_iou + d_v
    else:
        denom = (1.0 - iou_val) + _checked_beta(beta)
        d_denom = -d_iou
    if denom > 0.0:
        d_aspect = (2.0 * v * d_v * denom - v * v * d_denom) / denom**2
    else:
        # identical boxes: the aspect term is O(eps^3) around this point
        d_aspect = np.zeros(4)

    return d_iou - d_dist - d_aspect


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU between two box stacks: ``(N, 4) x (M, 4) -> (N, M)``."""
    a = np.atleast_2d(_as_boxes(a))
    b = np.atleast_2d(_as_boxes(b))
    return np.asarray(iou(a[:, None, :], b[None, :, :]))


def diou_matrix(a, b) -> np.ndarray:
    """Pairwise DIoU between two box stacks: ``(N, 4) x (M, 4) -> (N, M)``."""
    a = np.atleast_2d(_as_boxes(a))
    b = np.atleast_2d(_as_boxes(b))
    return np.asarray(diou(a[:, None, :], b[None, :, :]))
