"""Multi-scale anchor proposals, target assignment, and background sampling.

The anchor family is four base areas crossed with three aspect ratios,
twelve shapes total, tiled at every cell of a stride-aligned grid.  Anchors
are never clipped to the image; clipping would break the exact area/ratio
bookkeeping the shapes are defined by.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import iou_matrix

__all__ = [
    "AnchorSpec",
    "AnchorGrid",
    "NEGATIVE",
    "IGNORE",
    "anchor_shapes",
    "generate_grid",
    "assign_targets",
    "sample_background_boxes",
]

DEFAULT_AREAS = (1024.0, 4096.0, 9216.0, 16384.0)  # 32^2 .. 128^2 px^2
DEFAULT_RATIOS = (0.5, 1.0, 2.0)

NEGATIVE = -1
IGNORE = -2


@dataclass(frozen=True)
class AnchorSpec:
    """Four base areas (px^2) crossed with three w/h ratios."""

    base_areas: tuple = DEFAULT_AREAS
    aspect_ratios: tuple = DEFAULT_RATIOS

    def __post_init__(self):
        areas = tuple(float(a) for a in self.base_areas)
        ratios = tuple(float(r) for r in self.aspect_ratios)
        if len(areas) != 4:
            raise ValueError("exactly 4 base areas required")
        if len(ratios) != 3:
            raise ValueError("exactly 3 aspect ratios required")
        if any(a <= 0 for a in areas) or any(r <= 0 for r in ratios):
            raise ValueError("areas and ratios must be positive")
        if list(areas) != sorted(set(areas)):
            raise ValueError("areas must be strictly increasing")
        if list(ratios) != sorted(set(ratios)):
            raise ValueError("ratios must be strictly increasing")
        object.__setattr__(self, "base_areas", areas)
        object.__setattr__(self, "aspect_ratios", ratios)

    @classmethod
    def from_dict(cls, d: dict) -> "AnchorSpec":
        return cls(
            base_areas=tuple(d.get("base_areas", DEFAULT_AREAS)),
            aspect_ratios=tuple(d.get("aspect_ratios", DEFAULT_RATIOS)),
        )

    def to_dict(self) -> dict:
        return {"base_areas": list(self.base_areas), "aspect_ratios": list(self.aspect_ratios)}


@dataclass(frozen=True)
class AnchorGrid:
    """Anchors tiled over a feature grid; immutable after construction."""

    stride: int
    grid_w: int
    grid_h: int
    anchors: np.ndarray = field(repr=False)  # (grid_w * grid_h * 12, 4)

    def __post_init__(self):
        self.anchors.setflags(write=False)

    def __len__(self) -> int:
        return self.anchors.shape[0]


def anchor_shapes(spec: AnchorSpec) -> np.ndarray:
    """The twelve (width, height) pairs: w = sqrt(A*r), h = sqrt(A/r).

    Ordered area-major, ratio-minor.  Each pair reproduces its area and
    ratio exactly: w*h == A and w/h == r.
    """
    shapes = [
        (math.sqrt(a * r), math.sqrt(a / r))
        for a in spec.base_areas
        for r in spec.aspect_ratios
    ]
    return np.array(shapes, dtype=np.float64)


def generate_grid(spec: AnchorSpec, image_w: int, image_h: int, stride: int) -> AnchorGrid:
    """Tile the 12 shapes at every grid cell center ((i+0.5)s, (j+0.5)s)."""
    if image_w <= 0 or image_h <= 0:
        raise ValueError("image dimensions must be positive")
    if stride <= 0:
        raise ValueError("stride must be positive")
    grid_w = math.ceil(image_w / stride)
    grid_h = math.ceil(image_h / stride)
    shapes = anchor_shapes(spec)

    cx = (np.arange(grid_w) + 0.5) * stride
    cy = (np.arange(grid_h) + 0.5) * stride
    gy, gx = np.meshgrid(cy, cx, indexing="ij")
    centers = np.stack([gx.ravel(), gy.ravel()], axis=-1)  # row-major cells

    half = shapes / 2.0
    lo = centers[:, None, :] - half[None, :, :]
    hi = centers[:, None, :] + half[None, :, :]
    anchors = np.concatenate([lo, hi], axis=-1).reshape(-1, 4)
    return AnchorGrid(stride=int(stride), grid_w=grid_w, grid_h=grid_h, anchors=anchors)


def assign_targets(grid: AnchorGrid, gt_boxes, pos_thresh: float, neg_thresh: float) -> np.ndarray:
    """Per-anchor labels: gt index if positive, NEGATIVE (-1), or IGNORE (-2).

    An anchor is positive to its max-IoU ground-truth box when that IoU
    reaches ``pos_thresh``, negative below ``neg_thresh``, ignored between.
    Every ground-truth box is then force-matched to its best remaining
    anchor (ties broken by lowest anchor index) so no target goes unmatched,
    even when two boxes share a best anchor.
    """
    if not 0.0 <= neg_thresh <= pos_thresh <= 1.0:
        raise ValueError("need 0 <= neg_thresh <= pos_thresh <= 1")
    gt_boxes = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 4)
    n_anchor = len(grid)
    labels = np.full(n_anchor, NEGATIVE, dtype=np.int64)
    if gt_boxes.shape[0] == 0:
        return labels

    ious = iou_matrix(grid.anchors, gt_boxes)  # (A, G)
    best_gt = np.argmax(ious, axis=1)
    best_iou = ious[np.arange(n_anchor), best_gt]
    labels[best_iou >= pos_thresh] = best_gt[best_iou >= pos_thresh]
    labels[(best_iou < pos_thresh) & (best_iou >= neg_thresh)] = IGNORE

    # force-match: each gt claims its best unclaimed anchor, in gt order
    claimed = np.zeros(n_anchor, dtype=bool)
    for g in range(gt_boxes.shape[0]):
        order = ious[:, g].copy()
        order[claimed] = -np.inf
        a = int(np.argmax(order))  # argmax returns the lowest tied index
        if np.isfinite(order[a]):
            labels[a] = g
            claimed[a] = True
    return labels


def sample_background_boxes(gt, frame_w: float, frame_h: float, k: int, seed: int) -> np.ndarray:
    """k boxes with gt's exact width/height, centers outside gt's interior.

    Centers are drawn uniformly over the frame minus the ground-truth
    interior by decomposing that region into at most four bands (above,
    below, left, right of the box) and sampling bands proportionally to
    area.  Sampled boxes may overhang the frame; they are not clipped, so
    width and height are preserved exactly.  Deterministic in ``seed``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    gt = np.asarray(gt, dtype=np.float64).reshape(4)
    if frame_w <= 0 or frame_h <= 0:
        raise ValueError("frame must have positive size")
    w = gt[2] - gt[0]
    h = gt[3] - gt[1]
    if w < 0 or h < 0:
        raise ValueError("invalid gt box")

    # complement of the open gt interior inside [0, frame_w] x [0, frame_h]
    x1 = min(max(gt[0], 0.0), frame_w)
    y1 = min(max(gt[1], 0.0), frame_h)
    x2 = min(max(gt[2], 0.0), frame_w)
    y2 = min(max(gt[3], 0.0), frame_h)
    bands = [
        (0.0, 0.0, frame_w, y1),           # below gt.y1
        (0.0, y2, frame_w, frame_h),       # above gt.y2
        (0.0, y1, x1, y2),                 # left strip
        (x2, y1, frame_w, y2),             # right strip
    ]
    areas = np.array([max(bx2 - bx1, 0.0) * max(by2 - by1, 0.0) for bx1, by1, bx2, by2 in bands])
    total = float(areas.sum())
    if total <= 0.0:
        raise ValueError("gt covers the frame; no region to place background centers")

    rng = np.random.default_rng(seed)
    choice = rng.choice(4, size=k, p=areas / total)
    u = rng.random((k, 2))
    out = np.empty((k, 4), dtype=np.float64)
    for i in range(k):
        bx1, by1, bx2, by2 = bands[choice[i]]
        cx = bx1 + u[i, 0] * (bx2 - bx1)
        cy = by1 + u[i, 1] * (by2 - by1)
        out[i] = (cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)
    return out
