"""Input-side image chain: denoising, water/foreground segmentation,
aspect-preserving letterbox scaling, and four-image mosaic composition.

Images are uint8 arrays of shape (h, w) for single-channel or (h, w, 3) for
color, row-major.  Labeled images carry corner-form boxes plus integer class
labels.  File I/O covers PNG (via Pillow) and the binary netpbm formats PPM
(P6, color) and PGM (P5, grayscale/masks).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage
from scipy.ndimage import median_filter

__all__ = [
    "LabeledImage",
    "LetterboxTransform",
    "denoise",
    "segment_water_boundary",
    "otsu_threshold",
    "letterbox",
    "mosaic",
    "read_image",
    "write_image",
    "read_ppm",
    "write_ppm",
    "read_pgm",
    "write_pgm",
]

# integer-exact BT.601 luma; avoids platform-dependent float rounding
_LUMA = (299, 587, 114)


def _as_image(img) -> np.ndarray:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError("images must be uint8")
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] in (1, 3):
        return img[:, :, 0] if img.shape[2] == 1 else img
    raise ValueError(f"images must be (h, w) or (h, w, 3); got shape {img.shape}")


@dataclass
class LabeledImage:
    """An image with corner-form boxes and integer class labels."""

    image: np.ndarray
    boxes: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        self.image = _as_image(self.image)
        self.boxes = np.asarray(self.boxes, dtype=np.float64).reshape(-1, 4)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.labels.shape[0] != self.boxes.shape[0]:
            raise ValueError("one label per box required")
        h, w = self.image.shape[:2]
        if self.boxes.shape[0]:
            if np.any(self.boxes[:, 2] < self.boxes[:, 0]) or np.any(
                self.boxes[:, 3] < self.boxes[:, 1]
            ):
                raise ValueError("invalid box corners")
            outside = (
                (self.boxes[:, 2] <= 0)
                | (self.boxes[:, 0] >= w)
                | (self.boxes[:, 3] <= 0)
                | (self.boxes[:, 1] >= h)
            )
            if outside.any():
                raise ValueError("every box must intersect the image rectangle")

    @property
    def w(self) -> int:
        return self.image.shape[1]

    @property
    def h(self) -> int:
        return self.image.shape[0]


def denoise(img, window: int = 3) -> np.ndarray:
    """Per-channel median filter with edge replication.

    The window must be odd and at least 3.  Medians select existing pixel
    values, so constant regions pass through unchanged and isolated salt
    pixels are removed.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 3")
    img = _as_image(img)
    if img.ndim == 2:
        return median_filter(img, size=window, mode="nearest")
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        out[:, :, c] = median_filter(img[:, :, c], size=window, mode="nearest")
    return out


def _to_gray(img: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        return img
    r, g, b = img[:, :, 0].astype(np.int64), img[:, :, 1].astype(np.int64), img[:, :, 2].astype(np.int64)
    return ((_LUMA[0] * r + _LUMA[1] * g + _LUMA[2] * b + 500) // 1000).astype(np.uint8)


def otsu_threshold(gray: np.ndarray) -> int:
    """Threshold maximizing between-class variance over the 256-bin histogram.

    Classes are [< t] and [>= t]; ties resolve to the lowest maximizer.
    """
    hist = np.bincount(gray.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    omega0 = np.cumsum(hist)                      # pixels below t+1
    mu0 = np.cumsum(hist * np.arange(256))
    mu_total = mu0[-1]
    best_t, best_var = 0, -1.0
    for t in range(256):
        n0 = omega0[t - 1] if t > 0 else 0.0      # class 0: values < t
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            var = 0.0
        else:
            m0 = (mu0[t - 1] if t > 0 else 0.0) / n0
            m1 = (mu_total - (mu0[t - 1] if t > 0 else 0.0)) / n1
            var = n0 * n1 * (m0 - m1) ** 2
        if var > best_var:
            best_var, best_t = var, t
    return best_t


def segment_water_boundary(img, manual_threshold=None):
    """Binary foreground mask separating bright structure from dark water.

    With ``manual_threshold`` given, thresholds at it directly (the manual
    arm of the semi-automatic scheme); otherwise the threshold maximizes
    between-class variance of the grayscale histogram.  Returns
    ``(mask, threshold)`` where mask is uint8 with 1 = foreground
    (gray >= threshold).
    """
    gray = _to_gray(_as_image(img))
    if manual_threshold is not None:
        t = int(manual_threshold)
        if not 0 <= t <= 255:
            raise ValueError("manual threshold must lie in [0, 255]")
    else:
        t = otsu_threshold(gray)
    return (gray >= t).astype(np.uint8), t


@dataclass(frozen=True)
class LetterboxTransform:
    """Affine record mapping source coordinates into the padded target."""

    scale: float
    dx: float
    dy: float
    src_w: int
    src_h: int
    dst_w: int
    dst_h: int

    def apply_boxes(self, boxes) -> np.ndarray:
        boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
        out = boxes * self.scale
        out[:, [0, 2]] += self.dx
        out[:, [1, 3]] += self.dy
        return out

    def invert_boxes(self, boxes) -> np.ndarray:
        boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4).copy()
        boxes[:, [0, 2]] -= self.dx
        boxes[:, [1, 3]] -= self.dy
        return boxes / self.scale


def _resize_bilinear(img: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    mode = "L" if img.ndim == 2 else "RGB"
    pil = PILImage.fromarray(img, mode=mode)
    return np.asarray(pil.resize((new_w, new_h), PILImage.BILINEAR))


def letterbox(item: LabeledImage, target_w: int, target_h: int, pad_value: int = 114):
    """Aspect-preserving resize into (target_w, target_h) with centered padding.

    Boxes are mapped by the same scale and offset, then clipped to the
    target; the returned transform record inverts the mapping exactly for
    boxes that were not clipped.
    """
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be positive")
    scale = min(target_w / item.w, target_h / item.h)
    new_w = max(1, round(item.w * scale))
    new_h = max(1, round(item.h * scale))
    dx = (target_w - new_w) // 2
    dy = (target_h - new_h) // 2

    shape = (target_h, target_w) if item.image.ndim == 2 else (target_h, target_w, 3)
    canvas = np.full(shape, pad_value, dtype=np.uint8)
    canvas[dy : dy + new_h, dx : dx + new_w] = _resize_bilinear(item.image, new_w, new_h)

    record = LetterboxTransform(
        scale=scale, dx=float(dx), dy=float(dy),
        src_w=item.w, src_h=item.h, dst_w=target_w, dst_h=target_h,
    )
    boxes = record.apply_boxes(item.boxes)
    boxes[:, [0, 2]] = np.clip(boxes[:, [0, 2]], 0.0, target_w)
    boxes[:, [1, 3]] = np.clip(boxes[:, [1, 3]], 0.0, target_h)
    return LabeledImage(image=canvas, boxes=boxes, labels=item.labels.copy()), record


MOSAIC_MIN_SURVIVING_FRACTION = 0.2


def mosaic(items, canvas_w: int, canvas_h: int, seed: int, pad_value: int = 114, center=None):
    """Composite exactly four labeled images into one canvas.

    A seeded random center point (drawn from the central half of the canvas)
    splits it into four quadrants; each input is letterboxed into its
    quadrant.  Transformed boxes are clipped to their quadrant and dropped
    when the clipped area falls below 20% of the transformed area.
    ``center`` overrides the random draw, e.g. to force the midpoint.
    """
    items = list(items)
    if len(items) != 4:
        raise ValueError("mosaic needs exactly 4 labeled images")
    if canvas_w < 2 or canvas_h < 2:
        raise ValueError("canvas must be at least 2x2")
    if center is None:
        rng = np.random.default_rng(seed)
        cx = int(rng.integers(canvas_w // 4, canvas_w - canvas_w // 4))
        cy = int(rng.integers(canvas_h // 4, canvas_h - canvas_h // 4))
    else:
        cx, cy = int(center[0]), int(center[1])
    cx = min(max(cx, 1), canvas_w - 1)
    cy = min(max(cy, 1), canvas_h - 1)

    quads = [
        (0, 0, cx, cy),                      # top-left
        (cx, 0, canvas_w, cy),               # top-right
        (0, cy, cx, canvas_h),               # bottom-left
        (cx, cy, canvas_w, canvas_h),        # bottom-right
    ]
    channels = 3 if any(it.image.ndim == 3 for it in items) else 1
    shape = (canvas_h, canvas_w) if channels == 1 else (canvas_h, canvas_w, 3)
    canvas = np.full(shape, pad_value, dtype=np.uint8)

    out_boxes, out_labels = [], []
    for item, (qx1, qy1, qx2, qy2) in zip(items, quads):
        img = item.image
        if channels == 3 and img.ndim == 2:
            img = np.stack([img] * 3, axis=-1)
        fitted, record = letterbox(
            LabeledImage(image=img, boxes=item.boxes, labels=item.labels),
            qx2 - qx1, qy2 - qy1, pad_value=pad_value,
        )
        canvas[qy1:qy2, qx1:qx2] = fitted.image
        if item.boxes.shape[0] == 0:
            continue
        moved = record.apply_boxes(item.boxes)
        clipped = moved.copy()
        clipped[:, [0, 2]] = np.clip(clipped[:, [0, 2]], 0.0, qx2 - qx1)
        clipped[:, [1, 3]] = np.clip(clipped[:, [1, 3]], 0.0, qy2 - qy1)
        area_moved = (moved[:, 2] - moved[:, 0]) * (moved[:, 3] - moved[:, 1])
        area_clip = np.clip(clipped[:, 2] - clipped[:, 0], 0, None) * np.clip(
            clipped[:, 3] - clipped[:, 1], 0, None
        )
        keep = area_clip >= MOSAIC_MIN_SURVIVING_FRACTION * area_moved
        survivors = clipped[keep]
        survivors[:, [0, 2]] += qx1
        survivors[:, [1, 3]] += qy1
        out_boxes.append(survivors)
        out_labels.append(item.labels[keep])

    boxes = np.concatenate(out_boxes, axis=0) if out_boxes else np.zeros((0, 4))
    labels = np.concatenate(out_labels, axis=0) if out_labels else np.zeros(0, dtype=np.int64)
    return LabeledImage(image=canvas, boxes=boxes, labels=labels)


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def write_ppm(path, img) -> None:
    """Binary PPM (P6), color only."""
    img = _as_image(img)
    if img.ndim != 3:
        raise ValueError("PPM requires a 3-channel image")
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def write_pgm(path, img) -> None:
    """Binary PGM (P5), grayscale or 0/1 masks."""
    img = _as_image(img)
    if img.ndim != 2:
        raise ValueError("PGM requires a single-channel image")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def _read_netpbm(path, magic: str):
    with open(path, "rb") as fh:
        data = fh.read()
    # header: magic, width, height, maxval; '#' comments allowed between tokens
    tokens, pos = [], 0
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n|\S+)").match(data, pos)
        if m is None:
            raise ValueError(f"truncated netpbm header in {path}")
        pos = m.end()
        tok = m.group(1)
        if not tok.startswith(b"#"):
            tokens.append(tok)
    if tokens[0] != magic.encode("ascii"):
        raise ValueError(f"expected {magic} file, found {tokens[0]!r}")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ValueError("only maxval 255 is supported")
    # exactly one whitespace byte separates the header from the binary body
    count = w * h * (3 if magic == "P6" else 1)
    body = data[pos + 1 : pos + 1 + count]
    if len(body) != count:
        raise ValueError(f"truncated pixel data in {path}")
    arr = np.frombuffer(body, dtype=np.uint8)
    return arr.reshape((h, w, 3) if magic == "P6" else (h, w)).copy()


def read_ppm(path) -> np.ndarray:
    return _read_netpbm(path, "P6")


def read_pgm(path) -> np.ndarray:
    return _read_netpbm(path, "P5")


def read_image(path) -> np.ndarray:
    """Read PNG/PPM/PGM by extension into a uint8 array."""
    p = str(path)
    if p.lower().endswith(".ppm"):
        return read_ppm(p)
    if p.lower().endswith(".pgm"):
        return read_pgm(p)
    with PILImage.open(p) as pil:
        pil = pil.convert("RGB") if pil.mode not in ("L", "RGB") else pil
        return np.asarray(pil).copy()


def write_image(path, img) -> None:
    """Write PNG/PPM/PGM by extension."""
    p = str(path)
    img = _as_image(img)
    if p.lower().endswith(".ppm"):
        write_ppm(p, img)
    elif p.lower().endswith(".pgm"):
        write_pgm(p, img)
    else:
        mode = "L" if img.ndim == 2 else "RGB"
        PILImage.fromarray(img, mode=mode).save(p, format="PNG")
