"""Detection overlays: rectangles plus a text label per box.

Raster labels use a built-in 3x5 pixel font (digits and the few symbols the
label format needs), so no font files are involved and output is byte-stable
across machines.  The SVG rendering mirrors the raster one with fixed
two-decimal formatting.  Colors are assigned deterministically by class id.
"""

from __future__ import annotations

import numpy as np

__all__ = ["class_color", "format_label", "render_overlay", "render_svg", "PALETTE"]

PALETTE = (
    (230, 60, 60),
    (60, 200, 90),
    (70, 110, 240),
    (240, 200, 50),
    (200, 70, 220),
    (70, 220, 220),
    (240, 140, 50),
    (150, 150, 150),
)

# 3x5 glyphs, rows top-down, '#' = on
_GLYPHS = {
    "0": ("###", "# #", "# #", "# #", "###"),
    "1": (" # ", "## ", " # ", " # ", "###"),
    "2": ("###", "  #", "###", "#  ", "###"),
    "3": ("###", "  #", "###", "  #", "###"),
    "4": ("# #", "# #", "###", "  #", "  #"),
    "5": ("###", "#  ", "###", "  #", "###"),
    "6": ("###", "#  ", "###", "# #", "###"),
    "7": ("###", "  #", " # ", " # ", " # "),
    "8": ("###", "# #", "###", "# #", "###"),
    "9": ("###", "# #", "###", "  #", "###"),
    ".": ("   ", "   ", "   ", "   ", " # "),
    ",": ("   ", "   ", "   ", " # ", "#  "),
    "-": ("   ", "   ", "###", "   ", "   "),
    "=": ("   ", "###", "   ", "###", "   "),
    "x": ("   ", "# #", " # ", "# #", "   "),
    "s": (" ##", "#  ", " # ", "  #", "## "),
    " ": ("   ", "   ", "   ", "   ", "   "),
}
_GLYPH_W, _GLYPH_H = 3, 5


def class_color(class_id: int):
    return PALETTE[int(class_id) % len(PALETTE)]


def format_label(det) -> str:
    """``x,y wxh s=score`` with rounded integer geometry."""
    x = int(round(det.box[0]))
    y = int(round(det.box[1]))
    w = int(round(det.box[2] - det.box[0]))
    h = int(round(det.box[3] - det.box[1]))
    return f"{x},{y} {w}x{h} s={det.score:.2f}"


def _ensure_color(image: np.ndarray) -> np.ndarray:
    if image.ndim == 2:
        return np.stack([image] * 3, axis=-1).copy()
    return image.copy()


def _draw_rect(img: np.ndarray, box, color) -> None:
    h, w = img.shape[:2]
    x1 = int(np.clip(round(box[0]), 0, w - 1))
    y1 = int(np.clip(round(box[1]), 0, h - 1))
    x2 = int(np.clip(round(box[2]), 0, w - 1))
    y2 = int(np.clip(round(box[3]), 0, h - 1))
    img[y1, x1 : x2 + 1] = color
    img[y2, x1 : x2 + 1] = color
    img[y1 : y2 + 1, x1] = color
    img[y1 : y2 + 1, x2] = color


def _draw_text(img: np.ndarray, x: int, y: int, text: str, color) -> None:
    h, w = img.shape[:2]
    cx = x
    for ch in text:
        glyph = _GLYPHS.get(ch)
        if glyph is None:
            glyph = _GLYPHS[" "]
        for gy in range(_GLYPH_H):
            for gx in range(_GLYPH_W):
                if glyph[gy][gx] == "#":
                    py, px = y + gy, cx + gx
                    if 0 <= py < h and 0 <= px < w:
                        img[py, px] = color
        cx += _GLYPH_W + 1


def render_overlay(image, detections) -> np.ndarray:
    """Annotated copy of the image; zero detections returns an exact copy."""
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise ValueError("overlay rendering expects a uint8 image")
    out = _ensure_color(image)
    for det in detections:
        color = class_color(det.class_id)
        _draw_rect(out, det.box, color)
        ty = int(round(det.box[1])) - _GLYPH_H - 2
        if ty < 0:
            ty = int(round(det.box[1])) + 2
        _draw_text(out, int(round(det.box[0])), ty, format_label(det), color)
    return out


def render_svg(width: int, height: int, detections) -> str:
    """Standalone SVG with one rect and one text element per detection."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    ]
    for det in detections:
        r, g, b = class_color(det.class_id)
        color = f"rgb({r},{g},{b})"
        x, y = det.box[0], det.box[1]
        w, h = det.box[2] - det.box[0], det.box[3] - det.box[1]
        parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
            f'fill="none" stroke="{color}" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{max(y - 2.0, 8.0):.2f}" font-size="8" '
            f'font-family="monospace" fill="{color}">{format_label(det)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
