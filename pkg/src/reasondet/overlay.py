"""SVG overlay rendering of detection results.

Pure: normalized boxes scale to the given pixel dimensions, one
rectangle plus label per detection in input order, and a machine-
readable sidecar carries the same boxes in pixel space.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from .pipeline import PipelineResult

_PALETTE = ("#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#46f0f0", "#f032e6")


def pixel_boxes(result: PipelineResult, width_px: int, height_px: int) -> list[dict]:
    """Detections converted to pixel-space corner boxes, input order."""
    out = []
    for r in result.detections:
        out.append(
            {
                "phrase": r.phrase.normalized,
                "score": r.score,
                "x": (r.box.cx - r.box.w / 2.0) * width_px,
                "y": (r.box.cy - r.box.h / 2.0) * height_px,
                "w": r.box.w * width_px,
                "h": r.box.h * height_px,
            }
        )
    return out


def render_overlay(result: PipelineResult, width_px: int, height_px: int) -> tuple[str, dict]:
    """Render the annotation overlay.

    Returns the SVG document and a sidecar dict
    ``{width_px, height_px, boxes: [...]}`` whose boxes, re-normalized
    by the dimensions, reproduce the result's boxes.
    """
    if width_px <= 0 or height_px <= 0:
        raise ValueError(f"dimensions must be positive, got {width_px}x{height_px}")
    boxes = pixel_boxes(result, width_px, height_px)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{height_px}" '
        f'viewBox="0 0 {width_px} {height_px}">',
        '<g id="annotations">',
    ]
    for i, b in enumerate(boxes):
        color = _PALETTE[i % len(_PALETTE)]
        label = escape(f"{b['phrase']} {b['score']:.2f}")
        parts.append(
            f'<rect x="{b["x"]:g}" y="{b["y"]:g}" width="{b["w"]:g}" height="{b["h"]:g}" '
            f'fill="none" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{b["x"]:g}" y="{max(b["y"] - 4, 10):g}" fill="{color}" '
            f'font-size="14" font-family="sans-serif">{label}</text>'
        )
    parts.append("</g>")
    parts.append("</svg>")
    sidecar = {"width_px": width_px, "height_px": height_px, "boxes": boxes}
    return "\n".join(parts), sidecar
