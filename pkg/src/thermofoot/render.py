"""Pseudocolor rendering and hotspot overlays."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .analysis import Hotspot, Verdict
from .radiometry import TemperatureMap

INVALID_RGB = (30, 30, 30)
CONFIRMED_RGB = (0, 255, 0)
REJECTED_RGB = (90, 160, 255)
DASH_PERIOD = 6  # 3 px on, 3 px off


def heat_palette() -> np.ndarray:
    """256-entry black-red-yellow-white ramp, index-monotone in warmth."""
    t = np.linspace(0.0, 1.0, 256)
    r = np.clip(3.0 * t, 0.0, 1.0)
    g = np.clip(3.0 * t - 1.0, 0.0, 1.0)
    b = np.clip(3.0 * t - 2.0, 0.0, 1.0)
    return (np.stack([r, g, b], axis=1) * 255.0).round().astype(np.uint8)


def temp_to_index(
    temps: np.ndarray, valid: np.ndarray, lo: float | None = None, hi: float | None = None
) -> np.ndarray:
    """Palette index per pixel; warmer never maps to a smaller index."""
    vals = temps[valid]
    if vals.size == 0:
        return np.zeros(temps.shape, dtype=np.uint8)
    lo = float(vals.min()) if lo is None else lo
    hi = float(vals.max()) if hi is None else hi
    span = hi - lo if hi > lo else 1.0
    scaled = np.clip((temps - lo) / span, 0.0, 1.0)
    idx = np.zeros(temps.shape, dtype=np.uint8)
    idx[valid] = np.floor(scaled[valid] * 255.0 + 0.5).astype(np.uint8)
    return idx


def pseudocolor(tmap: TemperatureMap) -> np.ndarray:
    """RGB uint8 rendering with invalid pixels in neutral gray."""
    idx = temp_to_index(tmap.temps, tmap.valid)
    rgb = heat_palette()[idx]
    rgb[~tmap.valid] = INVALID_RGB
    return rgb


def _draw_rect(rgb: np.ndarray, bbox, color, dashed: bool) -> None:
    r0, c0, r1, c1 = bbox
    h, w = rgb.shape[:2]
    r0 = max(0, min(r0, h - 1))
    r1 = max(0, min(r1, h - 1))
    c0 = max(0, min(c0, w - 1))
    c1 = max(0, min(c1, w - 1))

    def pen(offsets):
        if not dashed:
            return np.ones(len(offsets), dtype=bool)
        arr = np.asarray(offsets)
        return (arr // (DASH_PERIOD // 2)) % 2 == 0

    cols = np.arange(c0, c1 + 1)
    rows = np.arange(r0, r1 + 1)
    on_c = pen(cols - c0)
    on_r = pen(rows - r0)
    rgb[r0, cols[on_c]] = color
    rgb[r1, cols[on_c]] = color
    rgb[rows[on_r], c0] = color
    rgb[rows[on_r], c1] = color


def render_overlay(tmap: TemperatureMap, hotspots: list[Hotspot]) -> np.ndarray:
    """Pseudocolor plus bounding rectangles.

    Confirmed hotspots get solid outlines, rejected candidates dashed
    secondary ones.
    """
    rgb = pseudocolor(tmap)
    for spot in hotspots:
        if spot.verdict is Verdict.CONFIRMED or spot.verdict is None:
            _draw_rect(rgb, spot.bbox, CONFIRMED_RGB, dashed=False)
        else:
            _draw_rect(rgb, spot.bbox, REJECTED_RGB, dashed=True)
    return rgb


def save_png(rgb: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    Image.fromarray(rgb, mode="RGB").save(path)
    return path
