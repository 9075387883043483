"""Axis-aligned box and binary mask geometry.

Boxes are ``(x, y, w, h)`` with a top-left origin. Pixel coordinates are
integers, but IoU works on continuous areas so float boxes (e.g. detector
predictions) are accepted too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .errors import EmptyMask


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box must have positive size, got w={self.w} h={self.h}")

    @classmethod
    def from_xyxy(cls, x1, y1, x2, y2) -> "BBox":
        return cls(x1, y1, x2 - x1, y2 - y1)

    @property
    def x2(self):
        return self.x + self.w

    @property
    def y2(self):
        return self.y + self.h

    @property
    def area(self):
        return self.w * self.h

    def as_list(self) -> list:
        return [self.x, self.y, self.w, self.h]

    def within(self, width, height) -> bool:
        return self.x >= 0 and self.y >= 0 and self.x2 <= width and self.y2 <= height

    def contains_point(self, px, py) -> bool:
        """True if pixel ``(px, py)`` lies inside the box."""
        return self.x <= px < self.x2 and self.y <= py < self.y2


def intersection_area(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0
    return iw * ih


def iou(a: BBox, b: BBox) -> float:
    inter = intersection_area(a, b)
    if inter == 0:
        return 0.0
    return inter / (a.area + b.area - inter)


def intersects(a: BBox, b: BBox) -> bool:
    """True iff the boxes share a region of positive area; touching edges do not count."""
    return intersection_area(a, b) > 0


@dataclass(frozen=True)
class Mask:
    """Binary raster; ``bits`` is a ``(height, width)`` boolean array."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {bits.shape}")
        object.__setattr__(self, "bits", bits.astype(bool, copy=False))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def is_empty(self) -> bool:
        return not self.bits.any()


def mask_to_bbox(m: Mask) -> BBox:
    """Tightest integer box containing every set bit of ``m``."""
    rows = np.flatnonzero(m.bits.any(axis=1))
    cols = np.flatnonzero(m.bits.any(axis=0))
    if rows.size == 0:
        raise EmptyMask("mask has no foreground pixels")
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return BBox(x0, y0, x1 - x0 + 1, y1 - y0 + 1)


@dataclass(frozen=True)
class PositionGrid:
    positions: Tuple[Tuple[int, int], ...]

    @property
    def count(self) -> int:
        return len(self.positions)

    def __iter__(self):
        return iter(self.positions)

    def __len__(self):
        return len(self.positions)


def grid_shape(n: int) -> Tuple[int, int]:
    """Columns and rows of the lattice holding ``n`` candidate points."""
    cols = math.isqrt(n - 1) + 1 if n > 1 else 1  # ceil(sqrt(n))
    rows = -(-n // cols)
    return cols, rows


def candidate_grid(image_w: int, image_h: int, n: int = 100) -> PositionGrid:
    """Deterministic lattice of ``n`` points with centered margins.

    Points fill row by row; the last row is truncated so that exactly ``n``
    points are returned.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if image_w <= 0 or image_h <= 0:
        raise ValueError("image dimensions must be positive")
    cols, rows = grid_shape(n)
    pitch_x = image_w / cols
    pitch_y = image_h / rows
    positions: List[Tuple[int, int]] = []
    for r in range(rows):
        y = int(pitch_y * (r + 0.5))
        for c in range(cols):
            if len(positions) == n:
                break
            positions.append((int(pitch_x * (c + 0.5)), y))
    return PositionGrid(tuple(positions))
