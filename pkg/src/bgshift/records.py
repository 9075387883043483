"""Images, annotations and object cutouts flowing through the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
from PIL import Image

from .errors import EmptyMask
from .geometry import BBox, Mask, mask_to_bbox

OPAQUE = 128  # alpha at or above this is foreground


@dataclass(frozen=True)
class Annotation:
    bbox: BBox
    category_id: int
    description: Optional[str] = None
    description_type: Optional[str] = None  # "presence" | "absence"
    mask_ref: Optional[str] = None

    def __post_init__(self):
        if self.category_id < 0:
            raise ValueError(f"category_id must be >= 0, got {self.category_id}")
        if self.description_type not in (None, "presence", "absence"):
            raise ValueError(f"unknown description_type {self.description_type!r}")


@dataclass(frozen=True)
class AnnotatedImage:
    """RGB raster (``uint8``, shape ``(h, w, 3)``) plus its object annotations."""

    pixels: np.ndarray
    annotations: Tuple[Annotation, ...] = ()
    source_id: str = ""

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ValueError(f"expected uint8 (h, w, 3) raster, got {px.dtype} {px.shape}")
        object.__setattr__(self, "annotations", tuple(self.annotations))
        for ann in self.annotations:
            if not ann.bbox.within(self.width, self.height):
                raise ValueError(f"{self.source_id}: bbox {ann.bbox} outside {self.width}x{self.height}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def categories(self) -> frozenset:
        return frozenset(a.category_id for a in self.annotations)


@dataclass(frozen=True)
class ObjectCutout:
    """Foreground pixels with binary transparency.

    ``pixels`` is ``uint8`` RGBA cropped to the tight box of the opaque
    region. ``origin`` records where the crop sat in its source image.
    """

    pixels: np.ndarray
    category_id: int
    origin: Optional[Tuple[int, int]] = None
    description: Optional[str] = None
    description_type: Optional[str] = None
    source_id: str = field(default="", compare=False)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 4 or px.dtype != np.uint8:
            raise ValueError(f"expected uint8 (h, w, 4) raster, got {px.dtype} {px.shape}")
        opaque = px[..., 3] >= OPAQUE
        if not opaque.any():
            raise EmptyMask("cutout has no opaque pixel")
        tight = mask_to_bbox(Mask(opaque))
        if (tight.x, tight.y, tight.w, tight.h) != (0, 0, px.shape[1], px.shape[0]):
            raise ValueError("cutout must be cropped to its opaque region")

    @property
    def native_w(self) -> int:
        return self.pixels.shape[1]

    @property
    def native_h(self) -> int:
        return self.pixels.shape[0]

    @property
    def opaque(self) -> np.ndarray:
        return self.pixels[..., 3] >= OPAQUE

    def resized(self, w: int, h: int) -> "ObjectCutout":
        """Area-average resample to ``w`` x ``h``, re-binarize alpha and re-crop."""
        if (w, h) == (self.native_w, self.native_h):
            return self
        img = Image.fromarray(self.pixels, "RGBA").resize((w, h), Image.Resampling.BOX)
        px = np.array(img)
        opaque = px[..., 3] >= OPAQUE
        if not opaque.any():
            raise EmptyMask(f"cutout vanished when resized to {w}x{h}")
        px[..., 3] = np.where(opaque, 255, 0).astype(np.uint8)
        tight = mask_to_bbox(Mask(opaque))
        px = px[tight.y:tight.y2, tight.x:tight.x2].copy()
        return replace(self, pixels=px, origin=None)
