"""Photometric corruptions at five severities, in the style of ImageNet-C / COCO-C.

Parameters are fractions of full scale (pixel values normalised to [0, 1]).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .rng import stream


class CorruptionKind(str, enum.Enum):
    GAUSSIAN_NOISE = "gaussian_noise"
    CONTRAST = "contrast"
    SATURATION = "saturation"
    LIGHTING = "lighting"


SEVERITY_PARAMS = {
    CorruptionKind.GAUSSIAN_NOISE: (0.04, 0.06, 0.08, 0.09, 0.10),  # noise sigma
    CorruptionKind.CONTRAST: (0.75, 0.5, 0.4, 0.3, 0.15),           # factor about mid-grey
    CorruptionKind.SATURATION: (0.9, 0.7, 0.5, 0.3, 0.1),           # chroma factor
    CorruptionKind.LIGHTING: (0.1, 0.2, 0.3, 0.4, 0.5),             # additive brightness
}
DEFAULT_SEVERITY = 3


@dataclass(frozen=True)
class CorruptionSpec:
    kind: CorruptionKind
    severity: int = DEFAULT_SEVERITY
    seed: int = 0
    param: Optional[float] = None  # overrides the severity table

    def __post_init__(self):
        object.__setattr__(self, "kind", CorruptionKind(self.kind))
        if not 1 <= self.severity <= 5:
            raise ValueError(f"severity must be in 1..5, got {self.severity}")

    @property
    def value(self) -> float:
        if self.param is not None:
            return self.param
        return SEVERITY_PARAMS[self.kind][self.severity - 1]

    @property
    def tag(self) -> str:
        return f"{self.kind.value}_s{self.severity}"


def scale_chroma(x: np.ndarray, factor: float) -> np.ndarray:
    """Scale HLS saturation by ``factor`` keeping hue and lightness.

    With hue and lightness fixed every channel moves linearly towards the
    lightness ``(max + min) / 2``, so no round trip through HLS is needed.
    """
    light = (x.max(axis=-1, keepdims=True) + x.min(axis=-1, keepdims=True)) / 2
    return light + factor * (x - light)


def corrupt(img: np.ndarray, spec: CorruptionSpec) -> np.ndarray:
    """Apply ``spec`` to a ``uint8`` RGB raster; the result is clipped to [0, 255]."""
    x = np.asarray(img, dtype=np.float64) / 255.0
    v = spec.value
    if spec.kind is CorruptionKind.GAUSSIAN_NOISE:
        rng = stream(spec.seed, "corrupt", spec.kind.value, spec.severity)
        x = x + rng.normal(0.0, v, size=x.shape)
    elif spec.kind is CorruptionKind.CONTRAST:
        x = (x - 0.5) * v + 0.5
    elif spec.kind is CorruptionKind.SATURATION:
        x = scale_chroma(x, v)
    elif spec.kind is CorruptionKind.LIGHTING:
        x = x + v
    return np.clip(np.rint(x * 255.0), 0, 255).astype(np.uint8)
