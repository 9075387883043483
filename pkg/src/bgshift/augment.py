"""Categorical augmentation: insert an object of a new category into free space."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import EmptyDonorPool, EmptyMask, OutOfBounds
from .geometry import BBox, PositionGrid, candidate_grid, intersects
from .records import AnnotatedImage, Annotation, ObjectCutout
from .replace import composite
from .rng import stream


@dataclass(frozen=True)
class AugmentParams:
    n_positions: int = 100
    alpha: float = 2.0
    n_r: int = 2
    min_free_positions: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 1:
            raise ValueError("alpha must be > 1")
        if self.n_positions < 1 or self.n_r < 0 or self.min_free_positions < 1:
            raise ValueError("n_positions and min_free_positions must be >= 1, n_r >= 0")


@dataclass(frozen=True)
class Attempt:
    """One placement try: cutout size and how many grid points were free."""

    w: int
    h: int
    free: int


@dataclass(frozen=True)
class Augmented:
    image: AnnotatedImage
    donor_index: int
    position: Tuple[int, int]
    cutout: ObjectCutout
    attempts: Tuple[Attempt, ...]


@dataclass(frozen=True)
class Skipped:
    reason: str
    attempts: Tuple[Attempt, ...] = ()
    donor_index: Optional[int] = None


def free_positions(img: AnnotatedImage, cutout_w: int, cutout_h: int,
                   grid: PositionGrid) -> List[Tuple[int, int]]:
    """Grid points where a cutout anchored at its top-left fits and touches no box."""
    free = []
    boxes = [a.bbox for a in img.annotations]
    for x, y in grid:
        if x + cutout_w > img.width or y + cutout_h > img.height:
            continue
        cand = BBox(x, y, cutout_w, cutout_h)
        if not any(intersects(cand, b) for b in boxes):
            free.append((x, y))
    return free


def find_placement(img: AnnotatedImage, cutout_w: int, cutout_h: int,
                   grid: PositionGrid, rng: np.random.Generator) -> Optional[Tuple[int, int]]:
    free = free_positions(img, cutout_w, cutout_h, grid)
    if not free:
        return None
    return free[int(rng.integers(len(free)))]


def place_object(img: AnnotatedImage, cutout: ObjectCutout, pos: Tuple[int, int]) -> AnnotatedImage:
    """Composite ``cutout`` at ``pos`` and append its annotation; ``img`` is untouched."""
    x, y = pos
    if x < 0 or y < 0 or x + cutout.native_w > img.width or y + cutout.native_h > img.height:
        raise OutOfBounds(f"cutout {cutout.native_w}x{cutout.native_h} at {pos} "
                          f"exceeds {img.width}x{img.height}")
    pixels = composite([(cutout, pos)], img.pixels)
    ann = Annotation(BBox(x, y, cutout.native_w, cutout.native_h), cutout.category_id,
                     cutout.description, cutout.description_type)
    return AnnotatedImage(pixels, img.annotations + (ann,), img.source_id)


def resize_schedule(w: int, h: int, alpha: float, n_r: int) -> List[Tuple[int, int]]:
    """Nominal sizes for attempt 0..n_r: native size divided by alpha**t."""
    return [(max(1, int(w / alpha ** t)), max(1, int(h / alpha ** t))) for t in range(n_r + 1)]


def categorical_augment(img: AnnotatedImage, donor_pool: Sequence[ObjectCutout],
                        params: AugmentParams = AugmentParams()) -> Union[Augmented, Skipped]:
    """Insert one randomly chosen donor of an unseen category into ``img``.

    Placement is retried at sizes shrunk by ``alpha`` while fewer than
    ``min_free_positions`` grid points are free; after ``n_r`` shrinks the
    image is skipped.
    """
    eligible = [i for i, d in enumerate(donor_pool) if d.category_id not in img.categories]
    if not eligible:
        raise EmptyDonorPool(f"no donor outside categories {sorted(img.categories)}")
    rng = stream(params.seed, "augment", img.source_id)
    donor_index = eligible[int(rng.integers(len(eligible)))]
    donor = donor_pool[donor_index]
    grid = candidate_grid(img.width, img.height, params.n_positions)

    attempts: List[Attempt] = []
    for w, h in resize_schedule(donor.native_w, donor.native_h, params.alpha, params.n_r):
        try:
            cut = donor.resized(w, h)
        except EmptyMask:
            return Skipped("cutout-vanished", tuple(attempts), donor_index)
        free = free_positions(img, cut.native_w, cut.native_h, grid)
        attempts.append(Attempt(cut.native_w, cut.native_h, len(free)))
        if len(free) >= params.min_free_positions:
            pos = free[int(rng.integers(len(free)))]
            return Augmented(place_object(img, cut, pos), donor_index, pos, cut, tuple(attempts))
    return Skipped("resize-exhausted", tuple(attempts), donor_index)
