"""Robustness benchmark builders: background-swapped and corrupted copies of a test set."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence

from .corruption import CorruptionKind, CorruptionSpec, DEFAULT_SEVERITY, corrupt
from .errors import PoolOverlap, PoolTooSmall
from .geometry import Mask
from .records import AnnotatedImage
from .replace import QualityFilterParams, Rejected, expand_image


@dataclass(frozen=True)
class BenchSample:
    sample_id: str
    image: AnnotatedImage
    variant_of: Optional[str] = None
    background_id: Optional[str] = None
    corruption: Optional[str] = None

    def index_row(self) -> dict:
        return {"sample_id": self.sample_id, "variant_of": self.variant_of,
                "background_id": self.background_id, "corruption": self.corruption}


def expected_size(n_images: int, variants_per_image: int = 3) -> int:
    return n_images * (1 + variants_per_image)


def check_disjoint(pool: Sequence, exclude_ids: Iterable[str]) -> None:
    shared = {r.record_id for r in pool} & set(exclude_ids)
    if shared:
        raise PoolOverlap(f"{len(shared)} benchmark backgrounds also used in training, "
                          f"e.g. {sorted(shared)[0]}")


def build_background_variants(dataset: Sequence[AnnotatedImage], masks: Sequence[Sequence[Mask]],
                              pool: Sequence, variants_per_image: int = 3, seed: int = 0, *,
                              exclude_ids: Iterable[str] = (),
                              quality: Optional[QualityFilterParams] = None,
                              loader: Callable = None) -> List[BenchSample]:
    """Each image followed by ``variants_per_image`` background-swapped copies.

    Masks are not quality-filtered unless ``quality`` is given, so the
    benchmark keeps every test image.
    """
    check_disjoint(pool, exclude_ids)
    if len(pool) < variants_per_image:
        raise PoolTooSmall(f"pool holds {len(pool)} backgrounds, need {variants_per_image}")
    if len(masks) != len(dataset):
        raise ValueError(f"{len(masks)} mask lists for {len(dataset)} images")
    out: List[BenchSample] = []
    for img, img_masks in zip(dataset, masks):
        out.append(BenchSample(img.source_id, img))
        group = expand_image(img, img_masks, pool, variants_per_image,
                             quality or QualityFilterParams(), seed,
                             apply_filter=quality is not None, loader=loader)
        if isinstance(group, Rejected):
            continue
        for j, (variant, bg_id) in enumerate(zip(group.variants, group.background_ids), 1):
            out.append(BenchSample(f"{img.source_id}__bg{j}", variant, img.source_id, bg_id))
    return out


def corruption_specs(severities: Sequence[int] = (DEFAULT_SEVERITY,), seed: int = 0) -> List[CorruptionSpec]:
    return [CorruptionSpec(kind, s, seed) for kind in CorruptionKind for s in severities]


def build_corruption_set(dataset: Sequence[AnnotatedImage], specs: Sequence[CorruptionSpec]) -> List[BenchSample]:
    """Corrupted copies of every image under every spec; boxes are unchanged."""
    out = []
    for spec in specs:
        for img in dataset:
            pixels = corrupt(img.pixels, spec)
            out.append(BenchSample(img.source_id, AnnotatedImage(pixels, img.annotations, img.source_id),
                                   img.source_id, corruption=spec.tag))
    return out
