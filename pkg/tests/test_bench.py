from dataclasses import dataclass

import numpy as np
import pytest

from bgshift.bench import (build_background_variants, build_corruption_set, check_disjoint,
                           corruption_specs, expected_size)
from bgshift.errors import PoolOverlap, PoolTooSmall


@dataclass(frozen=True)
class MemRecord:
    record_id: str
    pixels: np.ndarray


def pool(n, seed=0):
    rng = np.random.default_rng(seed)
    return [MemRecord(f"b{i}", rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)) for i in range(n)]


def test_expected_size():
    assert expected_size(5) == 20
    assert expected_size(10578) == 42312
    assert expected_size(7, 0) == 7


def test_variants_count_and_annotations(corpus):
    data = corpus[:5]
    out = build_background_variants([i for i, _ in data], [m for _, m in data], pool(5), 3,
                                    loader=lambda r: r.pixels)
    assert len(out) == 20
    by_src = {}
    for s in out:
        by_src.setdefault(s.variant_of or s.sample_id, []).append(s)
    for img, _ in data:
        group = by_src[img.source_id]
        assert len(group) == 4
        assert all(s.image.annotations == img.annotations for s in group)
        assert len({s.background_id for s in group[1:]}) == 3


def test_overlap_and_pool_size(corpus):
    data = corpus[:2]
    with pytest.raises(PoolOverlap):
        build_background_variants([i for i, _ in data], [m for _, m in data], pool(4), 3,
                                  exclude_ids={"b2"}, loader=lambda r: r.pixels)
    with pytest.raises(PoolTooSmall):
        build_background_variants([i for i, _ in data], [m for _, m in data], pool(2), 3,
                                  loader=lambda r: r.pixels)
    check_disjoint(pool(3), {"x"})


def test_corruption_set(corpus):
    images = [i for i, _ in corpus[:3]]
    specs = corruption_specs()
    out = build_corruption_set(images, specs)
    assert len(out) == 4 * 3
    assert {s.corruption for s in out} == {f"{k}_s3" for k in
                                           ("gaussian_noise", "contrast", "saturation", "lighting")}
    assert all(s.image.annotations == next(i for i in images if i.source_id == s.variant_of).annotations
               for s in out)
    assert len(corruption_specs((1, 2, 3, 4, 5))) == 20
