"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``python3 tests/test_acceptance.py`` or as part of
``pytest``; the summary lines appear at the end of the session.
"""

import math
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from bgshift.augment import AugmentParams, Augmented, Skipped, categorical_augment
from bgshift.background import StubBackend
from bgshift.bench import build_background_variants, expected_size
from bgshift.ccloss import FeatureBatch, grad_check, modality_consistency_loss
from bgshift.cli import main
from bgshift.evaluation import COCO_THRESHOLDS, EvalSet, evaluate_ap, rfull
from bgshift.fixtures import noisy_predictions, synthetic_corpus
from bgshift.geometry import BBox, Mask
from bgshift.prompts import Theme
from bgshift.records import AnnotatedImage, Annotation, ObjectCutout
from bgshift.replace import (QualityFilterParams, VariantGroup, composite, expand_image,
                             extract_foreground, mask_quality_filter)

sys.path.insert(0, str(Path(__file__).parent))
from oracles import brute_force_ap, loop_loss  # noqa: E402

RESULTS = []


@contextmanager
def criterion(number, title, limit_s=None):
    """Record PASS/FAIL for one criterion; a time limit is part of the check."""
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        if limit_s is not None:
            assert elapsed < limit_s, f"took {elapsed:.2f}s, limit {limit_s}s"
    except BaseException as exc:
        RESULTS.append((number, "FAIL", title, f"{type(exc).__name__}: {exc}"))
        raise
    RESULTS.append((number, "PASS", title, f"{time.perf_counter() - start:.2f}s"))


def test_c01_rfull_rows():
    with criterion(1, "rFULL arithmetic on the four published rows", 1.0):
        rows = [((13.6, 19.1), 71.2), ((21.7, 30.0), 72.3), ((16.7, 22.7), 73.6), ((27.5, 37.6), 73.1)]
        for (m, f), expected in rows:
            assert rfull(m, f) == expected, (m, f, rfull(m, f))


def stub_pool(n, size):
    be = StubBackend()

    class Rec:
        def __init__(self, i):
            self.record_id = f"bg{i}"
            self.pixels = be.generate(f"pool {i}", i, size, size, Theme.SKY)

    return [Rec(i) for i in range(n)]


def test_c02_benchmark_sizing():
    corpus = synthetic_corpus(50, seed=21, width=512, height=512)
    pool = stub_pool(6, 512)
    with criterion(2, "benchmark sizing 4n, annotations identical, n=50 at 512x512", 30.0):
        assert expected_size(10578, 3) == 42312
        samples = build_background_variants([i for i, _ in corpus], [m for _, m in corpus], pool, 3,
                                            seed=4, loader=lambda r: r.pixels)
        assert len(samples) == 4 * 50
        by_id = {img.source_id: img for img, _ in corpus}
        for s in samples:
            src = by_id[s.variant_of or s.sample_id]
            assert s.image.annotations == src.annotations
            assert s.image.pixels.shape == src.pixels.shape


def test_c03_loss_analytic_values():
    with criterion(3, "loss 0 for C=K=1 and log(CK) for identical vectors", 1.0):
        assert modality_consistency_loss(FeatureBatch(np.array([[[0.2, -0.7, 1.1]]]))) == 0.0
        for C in range(1, 5):
            for K in range(1, 5):
                fb = FeatureBatch(np.tile(np.array([0.5, -1.0, 2.0, 0.1]), (C, K, 1)))
                assert abs(modality_consistency_loss(fb) - math.log(C * K)) <= 1e-9


def test_c04_gradient_check():
    rng = np.random.default_rng(404)
    with criterion(4, "analytic gradient vs central differences, 20 batches", 10.0):
        worst = 0.0
        for _ in range(20):
            C, K = (int(v) for v in rng.integers(1, 5, size=2))
            D = int(rng.integers(1, 9))
            fb = FeatureBatch(rng.normal(size=(C, K, D)))
            worst = max(worst, grad_check(fb, 1.0, 1e-4))
        assert worst < 1e-4, worst


def test_c05_invariance_suite():
    rng = np.random.default_rng(505)
    with criterion(5, "scale, permutation and nonnegativity invariants"):
        for _ in range(100):
            C, K, D = int(rng.integers(1, 5)), int(rng.integers(1, 5)), int(rng.integers(1, 9))
            v = rng.normal(size=(C, K, D))
            base = modality_consistency_loss(FeatureBatch(v))
            for factor in (1e-3, 1.0, 1e3):
                scaled = modality_consistency_loss(FeatureBatch(v * factor))
                assert abs(scaled - base) <= 1e-9 * abs(base) or scaled == base
            assert modality_consistency_loss(FeatureBatch(v[:, rng.permutation(K)])) == base
            assert modality_consistency_loss(FeatureBatch(v[rng.permutation(C)])) == base
        for _ in range(1000):
            shape = tuple(int(s) for s in rng.integers(1, 5, size=3))
            assert modality_consistency_loss(FeatureBatch(rng.normal(size=shape)),
                                             float(rng.uniform(0.05, 5.0))) >= 0.0


def small_fixtures():
    """Evaluation sets of at most five images and ten boxes, plus feature batches."""
    corpus = synthetic_corpus(20, seed=11)
    sets = []
    for start in range(0, 20, 5):
        imgs = [img for img, _ in corpus[start:start + 5]]
        while sum(len(i.annotations) for i in imgs) > 10:
            imgs.pop()
        for seed in range(3):
            sets.append(EvalSet({i.source_id: list(i.annotations) for i in imgs},
                                noisy_predictions(imgs, seed=seed)))
    rng = np.random.default_rng(606)
    batches = [rng.normal(size=tuple(int(s) for s in rng.integers(1, 5, size=3))) for _ in range(20)]
    return sets, batches


def test_c06_oracle_equivalence():
    sets, batches = small_fixtures()
    with criterion(6, "loss and AP match scalar-loop / enumeration oracles"):
        for v in batches:
            for tau in (0.1, 1.0):
                got = modality_consistency_loss(FeatureBatch(v), tau)
                want = loop_loss(v.tolist(), tau)
                assert abs(got - want) <= 1e-6 * max(abs(want), 1e-12)
        for es in sets:
            gt = {k: [(a.category_id, tuple(a.bbox.as_list())) for a in v] for k, v in es.ground_truth.items()}
            preds = [(p.image_id, p.label, tuple(p.bbox.as_list()), p.score) for p in es.predictions]
            want = brute_force_ap(gt, preds, COCO_THRESHOLDS)
            got = evaluate_ap(es)
            assert abs(got - want) <= 1e-6 * max(abs(want), 1e-12) or got == want


def test_c07_compositing_exactness():
    rng = np.random.default_rng(707)
    corpus = synthetic_corpus(20, seed=11)
    pool = stub_pool(6, 128)
    with criterion(7, "round trip bit-exact; foreground preserved on every variant"):
        for _ in range(100):
            w, h = (int(v) for v in rng.integers(4, 64, size=2))
            img = AnnotatedImage(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))
            bits = rng.random((h, w)) < rng.uniform(0.05, 0.95)
            bits[rng.integers(h), rng.integers(w)] = True
            cut = extract_foreground(img, Mask(bits))
            assert np.array_equal(composite([(cut, cut.origin)], img.pixels), img.pixels)
        variants = 0
        for img, masks in corpus:
            group = expand_image(img, masks, pool, 4, seed=3, loader=lambda r: r.pixels)
            assert isinstance(group, VariantGroup)
            fg = np.logical_or.reduce([m.bits for m in masks])
            for v in group.variants:
                assert np.array_equal(v.pixels[fg], img.pixels[fg])
                variants += 1
        assert variants == 80


def test_c08_mask_quality_threshold():
    with criterion(8, "T_IoU=0.75 gives Reject/Reject/Accept at 0.74/0.75/0.76"):
        gt = BBox(0, 0, 100, 100)
        outcomes = []
        for rows in (74, 75, 76):
            bits = np.zeros((100, 100), bool)
            bits[:rows] = True
            res = mask_quality_filter(Mask(bits), gt, QualityFilterParams(0.75))
            assert abs(res.iou - rows / 100) < 1e-12
            outcomes.append(res.accepted)
        assert outcomes == [False, False, True]


def _solid(w, h):
    px = np.zeros((h, w, 4), np.uint8)
    px[..., 0] = 220
    px[..., 3] = 255
    return ObjectCutout(px, 7)


def test_c09_categorical_augmentation():
    # only the 40x40 bottom-right corner of a 100x100 image is free
    scene = AnnotatedImage(np.zeros((100, 100, 3), np.uint8),
                           (Annotation(BBox(0, 0, 100, 60), 0), Annotation(BBox(0, 60, 60, 40), 0)), "s")
    params = AugmentParams(n_positions=100, alpha=2, n_r=2, min_free_positions=5, seed=9)
    rng = np.random.default_rng(909)
    with criterion(9, "resize sequence and outcome; 0 overlaps in 500 runs"):
        for _ in range(2):
            skip = categorical_augment(scene, [_solid(64, 64)], params)
            assert isinstance(skip, Skipped) and skip.reason == "resize-exhausted"
            assert [(a.w, a.h, a.free) for a in skip.attempts] == [(64, 64, 0), (32, 32, 1), (16, 16, 4)]
        runs = [categorical_augment(scene, [_solid(32, 32)], params) for _ in range(2)]
        for ok in runs:
            assert isinstance(ok, Augmented)
            assert [(a.w, a.h, a.free) for a in ok.attempts] == [(32, 32, 1), (16, 16, 4), (8, 8, 9)]
        assert runs[0].position == runs[1].position
        assert runs[0].image.pixels.tobytes() == runs[1].image.pixels.tobytes()

        donors = [ObjectCutout(np.concatenate([rng.integers(1, 256, size=(h, w, 3)),
                                               np.full((h, w, 1), 255)], axis=2).astype(np.uint8), 5)
                  for w, h in rng.integers(2, 50, size=(12, 2))]
        overlaps = inserted = 0
        for i in range(500):
            W, H = (int(v) for v in rng.integers(40, 160, size=2))
            anns = []
            for _ in range(int(rng.integers(0, 8))):
                bw, bh = int(rng.integers(1, W // 2 + 1)), int(rng.integers(1, H // 2 + 1))
                anns.append(Annotation(BBox(int(rng.integers(0, W - bw + 1)), int(rng.integers(0, H - bh + 1)),
                                            bw, bh), int(rng.integers(0, 3))))
            img = AnnotatedImage(np.zeros((H, W, 3), np.uint8), tuple(anns), f"r{i}")
            res = categorical_augment(img, donors, AugmentParams(seed=i))
            if not isinstance(res, Augmented):
                continue
            inserted += 1
            new = res.image.annotations[-1].bbox
            grid = np.zeros((H, W), bool)
            grid[new.y:new.y2, new.x:new.x2] = True
            if grid.sum() != new.w * new.h:
                overlaps += 1
            for a in anns:
                if grid[a.bbox.y:a.bbox.y2, a.bbox.x:a.bbox.x2].any():
                    overlaps += 1
        assert overlaps == 0 and inserted > 0


def _run_pipeline(root: Path, data: Path, workers: int):
    common = ["--seed", "77", "--workers", str(workers)]
    steps = [
        ["select", "--out", root / "sel", "--annotations", data / "annotations.json", "--budget", "12"],
        ["augment", "--out", root / "aug", "--annotations", data / "annotations.json",
         "--masks", data / "masks", "--selected", root / "sel" / "selected_ids.txt"],
        ["gen-bg", "--out", root / "bg", "--backend", "stub", "--seeds-per-prompt", "1",
         "--set", "genbg.width=128", "--set", "genbg.height=128"],
        ["gen-bg", "--out", root / "bgtest", "--backend", "stub", "--seeds-per-prompt", "1",
         "--set", "genbg.width=128", "--set", "genbg.height=128", "--set", "genbg.prompt_offset=50"],
        ["replace", "--out", root / "rep", "--annotations", root / "aug" / "annotations.json",
         "--masks", root / "aug" / "masks", "--backgrounds", root / "bg" / "manifest.jsonl"],
        ["build-bench", "--out", root / "bench", "--annotations", data / "annotations.json",
         "--masks", data / "masks", "--backgrounds", root / "bgtest" / "manifest.jsonl",
         "--exclude", root / "bg" / "manifest.jsonl"],
        ["eval", "--out", root / "eval", "--gt", data / "annotations.json",
         "--pred", data / "predictions_noisy.json",
         "--corrupted", f"contrast_s3={data / 'predictions_noisy.json'}",
         "--corrupted", f"lighting_s3={data / 'predictions.json'}"],
    ]
    for argv in steps:
        code = main([str(a) for a in argv] + common)
        assert code == 0, argv[0]


def _tree(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.slow
def test_c10_end_to_end_determinism(tmp_path, fixture_dir, capsys):
    with criterion(10, "pipeline twice and with workers 1/8 gives identical trees"):
        _run_pipeline(tmp_path / "a", fixture_dir, 1)
        _run_pipeline(tmp_path / "b", fixture_dir, 1)
        _run_pipeline(tmp_path / "c", fixture_dir, 8)
        capsys.readouterr()
        a, b, c = (_tree(tmp_path / n) for n in "abc")
        assert len(a) > 100
        assert any(k.endswith(".png") and k.startswith("eval") for k in a)
        for other in (b, c):
            assert sorted(other) == sorted(a)
            diff = [k for k in a if a[k] != other[k]]
            assert not diff, diff[:5]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
