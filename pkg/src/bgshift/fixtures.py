"""Synthetic corpus generator used by the test suite and the ``make-fixture`` command.

Images hold non-overlapping elliptical or rectangular objects over a smooth
random backdrop; masks are exact, so every mask passes the quality filter.
The first half of the images contain a single category (candidates for
categorical augmentation), the rest mix categories.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .annotations import ImageInfo, mask_name, write_doc, write_predictions
from .artifacts import save_mask, save_png
from .evaluation import Prediction
from .features import write_features
from .ccloss import FeatureBatch
from .geometry import BBox, Mask, intersects, mask_to_bbox
from .records import AnnotatedImage, Annotation
from .rng import stream

CATEGORIES = ["ball", "crate", "kite", "leaf", "stone", "mug"]


def category_docs() -> List[dict]:
    return [{"id": i, "name": n} for i, n in enumerate(CATEGORIES)]


def description_type(category_id: int) -> str:
    return "presence" if category_id % 2 == 0 else "absence"


def _backdrop(rng, w, h) -> np.ndarray:
    ys, xs = np.mgrid[0:h, 0:w] / max(w, h)
    c0, c1 = rng.uniform(40, 215, size=(2, 3))
    t = (0.6 * ys + 0.4 * xs)[..., None]
    base = c0 * (1 - t) + c1 * t
    return np.clip(base + rng.normal(0, 6, size=(h, w, 3)), 0, 255).astype(np.uint8)


def _shape_mask(rng, w, h, box: BBox) -> np.ndarray:
    bits = np.zeros((h, w), dtype=bool)
    if rng.random() < 0.5:
        bits[box.y:box.y2, box.x:box.x2] = True
    else:
        ys, xs = np.mgrid[0:box.h, 0:box.w]
        cy, cx = (box.h - 1) / 2, (box.w - 1) / 2
        inside = ((ys - cy) / (box.h / 2)) ** 2 + ((xs - cx) / (box.w / 2)) ** 2 <= 1.0
        bits[box.y:box.y2, box.x:box.x2] = inside
    return bits


def synthetic_image(image_id: str, seed: int, width: int = 128, height: int = 128,
                    single_class: bool = True, n_objects: Optional[int] = None,
                    size_range: Tuple[int, int] = (14, 36)) -> Tuple[AnnotatedImage, List[Mask]]:
    rng = stream(seed, "fixture", image_id)
    pixels = _backdrop(rng, width, height)
    n = n_objects or int(rng.integers(1, 4))
    cats = [int(rng.integers(len(CATEGORIES)))] * n if single_class else \
        [int(c) for c in rng.choice(len(CATEGORIES), size=max(n, 2), replace=False)]
    anns, masks = [], []
    for cat in cats:
        for _ in range(200):
            w, h = (int(v) for v in rng.integers(size_range[0], size_range[1] + 1, size=2))
            x, y = int(rng.integers(0, width - w + 1)), int(rng.integers(0, height - h + 1))
            box = BBox(x, y, w, h)
            if not any(intersects(box, a.bbox) for a in anns):
                break
        else:
            continue
        bits = _shape_mask(rng, width, height, box)
        color = np.array([(cat * 53 + 40) % 256, (cat * 97 + 90) % 256, (cat * 31 + 160) % 256])
        shade = rng.normal(0, 10, size=(height, width, 3))
        pixels[bits] = np.clip(color + shade[bits], 0, 255).astype(np.uint8)
        m = Mask(bits)
        anns.append(Annotation(mask_to_bbox(m), cat, f"a {CATEGORIES[cat]}", description_type(cat)))
        masks.append(m)
    return AnnotatedImage(pixels, tuple(anns), image_id), masks


def synthetic_corpus(n: int = 20, seed: int = 0, width: int = 128, height: int = 128):
    """``n`` images with their masks; ids are ``img000``, ``img001``, ..."""
    out = []
    for i in range(n):
        out.append(synthetic_image(f"img{i:03d}", seed, width, height, single_class=i < n // 2))
    return out


def perfect_predictions(images) -> List[Prediction]:
    return [Prediction(img.source_id, a.bbox, a.category_id, 1.0) for img in images for a in img.annotations]


def noisy_predictions(images, seed: int = 0, jitter: float = 0.15, false_rate: float = 0.3) -> List[Prediction]:
    """Jittered true boxes with random scores plus some spurious boxes."""
    preds = []
    for img in images:
        rng = stream(seed, "noisy-preds", img.source_id)
        for a in img.annotations:
            if rng.random() < 0.1:
                continue
            b = a.bbox
            dx, dy = rng.normal(0, jitter, size=2) * (b.w, b.h)
            x = float(np.clip(b.x + dx, 0, img.width - b.w))
            y = float(np.clip(b.y + dy, 0, img.height - b.h))
            preds.append(Prediction(img.source_id, BBox(x, y, b.w, b.h), a.category_id,
                                    float(rng.uniform(0.3, 1.0))))
            if rng.random() < false_rate:
                w, h = (int(v) for v in rng.integers(8, 30, size=2))
                preds.append(Prediction(img.source_id,
                                        BBox(int(rng.integers(0, img.width - w)), int(rng.integers(0, img.height - h)), w, h),
                                        int(rng.integers(len(CATEGORIES))), float(rng.uniform(0.0, 0.6))))
    return preds


def write_corpus(out_dir, corpus, prov: Optional[dict] = None, seed: int = 0) -> Dict[str, Path]:
    """Write images, masks, annotations, predictions and a feature batch to ``out_dir``."""
    out = Path(out_dir)
    infos, anns = [], {}
    for img, masks in corpus:
        rel = f"images/{img.source_id}.png"
        save_png(out / rel, img.pixels, prov)
        for n, m in enumerate(masks):
            save_mask(out / "masks" / mask_name(img.source_id, n), m, prov)
        infos.append(ImageInfo(img.source_id, rel, img.width, img.height))
        anns[img.source_id] = list(img.annotations)
    paths = {
        "annotations": out / "annotations.json",
        "masks": out / "masks",
        "predictions": out / "predictions.json",
        "predictions_noisy": out / "predictions_noisy.json",
        "features": out / "features.fbt",
        "text_features": out / "text_features.fbt",
    }
    write_doc(paths["annotations"], infos, anns, category_docs(), prov)
    images = [img for img, _ in corpus]
    write_predictions(paths["predictions"], perfect_predictions(images), prov)
    write_predictions(paths["predictions_noisy"], noisy_predictions(images, seed), prov)
    rng = stream(seed, "fixture-features")
    write_features(paths["features"], FeatureBatch(rng.normal(size=(3, 4, 8)).astype(np.float32)))
    write_features(paths["text_features"], FeatureBatch(rng.normal(size=(3, 4, 8)).astype(np.float32), "text"))
    return paths
