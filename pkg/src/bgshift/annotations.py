"""COCO-style annotation documents.

Layout::

    {"images": [{"id", "file", "width", "height"}],
     "annotations": [{"image_id", "bbox": [x, y, w, h], "category_id",
                      "description"?, "description_type"?}],
     "categories": [{"id", "name"}]}

Image files are resolved relative to the document. Masks live in a separate
directory as ``<image_id>_<n>.png`` where ``n`` is the annotation's position
among that image's annotations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .artifacts import load_mask, load_rgb, read_json, write_json
from .errors import ConfigInvalid, IoFailure
from .evaluation import Prediction
from .geometry import BBox, Mask
from .records import AnnotatedImage, Annotation
from .select import IndexEntry


@dataclass(frozen=True)
class ImageInfo:
    id: str
    file: str
    width: int
    height: int


@dataclass
class AnnotationDoc:
    images: List[ImageInfo]
    annotations: Dict[str, List[Annotation]]
    categories: List[dict]
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self):
        self._by_id = {im.id: im for im in self.images}

    def image_ids(self) -> List[str]:
        return [im.id for im in self.images]

    def info(self, image_id: str) -> ImageInfo:
        return self._by_id[image_id]

    def load_image(self, image_id: str) -> AnnotatedImage:
        info = self._by_id[image_id]
        pixels = load_rgb(self.base_dir / info.file)
        if pixels.shape[:2] != (info.height, info.width):
            raise IoFailure(self.base_dir / info.file,
                            f"is {pixels.shape[1]}x{pixels.shape[0]}, document says {info.width}x{info.height}")
        return AnnotatedImage(pixels, self.annotations.get(image_id, []), image_id)

    def index(self) -> List[IndexEntry]:
        entries = []
        for im in self.images:
            anns = self.annotations.get(im.id, [])
            if anns:
                entries.append(IndexEntry(im.id, {a.category_id for a in anns}, len(anns)))
        return entries

    def subset(self, ids: Sequence[str]) -> "AnnotationDoc":
        keep = set(ids)
        return AnnotationDoc([im for im in self.images if im.id in keep],
                             {k: v for k, v in self.annotations.items() if k in keep},
                             self.categories, self.base_dir)


def mask_name(image_id: str, n: int) -> str:
    return f"{image_id}_{n}.png"


def load_masks(masks_dir, image_id: str, count: int) -> List[Mask]:
    return [load_mask(Path(masks_dir) / mask_name(image_id, n)) for n in range(count)]


def load_doc(path) -> AnnotationDoc:
    path = Path(path)
    raw = read_json(path)
    try:
        images = [ImageInfo(str(im["id"]), im["file"], int(im["width"]), int(im["height"]))
                  for im in raw["images"]]
        categories = list(raw.get("categories", []))
        cat_ids = {int(c["id"]) for c in categories}
        by_id = {im.id: im for im in images}
        if len(by_id) != len(images):
            raise ConfigInvalid(f"{path}: duplicate image ids")
        annotations: Dict[str, List[Annotation]] = {im.id: [] for im in images}
        for a in raw.get("annotations", []):
            image_id = str(a["image_id"])
            if image_id not in by_id:
                raise ConfigInvalid(f"{path}: annotation references unknown image {image_id!r}")
            cat = int(a["category_id"])
            if categories and cat not in cat_ids:
                raise ConfigInvalid(f"{path}: annotation references unknown category {cat}")
            box = BBox(*a["bbox"])
            info = by_id[image_id]
            if not box.within(info.width, info.height):
                raise ConfigInvalid(f"{path}: bbox {a['bbox']} outside image {image_id!r}")
            annotations[image_id].append(Annotation(
                box, cat, a.get("description"), a.get("description_type"), a.get("mask")))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        raise ConfigInvalid(f"{path}: malformed annotation document ({exc})") from exc
    return AnnotationDoc(images, annotations, categories, path.parent)


def annotation_row(image_id: str, ann: Annotation) -> dict:
    row = {"image_id": image_id, "bbox": ann.bbox.as_list(), "category_id": ann.category_id}
    if ann.description is not None:
        row["description"] = ann.description
    if ann.description_type is not None:
        row["description_type"] = ann.description_type
    if ann.mask_ref is not None:
        row["mask"] = ann.mask_ref
    return row


def doc_json(images: Sequence[ImageInfo], annotations: Dict[str, Sequence[Annotation]],
             categories: Sequence[dict], prov: Optional[dict] = None) -> dict:
    doc = {
        "images": [{"id": im.id, "file": im.file, "width": im.width, "height": im.height} for im in images],
        "annotations": [annotation_row(im.id, a) for im in images for a in annotations.get(im.id, [])],
        "categories": list(categories),
    }
    if prov is not None:
        doc["provenance"] = prov
    return doc


def write_doc(path, images, annotations, categories, prov: Optional[dict] = None) -> None:
    write_json(path, doc_json(images, annotations, categories, prov))


def load_predictions(path) -> List[Prediction]:
    """Predictions as ``{"predictions": [...]}`` or a bare list of
    ``{image_id, bbox, category_id, score}`` objects."""
    raw = read_json(path)
    rows = raw.get("predictions", []) if isinstance(raw, dict) else raw
    try:
        return [Prediction(str(r["image_id"]), BBox(*r["bbox"]), int(r["category_id"]), float(r["score"]))
                for r in rows]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"{path}: malformed predictions ({exc})") from exc


def write_predictions(path, preds: Sequence[Prediction], prov: Optional[dict] = None) -> None:
    doc = {"predictions": [{"image_id": p.image_id, "bbox": p.bbox.as_list(),
                            "category_id": p.label, "score": p.score} for p in preds]}
    if prov is not None:
        doc["provenance"] = prov
    write_json(path, doc)
