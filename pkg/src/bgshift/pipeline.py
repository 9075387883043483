"""Command implementations: each takes a merged config dict and returns a summary dict.

Per-image work runs on a thread pool; results are gathered in input order
and every random stream is keyed by image id, so the worker count never
changes the output bytes.
"""

from __future__ import annotations

import functools
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace as dc_replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .annotations import (AnnotationDoc, ImageInfo, load_doc, load_masks, load_predictions,
                          mask_name, write_doc)
from .artifacts import (load_rgb, provenance, relpath, save_mask, save_png, write_json,
                        write_jsonl)
from .augment import AugmentParams, Augmented, categorical_augment
from .background import (BackgroundSetConfig, HttpBackend, StubBackend, build_background_set,
                         read_manifest)
from .bench import build_background_variants, build_corruption_set, check_disjoint, corruption_specs
from .ccloss import LossConfig, consistency_loss, grad_check, modality_consistency_loss
from .config import digest_params, require_path
from .corruption import CorruptionKind, CorruptionSpec
from .errors import ConfigInvalid, EmptyDonorPool, EmptyGroundTruth
from .evaluation import COCO_THRESHOLDS, EvalSet, Partition, evaluate_ap, mfull, pr_curve, rfull
from .features import read_features
from .fixtures import synthetic_corpus, write_corpus
from .geometry import Mask
from .records import AnnotatedImage
from .replace import QualityFilterParams, Rejected, expand_image, extract_foreground, mask_quality_filter
from .report import metrics_table, plot_pr_curves, plot_robustness
from .rng import derive_seed
from .select import SelectionParams, select_subset

log = logging.getLogger(__name__)


def _prov(cfg: dict, command: str) -> dict:
    params = digest_params(cfg)
    params["command"] = command
    return provenance(params, cfg["seed"])


def _pmap(cfg: dict, fn, items: Sequence) -> list:
    workers = max(1, int(cfg.get("workers") or 1))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _save_png_once(path: Path, pixels: np.ndarray, prov: dict) -> None:
    if not path.exists():
        save_png(path, pixels, prov)


def _out(cfg: dict) -> Path:
    out = Path(cfg["out"] or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def read_ids(path) -> List[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip() and not ln.startswith("#")]


def write_ids(path, ids: Sequence[str], prov: dict) -> None:
    import json

    text = f"# provenance: {json.dumps(prov, sort_keys=True)}\n" + "".join(f"{i}\n" for i in ids)
    Path(path).write_text(text, encoding="utf-8")


def _load_with_masks(doc: AnnotationDoc, masks_dir: Path, image_id: str):
    img = doc.load_image(image_id)
    return img, load_masks(masks_dir, image_id, len(img.annotations))


# -- select -------------------------------------------------------------------

def cmd_select(cfg: dict) -> dict:
    doc = load_doc(require_path(cfg, "annotations"))
    sel = cfg["select"]
    params = SelectionParams(sel.get("budget"), sel.get("reduction_factor"))
    ids = select_subset(doc.index(), params)
    out = _out(cfg) / "selected_ids.txt"
    write_ids(out, ids, _prov(cfg, "select"))
    return {"selected": len(ids), "path": str(out)}


# -- augment ------------------------------------------------------------------

def _donor_pool(items, qp: QualityFilterParams):
    pool = []
    for img, masks in items:
        for ann, m in zip(img.annotations, masks):
            if m.is_empty() or not mask_quality_filter(m, ann.bbox, qp).accepted:
                continue
            pool.append(extract_foreground(img, m, ann.category_id, description=ann.description,
                                           description_type=ann.description_type))
    return pool


def cmd_augment(cfg: dict) -> dict:
    doc = load_doc(require_path(cfg, "annotations"))
    masks_dir = require_path(cfg, "masks", "dir")
    if cfg.get("selected"):
        keep = set(read_ids(require_path(cfg, "selected")))
        doc = doc.subset([i for i in doc.image_ids() if i in keep])
    a = cfg["augment"]
    qp = QualityFilterParams(cfg["quality"]["t_iou"])
    params = AugmentParams(a["n_positions"], a["alpha"], a["n_r"], a["min_free_positions"], cfg["seed"])
    items = _pmap(cfg, lambda i: _load_with_masks(doc, masks_dir, i), doc.image_ids())
    donors = _donor_pool(items, qp)
    out = _out(cfg)
    prov = _prov(cfg, "augment")

    def work(item):
        img, masks = item
        masks = list(masks)
        entry = {"image_id": img.source_id, "status": "passthrough", "insertions": []}
        if not (a["single_class_only"] and len(img.categories) > 1):
            for r in range(int(a["repeat"])):
                p = params if r == 0 else dc_replace(params, seed=derive_seed(params.seed, "repeat", r))
                try:
                    res = categorical_augment(img, donors, p)
                except EmptyDonorPool:
                    entry["status"] = "skipped"
                    entry["reason"] = "no-donor"
                    break
                attempts = [[t.w, t.h, t.free] for t in res.attempts]
                if not isinstance(res, Augmented):
                    entry["status"] = "skipped"
                    entry["reason"] = res.reason
                    entry["attempts"] = attempts
                    break
                bits = np.zeros((img.height, img.width), dtype=bool)
                x, y = res.position
                bits[y:y + res.cutout.native_h, x:x + res.cutout.native_w] = res.cutout.opaque
                masks.append(Mask(bits))
                img = res.image
                entry["status"] = "augmented"
                entry["insertions"].append({"donor": donors[res.donor_index].source_id,
                                            "category_id": res.cutout.category_id,
                                            "position": list(res.position), "attempts": attempts})
        _save_png_once(out / "images" / f"{img.source_id}.png", img.pixels, prov)
        for n, m in enumerate(masks):
            _save_png_once(out / "masks" / mask_name(img.source_id, n), np.where(m.bits, 255, 0).astype(np.uint8), prov)
        return img, entry

    results = _pmap(cfg, work, items)
    infos = [ImageInfo(img.source_id, f"images/{img.source_id}.png", img.width, img.height) for img, _ in results]
    write_doc(out / "annotations.json", infos, {img.source_id: list(img.annotations) for img, _ in results},
              doc.categories, prov)
    entries = [e for _, e in results]
    counts = {s: sum(e["status"] == s for e in entries) for s in ("augmented", "skipped", "passthrough")}
    write_json(out / "augment_report.json", {"provenance": prov, "counts": counts, "images": entries})
    return {"images": len(entries), "donors": len(donors), **counts}


# -- gen-bg -------------------------------------------------------------------

def make_backend(cfg: dict):
    g = cfg["genbg"]
    if g["backend"] == "stub":
        return StubBackend()
    if g["backend"] == "http":
        if not g.get("endpoint"):
            raise ConfigInvalid("genbg.backend 'http' needs genbg.endpoint or CCL_BACKEND_URL")
        return HttpBackend(g["endpoint"])
    raise ConfigInvalid(f"unknown backend {g['backend']!r}")


def cmd_genbg(cfg: dict) -> dict:
    g = cfg["genbg"]
    bcfg = BackgroundSetConfig(
        out_dir=str(_out(cfg)), prompts_per_theme=dict(g["prompts_per_theme"]),
        seeds_per_prompt=int(g["seeds_per_prompt"]), seed=cfg["seed"], width=int(g["width"]),
        height=int(g["height"]), expander=g["expander"], endpoint=g.get("llm_endpoint"),
        prompt_offset=int(g["prompt_offset"]), workers=int(cfg["workers"]))
    result = build_background_set(bcfg, make_backend(cfg), _prov(cfg, "gen-bg"))
    per_theme = {}
    for r in result.records:
        per_theme[r.theme] = per_theme.get(r.theme, 0) + 1
    return {"records": len(result.records), "generated": result.generated,
            "per_theme": per_theme, "manifest": result.manifest_path}


# -- replace ------------------------------------------------------------------

def _cached_loader():
    @functools.lru_cache(maxsize=256)
    def load(path):
        px = load_rgb(path)
        px.setflags(write=False)
        return px

    return lambda rec: load(rec.image_path)


def cmd_replace(cfg: dict) -> dict:
    doc = load_doc(require_path(cfg, "annotations"))
    masks_dir = require_path(cfg, "masks", "dir")
    pool = read_manifest(require_path(cfg, "backgrounds"))
    r = cfg["replace"]
    qp = QualityFilterParams(cfg["quality"]["t_iou"])
    out = _out(cfg)
    prov = _prov(cfg, "replace")
    loader = _cached_loader()

    def work(image_id):
        img, masks = _load_with_masks(doc, masks_dir, image_id)
        group = expand_image(img, masks, pool, int(r["k"]), qp, cfg["seed"],
                             erode_edge=bool(r["erode"]), loader=loader)
        if isinstance(group, Rejected):
            return img, {"source_id": image_id, "status": "rejected", "reason": group.reason,
                         "ious": list(group.ious)}, []
        outputs = []
        if r["include_original"]:
            outputs.append((image_id, img))
        for j, v in enumerate(group.variants, 1):
            outputs.append((f"{image_id}__v{j}", v))
        for out_id, v in outputs:
            _save_png_once(out / "images" / f"{out_id}.png", v.pixels, prov)
        row = {"source_id": image_id, "status": "ok",
               "variant_paths": [f"images/{oid}.png" for oid, _ in outputs],
               "background_ids": list(group.background_ids),
               "includes_original": bool(r["include_original"])}
        return img, row, outputs

    results = _pmap(cfg, work, doc.image_ids())
    infos, anns = [], {}
    for _, _, outputs in results:
        for oid, v in outputs:
            infos.append(ImageInfo(oid, f"images/{oid}.png", v.width, v.height))
            anns[oid] = list(v.annotations)
    write_doc(out / "annotations.json", infos, anns, doc.categories, prov)
    write_jsonl(out / "groups.jsonl", [row for _, row, _ in results], prov)
    rejected = sum(row["status"] == "rejected" for _, row, _ in results)
    return {"sources": len(results), "rejected": rejected, "outputs": len(infos)}


# -- build-bench / corrupt ----------------------------------------------------

def _write_samples(out: Path, samples, categories, prov, cfg) -> List[dict]:
    def save(s):
        _save_png_once(out / "images" / f"{s.sample_id}.png", s.image.pixels, prov)

    _pmap(cfg, save, samples)
    infos = [ImageInfo(s.sample_id, f"images/{s.sample_id}.png", s.image.width, s.image.height) for s in samples]
    write_doc(out / "annotations.json", infos, {s.sample_id: list(s.image.annotations) for s in samples},
              categories, prov)
    rows = []
    for s in samples:
        row = s.index_row()
        row["path"] = f"images/{s.sample_id}.png"
        rows.append(row)
    write_jsonl(out / "index.jsonl", rows, prov)
    return rows


def cmd_build_bench(cfg: dict) -> dict:
    doc = load_doc(require_path(cfg, "annotations"))
    masks_dir = require_path(cfg, "masks", "dir")
    b = cfg["bench"]
    out = _out(cfg)
    prov = _prov(cfg, "build-bench")
    summary = {}
    items = _pmap(cfg, lambda i: _load_with_masks(doc, masks_dir, i), doc.image_ids())

    if cfg.get("backgrounds"):
        pool = read_manifest(require_path(cfg, "backgrounds"))
        exclude = [r.record_id for r in read_manifest(require_path(cfg, "bench.exclude"))] \
            if b.get("exclude") else []
        check_disjoint(pool, exclude)
        loader = _cached_loader()
        nv = int(b["variants_per_image"])
        per_image = _pmap(cfg, lambda it: build_background_variants(
            [it[0]], [it[1]], pool, nv, cfg["seed"], loader=loader), items)
        samples = [s for group in per_image for s in group]
        _write_samples(out / "background", samples, doc.categories, prov, cfg)
        summary["background_samples"] = len(samples)

    if b["corruptions"]:
        specs = corruption_specs(tuple(int(s) for s in b["severities"]), cfg["seed"])
        summary["corruption_sets"] = {}
        for spec in specs:
            samples = build_corruption_set([img for img, _ in items], [spec])
            _write_samples(out / "corruption" / spec.tag, samples, doc.categories, prov, cfg)
            summary["corruption_sets"][spec.tag] = len(samples)
    return summary


def cmd_corrupt(cfg: dict, kinds: Sequence[str] = ("all",), severity: Optional[int] = None,
                param: Optional[float] = None) -> dict:
    doc = load_doc(require_path(cfg, "annotations"))
    out = _out(cfg)
    prov = _prov(cfg, "corrupt")
    severities = [severity] if severity else [int(s) for s in cfg["bench"]["severities"]]
    kinds = list(CorruptionKind) if "all" in kinds else [CorruptionKind(k) for k in kinds]
    images = _pmap(cfg, doc.load_image, doc.image_ids())
    written = {}
    for kind in kinds:
        for sev in severities:
            spec = CorruptionSpec(kind, sev, cfg["seed"], param)
            samples = build_corruption_set(images, [spec])
            _write_samples(out / spec.tag, samples, doc.categories, prov, cfg)
            written[spec.tag] = len(samples)
    return {"sets": written}


# -- eval ---------------------------------------------------------------------

def _evalset(doc: AnnotationDoc, preds) -> EvalSet:
    return EvalSet({i: doc.annotations.get(i, []) for i in doc.image_ids()}, preds)


def _per_corruption_type(scores: Dict[str, float]) -> Dict[str, float]:
    """Average ``<kind>_s<N>`` entries over severities so each type counts once."""
    groups: Dict[str, List[float]] = {}
    for name, value in sorted(scores.items()):
        m = re.fullmatch(r"(.+)_s[1-5]", name)
        groups.setdefault(m.group(1) if m else name, []).append(value)
    return {k: sum(v) / len(v) for k, v in groups.items()}


def cmd_eval(cfg: dict, gt=None, pred=None, corrupted: Optional[Dict[str, str]] = None) -> dict:
    gt_path = Path(gt) if gt else require_path(cfg, "annotations")
    if pred is None:
        raise ConfigInvalid("eval needs a predictions file")
    doc = load_doc(gt_path)
    es = _evalset(doc, load_predictions(pred))
    thresholds = tuple(cfg["eval"]["iou_thresholds"] or COCO_THRESHOLDS)
    out = _out(cfg)
    prov = _prov(cfg, "eval")

    ap = {}
    curves = {}
    for part in Partition:
        try:
            ap[part.value] = evaluate_ap(es, thresholds, part)
            curves[part.value] = pr_curve(es, 0.5, part)
        except EmptyGroundTruth:
            ap[part.value] = None
    metrics = {"provenance": prov, "iou_thresholds": list(thresholds), "ap": ap}

    if corrupted:
        corrupted_full = {name: evaluate_ap(_evalset(doc, load_predictions(path)), thresholds, Partition.FULL)
                          for name, path in sorted(corrupted.items())}
        metrics["corrupted_full"] = corrupted_full
        per_type = _per_corruption_type(corrupted_full)
        metrics["corrupted_full_by_type"] = per_type
        metrics["mFULL"] = mfull(list(per_type.values()))
        if ap["FULL"]:
            metrics["rFULL"] = rfull(metrics["mFULL"], ap["FULL"])
        plot_robustness(ap["FULL"] or 0.0, corrupted_full, out / "figures" / "robustness.png")

    write_json(out / "metrics.json", metrics)
    (out / "metrics.txt").write_text(metrics_table(metrics), encoding="utf-8")
    plot_pr_curves(curves, out / "figures" / "pr_curve.png", "IoU 0.5")
    return metrics


# -- loss / grad-check / fixture ----------------------------------------------

def _loss_config(cfg: dict) -> LossConfig:
    c = cfg["loss"]
    return LossConfig(float(c["tau"]), float(c["lambda_i"]), float(c["lambda_t"]), bool(c["prenormalize"]))


def cmd_loss(cfg: dict, image_features, text_features=None) -> dict:
    lc = _loss_config(cfg)
    img = read_features(image_features, "image")
    txt = read_features(text_features, "text") if text_features else None
    result = {
        "L_I": modality_consistency_loss(img, lc.tau, prenormalize=lc.prenormalize),
        "L_T": modality_consistency_loss(txt, lc.tau, prenormalize=lc.prenormalize) if txt else None,
        "L_cons": consistency_loss(img, txt, lc),
        "tau": lc.tau, "lambda_i": lc.lambda_i, "lambda_t": lc.lambda_t,
    }
    if cfg.get("out"):
        write_json(_out(cfg) / "loss.json", {"provenance": _prov(cfg, "loss"), **result})
    return result


def cmd_grad_check(cfg: dict, features: Sequence, h: float = 1e-4, tol: float = 1e-4) -> dict:
    lc = _loss_config(cfg)
    errors = {str(f): grad_check(read_features(f), lc.tau, h, prenormalize=lc.prenormalize) for f in features}
    worst = max(errors.values())
    result = {"max_relative_error": worst, "per_file": errors, "h": h, "tolerance": tol, "passed": worst < tol}
    if cfg.get("out"):
        write_json(_out(cfg) / "grad_check.json", {"provenance": _prov(cfg, "grad-check"), **result})
    return result


def cmd_make_fixture(cfg: dict, n: int = 20, width: int = 128, height: int = 128) -> dict:
    corpus = synthetic_corpus(n, cfg["seed"], width, height)
    paths = write_corpus(_out(cfg), corpus, _prov(cfg, "make-fixture"), cfg["seed"])
    return {"images": n, **{k: str(v) for k, v in paths.items()}}
