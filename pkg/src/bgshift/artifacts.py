"""Reading and writing images, masks and manifests with provenance stamps.

Every artifact written here is byte-deterministic for identical inputs:
PNGs are encoded with fixed settings and JSON is emitted with sorted keys.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np
from PIL import Image, PngImagePlugin

from . import __version__
from .errors import IoFailure
from .geometry import Mask

PROVENANCE_KEY = "_provenance"


def config_digest(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def provenance(params: dict, seed: int) -> dict:
    return {"tool": "bgshift", "version": __version__,
            "config_digest": config_digest(params), "seed": int(seed)}


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.{id(data)}.tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def encode_png(pixels: np.ndarray, prov: Optional[dict] = None) -> bytes:
    import io

    mode = "L" if pixels.ndim == 2 else {3: "RGB", 4: "RGBA"}[pixels.shape[2]]
    info = PngImagePlugin.PngInfo()
    if prov is not None:
        info.add_text("provenance", json.dumps(prov, sort_keys=True))
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(pixels), mode).save(buf, "PNG", pnginfo=info, compress_level=6)
    return buf.getvalue()


def save_png(path, pixels: np.ndarray, prov: Optional[dict] = None) -> None:
    _atomic_write(Path(path), encode_png(pixels, prov))


def load_rgb(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.array(im.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise IoFailure(path, f"cannot decode image ({exc})") from exc


def load_mask(path) -> Mask:
    """Single-channel PNG, nonzero = foreground."""
    try:
        with Image.open(path) as im:
            return Mask(np.array(im.convert("L")) > 0)
    except (OSError, ValueError) as exc:
        raise IoFailure(path, f"cannot decode mask ({exc})") from exc


def save_mask(path, m: Mask, prov: Optional[dict] = None) -> None:
    save_png(path, np.where(m.bits, 255, 0).astype(np.uint8), prov)


def png_provenance(path) -> Optional[dict]:
    with Image.open(path) as im:
        text = im.info.get("provenance")
    return json.loads(text) if text else None


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def write_json(path, obj) -> None:
    _atomic_write(Path(path), dumps_json(obj).encode("utf-8"))


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise IoFailure(path, "file not found") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(path, f"invalid JSON ({exc})") from exc


def write_jsonl(path, rows: Iterable[dict], prov: Optional[dict] = None) -> None:
    lines = []
    if prov is not None:
        lines.append(json.dumps({PROVENANCE_KEY: prov}, sort_keys=True))
    lines.extend(json.dumps(r, sort_keys=True) for r in rows)
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode("utf-8"))


def read_jsonl(path) -> List[dict]:
    """Rows of a JSON-lines file, skipping the provenance header."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise IoFailure(path, "file not found") from exc
    rows = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IoFailure(path, f"line {n}: invalid JSON ({exc})") from exc
        if PROVENANCE_KEY not in row:
            rows.append(row)
    return rows


def relpath(path, start) -> str:
    return Path(os.path.relpath(path, start)).as_posix()
