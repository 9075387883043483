"""Background pool generation.

A backend turns ``(prompt, seed, width, height)`` into an RGB raster. Two
backends ship: a deterministic procedural stub, used in tests and offline
runs, and an HTTP client for a remote text-to-image service.
"""

from __future__ import annotations

import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
import requests
from PIL import Image

from .artifacts import load_rgb, read_jsonl, relpath, save_png, write_jsonl
from .errors import BackendFailure, EndpointUnreachable, PartialFailure
from .prompts import DEFAULT_SEEDS_PER_PROMPT, Theme, ThemePrompt, expand_prompts
from .rng import derive_seed, stable_hash64

log = logging.getLogger(__name__)

CANONICAL_SIZE = (512, 512)


class GenBackend(Protocol):
    backend_id: str

    def generate(self, prompt: str, seed: int, width: int, height: int,
                 theme: Optional[Theme] = None) -> np.ndarray:
        ...


# Anchor colours sampled along a vertical gradient, top to bottom.
_PALETTES = {
    Theme.SEASONAL: [(196, 222, 240), (214, 170, 92), (92, 132, 60), (58, 82, 40)],
    Theme.SKY: [(28, 58, 128), (84, 140, 210), (176, 206, 236), (238, 236, 228)],
    Theme.NATURAL_LANDSCAPE: [(150, 190, 224), (132, 150, 140), (110, 124, 84), (96, 78, 58)],
}
_OCTAVES = (256, 128, 64, 32, 16)
_REF_HEIGHT = 512.0


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    x = x ^ (x >> np.uint64(30))
    x = x * np.uint64(0xBF58476D1CE4E5B9)
    x = x ^ (x >> np.uint64(27))
    x = x * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def _lattice(key: int, octave: int, ix: np.ndarray, iy: np.ndarray) -> np.ndarray:
    h = np.uint64((key ^ (octave * 0x9E3779B97F4A7C15)) & 0xFFFFFFFFFFFFFFFF)
    h = _mix64(h ^ (ix.astype(np.uint64) * np.uint64(0xD1B54A32D192ED03)))
    h = _mix64(h ^ (iy.astype(np.uint64) * np.uint64(0xABC98388FB8FAC03)))
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def value_noise(key: int, xs: np.ndarray, ys: np.ndarray, cell: int, octave: int) -> np.ndarray:
    """Smooth lattice noise in ``[0, 1)`` at absolute pixel coordinates."""
    ix, iy = xs // cell, ys // cell
    fx = (xs % cell + 0.5) / cell
    fy = (ys % cell + 0.5) / cell
    fx = fx * fx * (3 - 2 * fx)
    fy = fy * fy * (3 - 2 * fy)
    v00 = _lattice(key, octave, ix, iy)
    v10 = _lattice(key, octave, ix + 1, iy)
    v01 = _lattice(key, octave, ix, iy + 1)
    v11 = _lattice(key, octave, ix + 1, iy + 1)
    top = v00 + (v10 - v00) * fx
    bottom = v01 + (v11 - v01) * fx
    return top + (bottom - top) * fy


class StubBackend:
    """Procedural backgrounds: multi-octave noise over a theme-coloured gradient.

    Pixel ``(x, y)`` depends only on the prompt hash, the seed and the
    coordinates, so a larger canvas extends a smaller one.
    """

    backend_id = "stub-v1"

    def _palette(self, prompt: str, theme: Optional[Theme]) -> np.ndarray:
        theme = Theme(theme) if theme is not None else Theme.NATURAL_LANDSCAPE
        base = np.array(_PALETTES[theme], dtype=np.float64)
        tint = np.random.default_rng(stable_hash64("tint", prompt)).uniform(0.85, 1.15, size=(1, 3))
        return np.clip(base * tint, 0, 255)

    def generate(self, prompt: str, seed: int, width: int, height: int,
                 theme: Optional[Theme] = None) -> np.ndarray:
        key = int(derive_seed(seed, "stub", prompt))
        ys, xs = np.mgrid[0:height, 0:width].astype(np.int64)
        noise = np.zeros((height, width))
        total = 0.0
        for o, cell in enumerate(_OCTAVES):
            amp = 0.55 ** o
            noise += amp * value_noise(key, xs, ys, cell, o)
            total += amp
        noise /= total
        detail = value_noise(key ^ 0x5DEECE66D, xs, ys, 24, 99)
        t = np.clip(0.7 * ys / _REF_HEIGHT + 0.6 * (noise - 0.5), 0.0, 1.0)
        palette = self._palette(prompt, theme)
        pos = t * (len(palette) - 1)
        lo = np.minimum(pos.astype(np.int64), len(palette) - 2)
        frac = (pos - lo)[..., None]
        rgb = palette[lo] * (1 - frac) + palette[lo + 1] * frac
        rgb *= (0.92 + 0.16 * detail)[..., None]
        return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


class HttpBackend:
    """POSTs ``{prompt, seed, width, height}`` JSON and expects PNG bytes back."""

    def __init__(self, url: str, timeout: float = 120.0):
        self.url = url
        self.timeout = timeout
        self.backend_id = f"http:{url}"

    def generate(self, prompt: str, seed: int, width: int, height: int,
                 theme: Optional[Theme] = None) -> np.ndarray:
        payload = {"prompt": prompt, "seed": int(seed), "width": width, "height": height}
        try:
            resp = requests.post(self.url, json=payload, timeout=self.timeout)
        except requests.exceptions.ConnectionError as exc:
            raise EndpointUnreachable(f"{self.url}: {exc}") from exc
        except requests.exceptions.RequestException as exc:
            raise BackendFailure(f"{self.url}: {exc}") from exc
        if resp.status_code != 200:
            raise BackendFailure(f"{self.url} returned HTTP {resp.status_code}")
        try:
            with Image.open(io.BytesIO(resp.content)) as im:
                pixels = np.array(im.convert("RGB"))
        except OSError as exc:
            raise BackendFailure(f"{self.url} returned undecodable image: {exc}") from exc
        if pixels.shape[:2] != (height, width):
            raise BackendFailure(
                f"{self.url} returned {pixels.shape[1]}x{pixels.shape[0]}, asked for {width}x{height}"
            )
        return pixels


@dataclass(frozen=True)
class BackgroundRecord:
    record_id: str
    image_path: str
    theme: str
    prompt: str
    seed: int
    backend_id: str

    def to_row(self, base_dir=None) -> dict:
        row = asdict(self)
        if base_dir is not None:
            row["image_path"] = relpath(self.image_path, base_dir)
        return row

    @classmethod
    def from_row(cls, row: dict, base_dir=None) -> "BackgroundRecord":
        row = dict(row)
        if base_dir is not None and not Path(row["image_path"]).is_absolute():
            row["image_path"] = str(Path(base_dir) / row["image_path"])
        return cls(**{k: row[k] for k in cls.__dataclass_fields__})


def record_id(prompt: str, seed: int, backend_id: str, width: int, height: int) -> str:
    return f"{stable_hash64(backend_id, prompt, seed, width, height):016x}"


def generate_background(p: ThemePrompt, seed: int, dims: Tuple[int, int], backend: GenBackend,
                        out_dir, prov: Optional[dict] = None) -> BackgroundRecord:
    """Render one background into ``out_dir/images`` (skipped if already present)."""
    width, height = dims
    if width <= 0 or height <= 0:
        raise ValueError("dims must be positive")
    rid = record_id(p.text, seed, backend.backend_id, width, height)
    path = Path(out_dir) / "images" / f"{rid}.png"
    if not path.exists():
        try:
            pixels = backend.generate(p.text, seed, width, height, theme=p.theme)
        except (BackendFailure, EndpointUnreachable):
            raise
        except Exception as exc:  # backend bugs surface as failures of this record
            raise BackendFailure(f"{backend.backend_id}: {exc}") from exc
        if pixels.shape != (height, width, 3):
            raise BackendFailure(f"backend produced shape {pixels.shape}")
        save_png(path, pixels, prov)
    return BackgroundRecord(rid, str(path), p.theme.value, p.text, int(seed), backend.backend_id)


@dataclass
class BackgroundSetConfig:
    out_dir: str
    prompts_per_theme: Dict[str, int] = field(
        default_factory=lambda: {t.value: 2 for t in Theme})
    seeds_per_prompt: int = DEFAULT_SEEDS_PER_PROMPT
    seed: int = 0
    width: int = CANONICAL_SIZE[0]
    height: int = CANONICAL_SIZE[1]
    expander: str = "static-corpus"
    endpoint: Optional[str] = None
    prompt_offset: int = 0
    workers: int = 1


@dataclass
class BackgroundSet:
    records: List[BackgroundRecord]
    generated: int
    manifest_path: str


def manifest_path(out_dir) -> Path:
    return Path(out_dir) / "manifest.jsonl"


def write_manifest(path, records: Sequence[BackgroundRecord], prov: Optional[dict] = None) -> None:
    base = Path(path).parent
    write_jsonl(path, [r.to_row(base) for r in records], prov)


def read_manifest(path) -> List[BackgroundRecord]:
    base = Path(path).parent
    return [BackgroundRecord.from_row(r, base) for r in read_jsonl(path)]


def build_background_set(cfg: BackgroundSetConfig, backend: GenBackend,
                         prov: Optional[dict] = None) -> BackgroundSet:
    """Generate every (theme, prompt, seed) background and write the manifest.

    Re-running over a complete output generates nothing new.
    """
    out = Path(cfg.out_dir)
    tasks = []
    for theme in Theme:
        n = int(cfg.prompts_per_theme.get(theme.value, 0))
        if n <= 0:
            continue
        prompts = expand_prompts(theme, n, cfg.expander, endpoint=cfg.endpoint, offset=cfg.prompt_offset)
        for pi, p in enumerate(prompts):
            for j in range(cfg.seeds_per_prompt):
                seed = derive_seed(cfg.seed, "background", theme.value, cfg.prompt_offset + pi, j)
                tasks.append((p, seed))

    def run(task):
        p, seed = task
        rid = record_id(p.text, seed, backend.backend_id, cfg.width, cfg.height)
        existed = (out / "images" / f"{rid}.png").exists()
        try:
            return generate_background(p, seed, (cfg.width, cfg.height), backend, out, prov), not existed, None
        except (BackendFailure, EndpointUnreachable) as exc:
            return None, False, (p.text, seed, str(exc))

    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        results = list(pool.map(run, tasks))

    records = [r for r, _, _ in results if r is not None]
    failed = [f for _, _, f in results if f is not None]
    generated = sum(1 for _, new, _ in results if new)
    mpath = manifest_path(out)
    write_manifest(mpath, records, prov)
    log.info("background set: %d records (%d new, %d failed)", len(records), generated, len(failed))
    if failed:
        raise PartialFailure(failed)
    return BackgroundSet(records, generated, str(mpath))
