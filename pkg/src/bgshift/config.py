"""Pipeline configuration: a YAML/JSON file merged over defaults, then flag overrides.

Keys (all optional except ``seed``)::

    seed: 0                       # 64-bit run seed, every random stream derives from it
    workers: 1
    out: null                     # output directory; ./out when a verb must write and none is set
    annotations: data/annotations.json
    masks: data/masks
    backgrounds: bg/manifest.jsonl
    selected: null                # selected-ids file restricting augment
    select:  {budget: null, reduction_factor: null}
    augment: {n_positions: 100, alpha: 2.0, n_r: 2, min_free_positions: 5,
              repeat: 1, single_class_only: true}
    quality: {t_iou: 0.75}
    replace: {k: 4, include_original: true, erode: false}
    genbg:   {prompts_per_theme: {Seasonal: 2, Sky: 2, NaturalLandscape: 2},
              seeds_per_prompt: 11, width: 512, height: 512, prompt_offset: 0,
              backend: stub, endpoint: null, expander: static-corpus, llm_endpoint: null}
    bench:   {variants_per_image: 3, exclude: null, corruptions: true, severities: [3]}
    loss:    {tau: 1.0, lambda_i: 0.15, lambda_t: 0.05, prenormalize: false}
    eval:    {iou_thresholds: null}

``CCL_BACKEND_URL`` in the environment overrides ``genbg.endpoint``.
"""

from __future__ import annotations

import copy
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from .errors import ConfigInvalid

DEFAULTS: Dict[str, Any] = {
    "seed": None,
    "workers": 1,
    "out": None,
    "annotations": None,
    "masks": None,
    "backgrounds": None,
    "selected": None,
    "select": {"budget": None, "reduction_factor": None},
    "augment": {"n_positions": 100, "alpha": 2.0, "n_r": 2, "min_free_positions": 5,
                "repeat": 1, "single_class_only": True},
    "quality": {"t_iou": 0.75},
    "replace": {"k": 4, "include_original": True, "erode": False},
    "genbg": {"prompts_per_theme": {"Seasonal": 2, "Sky": 2, "NaturalLandscape": 2},
              "seeds_per_prompt": 11, "width": 512, "height": 512, "prompt_offset": 0,
              "backend": "stub", "endpoint": None, "expander": "static-corpus",
              "llm_endpoint": None},
    "bench": {"variants_per_image": 3, "exclude": None, "corruptions": True, "severities": [3]},
    "loss": {"tau": 1.0, "lambda_i": 0.15, "lambda_t": 0.05, "prenormalize": False},
    "eval": {"iou_thresholds": None},
}

# never part of the config digest: where files live and how many threads run
PATH_KEYS = {"out", "annotations", "masks", "backgrounds", "selected", "bench.exclude"}
RUNTIME_KEYS = {"workers"}


def _merge(base: dict, extra: dict, prefix: str = "") -> dict:
    for key, value in extra.items():
        if key not in base:
            raise ConfigInvalid(f"unknown config key {prefix + key!r}")
        if isinstance(base[key], dict) and key != "prompts_per_theme":
            if not isinstance(value, dict):
                raise ConfigInvalid(f"config key {prefix + key!r} must be a mapping")
            _merge(base[key], value, prefix + key + ".")
        else:
            base[key] = value
    return base


def set_key(cfg: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = cfg
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigInvalid(f"unknown config key {dotted!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigInvalid(f"unknown config key {dotted!r}")
    node[parts[-1]] = value


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> dict:
    """Defaults, then the config file, then ``overrides`` (dotted keys); flags win."""
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except FileNotFoundError as exc:
            raise ConfigInvalid(f"config file {path} not found") from exc
        except yaml.YAMLError as exc:
            raise ConfigInvalid(f"config file {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigInvalid(f"config file {path} must hold a mapping")
        _merge(cfg, raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            set_key(cfg, key, value)
    env_url = os.environ.get("CCL_BACKEND_URL")
    if env_url:
        cfg["genbg"]["endpoint"] = env_url
    if cfg["seed"] is None:
        raise ConfigInvalid("a seed is required (config key 'seed' or --seed)")
    cfg["seed"] = int(cfg["seed"])
    return cfg


def digest_params(cfg: dict) -> dict:
    """The config without path or runtime keys, for provenance digests."""
    out = copy.deepcopy(cfg)
    for key in PATH_KEYS | RUNTIME_KEYS:
        parts = key.split(".")
        node = out
        for p in parts[:-1]:
            node = node[p]
        node.pop(parts[-1], None)
    return out


def require_path(cfg: dict, key: str, kind: str = "file") -> Path:
    value = cfg.get(key) if "." not in key else cfg[key.split(".")[0]][key.split(".")[1]]
    if not value:
        raise ConfigInvalid(f"config key {key!r} is required for this command")
    p = Path(value)
    if not p.exists():
        raise ConfigInvalid(f"{key}: {p} does not exist")
    if kind == "dir" and not p.is_dir():
        raise ConfigInvalid(f"{key}: {p} is not a directory")
    return p
