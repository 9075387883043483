"""Contextual consistency loss over groups of same-object features.

Features come as a ``(C, K, D)`` array: ``C`` categories, ``K`` background
variants of each, ``D`` feature dimensions. Each feature is pulled towards
the centroid of its own category, contrasted against every feature in the
batch (its own self-similarity included) via cosine similarity.

Everything is computed in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyRegion, MissingTextBatch, NonFinite, NonPositiveTau, ZeroNormVector
from .geometry import BBox


@dataclass(frozen=True)
class FeatureBatch:
    values: np.ndarray
    modality: str = "image"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or min(v.shape) < 1:
            raise ValueError(f"feature batch must be (C, K, D) with all dims >= 1, got {v.shape}")
        if self.modality not in ("image", "text"):
            raise ValueError(f"unknown modality {self.modality!r}")
        if not np.all(np.isfinite(v)):
            raise NonFinite("feature batch holds non-finite values")
        if np.any(np.linalg.norm(v, axis=2) == 0):
            raise ZeroNormVector("every feature vector must have nonzero norm")
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class LossConfig:
    tau: float = 1.0
    lambda_i: float = 0.15
    lambda_t: float = 0.05
    prenormalize: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise NonPositiveTau(f"tau must be > 0, got {self.tau}")
        if self.lambda_i < 0 or self.lambda_t < 0:
            raise ValueError("loss weights must be >= 0")


GLIP_CONFIG = LossConfig(lambda_t=0.0)  # decoupled image/text encoders
FIBER_CONFIG = LossConfig()


@dataclass(frozen=True)
class RegionFeatureMap:
    """``grid`` is ``(H, W, D)``; ``region`` is a box in grid cells."""

    grid: np.ndarray
    region: BBox


def caaf_pool(rf: RegionFeatureMap, mode: str = "mean") -> np.ndarray:
    """Aggregate the feature vectors inside the region into one vector."""
    grid = np.asarray(rf.grid, dtype=np.float64)
    r = rf.region
    x0, y0 = max(int(r.x), 0), max(int(r.y), 0)
    x1, y1 = min(int(r.x2), grid.shape[1]), min(int(r.y2), grid.shape[0])
    cells = grid[y0:y1, x0:x1].reshape(-1, grid.shape[2])
    if cells.shape[0] == 0:
        raise EmptyRegion(f"region {r} holds no grid cells")
    if mode == "mean":
        return cells.mean(axis=0)
    if mode == "max":
        return cells.max(axis=0)
    raise ValueError(f"unknown pooling mode {mode!r}")


def centroid(fb: FeatureBatch, c: int) -> np.ndarray:
    return fb.values[c].mean(axis=0)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, defined as 0 when either vector is zero."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def _check_tau(tau):
    if not tau > 0:
        raise NonPositiveTau(f"tau must be > 0, got {tau}")


def _unit(v: np.ndarray, axis=-1):
    norms = np.linalg.norm(v, axis=axis, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms > 0, v / safe, 0.0), norms


def _ordered_sum(x: np.ndarray, axis: int) -> np.ndarray:
    # summing sorted terms makes the result independent of feature order
    return np.sort(x, axis=axis).sum(axis=axis)


def _forward(values: np.ndarray, tau: float):
    C, K, D = values.shape
    N = C * K
    cats = np.repeat(np.arange(C), K)
    U, norms = _unit(values.reshape(N, D))
    means = _ordered_sum(values, axis=1) / K
    Mhat, mnorms = _unit(means)
    s = np.einsum("nd,nd->n", U, Mhat[cats])
    # pairwise entries via the same reduction as ``s`` so a lone feature's ratio is exactly 1
    S = np.einsum("id,jd->ij", U, U)
    Z = S / tau
    zmax = Z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(_ordered_sum(np.exp(Z - zmax), axis=1))
    loss = -_ordered_sum(s / tau - lse, axis=0) / N
    return loss, dict(U=U, norms=norms, Mhat=Mhat, mnorms=mnorms, Z=Z, zmax=zmax, cats=cats)


def modality_consistency_loss(fb: FeatureBatch, tau: float = 1.0, *, prenormalize: bool = False) -> float:
    _check_tau(tau)
    values = fb.values
    if prenormalize:
        values = _unit(values)[0]
    loss, _ = _forward(values, tau)
    # the self term bounds each ratio by 1; clamp float round-off
    loss = float(loss)
    return loss if loss > 0 else 0.0


def modality_consistency_grad(fb: FeatureBatch, tau: float = 1.0, *, prenormalize: bool = False) -> np.ndarray:
    """Analytic gradient of the modality loss with respect to ``fb.values``."""
    _check_tau(tau)
    raw = fb.values
    values = _unit(raw)[0] if prenormalize else raw
    C, K, D = values.shape
    N = C * K
    _, st = _forward(values, tau)
    U, norms, Mhat, mnorms, cats = st["U"], st["norms"], st["Mhat"], st["mnorms"], st["cats"]

    P = np.exp(st["Z"] - st["zmax"])
    P /= P.sum(axis=1, keepdims=True)
    G = P / (N * tau)                 # dL/dS
    ds = -1.0 / (N * tau)             # dL/ds_i, identical for all i

    gU = (G + G.T) @ U + ds * Mhat[cats]
    gMhat = np.zeros((C, D))
    np.add.at(gMhat, cats, ds * U)
    radial = np.einsum("cd,cd->c", gMhat, Mhat)[:, None]
    safe_m = np.where(mnorms > 0, mnorms, 1.0)
    gM = np.where(mnorms > 0, (gMhat - radial * Mhat) / safe_m, 0.0)

    radial_u = np.einsum("nd,nd->n", gU, U)[:, None]
    gV = (gU - radial_u * U) / norms + gM[cats] / K
    grad = gV.reshape(C, K, D)

    if prenormalize:
        U0, n0 = _unit(raw)
        grad = (grad - np.einsum("ckd,ckd->ck", grad, U0)[..., None] * U0) / n0
    return grad


def consistency_loss(img: FeatureBatch, txt: Optional[FeatureBatch] = None,
                     cfg: LossConfig = LossConfig()) -> float:
    """Weighted sum of the image-side and text-side consistency losses."""
    total = cfg.lambda_i * modality_consistency_loss(img, cfg.tau, prenormalize=cfg.prenormalize)
    if cfg.lambda_t > 0:
        if txt is None:
            raise MissingTextBatch("lambda_t > 0 requires a text feature batch")
        total += cfg.lambda_t * modality_consistency_loss(txt, cfg.tau, prenormalize=cfg.prenormalize)
    return total


def total_loss(l_cls: float, l_loc: float, l_cons: float) -> float:
    """Detector objective: classification + localization + consistency."""
    if not all(math.isfinite(v) for v in (l_cls, l_loc, l_cons)):
        raise NonFinite(f"non-finite loss term in {(l_cls, l_loc, l_cons)}")
    return l_cls + l_loc + l_cons


def finite_difference_grad(fb: FeatureBatch, tau: float = 1.0, h: float = 1e-4,
                           *, prenormalize: bool = False) -> np.ndarray:
    """Central-difference gradient of the modality loss, one entry at a time."""
    base = fb.values
    grad = np.zeros_like(base)
    it = np.nditer(base, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        plus = base.copy()
        plus[idx] += h
        minus = base.copy()
        minus[idx] -= h
        f_plus = _raw_loss(plus, tau, prenormalize)
        f_minus = _raw_loss(minus, tau, prenormalize)
        grad[idx] = (f_plus - f_minus) / (2 * h)
    return grad


def _raw_loss(values, tau, prenormalize):
    if prenormalize:
        values = _unit(values)[0]
    return float(_forward(values, tau)[0])


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Largest entry-wise gap scaled by the gradient's overall magnitude."""
    scale = max(np.abs(numeric).max(), np.abs(analytic).max(), floor)
    return float(np.abs(analytic - numeric).max() / scale)


def grad_check(fb: FeatureBatch, tau: float = 1.0, h: float = 1e-4, *, prenormalize: bool = False) -> float:
    return relative_error(
        modality_consistency_grad(fb, tau, prenormalize=prenormalize),
        finite_difference_grad(fb, tau, h, prenormalize=prenormalize),
    )
