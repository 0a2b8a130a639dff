"""Transferable layer: mixes seen-category response maps into one unseen-category map."""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .tensorio import load_tensor, save_tensor


class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    momentum: float = 0.9
    epochs: int = 50
    prob_clip_eps: float = 1e-7

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be nonnegative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not 0 < self.prob_clip_eps < 0.5:
            raise ValueError("prob_clip_eps must lie in (0, 0.5)")


@dataclass(frozen=True)
class TransferWeights:
    w: np.ndarray
    a: np.ndarray = None
    b: np.ndarray = None
    affine_enabled: bool = False

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64).ravel()
        a = np.ones_like(w) if self.a is None or not self.affine_enabled else np.array(self.a, dtype=np.float64)
        b = np.zeros_like(w) if self.b is None or not self.affine_enabled else np.array(self.b, dtype=np.float64)
        if a.shape != w.shape or b.shape != w.shape:
            raise ValueError("affine parameters must match the number of categories")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("transfer weights must be finite")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def num_categories(self) -> int:
        return self.w.size

    def with_affine(self) -> "TransferWeights":
        return replace(self, affine_enabled=True)


@dataclass
class SourceGallery:
    categories: list[str]
    vectors: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.categories:
            raise ValueError("gallery needs at least one category")
        if len(self.vectors) != len(self.categories):
            raise ValueError("one vector block per category required")
        self.vectors = [np.atleast_2d(np.asarray(v, dtype=np.float64)) for v in self.vectors]
        dims = {v.shape[1] for v in self.vectors}
        if len(dims) != 1:
            raise ValueError(f"gallery vectors disagree on dimension: {sorted(dims)}")
        for name, v in zip(self.categories, self.vectors):
            if v.shape[0] == 0:
                raise ValueError(f"gallery category {name!r} is empty")

    @property
    def dim(self) -> int:
        return self.vectors[0].shape[1]

    def __len__(self) -> int:
        return len(self.categories)


def init_weights(frame_vectors, gallery: SourceGallery) -> TransferWeights:
    """Per category, the mean over target frames of the best gallery inner product."""
    F = np.atleast_2d(np.asarray(frame_vectors, dtype=np.float64))
    if F.shape[0] == 0:
        raise ValueError("need at least one target frame vector")
    if F.shape[1] != gallery.dim:
        raise ValueError(f"frame vectors have dimension {F.shape[1]}, gallery {gallery.dim}")
    w = np.array([(F @ G.T).max(axis=1).mean() for G in gallery.vectors])
    return TransferWeights(w)


def one_hot_weights(category: int, num_categories: int) -> TransferWeights:
    if not 0 <= category < num_categories:
        raise IndexError(f"category {category} out of range for {num_categories} categories")
    w = np.zeros(num_categories)
    w[category] = 1.0
    return TransferWeights(w)


def response(R, theta: TransferWeights) -> np.ndarray:
    """Combined pre-logistic map; ``R`` is ``[C, H, W]`` or a frame batch ``[F, C, H, W]``."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape[-3] != theta.num_categories:
        raise ValueError(f"response stack has {R.shape[-3]} channels, weights {theta.num_categories}")
    scale = (theta.w * theta.a)[:, None, None]
    return (scale * R).sum(axis=-3) + float(theta.w @ theta.b)


def forward(R, theta: TransferWeights) -> tuple[np.ndarray, np.ndarray]:
    r = response(R, theta)
    return r, expit(r)


def bce_loss(prob, y, eps: float = 1e-7) -> float:
    prob = np.asarray(prob, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if prob.shape != y.shape:
        raise ValueError(f"prediction {prob.shape} and label {y.shape} shapes differ")
    p = np.clip(prob, eps, 1 - eps)
    return float(np.mean(-(y * np.log(p) + (1 - y) * np.log(1 - p))))


def loss_gradients(R_frames, theta: TransferWeights, y_frames, eps: float = 1e-7):
    """Mean binary cross-entropy over all labelled pixels and its gradients.

    Returns ``(loss, dw, da, db)``.  Pixels whose probability is clipped carry
    no gradient.
    """
    R = np.asarray(R_frames, dtype=np.float64)
    y = np.asarray(y_frames, dtype=np.float64)
    if R.ndim == 3:
        R, y = R[None], y[None]
    if R.shape[0] == 0:
        raise ValueError("no labelled frames to train on")
    if y.shape != R.shape[:1] + R.shape[2:]:
        raise ValueError("labels must be [F, H, W] matching the response stack")
    _, prob = forward(R, theta)
    loss = bce_loss(prob, y, eps)
    e = prob - y
    e[(prob < eps) | (prob > 1 - eps)] = 0.0
    n = e.size
    # per-channel sums over frames and pixels
    eR = np.einsum("fhw,fchw->c", e, R)
    es = e.sum()
    dw = (theta.a * eR + theta.b * es) / n
    da = theta.w * eR / n
    db = theta.w * es / n
    return loss, dw, da, db


def train_transfer(R_frames, y_frames, theta: TransferWeights,
                   cfg: TrainConfig = TrainConfig()) -> tuple[TransferWeights, list[float]]:
    """Full-batch SGD with momentum; returns final weights and the loss before
    each update plus the final loss (``epochs + 1`` entries)."""
    w, a, b = theta.w.copy(), theta.a.copy(), theta.b.copy()
    vw, va, vb = np.zeros_like(w), np.zeros_like(a), np.zeros_like(b)
    trace = []
    cur = theta
    # overflow surfaces through the finiteness checks below
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(cfg.epochs):
            loss, dw, da, db = loss_gradients(R_frames, cur, y_frames, cfg.prob_clip_eps)
            if not np.isfinite(loss):
                raise DivergenceError(f"loss became {loss} during training")
            trace.append(loss)
            vw = cfg.momentum * vw - cfg.learning_rate * dw
            w = w + vw
            if theta.affine_enabled:
                va = cfg.momentum * va - cfg.learning_rate * da
                vb = cfg.momentum * vb - cfg.learning_rate * db
                a, b = a + va, b + vb
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                raise DivergenceError("transfer weights became non-finite")
            cur = TransferWeights(w, a, b, theta.affine_enabled)
    loss = loss_gradients(R_frames, cur, y_frames, cfg.prob_clip_eps)[0]
    if not np.isfinite(loss):
        raise DivergenceError(f"loss became {loss} during training")
    trace.append(loss)
    return cur, trace


# -- files ------------------------------------------------------------------

def _affine_path(path: Path) -> Path:
    return path.with_name(path.stem + "_affine" + path.suffix)


def save_weights(path: str | os.PathLike, theta: TransferWeights) -> None:
    path = Path(path)
    save_tensor(path, theta.w)
    if theta.affine_enabled:
        save_tensor(_affine_path(path), np.stack([theta.a, theta.b]))


def load_weights(path: str | os.PathLike) -> TransferWeights:
    path = Path(path)
    w = load_tensor(path)
    if w.ndim != 1:
        raise ValueError(f"{path}: weights tensor must be rank 1, got dims {w.shape}")
    companion = _affine_path(path)
    if companion.exists():
        ab = load_tensor(companion)
        if ab.shape != (2, w.size):
            raise ValueError(f"{companion}: expected dims [2, {w.size}], got {list(ab.shape)}")
        return TransferWeights(w, ab[0], ab[1], affine_enabled=True)
    return TransferWeights(w)


def save_gallery(directory: str | os.PathLike, gallery: SourceGallery) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "categories.txt").write_text("".join(f"{c}\n" for c in gallery.categories))
    for idx, v in enumerate(gallery.vectors):
        save_tensor(d / f"cat_{idx}.sgt", v)


def load_gallery(directory: str | os.PathLike) -> SourceGallery:
    d = Path(directory)
    names = [ln.strip() for ln in (d / "categories.txt").read_text().splitlines() if ln.strip()]
    vectors = []
    for idx in range(len(names)):
        v = load_tensor(d / f"cat_{idx}.sgt")
        if v.ndim != 2:
            raise ValueError(f"cat_{idx}.sgt must be rank 2 [J, D], got dims {list(v.shape)}")
        vectors.append(v)
    return SourceGallery(names, vectors)
