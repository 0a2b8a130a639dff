"""Segment proposals: connected foreground components with pooled features and scores."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class ProposalConfig:
    tau: float = 0.5
    connectivity: int = 8
    min_area_frac: float = 0.001

    def __post_init__(self):
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if not 0.0 <= self.min_area_frac <= 1.0:
            raise ValueError("min_area_frac must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class Segment:
    """One connected component in one frame.

    ``pixels`` holds sorted flat (row-major) pixel indices; ``runs`` gives the
    run-length view.
    """

    id: int
    frame_index: int
    pixels: np.ndarray
    feat_mine: np.ndarray
    feat_sim: np.ndarray
    objectness: float
    motion: float

    @property
    def area(self) -> int:
        return int(self.pixels.size)

    def runs(self) -> list[tuple[int, int]]:
        """``(start, length)`` runs over the flat pixel index."""
        px = self.pixels
        breaks = np.flatnonzero(np.diff(px) != 1) + 1
        starts = np.concatenate([[0], breaks])
        ends = np.concatenate([breaks, [px.size]])
        return [(int(px[s]), int(e - s)) for s, e in zip(starts, ends)]

    def mask(self, shape: tuple[int, int]) -> np.ndarray:
        m = np.zeros(shape[0] * shape[1], dtype=bool)
        m[self.pixels] = True
        return m.reshape(shape)


@dataclass(frozen=True, eq=False)
class ProposalSet:
    segments: list[Segment]
    frame_count: int
    frame_dims: tuple[int, int]

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def __getitem__(self, i: int) -> Segment:
        return self.segments[i]

    @property
    def objectness(self) -> np.ndarray:
        return np.array([s.objectness for s in self.segments], dtype=np.float64)

    @property
    def motion(self) -> np.ndarray:
        return np.array([s.motion for s in self.segments], dtype=np.float64)

    def mine_features(self) -> np.ndarray:
        if not self.segments:
            return np.zeros((0, 0))
        return np.stack([s.feat_mine for s in self.segments])


def binarize(prob, tau: float = 0.5) -> np.ndarray:
    return np.asarray(prob, dtype=np.float64) >= tau


_STRUCTURE = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def connected_components(mask, connectivity: int = 8, min_area_frac: float = 0.0) -> list[np.ndarray]:
    """Flat pixel-index arrays of the foreground components, ordered by first pixel."""
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=_STRUCTURE[connectivity])
    if n == 0:
        return []
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=n + 1)
    bounds = np.cumsum(counts)
    min_area = min_area_frac * mask.size
    comps = []
    for lab in range(1, n + 1):
        px = order[bounds[lab - 1]:bounds[lab]]
        if px.size >= min_area:
            comps.append(px)
    comps.sort(key=lambda px: int(px[0]))
    return comps


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else np.zeros_like(v)


def pool_features(pixels, stack, normalize: bool = True) -> np.ndarray:
    """Per-channel mean of ``stack[C, H, W]`` over flat pixel indices."""
    stack = np.asarray(stack, dtype=np.float64)
    flat = stack.reshape(stack.shape[0], -1)
    v = flat[:, pixels].mean(axis=1)
    return _unit(v) if normalize else v


def objectness(pixels, prob) -> float:
    return float(np.asarray(prob, dtype=np.float64).ravel()[pixels].mean())


def motion_score(pixels, saliency) -> float:
    return float(np.asarray(saliency, dtype=np.float64).ravel()[pixels].mean())


def extract_proposals(probs, feat_mine, feat_sim, saliency,
                      cfg: ProposalConfig = ProposalConfig()) -> ProposalSet:
    """Build the proposal set for a whole video.

    All arguments are per-frame sequences: probability maps ``[H, W]``,
    feature stacks ``[C, H, W]`` and saliency maps ``[H, W]``.
    """
    m = len(probs)
    if not (len(feat_mine) == len(feat_sim) == len(saliency) == m):
        raise ValueError("per-frame inputs must have equal frame counts")
    if m == 0:
        return ProposalSet([], 0, (0, 0))
    dims = tuple(np.shape(probs[0]))
    segments: list[Segment] = []
    for t in range(m):
        prob = np.asarray(probs[t], dtype=np.float64)
        if (prob.shape != dims or np.shape(saliency[t]) != dims
                or np.shape(feat_mine[t])[1:] != dims or np.shape(feat_sim[t])[1:] != dims):
            raise ValueError(f"frame {t}: dimension mismatch")
        for px in connected_components(binarize(prob, cfg.tau), cfg.connectivity, cfg.min_area_frac):
            segments.append(Segment(
                id=len(segments),
                frame_index=t,
                pixels=px,
                feat_mine=pool_features(px, feat_mine[t]),
                feat_sim=pool_features(px, feat_sim[t]),
                objectness=objectness(px, prob),
                motion=motion_score(px, saliency[t]),
            ))
    return ProposalSet(segments, m, dims)
