"""Motion saliency from optical flow via a raster-scan minimum barrier distance."""
from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from .tensorio import FlowField

MBD_MAX_PASSES = 10
MBD_TOL = 1e-6


def flow_magnitude(flow: FlowField) -> np.ndarray:
    return np.sqrt(flow.u * flow.u + flow.v * flow.v)


def border_seeds(height: int, width: int) -> np.ndarray:
    seeds = np.zeros((height, width), dtype=bool)
    seeds[0, :] = seeds[-1, :] = True
    seeds[:, 0] = seeds[:, -1] = True
    return seeds


def iter_mbd_passes(cost, seeds) -> Iterator[tuple[np.ndarray, float]]:
    """Yield ``(dist, max_change)`` after every raster pass, without end.

    Odd passes scan top-left to bottom-right relaxing from the left and upper
    neighbours; even passes scan backwards relaxing from the right and lower
    neighbours.  A pixel whose distance goes from infinite to finite counts
    as an infinite change.
    """
    cost = np.asarray(cost, dtype=np.float64)
    seeds = np.asarray(seeds, dtype=bool)
    if cost.ndim != 2 or seeds.shape != cost.shape:
        raise ValueError("cost and seeds must be 2-D arrays of equal shape")
    if not seeds.any():
        raise ValueError("fast_mbd needs at least one seed pixel")
    h, w = cost.shape
    c = cost.ravel().tolist()
    flat_seeds = seeds.ravel().tolist()
    inf = math.inf
    dist = [0.0 if s else inf for s in flat_seeds]
    hi = [v if s else -inf for v, s in zip(c, flat_seeds)]
    lo = [v if s else inf for v, s in zip(c, flat_seeds)]

    def relax(p: int, q: int) -> None:
        if dist[q] == inf:
            return
        cp = c[p]
        nhi = hi[q] if hi[q] > cp else cp
        nlo = lo[q] if lo[q] < cp else cp
        if nhi - nlo < dist[p]:
            dist[p], hi[p], lo[p] = nhi - nlo, nhi, nlo

    forward = True
    while True:
        change = 0.0
        if forward:
            rows, cols, step = range(h), range(w), 1
        else:
            rows, cols, step = range(h - 1, -1, -1), range(w - 1, -1, -1), -1
        for y in rows:
            row = y * w
            has_vert = 0 <= y - step < h
            for x in cols:
                p = row + x
                before = dist[p]
                if 0 <= x - step < w:
                    relax(p, p - step)
                if has_vert:
                    relax(p, p - step * w)
                if dist[p] < before:
                    # only pixel p changes during its own visit
                    delta = before - dist[p]
                    if delta > change:
                        change = delta
        forward = not forward
        yield np.array(dist, dtype=np.float64).reshape(h, w), change


def fast_mbd(cost, seeds, max_passes: int = MBD_MAX_PASSES, tol: float = MBD_TOL) -> np.ndarray:
    dist = None
    for n, (dist, change) in enumerate(iter_mbd_passes(cost, seeds), start=1):
        if n >= max_passes or change < tol:
            break
    return dist


def normalize_unit(x: np.ndarray) -> np.ndarray:
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        return np.zeros_like(x, dtype=np.float64)
    return (x - lo) / (hi - lo)


def motion_saliency(flow: FlowField, max_passes: int = MBD_MAX_PASSES,
                    tol: float = MBD_TOL) -> np.ndarray:
    mag = flow_magnitude(flow)
    dist = fast_mbd(mag, border_seeds(*mag.shape), max_passes, tol)
    return normalize_unit(dist)


def video_saliency(flows: list[FlowField], max_passes: int = MBD_MAX_PASSES,
                   tol: float = MBD_TOL, executor=None) -> list[np.ndarray]:
    """Saliency per frame for ``len(flows) + 1`` frames.

    The last frame has no forward flow and reuses the previous frame's map.
    """
    if not flows:
        raise ValueError("need at least one flow field (two frames)")
    fn = lambda f: motion_saliency(f, max_passes, tol)  # noqa: E731
    maps = list(executor.map(fn, flows)) if executor is not None else [fn(f) for f in flows]
    maps.append(maps[-1].copy())
    return maps
