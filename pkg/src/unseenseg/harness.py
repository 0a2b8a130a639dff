"""Seeded synthetic videos with exact ground truth, and IoU evaluation.

The unseen object is a rectangle moving at constant velocity whose category
response is a convex mix of two seen categories.  Static distractor blobs of a
single seen category can be added; they respond in the response maps but do
not move.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensorio import FlowField, load_mask


@dataclass(frozen=True)
class ScenarioParams:
    frames: int = 8
    height: int = 64
    width: int = 64
    channels: int = 4
    dsim: int = 16
    dmine: int = 12
    mix_categories: tuple[int, int] = (1, 3)
    mix_weights: tuple[float, float] = (0.6, 0.4)
    noise: float = 0.3
    logit: float = 5.0
    feature_noise: float = 0.1
    object_size: tuple[int, int] = (16, 20)
    max_speed: int = 2
    gallery_size: int = 20
    gallery_noise: float = 0.1
    distractors: int = 0
    distractor_size: tuple[int, int] = (10, 10)
    distractor_category: int = 0

    def __post_init__(self):
        if self.frames < 2:
            raise ValueError("a scenario needs at least two frames")
        if len(set(self.mix_categories)) != 2 or not all(0 <= c < self.channels for c in self.mix_categories):
            raise ValueError("mix_categories must be two distinct channel indices")
        if min(self.mix_weights) < 0 or abs(sum(self.mix_weights) - 1) > 1e-12:
            raise ValueError("mix_weights must be nonnegative and sum to 1")
        if min(self.dsim, self.dmine) < self.channels + 1:
            raise ValueError("feature dimensions must exceed the channel count")
        oh, ow = self.object_size
        if oh > self.height or ow > self.width:
            raise ValueError("object does not fit in the frame")
        if self.max_speed < 1:
            raise ValueError("max_speed must be at least 1")


@dataclass
class Scenario:
    seed: int
    params: ScenarioParams
    trajectory: list[tuple[int, int]]
    velocity: tuple[int, int]
    signature: np.ndarray
    distractor_boxes: list[tuple[int, int, int, int]] = field(default_factory=list)


def _rect(h: int, w: int, y: int, x: int, rh: int, rw: int) -> np.ndarray:
    m = np.zeros((h, w), dtype=bool)
    m[y:y + rh, x:x + rw] = True
    return m


def _patterns(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((dim, count)))
    return q.T  # count orthonormal rows


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _trajectory(rng, prm: ScenarioParams):
    oh, ow = prm.object_size
    span = prm.frames - 1
    speeds = [(vy, vx) for vy in range(-prm.max_speed, prm.max_speed + 1)
              for vx in range(-prm.max_speed, prm.max_speed + 1)
              if (vy, vx) != (0, 0)
              and abs(vy) * span <= prm.height - oh and abs(vx) * span <= prm.width - ow]
    if not speeds:
        raise ValueError("object cannot move and stay in bounds")
    vy, vx = speeds[rng.integers(len(speeds))]
    ylo, yhi = max(0, -vy * span), prm.height - oh - max(0, vy * span)
    xlo, xhi = max(0, -vx * span), prm.width - ow - max(0, vx * span)
    y0, x0 = int(rng.integers(ylo, yhi + 1)), int(rng.integers(xlo, xhi + 1))
    return [(y0 + vy * t, x0 + vx * t) for t in range(prm.frames)], (vy, vx)


def gen_scenario(seed: int, params: ScenarioParams = ScenarioParams()):
    """Build ``(bundle, gallery, scenario)`` deterministically from ``seed``."""
    from .bundle import VideoBundle
    from .transfer import SourceGallery

    prm = params
    rng = np.random.default_rng(seed)
    h, w, C = prm.height, prm.width, prm.channels
    oh, ow = prm.object_size
    traj, vel = _trajectory(rng, prm)
    for y, x in traj:
        if y < 0 or x < 0 or y + oh > h or x + ow > w:
            raise ValueError("trajectory leaves the frame")

    sig = np.zeros(C)
    sig[list(prm.mix_categories)] = prm.mix_weights

    # row c < C: category pattern, row C: background pattern
    mine_pat = _patterns(rng, prm.dmine, C + 1)
    sim_pat = _patterns(rng, prm.dsim, C + 1)
    obj_mine = _unit_rows(sig @ mine_pat[:C])
    obj_sim = _unit_rows(sig @ sim_pat[:C])

    # static distractors placed away from the object's swept box where possible
    boxes = []
    dh, dw = prm.distractor_size
    ys = [p[0] for p in traj]
    xs = [p[1] for p in traj]
    swept = _rect(h, w, min(ys), min(xs), max(ys) - min(ys) + oh, max(xs) - min(xs) + ow)
    for _ in range(prm.distractors):
        for attempt in range(50):
            by, bx = int(rng.integers(0, h - dh + 1)), int(rng.integers(0, w - dw + 1))
            if not (swept & _rect(h, w, by, bx, dh, dw)).any() or attempt == 49:
                break
        boxes.append((by, bx, dh, dw))
    dcat = prm.distractor_category

    responses, feat_mine, feat_sim, gt = [], [], [], []
    for t in range(prm.frames):
        obj = _rect(h, w, traj[t][0], traj[t][1], oh, ow)
        dis = np.zeros((h, w), dtype=bool)
        for by, bx, bh, bw in boxes:
            dis |= _rect(h, w, by, bx, bh, bw)
        dis &= ~obj
        bg = ~(obj | dis)

        presence = np.zeros((C, h, w))
        presence[:, obj] = sig[:, None]
        presence[dcat, dis] = 1.0
        R = prm.logit * presence
        R[:, bg] = -prm.logit
        R += prm.noise * rng.standard_normal((C, h, w))

        def stack(pat, obj_vec, dim):
            s = np.empty((dim, h, w))
            s[:, bg] = pat[C][:, None]
            s[:, obj] = obj_vec[:, None]
            s[:, dis] = pat[dcat][:, None]
            return s + prm.feature_noise * rng.standard_normal((dim, h, w))

        responses.append(R)
        feat_mine.append(stack(mine_pat, obj_mine, prm.dmine))
        feat_sim.append(stack(sim_pat, obj_sim, prm.dsim))
        gt.append(obj)

    flows = []
    for t in range(prm.frames - 1):
        dy, dx = traj[t + 1][0] - traj[t][0], traj[t + 1][1] - traj[t][1]
        u, v = np.zeros((h, w)), np.zeros((h, w))
        u[gt[t]], v[gt[t]] = dx, dy
        flows.append(FlowField(u, v))

    gallery = SourceGallery(
        [f"category_{c}" for c in range(C)],
        [_unit_rows(sim_pat[c] + prm.gallery_noise * rng.standard_normal((prm.gallery_size, prm.dsim)))
         for c in range(C)],
    )
    bundle = VideoBundle(responses, feat_mine, feat_sim, flows, gt)
    return bundle, gallery, Scenario(seed, prm, traj, vel, sig, boxes)


def write_scenario(directory: str | os.PathLike, seed: int, params: ScenarioParams = ScenarioParams()):
    """Write ``bundle/`` and ``gallery/`` under ``directory``; returns the Scenario."""
    from .bundle import save_bundle
    from .transfer import save_gallery

    bundle, gallery, scen = gen_scenario(seed, params)
    d = Path(directory)
    save_bundle(d / "bundle", bundle)
    save_gallery(d / "gallery", gallery)
    return scen


# -- evaluation -------------------------------------------------------------

def iou(pred, gt) -> float:
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred & gt) / union


def video_report(pred_dir: str | os.PathLike, gt_dir: str | os.PathLike) -> tuple[list[float], float]:
    preds = sorted(Path(pred_dir).glob("*.pgm"))
    gts = sorted(Path(gt_dir).glob("*.pgm"))
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predicted masks but {len(gts)} ground-truth masks")
    if not preds:
        raise ValueError("no masks to evaluate")
    scores = [iou(load_mask(p), load_mask(g)) for p, g in zip(preds, gts)]
    return scores, float(np.mean(scores))


def format_report(scores: list[float], mean: float) -> str:
    lines = [f"frame {t:04d} iou {s:.6f}" for t, s in enumerate(scores)]
    lines.append(f"mean iou {mean:.6f}")
    return "\n".join(lines) + "\n"
