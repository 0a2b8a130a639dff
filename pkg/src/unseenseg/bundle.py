"""On-disk video bundle: per-frame response/feature stacks, flow, optional GT masks."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensorio import FlowField, load_flo, load_mask, load_tensor, save_flo, save_mask, save_tensor

META_KEYS = ("frames", "height", "width", "channels", "dsim")


@dataclass
class VideoBundle:
    responses: list[np.ndarray]
    feat_mine: list[np.ndarray]
    feat_sim: list[np.ndarray]
    flows: list[FlowField]
    gt: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        m = len(self.responses)
        if m < 2:
            raise ValueError("a video needs at least two frames")
        if len(self.feat_mine) != m or len(self.feat_sim) != m:
            raise ValueError("feature stacks must cover every frame")
        if len(self.flows) != m - 1:
            raise ValueError(f"expected {m - 1} flow fields, got {len(self.flows)}")
        if self.gt and len(self.gt) != m:
            raise ValueError("ground-truth masks must cover every frame")
        h, w = self.frame_dims
        for t in range(m):
            if (self.responses[t].shape != (self.channels, h, w)
                    or self.feat_mine[t].shape[1:] != (h, w)
                    or self.feat_sim[t].shape != (self.dsim, h, w)):
                raise ValueError(f"frame {t}: stack dimensions disagree")
        for t, f in enumerate(self.flows):
            if (f.height, f.width) != (h, w):
                raise ValueError(f"flow {t}: size {f.height}x{f.width}, frames are {h}x{w}")

    @property
    def frame_count(self) -> int:
        return len(self.responses)

    @property
    def frame_dims(self) -> tuple[int, int]:
        return self.responses[0].shape[1:]

    @property
    def channels(self) -> int:
        return self.responses[0].shape[0]

    @property
    def dsim(self) -> int:
        return self.feat_sim[0].shape[0]

    def meta(self) -> dict[str, int]:
        h, w = self.frame_dims
        return {"frames": self.frame_count, "height": h, "width": w,
                "channels": self.channels, "dsim": self.dsim}


def save_bundle(directory: str | os.PathLike, bundle: VideoBundle) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "meta.txt").write_text("".join(f"{k} {v}\n" for k, v in bundle.meta().items()))
    for t in range(bundle.frame_count):
        save_tensor(d / f"resp_{t:04d}.sgt", bundle.responses[t])
        save_tensor(d / f"featmine_{t:04d}.sgt", bundle.feat_mine[t])
        save_tensor(d / f"featsim_{t:04d}.sgt", bundle.feat_sim[t])
    for t, f in enumerate(bundle.flows):
        save_flo(d / f"flow_{t:04d}.flo", f)
    for t, g in enumerate(bundle.gt):
        save_mask(d / f"gt_{t:04d}.pgm", g)


def read_meta(path: str | os.PathLike) -> dict[str, int]:
    meta = {}
    for ln in Path(path).read_text().splitlines():
        if not ln.strip():
            continue
        parts = ln.split()
        if len(parts) != 2 or parts[0] not in META_KEYS:
            raise ValueError(f"{path}: bad meta line {ln!r}")
        meta[parts[0]] = int(parts[1])
    missing = set(META_KEYS) - set(meta)
    if missing:
        raise ValueError(f"{path}: missing keys {sorted(missing)}")
    return meta


def load_bundle(directory: str | os.PathLike) -> VideoBundle:
    d = Path(directory)
    meta = read_meta(d / "meta.txt")
    m = meta["frames"]
    resp = [load_tensor(d / f"resp_{t:04d}.sgt") for t in range(m)]
    mine = [load_tensor(d / f"featmine_{t:04d}.sgt") for t in range(m)]
    sim = [load_tensor(d / f"featsim_{t:04d}.sgt") for t in range(m)]
    flows = [load_flo(d / f"flow_{t:04d}.flo") for t in range(m - 1)]
    gt_paths = [d / f"gt_{t:04d}.pgm" for t in range(m)]
    gt = [load_mask(p) for p in gt_paths] if all(p.exists() for p in gt_paths) else []
    bundle = VideoBundle(resp, mine, sim, flows, gt)
    if bundle.meta() != meta:
        raise ValueError(f"{d}: meta.txt {meta} disagrees with stored tensors {bundle.meta()}")
    return bundle
