"""Alternating mining / transfer-training loop and final motion-refined masks."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bundle import VideoBundle
from .harness import iou
from .mining import MiningConfig, Selection, greedy_select, similarity_matrix
from .motion import MBD_MAX_PASSES, MBD_TOL, video_saliency
from .proposals import ProposalConfig, ProposalSet, extract_proposals, pool_features
from .tensorio import save_mask
from .transfer import (SourceGallery, TrainConfig, TransferWeights, bce_loss, forward,
                       init_weights, one_hot_weights, save_weights, train_transfer)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    mining: MiningConfig = field(default_factory=MiningConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    proposals: ProposalConfig = field(default_factory=ProposalConfig)
    iou_converge: float = 0.9
    max_outer_iters: int = 10
    refine_blend: float = 0.5
    affine: bool = False
    mbd_max_passes: int = MBD_MAX_PASSES
    mbd_tol: float = MBD_TOL
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.iou_converge <= 1:
            raise ValueError("iou_converge must lie in (0, 1]")
        if not 0 <= self.refine_blend <= 1:
            raise ValueError("refine_blend must lie in [0, 1]")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be at least 1")
        if self.mbd_max_passes < 1:
            raise ValueError("mbd_max_passes must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    n_proposals: int
    n_selected: int
    energy: float
    loss: float
    iou: float
    note: str = ""

    def line(self) -> str:
        return (f"{self.iteration} {self.n_proposals} {self.n_selected} "
                f"{self.energy:.10g} {self.loss:.10g} {self.iou:.10g}")


@dataclass
class PipelineResult:
    masks: list[np.ndarray]
    records: list[IterationRecord]
    weights: TransferWeights
    initial_weights: TransferWeights
    history: list[tuple[ProposalSet, Selection]]
    saliency: list[np.ndarray]
    converged: bool
    warnings: list[str] = field(default_factory=list)


def pseudo_masks(sel: Selection, proposals: ProposalSet) -> tuple[list[np.ndarray], list[bool]]:
    """Per-frame union of the selected segments and whether the frame is labelled."""
    h, w = proposals.frame_dims
    masks = [np.zeros(h * w, dtype=bool) for _ in range(proposals.frame_count)]
    labeled = [False] * proposals.frame_count
    for i in sel.ids:
        seg = proposals[i]
        masks[seg.frame_index][seg.pixels] = True
        labeled[seg.frame_index] = True
    return [m.reshape(h, w) for m in masks], labeled


def proposal_iou(prev: tuple[ProposalSet, Selection], curr: tuple[ProposalSet, Selection]) -> float:
    """Mean over frames of the IoU of selected unions; frames empty in both count as 1."""
    prev_masks, _ = pseudo_masks(prev[1], prev[0])
    curr_masks, _ = pseudo_masks(curr[1], curr[0])
    if len(prev_masks) != len(curr_masks):
        raise ValueError("selections cover different frame counts")
    if not prev_masks:
        return 1.0
    return float(np.mean([iou(a, b) for a, b in zip(prev_masks, curr_masks)]))


def refine(prob, saliency, blend: float = 0.5, tau: float = 0.5) -> np.ndarray:
    fused = blend * np.asarray(prob, dtype=np.float64) + (1 - blend) * np.asarray(saliency, dtype=np.float64)
    return fused >= tau


def frame_vectors(proposals: ProposalSet, feat_sim: list[np.ndarray]) -> np.ndarray:
    """Unit similarity feature per frame, pooled over the union of its segments
    (the whole frame when it has none)."""
    h, w = proposals.frame_dims if proposals.frame_count else feat_sim[0].shape[1:]
    by_frame: dict[int, list[np.ndarray]] = {}
    for seg in proposals:
        by_frame.setdefault(seg.frame_index, []).append(seg.pixels)
    out = []
    for t, stack in enumerate(feat_sim):
        px = np.unique(np.concatenate(by_frame[t])) if t in by_frame else np.arange(h * w)
        out.append(pool_features(px, stack))
    return np.stack(out)


def source_weights(num_categories: int) -> TransferWeights:
    """Stand-in for the source network's foreground output: every seen category counts."""
    return TransferWeights(np.ones(num_categories))


class _Runner:
    def __init__(self, bundle: VideoBundle, cfg: PipelineConfig):
        self.bundle = bundle
        self.cfg = cfg
        self.pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None

    def map(self, fn, items):
        return list(self.pool.map(fn, items)) if self.pool else [fn(x) for x in items]

    def close(self):
        if self.pool:
            self.pool.shutdown()

    def saliency(self) -> list[np.ndarray]:
        return video_saliency(self.bundle.flows, self.cfg.mbd_max_passes, self.cfg.mbd_tol, self.pool)

    def probs(self, theta: TransferWeights) -> list[np.ndarray]:
        return self.map(lambda R: forward(R, theta)[1], self.bundle.responses)

    def proposals(self, theta: TransferWeights, saliency) -> tuple[list[np.ndarray], ProposalSet]:
        probs = self.probs(theta)
        p = extract_proposals(probs, self.bundle.feat_mine, self.bundle.feat_sim, saliency,
                              self.cfg.proposals)
        return probs, p

    def initial_weights(self, gallery: SourceGallery, saliency) -> TransferWeights:
        if len(gallery) != self.bundle.channels:
            raise ValueError(f"gallery has {len(gallery)} categories, bundle {self.bundle.channels} channels")
        _, p = self.proposals(source_weights(self.bundle.channels), saliency)
        return init_weights(frame_vectors(p, self.bundle.feat_sim), gallery)


def initial_weights(bundle: VideoBundle, gallery: SourceGallery, saliency,
                    cfg: PipelineConfig = PipelineConfig()) -> TransferWeights:
    runner = _Runner(bundle, cfg)
    try:
        return runner.initial_weights(gallery, saliency)
    finally:
        runner.close()


def mine(bundle: VideoBundle, theta: TransferWeights, saliency,
         cfg: PipelineConfig = PipelineConfig()):
    """One mining step: forward, extract proposals, greedy selection."""
    runner = _Runner(bundle, cfg)
    try:
        probs, p = runner.proposals(theta, saliency)
    finally:
        runner.close()
    sel = greedy_select(similarity_matrix(p), p.objectness, p.motion, cfg.mining)
    return probs, p, sel


def _labeled_stack(bundle: VideoBundle, masks, labeled):
    idx = [t for t, ok in enumerate(labeled) if ok]
    R = np.stack([bundle.responses[t] for t in idx])
    y = np.stack([masks[t] for t in idx]).astype(np.float64)
    return R, y


def run(bundle: VideoBundle, gallery: SourceGallery | None = None, category: int | None = None,
        cfg: PipelineConfig = PipelineConfig()) -> PipelineResult:
    if (gallery is None) == (category is None):
        raise ValueError("supply exactly one of gallery or category")
    if bundle.frame_count == 0:
        raise ValueError("empty video")
    runner = _Runner(bundle, cfg)
    try:
        return _run(runner, gallery, category)
    finally:
        runner.close()


def _run(runner: _Runner, gallery, category) -> PipelineResult:
    bundle, cfg = runner.bundle, runner.cfg
    saliency = runner.saliency()
    if gallery is not None:
        theta = runner.initial_weights(gallery, saliency)
    else:
        theta = one_hot_weights(category, bundle.channels)
    if cfg.affine:
        theta = theta.with_affine()
    theta_init = theta

    records: list[IterationRecord] = []
    history: list[tuple[ProposalSet, Selection]] = []
    warnings: list[str] = []
    converged = False
    for it in range(1, cfg.max_outer_iters + 1):
        probs, p = runner.proposals(theta, saliency)
        if it == 1 and len(p) == 0:
            msg = "no proposals in the first iteration; returning motion-only masks"
            log.warning(msg)
            warnings.append(msg)
            records.append(IterationRecord(it, 0, 0, 0.0, 0.0, 0.0, note="no-proposals"))
            masks = [s >= cfg.proposals.tau for s in saliency]
            return PipelineResult(masks, records, theta, theta_init, history, saliency, False, warnings)
        sel = greedy_select(similarity_matrix(p), p.objectness, p.motion, cfg.mining)
        overlap = proposal_iou(history[-1], (p, sel)) if history else 0.0
        history.append((p, sel))
        masks, labeled = pseudo_masks(sel, p)

        if it > 1 and overlap >= cfg.iou_converge:
            loss = 0.0
            if any(labeled):
                R, y = _labeled_stack(bundle, masks, labeled)
                loss = bce_loss(forward(R, theta)[1], y, cfg.train.prob_clip_eps)
            records.append(IterationRecord(it, len(p), len(sel), sel.energy, loss, overlap))
            converged = True
            break
        if not any(labeled):
            msg = f"iteration {it}: empty selection, nothing to train on"
            log.warning(msg)
            warnings.append(msg)
            records.append(IterationRecord(it, len(p), 0, sel.energy, 0.0, overlap, note="empty-selection"))
            break
        R, y = _labeled_stack(bundle, masks, labeled)
        theta, trace = train_transfer(R, y, theta, cfg.train)
        records.append(IterationRecord(it, len(p), len(sel), sel.energy, trace[-1], overlap))
        log.info("iteration %d: |P|=%d |A|=%d Es=%.4g loss=%.4g iou=%.4f",
                 it, len(p), len(sel), sel.energy, trace[-1], overlap)

    final_probs = runner.probs(theta)
    masks = [refine(pr, s, cfg.refine_blend, cfg.proposals.tau) for pr, s in zip(final_probs, saliency)]
    return PipelineResult(masks, records, theta, theta_init, history, saliency, converged, warnings)


def write_outputs(result: PipelineResult, directory: str | os.PathLike) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for t, m in enumerate(result.masks):
        save_mask(d / f"final_{t:04d}.pgm", m)
    (d / "iters.txt").write_text("".join(r.line() + "\n" for r in result.records))
    save_weights(d / "weights.sgt", result.weights)


def selected_label_iou(bundle: VideoBundle, gallery: SourceGallery,
                       cfg: PipelineConfig = PipelineConfig()) -> float:
    """Mean per-frame IoU between first-iteration pseudo-labels and the bundle's GT.

    Unlabelled frames score as an empty prediction.
    """
    if not bundle.gt:
        raise ValueError("bundle carries no ground-truth masks")
    runner = _Runner(bundle, cfg)
    try:
        saliency = runner.saliency()
        _, p = runner.proposals(runner.initial_weights(gallery, saliency), saliency)
    finally:
        runner.close()
    sel = greedy_select(similarity_matrix(p), p.objectness, p.motion, cfg.mining)
    masks, _ = pseudo_masks(sel, p)
    return float(np.mean([iou(m, g) for m, g in zip(masks, bundle.gt)]))
