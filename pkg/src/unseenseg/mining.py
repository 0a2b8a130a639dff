"""Greedy selection of object-like proposals under a facility-location + unary energy.

The energy of a selection ``A`` over ``n`` proposals is

    E(A) = H(A) + lambda_o * sum(objectness[A]) + lambda_m * sum(motion[A])

with the facility term ``H`` either in max form (``sum_j max_{i in A} W[i, j]``)
or in sum form (``sum_{i in A} sum_j W[i, j]``), minus ``alpha`` per opened
facility.  ``H`` of the empty selection is 0 in both forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

VARIANTS = ("max", "sum")


@dataclass(frozen=True)
class MiningConfig:
    alpha: float = 1.0
    lambda_o: float = 20.0
    lambda_m: float = 35.0
    na_frac: float = 0.8
    beta: float = 0.8
    facility_variant: str = "max"

    def __post_init__(self):
        if self.alpha < 0 or self.lambda_o < 0 or self.lambda_m < 0:
            raise ValueError("alpha, lambda_o and lambda_m must be nonnegative")
        if not 0 < self.na_frac <= 1:
            raise ValueError("na_frac must lie in (0, 1]")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.facility_variant not in VARIANTS:
            raise ValueError(f"facility_variant must be one of {VARIANTS}")

    def max_selected(self, n: int) -> int:
        # Small epsilon keeps 0.8 * 10 from rounding up to 9.
        return int(math.ceil(self.na_frac * n - 1e-9))


@dataclass
class Selection:
    ids: list[int] = field(default_factory=list)
    gains: list[float] = field(default_factory=list)
    energy: float = 0.0
    stop_reason: str = "empty"

    def __len__(self) -> int:
        return len(self.ids)


def similarity_matrix(features) -> np.ndarray:
    """Pairwise inner products of the rows of ``features`` (or of a ProposalSet)."""
    if hasattr(features, "mine_features"):
        features = features.mine_features()
    f = np.asarray(features, dtype=np.float64)
    return f @ f.T


def _check_ids(A, n: int) -> list[int]:
    ids = [int(i) for i in A]
    for i in ids:
        if not 0 <= i < n:
            raise IndexError(f"segment id {i} out of range for {n} proposals")
    return ids


def facility_term(A: Iterable[int], W, alpha: float, variant: str = "max") -> float:
    W = np.asarray(W, dtype=np.float64)
    ids = _check_ids(A, W.shape[0])
    if not ids:
        return 0.0
    if variant == "max":
        cover = W[ids].max(axis=0).sum()
    elif variant == "sum":
        cover = W[ids].sum()
    else:
        raise ValueError(f"unknown facility variant {variant!r}")
    return float(cover - len(ids) * alpha)


def unary_term(A: Iterable[int], objectness, motion, lambda_o: float, lambda_m: float) -> float:
    ids = list(A)
    if not ids:
        return 0.0
    obj = np.asarray(objectness, dtype=np.float64)
    mot = np.asarray(motion, dtype=np.float64)
    return float(lambda_o * obj[ids].sum() + lambda_m * mot[ids].sum())


def energy_es(A: Iterable[int], W, objectness, motion, cfg: MiningConfig) -> float:
    ids = list(A)
    return (facility_term(ids, W, cfg.alpha, cfg.facility_variant)
            + unary_term(ids, objectness, motion, cfg.lambda_o, cfg.lambda_m))


def greedy_select(W, objectness, motion, cfg: MiningConfig = MiningConfig()) -> Selection:
    """Greedy maximisation of the selection energy.

    Each round adds the unselected proposal with the largest marginal gain
    (lowest id on ties).  Stops before adding when the selection would exceed
    ``ceil(na_frac * n)``, when the best gain is not positive, or, from the
    second round on, when the gain falls below ``beta`` times the previous one.
    """
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0] if W.size else 0
    sel = Selection()
    if n == 0:
        return sel
    unary = (cfg.lambda_o * np.asarray(objectness, dtype=np.float64)
             + cfg.lambda_m * np.asarray(motion, dtype=np.float64))
    limit = cfg.max_selected(n)
    chosen = np.zeros(n, dtype=bool)
    row_sums = W.sum(axis=1)
    cover = None  # current per-vertex max similarity (max variant)

    while True:
        if len(sel.ids) + 1 > limit:
            sel.stop_reason = "size"
            break
        if cfg.facility_variant == "max" and cover is not None:
            cov_gain = np.maximum(W - cover[None, :], 0.0).sum(axis=1)
        else:
            cov_gain = row_sums
        gains = cov_gain - cfg.alpha + unary
        gains[chosen] = -np.inf
        a = int(np.argmax(gains))
        g = float(gains[a])
        if g <= 0:
            sel.stop_reason = "nonpositive"
            break
        if sel.gains and g < cfg.beta * sel.gains[-1]:
            sel.stop_reason = "ratio"
            break
        chosen[a] = True
        sel.ids.append(a)
        sel.gains.append(g)
        cover = W[a].copy() if cover is None else np.maximum(cover, W[a])
    sel.energy = energy_es(sel.ids, W, objectness, motion, cfg)
    return sel


def select_proposals(proposals, cfg: MiningConfig = MiningConfig()) -> tuple[Selection, np.ndarray]:
    W = similarity_matrix(proposals)
    return greedy_select(W, proposals.objectness, proposals.motion, cfg), W


def write_selection(sel: Selection, sink: TextIO) -> None:
    sink.write(f"Es {sel.energy!r}\n")
    for step, (i, g) in enumerate(zip(sel.ids, sel.gains), start=1):
        sink.write(f"{step} {i} {g!r}\n")


def read_selection(source: TextIO) -> Selection:
    lines = [ln.split() for ln in source.read().splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 2 or lines[0][0] != "Es":
        raise ValueError("selection file must start with 'Es <energy>'")
    sel = Selection(energy=float(lines[0][1]), stop_reason="loaded")
    for k, parts in enumerate(lines[1:], start=1):
        if len(parts) != 3 or int(parts[0]) != k:
            raise ValueError(f"malformed selection line {k}: {' '.join(parts)}")
        sel.ids.append(int(parts[1]))
        sel.gains.append(float(parts[2]))
    return sel
