"""Self-learning segmentation of an unseen object in a video from seen-category responses."""

__version__ = "0.1.0"

from .mining import MiningConfig, Selection, greedy_select, similarity_matrix
from .pipeline import PipelineConfig, PipelineResult, run
from .transfer import SourceGallery, TrainConfig, TransferWeights

__all__ = [
    "MiningConfig",
    "PipelineConfig",
    "PipelineResult",
    "Selection",
    "SourceGallery",
    "TrainConfig",
    "TransferWeights",
    "greedy_select",
    "run",
    "similarity_matrix",
]
