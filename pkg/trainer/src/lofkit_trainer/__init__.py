"""Supervised LoF baselines: ResNet classifiers and SegFormer segmentation.

Everything read or written here goes through the lofkit file formats
(manifests, split files, mask/probability PNGs, prediction CSV, exported
channel stacks); checkpoints are private to this package.
"""

from .config import TrainConfig
from .export import export_classifier_predictions, export_segmenter_probs
from .train import TrainLog, train_classifier, train_segmenter

__all__ = [
    "TrainConfig",
    "TrainLog",
    "export_classifier_predictions",
    "export_segmenter_probs",
    "train_classifier",
    "train_segmenter",
]
