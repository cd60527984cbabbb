from .evaluate import MetricsReport, evaluate_sweep
from .imagenet import ImageFolderData, imagenet100_pipeline
from .loop import TrainConfig, TrainResult, load_checkpoint, train

__all__ = [
    "MetricsReport",
    "evaluate_sweep",
    "ImageFolderData",
    "imagenet100_pipeline",
    "TrainConfig",
    "TrainResult",
    "load_checkpoint",
    "train",
]
