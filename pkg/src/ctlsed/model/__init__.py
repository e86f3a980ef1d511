from .losses import combined_loss, mil_loss, mil_loss_from_frames, mil_pool, strong_loss
from .network import PredictorConfig, init_params, predict, zero_params
from .params_io import load_params, save_params
from .train import TrainConfig, TrainResult, TrainingDiverged, evaluate, train

__all__ = [
    "PredictorConfig",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "combined_loss",
    "evaluate",
    "init_params",
    "load_params",
    "mil_loss",
    "mil_loss_from_frames",
    "mil_pool",
    "predict",
    "save_params",
    "strong_loss",
    "train",
    "zero_params",
]
