"""Small numpy network stack: autodiff, two-branch model, losses, Adam."""

from .checkpoint import CheckpointError
from .losses import LossBreakdown, cosine_consistency, cross_entropy, total_loss
from .model import BranchEncoder, ClassifierHead, DualModel, EncoderConfig, SingleModel
from .optim import Adam, TrainConfig, cosine_lr

__all__ = [
    "Adam", "BranchEncoder", "CheckpointError", "ClassifierHead", "DualModel", "EncoderConfig",
    "LossBreakdown", "SingleModel", "TrainConfig", "cosine_consistency", "cosine_lr",
    "cross_entropy", "total_loss",
]
