from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .model import NetworkConfig, NetworkModel
from .optim import AdamState, adam_step
from .training import TrainConfig, train

__all__ = [
    "AdamState", "Checkpoint", "NetworkConfig", "NetworkModel", "TrainConfig",
    "adam_step", "load_checkpoint", "save_checkpoint", "train",
]
