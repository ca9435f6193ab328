from .buffer import ReplayBuffer
from .checkpoint import load_checkpoint, read_tensors, save_checkpoint, write_tensors
from .nets import AgentNet, GruParams, MixingNet, NetDims, QmixNetworks, gru_step
from .policies import QmixPolicy, boltzmann_select
from .trainer import (EpisodeMetrics, EvalResult, Trainer, TrainerConfig,
                      episode_data, evaluate, qmix_loss, td_targets, train,
                      write_metrics_csv)

__all__ = [
    "AgentNet", "EpisodeMetrics", "EvalResult", "GruParams", "MixingNet",
    "NetDims", "QmixNetworks", "QmixPolicy", "ReplayBuffer", "Trainer",
    "TrainerConfig", "boltzmann_select", "episode_data", "evaluate",
    "gru_step", "load_checkpoint", "qmix_loss", "read_tensors",
    "save_checkpoint", "td_targets", "train", "write_metrics_csv",
    "write_tensors",
]
