# src/skillchain/learn/__init__.py
from .bc import fit_policy, make_policy, train_bc, validation_loss
from .collect import CollectResult, collect_success_rollouts
from .cotrain import cotrain_skill
from .dataset import ChunkDataset, MixedDataset, build_dataset, trajectory_arrays
from .env import SkillEnv, StepResult, VecEnv
from .normalize import RangeNormalizer, RunningMeanStd, StandardNormalizer
from .policy import ChunkPolicy
from .ppo import adapt_lr, clipped_surrogate, run_ppo
from .residual import ResidualPolicy, combined_action, train_residual_ppo
from .rl_finetune import train_finetune_ppo
from .runner import BatchedPolicyRunner, ObsHistory, PolicyRunner
from .schedule import epsilon
from .termination import in_exemplar_ball, make_termination

__all__ = [
    "fit_policy", "make_policy", "train_bc", "validation_loss", "CollectResult", "collect_success_rollouts",
    "cotrain_skill", "ChunkDataset", "MixedDataset", "build_dataset", "trajectory_arrays", "SkillEnv",
    "StepResult", "VecEnv", "RangeNormalizer", "RunningMeanStd", "StandardNormalizer", "ChunkPolicy",
    "adapt_lr", "clipped_surrogate", "run_ppo", "ResidualPolicy", "combined_action", "train_residual_ppo",
    "train_finetune_ppo", "BatchedPolicyRunner", "ObsHistory", "PolicyRunner", "epsilon", "in_exemplar_ball",
    "make_termination",
]
