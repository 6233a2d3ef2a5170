# src/skillchain/schema/learn_schema.py
from typing import List, Literal

from pydantic import BaseModel, Field, field_validator, model_validator

from .model_schema import DiffusionHeadSpec, MlpSpec, OptimizerConfig


class PolicySpec(BaseModel):
    """Chunked-action policy used for base and final skill policies."""

    obs_mode: Literal["pose", "pointset", "privileged"] = "pose"
    head: Literal["regression", "diffusion"] = "regression"
    obs_horizon: int = 2
    chunk: int = 16
    exec_horizon: int = 8
    decimation: int = 2  # simulator steps per policy step
    trunk: MlpSpec = Field(default_factory=lambda: MlpSpec(widths=[512, 512]))
    point_feature: int = 512
    point_mlp: List[int] = Field(default_factory=lambda: [64, 128])
    diffusion: DiffusionHeadSpec = Field(default_factory=DiffusionHeadSpec)
    obs_clip: float = 5.0
    action_clip: float = 1.0

    @model_validator(mode="after")
    def _horizons(self):
        if self.exec_horizon > self.chunk or self.exec_horizon < 1:
            raise ValueError("exec_horizon must lie in [1, chunk]")
        if self.obs_horizon < 1 or self.decimation < 1:
            raise ValueError("obs_horizon and decimation must be >= 1")
        if self.head == "diffusion" and self.chunk != self.diffusion.pred_horizon:
            raise ValueError("diffusion head chunk must equal its prediction horizon")
        return self


class BcConfig(BaseModel):
    steps: int = 20000  # 200000 at full scale
    batch_size: int = 256  # 1024 at full scale
    optimizer: OptimizerConfig = Field(default_factory=lambda: OptimizerConfig(algorithm="adamw", lr=1e-4,
                                                                               weight_decay=1e-6))
    val_fraction: float = 0.1
    log_every: int = 500
    seed: int = 0

    @field_validator("steps", "batch_size")
    @classmethod
    def _positive(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v


class PpoConfig(BaseModel):
    rollout_steps: int = 8
    minibatches: int = 4
    epochs: int = 5
    desired_kl: float = 0.16
    episode_length: int = 200
    gamma: float = 0.96
    lam: float = 0.95
    entropy_coef: float = 0.0
    clip: float = 0.2
    lr: float = 3e-4
    min_lr: float = 1e-6
    max_lr: float = 1e-2
    value_coef: float = 1.0
    max_grad_norm: float = 1.0
    n_envs: int = 256
    total_env_steps: int = 2_000_000
    init_std: float = 0.8
    residual_scale: float = 0.3
    hidden: List[int] = Field(default_factory=lambda: [256, 128, 64])
    action_clip: float = 1.0
    obs_clip: float = 5.0
    eval_every: int = 10  # PPO iterations
    eval_episodes: int = 64
    diverge_patience: int = 50
    diverge_floor: float = 0.2
    workers: int = 1
    checkpoint_every: int = 0  # PPO iterations; 0 keeps only the best residual
    seed: int = 0

    @model_validator(mode="after")
    def _ranges(self):
        if not 0.0 < self.clip < 1.0:
            raise ValueError("clip must lie in (0, 1)")
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.lam <= 1.0):
            raise ValueError("gamma and lam must lie in [0, 1]")
        for name in ("rollout_steps", "minibatches", "epochs", "episode_length", "n_envs", "total_env_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.lr <= 0 or self.init_std <= 0:
            raise ValueError("lr and init_std must be > 0")
        return self


class ExplorationSchedule(BaseModel):
    horizon: int = 100_000  # env steps until epsilon reaches 1

    @field_validator("horizon")
    @classmethod
    def _h(cls, v):
        if v < 1:
            raise ValueError("horizon must be >= 1")
        return v


class CollectConfig(BaseModel):
    n_target: int = 1000
    pilot_episodes: int = 100
    min_yield: float = 0.05
    max_episodes: int = 50_000
    record_mode: Literal["pose", "pointset"] = "pose"
    termination: Literal["predicate", "exemplar"] = "predicate"
    pos_tol: float = 0.01  # exemplar ball
    rot_tol: float = 0.1
    seed: int = 0


class CotrainConfig(BaseModel):
    rho_demo: float = 0.25
    allow_sim_only: bool = False
    bc: BcConfig = Field(default_factory=BcConfig)

    @field_validator("rho_demo")
    @classmethod
    def _rho(cls, v):
        if not 0.0 <= v <= 1.0:
            raise ValueError("rho_demo must lie in [0, 1]")
        return v
