# src/skillchain/schema/srt_schema.py
from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from .model_schema import DiffusionHeadSpec, MlpSpec, OptimizerConfig, TransformerSpec


class SrtConfig(BaseModel):
    obs_mode: Literal["pose", "pointset"] = "pose"
    transformer: TransformerSpec = Field(default_factory=TransformerSpec)
    history: int = 10
    chunk: int = 10
    head: Literal["regression", "diffusion"] = "regression"
    action_head: MlpSpec = Field(default_factory=lambda: MlpSpec(widths=[512, 512]))
    diffusion: DiffusionHeadSpec = Field(default_factory=DiffusionHeadSpec)  # first `chunk` steps are used
    encoder: MlpSpec = Field(default_factory=lambda: MlpSpec(widths=[256]))
    point_feature: int = 512
    point_mlp: List[int] = Field(default_factory=lambda: [64, 128])
    lambda_stage: float = 1.0
    batch_size: int = 64
    steps: int = 5000
    optimizer: OptimizerConfig = Field(default_factory=lambda: OptimizerConfig(algorithm="adam", lr=1e-4))
    decimation: int = 2
    val_fraction: float = 0.1
    log_every: int = 250
    obs_clip: float = 5.0
    action_clip: float = 1.0
    seed: int = 0

    @field_validator("history", "chunk")
    @classmethod
    def _positive(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        if self.lambda_stage < 0:
            raise ValueError("lambda_stage must be >= 0")
        if self.head == "diffusion" and self.diffusion.pred_horizon < self.chunk:
            raise ValueError("diffusion prediction horizon must cover the action chunk")
        return self

    @property
    def predicted(self) -> int:
        """Actions per predicted sequence (chunk, or the diffusion prediction horizon)."""
        return self.diffusion.pred_horizon if self.head == "diffusion" else self.chunk


class ChainingConfig(BaseModel):
    c_exec: int = 5
    skill_timeout: Optional[int] = None  # simulator steps; None uses each subtask's timeout
    stage_margin: float = 0.6
    episode_cap: Optional[int] = None  # simulator steps; None uses the task horizon
    transition_timeout: int = 600  # simulator steps per transition phase
    planner_retries: int = 5  # planner router: pairs tried before giving up on a transition

    @field_validator("c_exec")
    @classmethod
    def _c(cls, v):
        if not 1 <= v <= 10:
            raise ValueError("c_exec must lie in [1, 10]")
        return v
