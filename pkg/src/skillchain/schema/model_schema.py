# src/skillchain/schema/model_schema.py
from typing import List, Literal

from pydantic import BaseModel, Field, field_validator, model_validator


class MlpSpec(BaseModel):
    widths: List[int] = Field(default_factory=lambda: [512, 512], description="Hidden layer widths")
    activation: Literal["relu", "tanh", "elu", "mish"] = "mish"
    init: Literal["orthogonal", "scaled-normal"] = "orthogonal"

    @field_validator("widths")
    @classmethod
    def _widths(cls, v):
        if any(w < 1 for w in v):
            raise ValueError("layer widths must be >= 1")
        return v


class TransformerSpec(BaseModel):
    hidden: int = 256
    heads: int = 4
    blocks: int = 2
    context: int = 10
    causal: bool = True
    dropout: float = 0.0
    positional: bool = True

    @model_validator(mode="after")
    def _shape(self):
        if self.context < 1:
            raise ValueError("context length must be >= 1")
        if self.hidden < 1 or self.heads < 1 or self.blocks < 1:
            raise ValueError("hidden, heads and blocks must be >= 1")
        if self.hidden % self.heads:
            raise ValueError("hidden dim must be divisible by the number of heads")
        return self


class DiffusionHeadSpec(BaseModel):
    obs_horizon: int = 2
    pred_horizon: int = 16
    action_horizon: int = 8
    train_timesteps: int = 100
    inference_steps: int = 4
    embed_dim: int = 64
    kernel_size: int = 5
    down_dims: List[int] = Field(default_factory=lambda: [256, 512, 1024])
    width_scale: float = 0.25  # applied to down_dims; 1.0 gives the full-size network
    n_groups: int = 8
    beta_schedule: str = "squaredcos_cap_v2"

    @model_validator(mode="after")
    def _horizons(self):
        if self.inference_steps > self.train_timesteps:
            raise ValueError("inference steps cannot exceed train timesteps")
        if self.action_horizon > self.pred_horizon:
            raise ValueError("execution horizon cannot exceed prediction horizon")
        if self.width_scale <= 0:
            raise ValueError("width_scale must be > 0")
        return self

    def scaled_dims(self) -> List[int]:
        g = self.n_groups
        return [max(g, int(round(d * self.width_scale / g)) * g) for d in self.down_dims]


class OptimizerConfig(BaseModel):
    algorithm: Literal["adam", "adamw"] = "adam"
    lr: float = 1e-4
    weight_decay: float = 0.0
    betas: List[float] = Field(default_factory=lambda: [0.9, 0.999])
    eps: float = 1e-8
    max_grad_norm: float = 1.0

    @field_validator("lr")
    @classmethod
    def _lr(cls, v):
        if v <= 0:
            raise ValueError("lr must be > 0")
        return v
