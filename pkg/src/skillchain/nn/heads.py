# src/skillchain/nn/heads.py
from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn

from ..schema.model_schema import MlpSpec
from .mlp import Mlp


class ChunkHead(nn.Module):
    """Regression head: features -> (chunk, action_dim), trained with MSE."""

    def __init__(self, feat_dim: int, action_dim: int, chunk: int, spec: MlpSpec = MlpSpec()):
        super().__init__()
        self.action_dim = action_dim
        self.chunk = chunk
        self.mlp = Mlp(feat_dim, action_dim * chunk, spec)

    def forward(self, feat: torch.Tensor) -> torch.Tensor:
        return self.mlp(feat).view(*feat.shape[:-1], self.chunk, self.action_dim)

    def loss(self, feat: torch.Tensor, target: torch.Tensor,
             generator: Optional[torch.Generator] = None) -> torch.Tensor:
        return F.mse_loss(self(feat), target)

    @torch.no_grad()
    def sample(self, feat: torch.Tensor, generator: Optional[torch.Generator] = None) -> torch.Tensor:
        return self(feat)


class PointSetEncoder(nn.Module):
    """Shared per-point MLP followed by a max-pool over points."""

    def __init__(self, in_dim: int = 2, widths=(64, 128), feature: int = 512):
        super().__init__()
        layers = []
        d = in_dim
        for w in widths:
            layers += [nn.Linear(d, w), nn.ReLU()]
            d = w
        layers.append(nn.Linear(d, feature))
        self.point_mlp = nn.Sequential(*layers)
        self.feature = feature

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        return self.point_mlp(points).max(dim=-2).values
