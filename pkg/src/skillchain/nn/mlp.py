# src/skillchain/nn/mlp.py
import math
from typing import Optional

import numpy as np
import torch
from torch import nn

from ..schema.model_schema import MlpSpec
from .init import init_linear

ACTIVATIONS = {"relu": nn.ReLU, "tanh": nn.Tanh, "elu": nn.ELU, "mish": nn.Mish}


class Mlp(nn.Module):
    """Linear/activation stack. `final_gain=0` gives a zero output layer."""

    def __init__(self, in_dim: int, out_dim: int, spec: MlpSpec = MlpSpec(), final_gain: float = 1.0,
                 rng: Optional[np.random.Generator] = None):
        super().__init__()
        if in_dim < 1 or out_dim < 1:
            raise ValueError("layer widths must be >= 1")
        act = ACTIVATIONS[spec.activation]
        layers = []
        d = in_dim
        for w in spec.widths:
            layers += [nn.Linear(d, w), act()]
            d = w
        layers.append(nn.Linear(d, out_dim))
        self.net = nn.Sequential(*layers)
        self.in_dim, self.out_dim = in_dim, out_dim
        self.reset_parameters(spec.init, final_gain, rng)

    def reset_parameters(self, scheme: str = "orthogonal", final_gain: float = 1.0,
                         rng: Optional[np.random.Generator] = None) -> None:
        linears = [m for m in self.net if isinstance(m, nn.Linear)]
        for i, layer in enumerate(linears):
            gain = final_gain if i == len(linears) - 1 else math.sqrt(2.0)
            init_linear(layer, scheme, gain, rng)

    @property
    def final(self) -> nn.Linear:
        return self.net[-1]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)
