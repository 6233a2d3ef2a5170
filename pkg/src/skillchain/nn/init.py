# src/skillchain/nn/init.py
import math
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn


def torch_seeded_rng() -> np.random.Generator:
    """numpy generator drawn from the global torch stream, so `torch.manual_seed` fixes initialization."""
    return np.random.default_rng(int(torch.randint(0, 2 ** 31 - 1, (1,)).item()))


def init_orthogonal(shape: Sequence[int], gain: float = 1.0,
                    rng: Optional[np.random.Generator] = None) -> torch.Tensor:
    """Orthogonal 2-D weight block scaled by `gain`.

    The smaller of rows/columns is orthonormal: WᵀW = I for tall blocks, WWᵀ = I for wide ones.
    """
    if len(shape) != 2:
        raise ValueError(f"orthogonal init needs a 2-D shape, got {tuple(shape)}")
    rows, cols = int(shape[0]), int(shape[1])
    rng = rng if rng is not None else torch_seeded_rng()
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    d = np.sign(np.diag(r))
    q = q * np.where(d == 0, 1.0, d)
    if rows < cols:
        q = q.T
    return torch.as_tensor(gain * q, dtype=torch.get_default_dtype())


def init_linear(layer: nn.Linear, scheme: str, gain: float, rng: Optional[np.random.Generator] = None) -> None:
    with torch.no_grad():
        if scheme == "orthogonal":
            layer.weight.copy_(init_orthogonal(layer.weight.shape, gain, rng))
        else:
            rng = rng if rng is not None else torch_seeded_rng()
            std = gain / math.sqrt(layer.in_features)
            layer.weight.copy_(torch.as_tensor(rng.normal(0.0, std, tuple(layer.weight.shape)),
                                               dtype=layer.weight.dtype))
        if layer.bias is not None:
            layer.bias.zero_()
