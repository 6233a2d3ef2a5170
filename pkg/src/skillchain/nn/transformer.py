# src/skillchain/nn/transformer.py
import math

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ContextOverflow
from ..schema.model_schema import TransformerSpec


class MaskedCausalAttention(nn.Module):
    def __init__(self, hidden: int, context: int, heads: int, dropout: float = 0.0, causal: bool = True):
        super().__init__()
        self.heads = heads
        self.context = context
        self.q_net = nn.Linear(hidden, hidden)
        self.k_net = nn.Linear(hidden, hidden)
        self.v_net = nn.Linear(hidden, hidden)
        self.proj_net = nn.Linear(hidden, hidden)
        self.att_drop = nn.Dropout(dropout)
        self.proj_drop = nn.Dropout(dropout)
        ones = torch.ones((context, context))
        mask = torch.tril(ones) if causal else ones
        self.register_buffer("mask", mask.view(1, 1, context, context))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        B, T, C = x.shape
        N, D = self.heads, C // self.heads
        q = self.q_net(x).view(B, T, N, D).transpose(1, 2)
        k = self.k_net(x).view(B, T, N, D).transpose(1, 2)
        v = self.v_net(x).view(B, T, N, D).transpose(1, 2)

        weights = q @ k.transpose(2, 3) / math.sqrt(D)
        weights = weights.masked_fill(self.mask[..., :T, :T] == 0, float("-inf"))
        normalized = F.softmax(weights, dim=-1)
        attention = self.att_drop(normalized @ v)
        attention = attention.transpose(1, 2).contiguous().view(B, T, N * D)
        return self.proj_drop(self.proj_net(attention))


class Block(nn.Module):
    def __init__(self, hidden: int, context: int, heads: int, dropout: float = 0.0, causal: bool = True):
        super().__init__()
        self.attention = MaskedCausalAttention(hidden, context, heads, dropout, causal)
        self.mlp = nn.Sequential(
            nn.Linear(hidden, 4 * hidden),
            nn.GELU(),
            nn.Linear(4 * hidden, hidden),
            nn.Dropout(dropout),
        )
        self.ln1 = nn.LayerNorm(hidden)
        self.ln2 = nn.LayerNorm(hidden)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.ln1(x + self.attention(x))
        return self.ln2(x + self.mlp(x))


class CausalTransformer(nn.Module):
    """Token embedding, learned positions and a stack of attention blocks; (B, T, in) -> (B, T, hidden)."""

    def __init__(self, in_dim: int, spec: TransformerSpec = TransformerSpec()):
        super().__init__()
        self.spec = spec
        self.embed = nn.Linear(in_dim, spec.hidden)
        self.position = nn.Parameter(torch.zeros(1, spec.context, spec.hidden), requires_grad=spec.positional)
        if spec.positional:
            nn.init.normal_(self.position, std=0.02)
        self.blocks = nn.Sequential(*[Block(spec.hidden, spec.context, spec.heads, spec.dropout, spec.causal)
                                      for _ in range(spec.blocks)])
        self.ln = nn.LayerNorm(spec.hidden)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        if tokens.dim() == 2:
            tokens = tokens.unsqueeze(0)
        T = tokens.shape[1]
        if T > self.spec.context:
            raise ContextOverflow(f"sequence of {T} tokens exceeds context {self.spec.context}")
        h = self.embed(tokens) + self.position[:, :T]
        return self.ln(self.blocks(h))
