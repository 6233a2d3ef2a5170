# src/skillchain/nn/gae.py
from typing import Tuple

import torch


def gae(rewards, values, dones, gamma: float, lam: float,
        last_value=None) -> Tuple[torch.Tensor, torch.Tensor]:
    """Generalized advantage estimation along dim 0.

    dones[t] marks that the episode ended with step t, so values[t + 1] (or
    `last_value` after the final step) is not bootstrapped through it.
    Returns (advantages, returns) with returns = advantages + values.
    """
    r = torch.as_tensor(rewards)
    dtype = r.dtype if r.is_floating_point() else torch.get_default_dtype()
    r = r.to(dtype)
    v = torch.as_tensor(values).to(dtype)
    d = torch.as_tensor(dones).to(dtype)
    if not (r.shape == v.shape == d.shape):
        raise ValueError(f"rewards {tuple(r.shape)}, values {tuple(v.shape)}, dones {tuple(d.shape)} differ")
    if not (0.0 <= gamma <= 1.0 and 0.0 <= lam <= 1.0):
        raise ValueError("gamma and lam must lie in [0, 1]")
    T = r.shape[0]
    advantages = torch.zeros_like(r)
    if T == 0:
        return advantages, advantages + v
    nxt = torch.zeros_like(v[0]) if last_value is None else torch.as_tensor(last_value).to(dtype).expand_as(v[0])

    lastgaelam = torch.zeros_like(r[0])
    for t in reversed(range(T)):
        nextnonterminal = 1.0 - d[t]
        nextvalues = nxt if t == T - 1 else v[t + 1]
        delta = r[t] + gamma * nextvalues * nextnonterminal - v[t]
        advantages[t] = lastgaelam = delta + gamma * lam * nextnonterminal * lastgaelam
    return advantages, advantages + v
