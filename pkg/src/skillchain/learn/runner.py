# src/skillchain/learn/runner.py
"""Receding-horizon execution of chunk policies."""
from collections import deque
from typing import Deque, List, Optional

import numpy as np
import torch

from ..world import WorldState, observe
from .policy import ChunkPolicy


class ObsHistory:
    """Per-environment observation windows; a fresh episode repeats its first observation."""

    def __init__(self, n: int, horizon: int):
        self.n, self.horizon = n, horizon
        self.buf: Optional[np.ndarray] = None
        self.fresh = np.ones(n, dtype=bool)

    def reset(self, k: Optional[int] = None) -> None:
        if k is None:
            self.fresh[:] = True
        else:
            self.fresh[k] = True

    def push(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, float)
        if self.buf is None:
            self.buf = np.repeat(obs[:, None, :], self.horizon, axis=1)
        else:
            self.buf = np.concatenate([self.buf[:, 1:], obs[:, None, :]], axis=1)
        if np.any(self.fresh):
            self.buf[self.fresh] = obs[self.fresh][:, None, :]
            self.fresh[:] = False
        return self.buf


class BatchedPolicyRunner:
    """Policy-rate stepping of n environments: re-infer a chunk when an environment's queue runs dry."""

    def __init__(self, policy: ChunkPolicy, n: int, seed: int = 0, exec_horizon: Optional[int] = None):
        self.policy = policy
        self.n = n
        self.exec_horizon = exec_horizon or policy.spec.exec_horizon
        self.history = ObsHistory(n, policy.spec.obs_horizon)
        self.queues: List[Deque[np.ndarray]] = [deque() for _ in range(n)]
        self.generator = torch.Generator().manual_seed(int(seed))

    def reset(self, k: Optional[int] = None) -> None:
        self.history.reset(k)
        for i in range(self.n) if k is None else (k,):
            self.queues[i].clear()

    def windows(self) -> np.ndarray:
        return self.history.buf

    def step(self, obs: np.ndarray) -> np.ndarray:
        """(n, obs_dim) observations -> (n, action_dim) normalized actions."""
        windows = self.history.push(obs)
        empty = [i for i in range(self.n) if not self.queues[i]]
        if empty:
            chunks = self.policy.predict(windows[empty], self.generator)
            for i, c in zip(empty, chunks):
                self.queues[i].extend(c[:self.exec_horizon])
        return np.stack([q.popleft() for q in self.queues])


class PolicyRunner:
    """Single environment at simulator rate: a new policy action every `decimation` steps, held between."""

    def __init__(self, policy: ChunkPolicy, rng: np.random.Generator, seed: int = 0, noisy: bool = True):
        self.policy = policy
        self.rng = rng
        self.noisy = noisy
        self.inner = BatchedPolicyRunner(policy, 1, seed)
        self.held: Optional[np.ndarray] = None
        self.count = 0

    def reset(self) -> None:
        self.inner.reset()
        self.held = None
        self.count = 0

    def act(self, state: WorldState) -> np.ndarray:
        if self.held is None or self.count % self.policy.spec.decimation == 0:
            obs = observe(state, self.policy.spec.obs_mode, self.rng, self.noisy).vector
            a = self.inner.step(obs[None])[0]
            self.held = self.policy.denormalize(a)
        self.count += 1
        return self.held.copy()
