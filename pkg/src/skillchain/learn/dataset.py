# src/skillchain/learn/dataset.py
"""Windowed (observation history, action chunk) samples drawn from trajectories."""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import EmptyDataset
from ..schema.learn_schema import PolicySpec
from ..segmentation.trajectory import Trajectory
from ..world import observe

logger = logging.getLogger(__name__)


def policy_stride(traj: Trajectory, spec: PolicySpec, model_dt: float) -> int:
    """Frames per policy step: demos are logged at simulator rate, rollouts at policy rate."""
    return max(1, int(round(spec.decimation * model_dt / traj.meta.dt)))


def trajectory_arrays(traj: Trajectory, spec: PolicySpec, model_dt: float,
                      rng: np.random.Generator, noisy: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """Observations and absolute joint targets at policy rate."""
    stride = policy_stride(traj, spec, model_dt)
    idx = np.arange(0, len(traj), stride)
    if traj.observations is not None:
        obs = np.asarray(traj.observations, float)[idx]
    else:
        obs = np.stack([observe(traj.states[t], spec.obs_mode, rng, noisy).vector for t in idx])
    return obs, np.asarray(traj.actions, float)[idx]


class ChunkDataset:
    """Concatenated per-trajectory arrays plus, per sample, the frame indices of its window and chunk.

    Windows and chunks are clamped at trajectory edges (first observation
    repeated, last action held).
    """

    def __init__(self, parts: Sequence[Tuple[np.ndarray, np.ndarray]], obs_horizon: int, chunk: int):
        parts = [(o, a) for o, a in parts if len(o)]
        if not parts:
            raise EmptyDataset("no frames to train on")
        self.obs = np.concatenate([o for o, _ in parts]).astype(float)
        self.actions = np.concatenate([a for _, a in parts]).astype(float)
        obs_idx, act_idx = [], []
        offset = 0
        for o, _ in parts:
            T = len(o)
            t = np.arange(T)[:, None]
            obs_idx.append(offset + np.clip(t + np.arange(-obs_horizon + 1, 1), 0, T - 1))
            act_idx.append(offset + np.clip(t + np.arange(chunk), 0, T - 1))
            offset += T
        self.obs_idx = np.concatenate(obs_idx)
        self.act_idx = np.concatenate(act_idx)
        self.n_trajectories = len(parts)

    def __len__(self) -> int:
        return len(self.obs_idx)

    def windows(self, idx: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self.obs[self.obs_idx[idx]], self.actions[self.act_idx[idx]]

    def sample(self, rng: np.random.Generator, n: int, pool: Optional[np.ndarray] = None
               ) -> Tuple[np.ndarray, np.ndarray]:
        pool = np.arange(len(self)) if pool is None else pool
        return self.windows(pool[rng.integers(0, len(pool), n)])

    def split(self, fraction: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Index pools (train, val); val is empty when the dataset is too small to spare samples."""
        perm = rng.permutation(len(self))
        n_val = int(len(self) * fraction) if len(self) > 1 else 0
        return perm[n_val:], perm[:n_val]


class MixedDataset:
    """Per-sample Bernoulli choice between datasets with fixed weights."""

    def __init__(self, datasets: Sequence[ChunkDataset], weights: Sequence[float]):
        if len(datasets) != len(weights) or not datasets:
            raise ValueError("one weight per dataset")
        w = np.asarray(weights, float)
        if np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be non-negative with a positive sum")
        self.datasets = list(datasets)
        self.weights = w / w.sum()

    def __len__(self) -> int:
        return sum(len(d) for d in self.datasets)

    def sample(self, rng: np.random.Generator, n: int, pools: Optional[List[np.ndarray]] = None
               ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns (obs windows, action chunks, source index per sample)."""
        source = rng.choice(len(self.datasets), size=n, p=self.weights)
        obs, act = [], []
        order = []
        for k, d in enumerate(self.datasets):
            sel = np.flatnonzero(source == k)
            if not len(sel):
                continue
            o, a = d.sample(rng, len(sel), None if pools is None else pools[k])
            obs.append(o)
            act.append(a)
            order.append(sel)
        order = np.concatenate(order)
        inv = np.empty_like(order)
        inv[order] = np.arange(n)
        return np.concatenate(obs)[inv], np.concatenate(act)[inv], source


def build_dataset(trajs: Sequence[Trajectory], spec: PolicySpec, model_dt: float,
                  rng: np.random.Generator) -> ChunkDataset:
    parts = [trajectory_arrays(t, spec, model_dt, rng) for t in trajs]
    ds = ChunkDataset(parts, spec.obs_horizon, spec.chunk)
    logger.debug("dataset: %d trajectories, %d samples", ds.n_trajectories, len(ds))
    return ds
