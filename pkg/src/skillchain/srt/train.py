# src/skillchain/srt/train.py
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import torch
from tqdm import tqdm

from ..errors import EmptyDataset, MissingFamily, TrainingDiverged
from ..learn.metrics import write_metrics
from ..learn.normalize import RangeNormalizer, StandardNormalizer
from ..logging_setup import progress_enabled
from ..nn import clip_gradients, make_optimizer
from ..schema.srt_schema import SrtConfig
from .policy import SrtPolicy

logger = logging.getLogger(__name__)

Family = List[Dict[str, np.ndarray]]


class SrtWindows:
    """Every frame of every transition trajectory as one training sample.

    A sample is the left-padded observation window ending at frame t, the
    action sequence starting at t (last action held past the end) and the
    stage label of frame t.
    """

    def __init__(self, families: Dict[int, Family], history: int, predicted: int):
        trajs = [tr for i in sorted(families) for tr in families[i] if len(tr["action"])]
        if not trajs:
            raise EmptyDataset("transition dataset has no frames")
        self.obs = np.concatenate([tr["observation"] for tr in trajs]).astype(float)
        self.actions = np.concatenate([tr["action"] for tr in trajs]).astype(float)
        self.stages = np.concatenate([np.asarray(tr["stage"], np.int64).reshape(-1) for tr in trajs])
        obs_idx, act_idx = [], []
        offset = 0
        for tr in trajs:
            T = len(tr["action"])
            t = np.arange(T)[:, None]
            win = t + np.arange(-history + 1, 1)
            obs_idx.append(np.where(win >= 0, offset + win, -1))
            act_idx.append(offset + np.clip(t + np.arange(predicted), 0, T - 1))
            offset += T
        self.obs_idx = np.concatenate(obs_idx)
        self.act_idx = np.concatenate(act_idx)
        self.n_trajectories = len(trajs)

    def __len__(self) -> int:
        return len(self.obs_idx)

    def windows(self, idx: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        oi = self.obs_idx[idx]
        pad = oi < 0
        obs = self.obs[np.where(pad, 0, oi)]
        obs[pad] = 0.0
        return obs, pad, self.actions[self.act_idx[idx]], self.stages[idx]

    def sample(self, rng: np.random.Generator, n: int, pool: np.ndarray):
        return self.windows(pool[rng.integers(0, len(pool), n)])


def check_families(families: Dict[int, Family], K: int) -> None:
    for i in range(1, K + 1):
        if not families.get(i):
            raise MissingFamily(i)


def _tensors(policy: SrtPolicy, obs, pad, act, stages):
    o = policy.normalize_obs(obs)
    p = torch.as_tensor(pad)
    o = torch.where(p.unsqueeze(-1), torch.zeros_like(o), o)
    a = torch.as_tensor(policy.normalize_actions(act), dtype=torch.float32)
    return o, p, a, torch.as_tensor(stages, dtype=torch.long)


@torch.no_grad()
def stage_accuracy(policy: SrtPolicy, data: SrtWindows, idx: np.ndarray, batch: int = 512) -> float:
    """Fraction of windows whose argmax stage equals the label."""
    if not len(idx):
        return float("nan")
    was = policy.training
    policy.eval()
    hits = 0
    for s in range(0, len(idx), batch):
        o, p, _, st = _tensors(policy, *data.windows(idx[s:s + batch]))
        hits += int((policy.stage_logits(o, p).argmax(-1) == st).sum())
    policy.train(was)
    return hits / len(idx)


def make_srt(cfg: SrtConfig, data: SrtWindows, K: int, dof: int, meta: Optional[dict] = None) -> SrtPolicy:
    pooled = dof if cfg.obs_mode == "pointset" else None
    torch.manual_seed(cfg.seed)
    return SrtPolicy(cfg, data.obs.shape[1], data.actions.shape[1], dof, K, RangeNormalizer.fit(data.actions),
                     StandardNormalizer.fit(data.obs, cfg.obs_clip, pooled), meta)


def train_srt(families: Dict[int, Family], K: int, cfg: SrtConfig, dof: int,
              metrics_path: Optional[Union[str, Path]] = None) -> Tuple[SrtPolicy, pd.DataFrame]:
    """Joint chunk-action and stage training over sliding observation windows.

    `families[i]` holds the trajectories ending in skill i, each a dict of
    `observation`, `action` and `stage` arrays. MissingFamily names the
    first skill without any.
    """
    check_families(families, K)
    data = SrtWindows(families, cfg.history, cfg.predicted)
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(data))
    n_val = int(len(data) * cfg.val_fraction) if len(data) > 1 else 0
    train_pool, val_pool = perm[n_val:], perm[:n_val]

    policy = make_srt(cfg, data, K, dof, {"n_trajectories": data.n_trajectories, "frames": len(data)})
    generator = torch.Generator().manual_seed(cfg.seed)
    optimizer = make_optimizer(policy.parameters(), cfg.optimizer)
    rows = []
    policy.train()
    bar = tqdm(range(1, cfg.steps + 1), desc="train srt", disable=not progress_enabled())
    for step in bar:
        o, p, a, st = _tensors(policy, *data.sample(rng, cfg.batch_size, train_pool))
        loss, act_loss, stage_loss = policy.loss(o, p, a, st, generator)
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"srt: non-finite loss at step {step}")
        optimizer.zero_grad()
        loss.backward()
        clip_gradients(policy.parameters(), cfg.optimizer.max_grad_norm)
        optimizer.step()
        if step % cfg.log_every == 0 or step == cfg.steps:
            rows.append({"step": step, "loss": float(loss), "action_loss": float(act_loss),
                         "stage_loss": float(stage_loss), "val_stage_acc": stage_accuracy(policy, data, val_pool)})
            bar.set_postfix(loss=f"{float(loss):.4f}")
    policy.eval()
    df = write_metrics(rows, metrics_path)
    train_acc = stage_accuracy(policy, data, train_pool)
    policy.meta.update({"train_stage_acc": train_acc, "val_stage_acc": stage_accuracy(policy, data, val_pool)})
    logger.info("  ✔ srt: %d windows from %d transitions, stage accuracy %.3f (held-out %.3f)", len(data),
                data.n_trajectories, train_acc, policy.meta["val_stage_acc"])
    return policy, df
