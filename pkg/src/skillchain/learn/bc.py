# src/skillchain/learn/bc.py
"""Behavior cloning of chunk policies."""
import logging
import math
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import torch
from tqdm import tqdm

from ..errors import EmptyDataset, TrainingDiverged
from ..logging_setup import progress_enabled
from ..nn import clip_gradients, make_optimizer
from ..schema.learn_schema import BcConfig, PolicySpec
from ..segmentation.trajectory import Trajectory
from .dataset import ChunkDataset, build_dataset
from .metrics import write_metrics
from .normalize import RangeNormalizer, StandardNormalizer
from .policy import ChunkPolicy

logger = logging.getLogger(__name__)

Sampler = Callable[[np.random.Generator, int], Tuple[np.ndarray, np.ndarray]]


def make_policy(spec: PolicySpec, obs: np.ndarray, actions: np.ndarray, dof: int, seed: int = 0,
                meta: Optional[dict] = None) -> ChunkPolicy:
    """Fresh policy with normalizers fitted on the given frames."""
    pooled = dof if spec.obs_mode == "pointset" else None
    torch.manual_seed(seed)
    return ChunkPolicy(spec, obs.shape[1], actions.shape[1], dof, RangeNormalizer.fit(actions),
                       StandardNormalizer.fit(obs, spec.obs_clip, pooled), meta)


def _tensors(policy: ChunkPolicy, obs: np.ndarray, act: np.ndarray) -> Tuple[torch.Tensor, torch.Tensor]:
    return policy.normalize_obs(obs), torch.as_tensor(policy.normalize_actions(act), dtype=torch.float32)


def validation_loss(policy: ChunkPolicy, obs: np.ndarray, act: np.ndarray, seed: int = 0) -> float:
    """Chunk loss on held-out windows (MSE in normalized units for the regression head)."""
    was = policy.training
    policy.eval()
    with torch.no_grad():
        o, a = _tensors(policy, obs, act)
        loss = float(policy.loss(o, a, torch.Generator().manual_seed(seed)))
    policy.train(was)
    return loss


def fit_policy(policy: ChunkPolicy, sample: Sampler, cfg: BcConfig,
               val: Optional[Tuple[np.ndarray, np.ndarray]] = None,
               metrics_path: Optional[Union[str, Path]] = None, desc: str = "bc") -> pd.DataFrame:
    rng = np.random.default_rng(cfg.seed)
    generator = torch.Generator().manual_seed(cfg.seed)
    optimizer = make_optimizer(policy.parameters(), cfg.optimizer)
    rows = []
    policy.train()
    bar = tqdm(range(1, cfg.steps + 1), desc=desc, disable=not progress_enabled())
    for step in bar:
        o, a = _tensors(policy, *sample(rng, cfg.batch_size))
        loss = policy.loss(o, a, generator)
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"{desc}: non-finite loss at step {step}")
        optimizer.zero_grad()
        loss.backward()
        grad_norm = clip_gradients(policy.parameters(), cfg.optimizer.max_grad_norm)
        optimizer.step()
        if step % cfg.log_every == 0 or step == cfg.steps:
            row = {"step": step, "loss": loss.item(), "grad_norm": grad_norm}
            if val is not None and len(val[0]):
                row["val_loss"] = validation_loss(policy, *val, seed=cfg.seed)
            rows.append(row)
            bar.set_postfix(loss=f"{row['loss']:.4f}")
    policy.eval()
    df = write_metrics(rows, metrics_path)
    if len(df):
        last = df.iloc[-1]
        val_txt = f", val {last['val_loss']:.4f}" if "val_loss" in df and not math.isnan(last["val_loss"]) else ""
        logger.info("  ✔ %s: %d steps, loss %.4f%s", desc, cfg.steps, last["loss"], val_txt)
    return df


def train_bc(trajs: Sequence[Trajectory], spec: PolicySpec, cfg: BcConfig, model_dt: float, dof: int,
             metrics_path: Optional[Union[str, Path]] = None, desc: str = "bc") -> ChunkPolicy:
    """Behavior-clone skill segments. Raises EmptyDataset when there is nothing to learn from."""
    if not trajs:
        raise EmptyDataset(f"{desc}: no segments")
    rng = np.random.default_rng(cfg.seed)
    ds: ChunkDataset = build_dataset(trajs, spec, model_dt, rng)
    policy = make_policy(spec, ds.obs, ds.actions, dof, cfg.seed, {"source": "bc", "n_segments": len(trajs)})
    train_pool, val_pool = ds.split(cfg.val_fraction, rng)
    val = ds.windows(val_pool) if len(val_pool) else None
    fit_policy(policy, lambda r, n: ds.sample(r, n, train_pool), cfg, val, metrics_path, desc)
    return policy
