# src/skillchain/learn/cotrain.py
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..errors import EmptyDataset
from ..schema.learn_schema import CotrainConfig, PolicySpec
from ..segmentation.trajectory import Trajectory
from .bc import fit_policy, make_policy
from .dataset import MixedDataset, build_dataset
from .policy import ChunkPolicy

logger = logging.getLogger(__name__)


def cotrain_skill(sim_data: Sequence[Trajectory], demo_segments: Sequence[Trajectory], spec: PolicySpec,
                  cfg: CotrainConfig, model_dt: float, dof: int,
                  metrics_path: Optional[Union[str, Path]] = None, desc: str = "cotrain") -> ChunkPolicy:
    """BC on simulator rollouts plus demo segments; each batch sample is a demo sample with probability rho_demo.

    With no demo segments the policy trains on rollouts alone (only when
    `cfg.allow_sim_only`) and carries `sim_only` in its metadata.
    """
    if not sim_data and not demo_segments:
        raise EmptyDataset(f"{desc}: neither rollouts nor demo segments")
    if not demo_segments and not cfg.allow_sim_only:
        raise EmptyDataset(f"{desc}: no demo segments and sim-only training is not allowed")
    rng = np.random.default_rng(cfg.bc.seed)
    parts, weights = [], []
    if sim_data:
        parts.append(build_dataset(sim_data, spec, model_dt, rng))
        weights.append(1.0 - cfg.rho_demo if demo_segments else 1.0)
    if demo_segments:
        parts.append(build_dataset(demo_segments, spec, model_dt, rng))
        weights.append(cfg.rho_demo if sim_data else 1.0)

    obs = np.concatenate([p.obs for p in parts])
    actions = np.concatenate([p.actions for p in parts])
    meta = {"source": "cotrain", "n_sim": len(sim_data), "n_demo": len(demo_segments),
            "rho_demo": cfg.rho_demo, "sim_only": not demo_segments}
    policy = make_policy(spec, obs, actions, dof, cfg.bc.seed, meta)
    mixed = MixedDataset(parts, weights)

    def sample(r: np.random.Generator, n: int):
        o, a, _ = mixed.sample(r, n)
        return o, a

    if meta["sim_only"]:
        logger.warning("  %s: training on simulator rollouts only", desc)
    fit_policy(policy, sample, cfg.bc, None, metrics_path, desc)
    return policy
