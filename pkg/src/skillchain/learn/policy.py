# src/skillchain/learn/policy.py
"""Chunked-action policy used for base and final skill policies."""
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
import torch
from torch import nn

from ..errors import SchemaError
from ..nn import ChunkHead, DiffusionHead, PointSetEncoder, load_checkpoint, save_module
from ..schema.learn_schema import PolicySpec
from .normalize import RangeNormalizer, StandardNormalizer

logger = logging.getLogger(__name__)


class ChunkPolicy(nn.Module):
    """Observation window (obs_horizon frames) -> chunk of normalized joint targets.

    Observations are standardized and actions live in per-dimension [-1, 1];
    both normalizers travel with the checkpoint.
    """

    def __init__(self, spec: PolicySpec, obs_dim: int, action_dim: int, dof: int,
                 action_norm: RangeNormalizer, obs_norm: StandardNormalizer, meta: Optional[dict] = None):
        super().__init__()
        if spec.obs_mode == "pointset" and (obs_dim - dof) % 2:
            raise ValueError("pointset observations must hold 2-D points after the joint block")
        self.spec = spec
        self.obs_dim, self.action_dim, self.dof = obs_dim, action_dim, dof
        self.action_norm = action_norm
        self.obs_norm = obs_norm
        self.meta = dict(meta or {})

        if spec.obs_mode == "pointset":
            self.points = PointSetEncoder(2, spec.point_mlp, spec.point_feature)
            frame_dim = dof + spec.point_feature
        else:
            self.points = None
            frame_dim = obs_dim
        feat_dim = frame_dim * spec.obs_horizon
        if spec.head == "diffusion":
            self.head = DiffusionHead(feat_dim, action_dim, spec.diffusion)
        else:
            self.head = ChunkHead(feat_dim, action_dim, spec.chunk, spec.trunk)

    @property
    def chunk(self) -> int:
        return self.spec.chunk

    def encode(self, obs: torch.Tensor) -> torch.Tensor:
        """(B, obs_horizon, obs_dim) normalized windows -> (B, features)."""
        if self.points is not None:
            q = obs[..., :self.dof]
            pts = obs[..., self.dof:].reshape(*obs.shape[:-1], -1, 2)
            obs = torch.cat([q, self.points(pts)], dim=-1)
        return obs.flatten(start_dim=-2)

    def loss(self, obs: torch.Tensor, actions: torch.Tensor,
             generator: Optional[torch.Generator] = None) -> torch.Tensor:
        return self.head.loss(self.encode(obs), actions, generator)

    def normalize_obs(self, windows: np.ndarray) -> torch.Tensor:
        return torch.as_tensor(self.obs_norm.normalize(windows), dtype=torch.float32)

    @torch.no_grad()
    def predict(self, windows: np.ndarray, generator: Optional[torch.Generator] = None) -> np.ndarray:
        """Raw observation windows (B, oh, D) -> normalized action chunks (B, chunk, A), clipped."""
        was = self.training
        self.eval()
        out = self.head.sample(self.encode(self.normalize_obs(windows)), generator)
        self.train(was)
        clip = self.spec.action_clip
        return np.clip(out.cpu().numpy().astype(float), -clip, clip)

    def denormalize(self, actions: np.ndarray) -> np.ndarray:
        return self.action_norm.denormalize(actions)

    def normalize_actions(self, actions: np.ndarray) -> np.ndarray:
        return self.action_norm.normalize(actions)

    def header(self) -> dict:
        return {
            "kind": "chunk-policy",
            "policy": self.spec.model_dump(mode="json"),
            "obs_dim": self.obs_dim,
            "action_dim": self.action_dim,
            "dof": self.dof,
            "action_norm": self.action_norm.to_dict(),
            "obs_norm": self.obs_norm.to_dict(),
            "meta": self.meta,
        }

    def save(self, path: Union[str, Path]) -> Path:
        return save_module(self, self.header(), path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ChunkPolicy":
        header, tensors = load_checkpoint(path)
        if header.get("kind") != "chunk-policy":
            raise SchemaError(str(path), [f"expected a chunk-policy checkpoint, got {header.get('kind')!r}"])
        policy = cls(PolicySpec.model_validate(header["policy"]), header["obs_dim"], header["action_dim"],
                     header["dof"], RangeNormalizer.from_dict(header["action_norm"]),
                     StandardNormalizer.from_dict(header["obs_norm"]), header.get("meta"))
        own = policy.state_dict()
        if set(own) != set(tensors):
            raise SchemaError(str(path), ["tensor names do not match the policy architecture"])
        policy.load_state_dict({k: tensors[k].reshape(own[k].shape) for k in own})
        logger.debug("loaded policy from %s", path)
        return policy
