# src/skillchain/srt/policy.py
"""Skill-routing transformer: observation history -> (transition action chunk, execution stage)."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..errors import SchemaError
from ..learn.normalize import RangeNormalizer, StandardNormalizer
from ..nn import CausalTransformer, ChunkHead, DiffusionHead, Mlp, PointSetEncoder, load_checkpoint, save_module
from ..schema.srt_schema import SrtConfig

logger = logging.getLogger(__name__)


@dataclass
class SrtOutput:
    actions: np.ndarray  # (chunk, action_dim) absolute joint targets
    stage: int
    probs: np.ndarray  # (K + 1,) softmax over stages

    @property
    def margin(self) -> float:
        """Top-1 minus top-2 stage probability."""
        top = np.sort(self.probs)[::-1]
        return float(top[0] - (top[1] if len(top) > 1 else 0.0))


class SrtPolicy(nn.Module):
    """Per-frame encoder, learned pad token, causal transformer trunk, action-chunk and stage heads.

    Windows are left-padded: positions flagged in `pad` take the pad token
    instead of an encoded observation. Stage 0 is transition, stage i is skill i.
    """

    def __init__(self, cfg: SrtConfig, obs_dim: int, action_dim: int, dof: int, K: int,
                 action_norm: RangeNormalizer, obs_norm: StandardNormalizer, meta: Optional[dict] = None):
        super().__init__()
        self.cfg = cfg
        self.obs_dim, self.action_dim, self.dof, self.K = obs_dim, action_dim, dof, K
        self.action_norm, self.obs_norm = action_norm, obs_norm
        self.meta = dict(meta or {})
        hidden = cfg.transformer.hidden

        if cfg.obs_mode == "pointset":
            self.points = PointSetEncoder(2, cfg.point_mlp, cfg.point_feature)
            frame_dim = dof + cfg.point_feature
        else:
            self.points = None
            frame_dim = obs_dim
        self.encoder = Mlp(frame_dim, hidden, cfg.encoder)
        self.pad_token = nn.Parameter(torch.zeros(hidden))
        nn.init.normal_(self.pad_token, std=0.02)
        self.trunk = CausalTransformer(hidden, cfg.transformer.model_copy(update={"context": cfg.history}))
        if cfg.head == "diffusion":
            self.action_head = DiffusionHead(hidden, action_dim, cfg.diffusion)
        else:
            self.action_head = ChunkHead(hidden, action_dim, cfg.chunk, cfg.action_head)
        self.stage_head = nn.Linear(hidden, K + 1)

    def features(self, obs: torch.Tensor, pad: torch.Tensor) -> torch.Tensor:
        """(B, H, obs_dim) normalized windows and (B, H) pad flags -> (B, hidden) last-token features."""
        if self.points is not None:
            q = obs[..., :self.dof]
            pts = obs[..., self.dof:].reshape(*obs.shape[:-1], -1, 2)
            obs = torch.cat([q, self.points(pts)], dim=-1)
        tokens = self.encoder(obs)
        tokens = torch.where(pad.unsqueeze(-1), self.pad_token.expand_as(tokens), tokens)
        return self.trunk(tokens)[:, -1]

    def loss(self, obs: torch.Tensor, pad: torch.Tensor, actions: torch.Tensor, stages: torch.Tensor,
             generator: Optional[torch.Generator] = None) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """(total, action loss, stage cross-entropy)."""
        feat = self.features(obs, pad)
        act_loss = self.action_head.loss(feat, actions, generator)
        stage_loss = F.cross_entropy(self.stage_head(feat), stages)
        return act_loss + self.cfg.lambda_stage * stage_loss, act_loss, stage_loss

    def stage_logits(self, obs: torch.Tensor, pad: torch.Tensor) -> torch.Tensor:
        return self.stage_head(self.features(obs, pad))

    def normalize_obs(self, obs: np.ndarray) -> torch.Tensor:
        return torch.as_tensor(self.obs_norm.normalize(obs), dtype=torch.float32)

    def normalize_actions(self, actions: np.ndarray) -> np.ndarray:
        return self.action_norm.normalize(actions)

    def window(self, history: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
        """Raw observation history (most recent last, at most `history` long) -> left-padded window and pad flags."""
        H = self.cfg.history
        hist = np.asarray(history, float)[-H:]
        obs = np.zeros((H, self.obs_dim))
        pad = np.ones(H, dtype=bool)
        obs[H - len(hist):] = hist
        pad[H - len(hist):] = False
        return obs, pad

    @torch.no_grad()
    def infer(self, history: Sequence[np.ndarray], generator: Optional[torch.Generator] = None) -> SrtOutput:
        if len(history) == 0:
            raise ValueError("SRT inference needs at least one observation")
        was = self.training
        self.eval()
        obs, pad = self.window(history)
        o = self.normalize_obs(obs)
        o = torch.where(torch.as_tensor(pad)[:, None], torch.zeros_like(o), o)
        feat = self.features(o[None], torch.as_tensor(pad)[None])
        chunk = self.action_head.sample(feat, generator)[0, :self.cfg.chunk].cpu().numpy().astype(float)
        probs = torch.softmax(self.stage_head(feat)[0], dim=-1).cpu().numpy().astype(float)
        self.train(was)
        clip = self.cfg.action_clip
        return SrtOutput(self.action_norm.denormalize(np.clip(chunk, -clip, clip)), int(np.argmax(probs)), probs)

    def header(self) -> dict:
        return {
            "kind": "srt",
            "srt": self.cfg.model_dump(mode="json"),
            "obs_dim": self.obs_dim,
            "action_dim": self.action_dim,
            "dof": self.dof,
            "K": self.K,
            "action_norm": self.action_norm.to_dict(),
            "obs_norm": self.obs_norm.to_dict(),
            "meta": self.meta,
        }

    def save(self, path: Union[str, Path]) -> Path:
        return save_module(self, self.header(), path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SrtPolicy":
        header, tensors = load_checkpoint(path)
        if header.get("kind") != "srt":
            raise SchemaError(str(path), [f"expected an srt checkpoint, got {header.get('kind')!r}"])
        policy = cls(SrtConfig.model_validate(header["srt"]), header["obs_dim"], header["action_dim"],
                     header["dof"], header["K"], RangeNormalizer.from_dict(header["action_norm"]),
                     StandardNormalizer.from_dict(header["obs_norm"]), header.get("meta"))
        own = policy.state_dict()
        if set(own) != set(tensors):
            raise SchemaError(str(path), ["tensor names do not match the SRT architecture"])
        policy.load_state_dict({k: tensors[k].reshape(own[k].shape) for k in own})
        return policy


def srt_infer(policy: SrtPolicy, history: Sequence[np.ndarray], seed: int = 0) -> SrtOutput:
    """Deterministic inference: a fixed generator seeds diffusion sampling on every call."""
    return policy.infer(history, torch.Generator().manual_seed(int(seed)))
