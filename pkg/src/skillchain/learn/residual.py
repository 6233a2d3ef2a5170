# src/skillchain/learn/residual.py
"""Residual policy on privileged state, trained with PPO on top of a frozen base policy."""
import copy
import logging
import math
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import torch
from torch import nn
from torch.distributions import Normal

from ..errors import SchemaError
from ..nn import Mlp, load_checkpoint, save_module
from ..schema.learn_schema import ExplorationSchedule, PpoConfig
from ..schema.model_schema import MlpSpec
from .env import EnvFactory, VecEnv
from .normalize import RunningMeanStd
from .policy import ChunkPolicy
from .ppo import Controller, Decision, PpoAgent, run_ppo
from .runner import BatchedPolicyRunner

logger = logging.getLogger(__name__)

PRIVILEGED = "privileged"


def combined_action(base: np.ndarray, res: np.ndarray, eps: float, rng: np.random.Generator,
                    scale: float = 0.3, clip: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Per environment, with probability eps: clip(base + scale * clip(res, ±1)); otherwise base.

    Returns (actions, used) where `used` marks rows that received the residual.
    """
    base = np.atleast_2d(np.asarray(base, float))
    res = np.atleast_2d(np.asarray(res, float))
    used = rng.random(base.shape[0]) < eps
    mixed = np.clip(base + scale * np.clip(res, -1.0, 1.0), -clip, clip)
    return np.where(used[:, None], mixed, base), used


class ResidualPolicy(nn.Module):
    """Gaussian actor with state-dependent mean and a global log-std, plus a value critic."""

    def __init__(self, obs_dim: int, action_dim: int, cfg: PpoConfig = PpoConfig()):
        super().__init__()
        spec = MlpSpec(widths=list(cfg.hidden), activation="elu")
        self.obs_dim, self.action_dim = obs_dim, action_dim
        self.cfg = cfg
        self.actor = Mlp(obs_dim, action_dim, spec, final_gain=0.0)
        self.critic = Mlp(obs_dim, 1, spec, final_gain=1.0)
        self.log_std = nn.Parameter(torch.full((action_dim,), math.log(cfg.init_std)))
        self.obs_rms = RunningMeanStd(obs_dim, cfg.obs_clip)

    def distribution(self, obs: torch.Tensor) -> Normal:
        mean = self.actor(obs)
        return Normal(mean, self.log_std.exp().expand_as(mean))

    def value(self, obs: torch.Tensor) -> torch.Tensor:
        return self.critic(obs).squeeze(-1)

    def normalize(self, obs: np.ndarray) -> torch.Tensor:
        return torch.as_tensor(self.obs_rms.normalize(obs), dtype=torch.float32)

    @torch.no_grad()
    def mean_action(self, obs: np.ndarray) -> np.ndarray:
        return self.actor(self.normalize(obs)).numpy().astype(float)

    def save(self, path: Union[str, Path]) -> Path:
        header = {"kind": "residual", "obs_dim": self.obs_dim, "action_dim": self.action_dim,
                  "ppo": self.cfg.model_dump(mode="json"), "obs_rms": self.obs_rms.to_dict()}
        return save_module(self, header, path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ResidualPolicy":
        header, tensors = load_checkpoint(path)
        if header.get("kind") != "residual":
            raise SchemaError(str(path), [f"expected a residual checkpoint, got {header.get('kind')!r}"])
        out = cls(header["obs_dim"], header["action_dim"], PpoConfig.model_validate(header["ppo"]))
        own = out.state_dict()
        if set(own) != set(tensors):
            raise SchemaError(str(path), ["tensor names do not match the residual architecture"])
        out.load_state_dict({k: tensors[k].reshape(own[k].shape) for k in own})
        out.obs_rms = RunningMeanStd.from_dict(header["obs_rms"])
        return out


def _gaussian_sample(dist: Normal, generator: torch.Generator, deterministic: bool) -> torch.Tensor:
    if deterministic:
        return dist.mean
    return dist.mean + dist.stddev * torch.randn(dist.mean.shape, generator=generator)


class ResidualController(Controller):
    def __init__(self, agent: "ResidualAgent", n: int, seed: int, deterministic: bool, train: bool):
        self.agent = agent
        self.runner = BatchedPolicyRunner(agent.base, n, seed)
        self.generator = torch.Generator().manual_seed(int(seed))
        self.deterministic = deterministic
        self.train = train

    def _privileged(self, env: VecEnv) -> torch.Tensor:
        obs = env.observe(PRIVILEGED)
        if self.train:
            self.agent.residual.obs_rms.update(obs)
        return self.agent.residual.normalize(obs)

    def decide(self, env: VecEnv, eps: float, rng: np.random.Generator) -> Decision:
        base_a = self.runner.step(env.observe(self.agent.base.spec.obs_mode))
        obs = self._privileged(env)
        res = self.agent.residual
        with torch.no_grad():
            dist = res.distribution(obs)
            a = _gaussian_sample(dist, self.generator, self.deterministic)
            logp = dist.log_prob(a).sum(-1)
            value = res.value(obs)
        cfg = res.cfg
        action, used = combined_action(base_a, a.numpy(), eps, rng, cfg.residual_scale, cfg.action_clip)
        return Decision(self.agent.base.denormalize(action), {"obs": obs.numpy()}, a.numpy(), logp.numpy(),
                        value.numpy(), used.astype(float))

    def bootstrap(self, env: VecEnv) -> np.ndarray:
        with torch.no_grad():
            return self.agent.residual.value(self.agent.residual.normalize(env.observe(PRIVILEGED))).numpy()

    def reset(self, k: int) -> None:
        self.runner.reset(k)


class ResidualAgent(PpoAgent):
    def __init__(self, base: ChunkPolicy, residual: ResidualPolicy):
        self.base = base
        self.residual = residual
        base.eval()
        for p in base.parameters():
            p.requires_grad_(False)

    def controller(self, n: int, seed: int, deterministic: bool = False, train: bool = False) -> Controller:
        return ResidualController(self, n, seed, deterministic, train)

    def evaluate_actions(self, inputs: Dict[str, torch.Tensor], actions: torch.Tensor):
        dist = self.residual.distribution(inputs["obs"])
        return dist.log_prob(actions).sum(-1), dist.entropy().sum(-1), self.residual.value(inputs["obs"])

    def module(self) -> nn.Module:
        return self.residual

    def snapshot(self) -> dict:
        return {"params": copy.deepcopy(self.residual.state_dict()), "rms": self.residual.obs_rms.to_dict()}

    def restore(self, snap: dict) -> None:
        self.residual.load_state_dict(snap["params"])
        self.residual.obs_rms = RunningMeanStd.from_dict(snap["rms"])

    def save(self, path: Union[str, Path]) -> Path:
        return self.residual.save(path)


def train_residual_ppo(env_factory: EnvFactory, base: ChunkPolicy, cfg: PpoConfig, schedule: ExplorationSchedule,
                       skill: int, metrics_path: Optional[Union[str, Path]] = None,
                       checkpoint_dir: Optional[Union[str, Path]] = None) -> ResidualPolicy:
    """PPO on the residual with sparse success reward; returns the residual with the best evaluation success."""
    scout = env_factory(1, cfg.seed)
    obs_dim = scout.observe(PRIVILEGED).shape[1]
    torch.manual_seed(cfg.seed)
    residual = ResidualPolicy(obs_dim, base.action_dim, cfg)
    agent = ResidualAgent(base, residual)
    run_ppo(env_factory, agent, cfg, schedule, metrics_path, checkpoint_dir, desc=f"residual skill {skill}")
    return residual
