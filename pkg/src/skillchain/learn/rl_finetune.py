# src/skillchain/learn/rl_finetune.py
"""PPO directly on a behavior-cloned policy: the Gaussian mean is the policy's first chunk action."""
import copy
import logging
import math
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import torch
from torch import nn
from torch.distributions import Normal

from ..errors import UnsupportedMode
from ..nn import Mlp
from ..schema.learn_schema import PpoConfig
from ..schema.model_schema import MlpSpec
from .env import EnvFactory, VecEnv
from .normalize import RunningMeanStd
from .policy import ChunkPolicy
from .ppo import Controller, Decision, PpoAgent, run_ppo
from .runner import ObsHistory

logger = logging.getLogger(__name__)


class FinetuneModule(nn.Module):
    def __init__(self, policy: ChunkPolicy, critic_dim: int, cfg: PpoConfig):
        super().__init__()
        self.policy = policy
        self.critic = Mlp(critic_dim, 1, MlpSpec(widths=list(cfg.hidden), activation="elu"))
        self.log_std = nn.Parameter(torch.full((policy.action_dim,), math.log(cfg.init_std)))

    def distribution(self, windows: torch.Tensor) -> Normal:
        mean = self.policy.head(self.policy.encode(windows))[..., 0, :]
        return Normal(mean, self.log_std.exp().expand_as(mean))


class FinetuneController(Controller):
    def __init__(self, agent: "FinetuneAgent", n: int, seed: int, deterministic: bool, train: bool):
        self.agent = agent
        self.history = ObsHistory(n, agent.policy.spec.obs_horizon)
        self.generator = torch.Generator().manual_seed(int(seed))
        self.deterministic = deterministic
        self.train = train

    def _critic_obs(self, env: VecEnv) -> torch.Tensor:
        obs = env.observe("privileged")
        if self.train:
            self.agent.rms.update(obs)
        return torch.as_tensor(self.agent.rms.normalize(obs), dtype=torch.float32)

    def decide(self, env: VecEnv, eps: float, rng: np.random.Generator) -> Decision:
        policy = self.agent.policy
        windows = policy.normalize_obs(self.history.push(env.observe(policy.spec.obs_mode)))
        priv = self._critic_obs(env)
        with torch.no_grad():
            dist = self.agent.net.distribution(windows)
            a = dist.mean if self.deterministic else dist.mean + dist.stddev * torch.randn(
                dist.mean.shape, generator=self.generator)
            logp = dist.log_prob(a).sum(-1)
            value = self.agent.net.critic(priv).squeeze(-1)
        clip = policy.spec.action_clip
        targets = policy.denormalize(np.clip(a.numpy().astype(float), -clip, clip))
        return Decision(targets, {"windows": windows.numpy(), "priv": priv.numpy()}, a.numpy(), logp.numpy(),
                        value.numpy(), np.ones(env.n))

    def bootstrap(self, env: VecEnv) -> np.ndarray:
        obs = torch.as_tensor(self.agent.rms.normalize(env.observe("privileged")), dtype=torch.float32)
        with torch.no_grad():
            return self.agent.net.critic(obs).squeeze(-1).numpy()

    def reset(self, k: int) -> None:
        self.history.reset(k)


class FinetuneAgent(PpoAgent):
    def __init__(self, policy: ChunkPolicy, critic_dim: int, cfg: PpoConfig):
        if policy.spec.head != "regression":
            raise UnsupportedMode("RL fine-tuning needs a regression-head policy")
        self.policy = policy
        self.net = FinetuneModule(policy, critic_dim, cfg)
        self.rms = RunningMeanStd(critic_dim, cfg.obs_clip)
        policy.train()

    def controller(self, n: int, seed: int, deterministic: bool = False, train: bool = False) -> Controller:
        return FinetuneController(self, n, seed, deterministic, train)

    def evaluate_actions(self, inputs: Dict[str, torch.Tensor], actions: torch.Tensor):
        dist = self.net.distribution(inputs["windows"])
        return dist.log_prob(actions).sum(-1), dist.entropy().sum(-1), self.net.critic(inputs["priv"]).squeeze(-1)

    def module(self) -> nn.Module:
        return self.net

    def snapshot(self) -> dict:
        return {"params": copy.deepcopy(self.net.state_dict()), "rms": self.rms.to_dict()}

    def restore(self, snap: dict) -> None:
        self.net.load_state_dict(snap["params"])
        self.rms = RunningMeanStd.from_dict(snap["rms"])

    def save(self, path: Union[str, Path]) -> Path:
        return self.policy.save(path)


def train_finetune_ppo(env_factory: EnvFactory, policy: ChunkPolicy, cfg: PpoConfig, skill: int,
                       metrics_path: Optional[Union[str, Path]] = None) -> ChunkPolicy:
    """Fine-tune a copy of `policy` with PPO (no frozen base, no exploration schedule).

    The returned policy re-plans every policy step, since only its first chunk action was trained.
    """
    tuned = copy.deepcopy(policy)
    scout = env_factory(1, cfg.seed)
    torch.manual_seed(cfg.seed)
    agent = FinetuneAgent(tuned, scout.observe("privileged").shape[1], cfg)
    run_ppo(env_factory, agent, cfg, None, metrics_path, desc=f"rl-finetune skill {skill}")
    tuned.spec = tuned.spec.model_copy(update={"exec_horizon": 1})
    tuned.meta = {**tuned.meta, "source": "rl-finetune"}
    tuned.eval()
    return tuned
