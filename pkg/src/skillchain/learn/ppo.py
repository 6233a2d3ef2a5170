# src/skillchain/learn/ppo.py
"""Clipped-surrogate PPO over vectorized skill environments.

Agents plug in through `PpoAgent`/`Controller`: the controller turns
observations into joint targets plus the sampled Gaussian actions, the agent
re-evaluates log-probabilities and values for the update.
"""
import copy
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from tqdm import tqdm

from ..errors import TrainingDiverged
from ..logging_setup import progress_enabled
from ..nn import clip_gradients, current_lr, gae, set_lr
from ..schema.learn_schema import ExplorationSchedule, PpoConfig
from .env import EnvFactory, VecEnv
from .metrics import PPO_COLUMNS, write_metrics
from .schedule import epsilon

logger = logging.getLogger(__name__)

EVAL_SEED_OFFSET = 7919


@dataclass
class Decision:
    targets: np.ndarray  # (n, dof) joint targets sent to the environment
    inputs: Dict[str, np.ndarray]  # whatever `evaluate_actions` needs to recompute log-probs
    actions: np.ndarray  # (n, A) Gaussian samples
    logp: np.ndarray  # (n,)
    values: np.ndarray  # (n,)
    mask: np.ndarray  # (n,) steps whose log-prob enters the policy loss


class Controller(ABC):
    @abstractmethod
    def decide(self, env: VecEnv, eps: float, rng: np.random.Generator) -> Decision:
        pass

    @abstractmethod
    def bootstrap(self, env: VecEnv) -> np.ndarray:
        pass

    @abstractmethod
    def reset(self, k: int) -> None:
        pass


class PpoAgent(ABC):
    @abstractmethod
    def controller(self, n: int, seed: int, deterministic: bool = False, train: bool = False) -> Controller:
        pass

    @abstractmethod
    def evaluate_actions(self, inputs: Dict[str, torch.Tensor], actions: torch.Tensor
                         ) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """(log-prob, entropy, value), differentiable."""

    @abstractmethod
    def module(self) -> torch.nn.Module:
        """Every trainable parameter of the agent."""

    def snapshot(self) -> dict:
        return copy.deepcopy(self.module().state_dict())

    def restore(self, snap: dict) -> None:
        self.module().load_state_dict(snap)

    def save(self, path: Union[str, Path]) -> Path:
        raise NotImplementedError


def clipped_surrogate(ratio: torch.Tensor, advantages: torch.Tensor, clip: float) -> torch.Tensor:
    """Per-sample PPO policy loss; zero gradient once the ratio leaves [1-clip, 1+clip] on the gaining side."""
    return -torch.min(ratio * advantages, torch.clamp(ratio, 1.0 - clip, 1.0 + clip) * advantages)


def adapt_lr(lr: float, kl: float, cfg: PpoConfig) -> float:
    if kl > 2.0 * cfg.desired_kl:
        return max(lr / 2.0, cfg.min_lr)
    if kl < 0.5 * cfg.desired_kl:
        return min(lr * 1.5, cfg.max_lr)
    return lr


class RolloutBuffer:
    def __init__(self):
        self.inputs: Dict[str, List[np.ndarray]] = {}
        self.actions, self.logp, self.values, self.mask = [], [], [], []
        self.rewards, self.dones = [], []

    def add(self, d: Decision, rewards: np.ndarray, dones: np.ndarray) -> None:
        for k, v in d.inputs.items():
            self.inputs.setdefault(k, []).append(v)
        self.actions.append(d.actions)
        self.logp.append(d.logp)
        self.values.append(d.values)
        self.mask.append(d.mask)
        self.rewards.append(rewards)
        self.dones.append(dones)

    def flat(self, last_value: np.ndarray, cfg: PpoConfig) -> Dict[str, torch.Tensor]:
        def t(x):
            return torch.as_tensor(np.stack(x), dtype=torch.float32)

        adv, ret = gae(t(self.rewards), t(self.values), t(self.dones), cfg.gamma, cfg.lam,
                       torch.as_tensor(last_value, dtype=torch.float32))
        out = {f"in.{k}": t(v).flatten(0, 1) for k, v in self.inputs.items()}
        out.update({
            "actions": t(self.actions).flatten(0, 1),
            "logp": t(self.logp).flatten(0, 1),
            "mask": t(self.mask).flatten(0, 1),
            "advantages": adv.flatten(0, 1),
            "returns": ret.flatten(0, 1),
        })
        a = out["advantages"]
        if a.numel() > 1:
            out["advantages"] = (a - a.mean()) / (a.std() + 1e-8)
        return out


def ppo_update(agent: PpoAgent, batch: Dict[str, torch.Tensor], cfg: PpoConfig, optimizer: torch.optim.Optimizer,
               rng: np.random.Generator) -> Dict[str, float]:
    n = batch["actions"].shape[0]
    kls = []
    for _ in range(cfg.epochs):
        for idx in np.array_split(rng.permutation(n), cfg.minibatches):
            if not len(idx):
                continue
            idx = torch.as_tensor(idx)
            inputs = {k[3:]: v[idx] for k, v in batch.items() if k.startswith("in.")}
            logp, entropy, value = agent.evaluate_actions(inputs, batch["actions"][idx])
            log_ratio = logp - batch["logp"][idx]
            ratio = torch.exp(log_ratio)
            m = batch["mask"][idx]
            denom = torch.clamp(m.sum(), min=1.0)
            pg_loss = (clipped_surrogate(ratio, batch["advantages"][idx], cfg.clip) * m).sum() / denom
            v_loss = F.mse_loss(value, batch["returns"][idx])
            ent = (entropy * m).sum() / denom
            loss = pg_loss + cfg.value_coef * v_loss - cfg.entropy_coef * ent
            optimizer.zero_grad()
            loss.backward()
            clip_gradients(agent.module().parameters(), cfg.max_grad_norm)
            optimizer.step()
            with torch.no_grad():
                kl = float((((ratio - 1.0) - log_ratio) * m).sum() / denom)
            kls.append(kl)
            set_lr(optimizer, adapt_lr(current_lr(optimizer), kl, cfg))
    return {"kl": float(np.mean(kls)) if kls else 0.0, "lr": current_lr(optimizer)}


def evaluate_agent(agent: PpoAgent, env: VecEnv, max_steps: int, seed: int) -> float:
    """Success rate of the deterministic agent (residual always on) over one episode per environment."""
    env.reset_all()
    ctrl = agent.controller(env.n, seed, deterministic=True, train=False)
    rng = np.random.default_rng(seed)
    finished = np.zeros(env.n, dtype=bool)
    success = np.zeros(env.n, dtype=bool)
    for _ in range(max_steps):
        d = ctrl.decide(env, 1.0, rng)
        res = env.step(d.targets)
        new = res.dones & ~finished
        success |= new & res.successes
        finished |= res.dones
        for k in np.flatnonzero(res.dones):
            ctrl.reset(int(k))
        if finished.all():
            break
    return float(success.mean())


def run_ppo(env_factory: EnvFactory, agent: PpoAgent, cfg: PpoConfig, schedule: Optional[ExplorationSchedule],
            metrics_path: Optional[Union[str, Path]] = None, checkpoint_dir: Optional[Union[str, Path]] = None,
            desc: str = "ppo") -> pd.DataFrame:
    """Train `agent` in place; on return it holds the parameters with the best evaluation success."""
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    env = env_factory(cfg.n_envs, cfg.seed)
    eval_env = env_factory(cfg.eval_episodes, cfg.seed + EVAL_SEED_OFFSET)
    ctrl = agent.controller(env.n, cfg.seed, deterministic=False, train=True)
    optimizer = torch.optim.Adam(agent.module().parameters(), lr=cfg.lr)

    per_iter = cfg.rollout_steps * env.n
    iterations = max(1, cfg.total_env_steps // per_iter)
    best, best_snap = -1.0, agent.snapshot()
    seen_above, zero_streak = False, 0
    env_steps = 0
    rows = []
    bar = tqdm(range(1, iterations + 1), desc=desc, disable=not progress_enabled())
    for it in bar:
        buf = RolloutBuffer()
        ended, succeeded = 0, 0
        eps = 1.0
        for _ in range(cfg.rollout_steps):
            eps = 1.0 if schedule is None else epsilon(env_steps, schedule)
            d = ctrl.decide(env, eps, rng)
            res = env.step(d.targets)
            buf.add(d, res.rewards, res.dones.astype(float))
            ended += int(res.dones.sum())
            succeeded += int(res.successes.sum())
            for k in np.flatnonzero(res.dones):
                ctrl.reset(int(k))
            env_steps += env.n
        stats = ppo_update(agent, buf.flat(ctrl.bootstrap(env), cfg), cfg, optimizer, rng)

        row = {"step": env_steps, "success_rate": succeeded / ended if ended else float("nan"),
               "mean_return": succeeded / ended if ended else float("nan"), "kl": stats["kl"],
               "lr": stats["lr"], "epsilon": eps}
        if it % cfg.eval_every == 0 or it == iterations:
            rate = evaluate_agent(agent, eval_env, cfg.episode_length + 1, cfg.seed + EVAL_SEED_OFFSET)
            row["eval_success"] = rate
            if rate > best:
                best, best_snap = rate, agent.snapshot()
            seen_above = seen_above or rate > cfg.diverge_floor
            zero_streak = zero_streak + 1 if seen_above and rate == 0.0 else 0
            if zero_streak >= cfg.diverge_patience:
                write_metrics(rows + [row], metrics_path, PPO_COLUMNS + ["eval_success"])
                raise TrainingDiverged(f"{desc}: success stayed at 0 for {zero_streak} evaluations")
            bar.set_postfix(eval=f"{rate:.2f}", lr=f"{stats['lr']:.1e}")
        rows.append(row)
        if checkpoint_dir is not None and cfg.checkpoint_every and it % cfg.checkpoint_every == 0:
            agent.save(Path(checkpoint_dir) / f"{desc}-{it:06d}.ckpt")

    agent.restore(best_snap)
    df = write_metrics(rows, metrics_path, PPO_COLUMNS + ["eval_success"])
    logger.info("  ✔ %s: %d env steps, best eval success %.2f", desc, env_steps, best)
    return df
