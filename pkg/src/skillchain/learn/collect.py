# src/skillchain/learn/collect.py
"""Harvest successful rollouts of a base + residual pair, recorded in real-world-observable modes."""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
from tqdm import tqdm

from ..errors import YieldTooLow
from ..logging_setup import progress_enabled
from ..schema.learn_schema import CollectConfig
from ..segmentation.trajectory import Trajectory, TrajectoryMeta
from ..world import WorldState, hold_control, observe
from .env import SkillEnv
from .policy import ChunkPolicy
from .residual import ResidualAgent, ResidualPolicy
from .runner import BatchedPolicyRunner

logger = logging.getLogger(__name__)

STREAM_RECORD = 17


@dataclass
class CollectResult:
    trajectories: List[Trajectory]
    terminal_states: List[WorldState]
    episodes: int
    successes: int

    @property
    def ratio(self) -> float:
        return self.successes / self.episodes if self.episodes else 0.0


def collect_success_rollouts(env_factory: Callable[[int, int], SkillEnv], base: ChunkPolicy,
                             residual: Optional[ResidualPolicy], skill: int, cfg: CollectConfig,
                             task_name: str = "", n_envs: int = 64) -> CollectResult:
    """Roll out until exactly `cfg.n_target` episodes succeed; failures are discarded.

    Observations are recorded in `cfg.record_mode` at policy rate. Raises
    YieldTooLow when the success ratio over the first `cfg.pilot_episodes`
    finished episodes falls below `cfg.min_yield`, or when `cfg.max_episodes`
    run out first. `residual=None` rolls out the base policy alone.
    """
    env = env_factory(n_envs, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    rec_rngs = [np.random.default_rng([cfg.seed, k, STREAM_RECORD]) for k in range(env.n)]
    if residual is not None:
        ctrl = ResidualAgent(base, residual).controller(env.n, cfg.seed, deterministic=True)
    else:
        ctrl = None
        runner = BatchedPolicyRunner(base, env.n, cfg.seed)

    obs_buf: Dict[int, list] = {k: [] for k in range(env.n)}
    act_buf: Dict[int, list] = {k: [] for k in range(env.n)}
    trajs: List[Trajectory] = []
    terminals: List[WorldState] = []
    episodes = successes = 0
    bar = tqdm(total=cfg.n_target, desc=f"collect skill {skill}", disable=not progress_enabled())
    while len(trajs) < cfg.n_target:
        for k, o in enumerate(env.observe(cfg.record_mode)):
            obs_buf[k].append(o)
        if ctrl is not None:
            targets = ctrl.decide(env, 1.0, rng).targets
        else:
            targets = base.denormalize(runner.step(env.observe(base.spec.obs_mode)))
        for k in range(env.n):
            act_buf[k].append(targets[k])
        res = env.step(targets)
        for k in map(int, np.flatnonzero(res.dones)):
            episodes += 1
            if res.successes[k] and len(trajs) < cfg.n_target:
                successes += 1
                term = res.terminal_states[k]
                dt = term.model.dt * env.decimation
                obs = obs_buf[k] + [observe(term, cfg.record_mode, rec_rngs[k]).vector]
                acts = act_buf[k] + [hold_control(term)]
                meta = TrajectoryMeta(task=task_name, seed=term.seed, source="sim-rollout", dt=dt)
                trajs.append(Trajectory([None] * (len(acts) - 1) + [term], np.stack(acts), meta,
                                        observations=np.stack(obs)))
                terminals.append(term)
                bar.update(1)
            obs_buf[k], act_buf[k] = [], []
            if ctrl is not None:
                ctrl.reset(k)
            else:
                runner.reset(k)
            if episodes == cfg.pilot_episodes and successes / episodes < cfg.min_yield:
                bar.close()
                raise YieldTooLow(f"skill {skill} rollouts", successes / episodes, cfg.min_yield)
        if episodes >= cfg.max_episodes and len(trajs) < cfg.n_target:
            bar.close()
            raise YieldTooLow(f"skill {skill} rollouts (episode budget spent)", successes / max(episodes, 1),
                              cfg.min_yield)
    bar.close()
    logger.info("  ✔ skill %d: %d successful rollouts from %d episodes (%.2f)", skill, len(trajs), episodes,
                successes / max(episodes, 1))
    return CollectResult(trajs, terminals, episodes, successes)
