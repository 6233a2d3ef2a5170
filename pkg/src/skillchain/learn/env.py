# src/skillchain/learn/env.py
"""Vectorized single-skill environments for residual RL and rollout harvesting."""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..errors import EmptySet
from ..schema.world_schema import RandomizationSpec
from ..world import WorldState, apply_randomization, observe, sample_randomization, step_batch
from .termination import Termination

logger = logging.getLogger(__name__)

STREAM_RESET = 11
STREAM_OBS = 13


@dataclass
class StepResult:
    rewards: np.ndarray  # (n,)
    dones: np.ndarray  # (n,) episode ended with this step (auto-reset follows)
    successes: np.ndarray  # (n,) ended by the termination test
    failures: np.ndarray  # (n,) ended by a non-finite state
    terminal_states: Dict[int, WorldState] = field(default_factory=dict)


class VecEnv(ABC):
    """n independent episodic environments stepping in lockstep at policy rate."""

    n: int

    @abstractmethod
    def reset_all(self) -> None:
        ...

    @abstractmethod
    def observe(self, mode: str) -> np.ndarray:
        """(n, obs_dim) observations in the given mode."""

    @abstractmethod
    def step(self, targets: np.ndarray) -> StepResult:
        """Apply (n, dof) joint targets; finished environments reset themselves."""

    @abstractmethod
    def name(self) -> str:
        pass


EnvFactory = Callable[[int, int], VecEnv]


class SkillEnv(VecEnv):
    """Episodes start from an augmented initiation exemplar under a fresh randomization draw.

    Reward is 1 on the first policy step whose simulator substeps reach the
    termination test, which also ends the episode; otherwise 0. Episodes are
    capped at `episode_length` policy steps.
    """

    def __init__(self, init_states: Sequence[WorldState], termination: Termination, randomization: RandomizationSpec,
                 n: int, seed: int = 0, decimation: int = 2, episode_length: int = 200, workers: int = 1,
                 noisy: bool = True, label: str = "skill"):
        if not init_states:
            raise EmptySet(f"{label}: no initiation states to reset from")
        self.init_states = list(init_states)
        self.termination = termination
        self.randomization = randomization
        self.n = n
        self.seed = int(seed)
        self.decimation = decimation
        self.episode_length = episode_length
        self.workers = workers
        self.noisy = noisy
        self.label = label
        self.states: List[Optional[WorldState]] = [None] * n
        self.steps = np.zeros(n, dtype=np.int64)
        self.episodes = np.zeros(n, dtype=np.int64)
        self.obs_rngs = [np.random.default_rng([self.seed, k, STREAM_OBS]) for k in range(n)]
        self.reset_all()

    def name(self) -> str:
        return self.label

    def _fresh(self, k: int) -> WorldState:
        rng = np.random.default_rng([self.seed, k, int(self.episodes[k]), STREAM_RESET])
        self.episodes[k] += 1
        src = self.init_states[int(rng.integers(len(self.init_states)))]
        state = apply_randomization(src, sample_randomization(self.randomization, rng))
        state.seed = int(rng.integers(0, 2 ** 31 - 1))
        state.tick = 0
        state.targets = state.robot.q.copy() if state.targets is None else state.targets
        return state.capture_initial_poses()

    def reset(self, k: int) -> None:
        self.states[k] = self._fresh(k)
        self.steps[k] = 0

    def reset_all(self) -> None:
        for k in range(self.n):
            self.reset(k)

    def observe(self, mode: str) -> np.ndarray:
        return np.stack([observe(s, mode, self.obs_rngs[k], self.noisy).vector for k, s in enumerate(self.states)])

    def step(self, targets: np.ndarray) -> StepResult:
        targets = np.asarray(targets, float)
        n = self.n
        rewards = np.zeros(n)
        dones = np.zeros(n, dtype=bool)
        successes = np.zeros(n, dtype=bool)
        failures = np.zeros(n, dtype=bool)
        live = list(range(n))
        for _ in range(self.decimation):
            if not live:
                break
            out, errors = step_batch([self.states[k] for k in live], [targets[k] for k in live],
                                     workers=self.workers)
            still = []
            for j, k in enumerate(live):
                if j in errors:
                    failures[k] = dones[k] = True
                    continue
                self.states[k] = out[j]
                if self.termination(out[j]):
                    rewards[k] = 1.0
                    successes[k] = dones[k] = True
                else:
                    still.append(k)
            live = still
        self.steps += 1
        dones |= self.steps >= self.episode_length
        terminal = {}
        for k in np.flatnonzero(dones):
            if not failures[k]:
                terminal[int(k)] = self.states[k]
            self.reset(int(k))
        return StepResult(rewards, dones, successes, failures, terminal)
