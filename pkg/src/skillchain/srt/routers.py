# src/skillchain/srt/routers.py
"""Transition controllers (routers) and skill controllers driven by the chaining executor.

Both act at simulator rate: `act(state)` returns the joint targets for the next step.
"""
import logging
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass
from typing import Deque, List, Optional, Sequence

import numpy as np
import torch

from ..errors import Infeasible
from ..learn.policy import ChunkPolicy
from ..learn.runner import PolicyRunner
from ..schema.srt_schema import ChainingConfig
from ..schema.transition_schema import PlannerConfig
from ..tasks import OracleRunner, PrimitiveRegistry, TaskSpec
from ..tasks.oracle import OracleContext
from ..transition.planner import plan
from ..world import WorldState, hold_control, observe
from .policy import SrtPolicy

logger = logging.getLogger(__name__)

STREAM_ROUTER_OBS = 23


@dataclass
class RouteStep:
    target: Optional[np.ndarray]  # None when the router has given up
    stage: int = 0  # 0 transition, i skill i
    margin: float = 0.0
    inferred: bool = False  # a fresh stage prediction was made this step


class Router(ABC):
    """Drives the robot between skills and says when skill `expected` should take over."""

    @abstractmethod
    def reset(self, state: WorldState, expected: int) -> None:
        """Start of a transition phase (episode start or skill handback)."""

    @abstractmethod
    def act(self, state: WorldState) -> RouteStep:
        pass

    @abstractmethod
    def name(self) -> str:
        pass


class SrtRouter(Router):
    """Receding-horizon SRT control: infer, run `c_exec` actions (each held `decimation` steps), re-infer."""

    def __init__(self, policy: SrtPolicy, cfg: ChainingConfig, seed: int = 0, noisy: bool = True):
        self.policy = policy
        self.cfg = cfg
        self.seed = seed
        self.noisy = noisy
        self.rng = np.random.default_rng([seed, STREAM_ROUTER_OBS])
        self.history: Deque[np.ndarray] = deque(maxlen=policy.cfg.history)
        self.queue: Deque[np.ndarray] = deque()
        self.held: Optional[np.ndarray] = None
        self.count = 0
        self.inferences = 0

    def reset(self, state: WorldState, expected: int) -> None:
        self.history.clear()
        self.queue.clear()
        self.held = None
        self.count = 0

    def act(self, state: WorldState) -> RouteStep:
        decimation = self.policy.cfg.decimation
        if self.count % decimation:
            self.count += 1
            return RouteStep(self.held.copy())
        self.count += 1
        self.history.append(observe(state, self.policy.cfg.obs_mode, self.rng, self.noisy).vector)
        step = RouteStep(None)
        if not self.queue:
            out = self.policy.infer(list(self.history), torch.Generator().manual_seed(self.seed + self.inferences))
            self.inferences += 1
            self.queue.extend(out.actions[:self.cfg.c_exec])
            step.stage, step.margin, step.inferred = out.stage, out.margin, True
        self.held = self.queue.popleft()
        step.target = self.held.copy()
        return step

    def history_length(self) -> int:
        return len(self.history)

    def name(self) -> str:
        return "srt"


class OracleRouter(Router):
    """Scripted approach primitives of the next subtask; hands over when the script ends."""

    def __init__(self, task: TaskSpec, rng: np.random.Generator, registry: Optional[PrimitiveRegistry] = None):
        self.task = task
        self.rng = rng
        self.registry = registry or PrimitiveRegistry()
        self.runner: Optional[OracleRunner] = None
        self.expected = 0

    def reset(self, state: WorldState, expected: int) -> None:
        self.expected = expected
        ctx = OracleContext(self.task, state, self.rng)
        self.runner = OracleRunner(self.task, self.task.subtask(expected).oracle.approach, state,
                                   registry=self.registry, ctx=ctx)

    def act(self, state: WorldState) -> RouteStep:
        target = self.runner.act(state)
        if target is None:
            return RouteStep(hold_control(state), self.expected, 1.0, True)
        return RouteStep(target)

    def name(self) -> str:
        return "oracle"


class PlannerRouter(Router):
    """Scripted planner replay towards a sampled initiation exemplar of the next skill."""

    def __init__(self, init_sets: dict, cfg: PlannerConfig, rng: np.random.Generator, decimation: int = 2,
                 retries: int = 5):
        self.init_sets = init_sets
        self.cfg = cfg
        self.rng = rng
        self.decimation = decimation
        self.retries = retries
        self.targets: List[np.ndarray] = []
        self.t = 0
        self.expected = 0
        self.failed: Optional[Infeasible] = None

    def reset(self, state: WorldState, expected: int) -> None:
        self.expected, self.t, self.failed = expected, 0, None
        self.targets = []
        pool: Sequence[WorldState] = self.init_sets[expected]
        for _ in range(self.retries):
            goal = pool[int(self.rng.integers(len(pool)))]
            try:
                traj, _ = plan(state, goal, self.cfg, self.rng, self.decimation)
            except Infeasible as e:
                self.failed = e
                continue
            self.targets = [a for a in traj.actions[:-1] for _ in range(self.decimation)]
            self.failed = None
            return
        logger.debug("planner router gave up on skill %d: %s", expected, self.failed)

    def act(self, state: WorldState) -> RouteStep:
        if self.failed is not None:
            return RouteStep(None)
        if self.t >= len(self.targets):
            return RouteStep(hold_control(state), self.expected, 1.0, True)
        self.t += 1
        return RouteStep(self.targets[self.t - 1])

    def name(self) -> str:
        return "planner"


class SkillController(ABC):
    @abstractmethod
    def reset(self, state: WorldState) -> None:
        pass

    @abstractmethod
    def act(self, state: WorldState) -> np.ndarray:
        pass


class PolicySkill(SkillController):
    def __init__(self, policy: ChunkPolicy, rng: np.random.Generator, seed: int = 0, noisy: bool = True):
        self.runner = PolicyRunner(policy, rng, seed, noisy)

    def reset(self, state: WorldState) -> None:
        self.runner.reset()

    def act(self, state: WorldState) -> np.ndarray:
        return self.runner.act(state)


class OracleSkill(SkillController):
    """Scripted skill primitives; holds once the script runs out."""

    def __init__(self, task: TaskSpec, index: int, rng: np.random.Generator,
                 registry: Optional[PrimitiveRegistry] = None):
        self.task, self.index, self.rng = task, index, rng
        self.registry = registry or PrimitiveRegistry()
        self.runner: Optional[OracleRunner] = None

    def reset(self, state: WorldState) -> None:
        ctx = OracleContext(self.task, state, self.rng)
        self.runner = OracleRunner(self.task, self.task.subtask(self.index).oracle.skill, state,
                                   registry=self.registry, ctx=ctx)

    def act(self, state: WorldState) -> np.ndarray:
        target = self.runner.act(state)
        return hold_control(state) if target is None else target
