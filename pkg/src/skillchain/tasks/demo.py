# src/skillchain/tasks/demo.py
"""Scripted demonstrations standing in for teleoperation."""
import logging
from dataclasses import replace
from typing import List, Tuple

import numpy as np
from tqdm import tqdm

from ..errors import NonFiniteState, OracleFailure
from ..logging_setup import progress_enabled
from ..schema.task_schema import DemoConfig
from ..segmentation.trajectory import Trajectory, TrajectoryMeta
from ..world import hold_control, step
from .oracle import OracleContext, OracleRunner, PrimitiveRegistry
from .spec import TaskSpec, sample_initial_state, subtask_success

logger = logging.getLogger(__name__)

TRANSITION = 0


class _Recorder:
    def __init__(self, horizon: int):
        self.horizon = horizon
        self.states, self.actions, self.phases = [], [], []

    def advance(self, ctx: OracleContext, action: np.ndarray, phase: int) -> None:
        if len(self.states) >= self.horizon:
            raise OracleFailure(f"horizon of {self.horizon} steps exceeded")
        self.states.append(ctx.state)
        self.actions.append(action)
        self.phases.append(phase)
        ctx.state = step(ctx.state, action)


def _run_episode(task: TaskSpec, cfg: DemoConfig, rng: np.random.Generator) -> Tuple[Trajectory, int]:
    state = sample_initial_state(task, rng)
    seed = state.seed
    registry = PrimitiveRegistry()
    ctx = OracleContext(task, state, rng, cfg.action_jitter, cfg.waypoint_jitter)
    rec = _Recorder(task.horizon)

    for sub in task.subtasks:
        approach = OracleRunner(task, sub.oracle.approach, ctx.state, registry=registry, ctx=ctx)
        while (a := approach.act(ctx.state)) is not None:
            rec.advance(ctx, a, TRANSITION)

        # anchors for rotation()/travel() restart with every skill
        ctx.state.capture_initial_poses()
        skill = OracleRunner(task, sub.oracle.skill, ctx.state, registry=registry, ctx=ctx)
        steps = 0
        while not subtask_success(task, sub.index, ctx.state):
            a = skill.act(ctx.state)
            if a is None:
                raise OracleFailure(f"subtask {sub.index} ({sub.name}) finished its script without success")
            if steps >= sub.timeout:
                raise OracleFailure(f"subtask {sub.index} ({sub.name}) timed out after {steps} steps")
            rec.advance(ctx, a, sub.index)
            steps += 1

    rec.states.append(ctx.state)
    rec.actions.append(hold_control(ctx.state))
    rec.phases.append(task.K)
    meta = TrajectoryMeta(task=task.name, seed=seed, source="oracle-demo", dt=task.model.dt)
    traj = Trajectory(rec.states, np.stack(rec.actions), meta, phases=np.asarray(rec.phases, dtype=np.int64))
    return traj, seed


def scripted_demo(task: TaskSpec, cfg: DemoConfig, rng: np.random.Generator) -> Trajectory:
    """One oracle demonstration that completes every subtask.

    Failed attempts are retried with a fresh draw from `rng`; OracleFailure after
    `cfg.max_retries` attempts.
    """
    last = None
    for attempt in range(1, cfg.max_retries + 1):
        sub_rng = np.random.default_rng(int(rng.integers(0, 2 ** 31 - 1)))
        try:
            traj, _ = _run_episode(task, cfg, sub_rng)
        except (OracleFailure, NonFiniteState) as e:
            last = e
            logger.debug("demo attempt %d on %s failed: %s", attempt, task.name, e)
            continue
        traj.meta = replace(traj.meta, attempts=attempt)
        return traj
    raise OracleFailure(f"{task.name}: no successful demo in {cfg.max_retries} attempts (last: {last})")


def generate_demos(task: TaskSpec, cfg: DemoConfig) -> List[Trajectory]:
    rng = np.random.default_rng(cfg.seed)
    demos = []
    for _ in tqdm(range(cfg.n_demos), desc=f"demos {task.name}", disable=not progress_enabled()):
        demos.append(scripted_demo(task, cfg, rng))
    logger.info("  ✔ %d demos for %s (%d frames total)", len(demos), task.name, sum(len(d) for d in demos))
    return demos
