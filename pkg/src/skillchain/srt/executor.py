# src/skillchain/srt/executor.py
"""Closed-loop chaining: router-driven transitions alternating with frozen skill controllers."""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..errors import NonFiniteState, OracleFailure
from ..schema.srt_schema import ChainingConfig
from ..segmentation.trajectory import Trajectory, TrajectoryMeta
from ..tasks import TaskSpec, subtask_success
from ..transition.planner import choose_anchor
from ..world import WorldState, hold_control, step
from ..world.collision import held_hits, robot_hits
from .routers import Router, SkillController

logger = logging.getLogger(__name__)

SUCCESS, FAILURE, NOT_ATTEMPTED = "success", "failure", "not-attempted"

Disturbance = Callable[[int, WorldState], None]


def stage_names(K: int) -> List[str]:
    """transition_1, skill_1, ..., transition_K, skill_K in execution order."""
    return [n for i in range(1, K + 1) for n in (f"transition_{i}", f"skill_{i}")]


@dataclass
class EpisodeResult:
    success: bool
    reached_stage: int  # highest completed subtask
    outcomes: List[str]  # per entry of stage_names(K)
    failure_stage: str = "none"
    failure_cause: Optional[str] = None  # slip, collision, timeout, cap, no-path, non-finite, oracle
    steps: int = 0
    out_of_order: int = 0  # suppressed predictions of a skill other than the next one
    trace: Optional[Trajectory] = None
    trace_path: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if self.success != (self.failure_stage == "none"):
            raise ValueError("failure_stage must be 'none' exactly when the episode succeeded")


class _Episode:
    def __init__(self, state: WorldState, task: TaskSpec, cap: int, record: bool, disturb: Optional[Disturbance]):
        self.state = state
        self.task = task
        self.cap = cap
        self.steps = 0
        self.record = record
        self.disturb = disturb
        self.states: List[WorldState] = []
        self.actions: List[np.ndarray] = []
        self.stages: List[int] = []

    def advance(self, target: np.ndarray, stage: int) -> None:
        if self.record:
            self.states.append(self.state)
            self.actions.append(np.asarray(target, float))
            self.stages.append(stage)
        self.state = step(self.state, target)
        self.steps += 1
        if self.disturb is not None:
            self.disturb(self.steps, self.state)

    @property
    def capped(self) -> bool:
        return self.steps >= self.cap

    def trace(self, seed: int) -> Optional[Trajectory]:
        if not self.record:
            return None
        meta = TrajectoryMeta(task=self.task.name, seed=seed, source="sim-rollout", dt=self.state.model.dt)
        return Trajectory(self.states + [self.state], np.stack(self.actions + [hold_control(self.state)]), meta,
                          stages=np.asarray(self.stages + [self.stages[-1] if self.stages else 0], np.int64))


def _bystander_contact(state: WorldState, tol: float) -> bool:
    """Robot or held object pressing into a body other than the one being reached for."""
    target = choose_anchor(state, state)
    hits = robot_hits(state, state.robot.q, 0.0) + held_hits(state, state.robot.q, 0.0)
    return any(d > tol and b != target for _, b, d in hits)


def execute_long_horizon(initial: WorldState, router: Router, skills: Sequence[SkillController], task: TaskSpec,
                         cfg: ChainingConfig, record: bool = False, disturb: Optional[Disturbance] = None,
                         seed: int = 0) -> EpisodeResult:
    """Run one episode from `initial`.

    Skill i only ever starts after subtask i-1 succeeded. A handoff happens on
    a fresh router prediction of the next skill with margin >= `stage_margin`;
    predictions of any other skill are suppressed. Failures are outcomes, not
    exceptions.
    """
    K = task.K
    if len(skills) != K:
        raise ValueError(f"{len(skills)} skill controllers for {K} subtasks")
    names = stage_names(K)
    outcomes = [NOT_ATTEMPTED] * len(names)
    cap = cfg.episode_cap if cfg.episode_cap is not None else task.horizon
    ep = _Episode(initial.copy().capture_initial_poses(), task, cap, record, disturb)
    tol = initial.model.contact.penetration_tolerance
    out_of_order = 0

    def finish(stage_idx: Optional[int], cause: Optional[str], reached: int) -> EpisodeResult:
        if stage_idx is not None:
            outcomes[stage_idx] = FAILURE
        return EpisodeResult(
            success=stage_idx is None, reached_stage=reached, outcomes=list(outcomes),
            failure_stage="none" if stage_idx is None else names[stage_idx], failure_cause=cause,
            steps=ep.steps, out_of_order=out_of_order, trace=ep.trace(seed), seed=seed)

    for i in range(1, K + 1):
        # transition towards skill i
        t_idx = 2 * (i - 1)
        ep.state.capture_initial_poses()
        held_at_start = ep.state.held()
        collided = False
        try:
            router.reset(ep.state, i)
            t_steps = 0
            while True:
                r = router.act(ep.state)
                if r.target is None:
                    return finish(t_idx, "no-path", i - 1)
                if r.inferred and r.stage == i and r.margin >= cfg.stage_margin:
                    break
                if r.inferred and r.stage not in (0, i):
                    out_of_order += 1
                if ep.capped or t_steps >= cfg.transition_timeout:
                    if held_at_start is not None and ep.state.held() != held_at_start:
                        cause = "slip"
                    elif collided:
                        cause = "collision"
                    else:
                        cause = "cap" if ep.capped else "timeout"
                    return finish(t_idx, cause, i - 1)
                ep.advance(r.target, 0)
                t_steps += 1
                if not collided and t_steps % 2 == 0:
                    collided = _bystander_contact(ep.state, tol)
        except NonFiniteState:
            return finish(t_idx, "non-finite", i - 1)
        except OracleFailure:
            return finish(t_idx, "oracle", i - 1)
        outcomes[t_idx] = SUCCESS

        # skill i
        s_idx = t_idx + 1
        timeout = cfg.skill_timeout if cfg.skill_timeout is not None else task.subtask(i).timeout
        ep.state.capture_initial_poses()
        skill = skills[i - 1]
        try:
            skill.reset(ep.state)
            s_steps = 0
            while not subtask_success(task, i, ep.state):
                if s_steps >= timeout:
                    return finish(s_idx, "timeout", i - 1)
                if ep.capped:
                    return finish(s_idx, "cap", i - 1)
                ep.advance(skill.act(ep.state), i)
                s_steps += 1
        except NonFiniteState:
            return finish(s_idx, "non-finite", i - 1)
        except OracleFailure:
            return finish(s_idx, "oracle", i - 1)
        outcomes[s_idx] = SUCCESS
        logger.debug("episode %d: subtask %d done at step %d", seed, i, ep.steps)

    if out_of_order:
        logger.debug("episode %d: %d out-of-order stage predictions suppressed", seed, out_of_order)
    return finish(None, None, K)
