# src/skillchain/schema/transition_schema.py
from typing import Literal

from pydantic import BaseModel, Field, model_validator


class PlannerConfig(BaseModel):
    algorithm: Literal["rrt-connect", "straight-line-with-repair"] = "rrt-connect"
    step_size: float = 0.05  # rad per joint between collision checks
    margin: float = 0.005  # m
    max_iterations: int = 4000
    goal_bias: float = 0.1
    shortcut_passes: int = 60
    max_joint_velocity: float = 1.0  # rad/s
    settle_steps: int = 30  # replay frames holding the goal
    goal_pos_tol: float = 0.005  # m, palm and held object
    goal_rot_tol: float = 0.05  # rad
    penetration_tol: float = 1e-3
    audit_factor: int = 10
    repair_samples: int = 200

    @model_validator(mode="after")
    def _ranges(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be > 0")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.max_joint_velocity <= 0:
            raise ValueError("max_joint_velocity must be > 0")
        return self


class TransitionConfig(BaseModel):
    n_per_transition: int = 200  # 1000 at full scale
    n_handoff: int = 1
    pilot_pairs: int = 50
    min_yield: float = 0.01
    max_attempts_factor: int = 20
    seed: int = 0
    planner: PlannerConfig = Field(default_factory=PlannerConfig)
