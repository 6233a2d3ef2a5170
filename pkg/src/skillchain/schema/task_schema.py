# src/skillchain/schema/task_schema.py
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from .world_schema import BodyConfig, WorldConfig


class TargetConfig(BaseModel):
    """Where a move/push primitive sends the grip centre.

    mode body:    pose of body `ref` composed with `offset` (body frame)
    radial:       keypoint `ref` plus `offset` rotated by the radial approach angle
    world:        `offset` is the absolute grip pose
    current:      current grip pose composed with `offset`
    place:        put keypoint `point` of the held body onto keypoint `ref`, shifted by `offset`
    """

    mode: Literal["body", "radial", "world", "current", "place"] = "body"
    ref: Optional[str] = None
    point: Optional[str] = None
    angle: Optional[float] = None  # absolute grip angle; place keeps the current one when unset
    offset: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])

    @field_validator("offset")
    @classmethod
    def _three(cls, v):
        if len(v) != 3:
            raise ValueError("offset is [dx, dy, dtheta]")
        return v


class PrimitiveConfig(BaseModel):
    kind: Literal["move", "push", "open", "close", "turn", "dwell"]
    target: Optional[TargetConfig] = None
    speed: float = 0.15  # m/s for move/push, rad/s for turn
    turn_speed: float = 1.5  # rad/s cap on palm rotation during moves
    angle: float = 0.0  # turn
    point: Optional[str] = None  # turn pivot: keypoint of the held body, default its centre
    steps: int = 15  # open/close/dwell
    until: Optional[str] = None  # DSL predicate ending the primitive early
    settle_steps: int = 40

    @model_validator(mode="after")
    def _target(self):
        if self.kind in ("move", "push") and self.target is None:
            raise ValueError(f"{self.kind} needs a target")
        if self.speed <= 0:
            raise ValueError("speed must be > 0")
        return self


class OracleConfig(BaseModel):
    approach: List[PrimitiveConfig] = Field(default_factory=list)  # tagged transition
    skill: List[PrimitiveConfig]  # tagged with the subtask


class SubtaskConfig(BaseModel):
    name: str
    point: str
    contact: Optional[str] = None  # omitted: the point constraint alone decides
    success: str
    timeout: int = 400
    oracle: OracleConfig


class InitRange(BaseModel):
    """Uniform ranges around the nominal pose: x, y in metres, theta in radians."""

    dx: List[float] = Field(default_factory=lambda: [0.0, 0.0])
    dy: List[float] = Field(default_factory=lambda: [0.0, 0.0])
    dtheta: List[float] = Field(default_factory=lambda: [0.0, 0.0])

    @model_validator(mode="after")
    def _ordered(self):
        for name in ("dx", "dy", "dtheta"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is reversed")
        return self


class TaskConfig(BaseModel):
    name: str
    description: str = ""
    world: WorldConfig = Field(default_factory=WorldConfig)
    bodies: List[BodyConfig]
    init: Dict[str, InitRange] = Field(default_factory=dict)
    constants: Dict[str, float] = Field(default_factory=dict)
    subtasks: List[SubtaskConfig]
    horizon: int = 3000
    observation_mode: Literal["pose", "pointset"] = "pose"

    @field_validator("subtasks")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("a task needs at least one subtask")
        return v

    @model_validator(mode="after")
    def _refs(self):
        names = [b.name for b in self.bodies]
        if len(set(names)) != len(names):
            raise ValueError("body names must be unique")
        for k in self.init:
            if k not in names:
                raise ValueError(f"init range for unknown body {k!r}")
        return self


class DemoConfig(BaseModel):
    n_demos: int = 15
    action_jitter: float = 0.002  # rad, on joint targets
    waypoint_jitter: float = 0.002  # m, on resolved move targets
    seed: int = 0
    max_retries: int = 20

    @field_validator("n_demos")
    @classmethod
    def _positive(cls, v):
        if v < 1:
            raise ValueError("n_demos must be >= 1")
        return v
