# src/skillchain/schema/world_schema.py
import math
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class ShapeConfig(BaseModel):
    kind: Literal["circle", "polygon", "box"]
    radius: Optional[float] = None
    vertices: Optional[List[List[float]]] = None
    size: Optional[List[float]] = None  # box: [width, height]

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "circle":
            if self.radius is None or self.radius <= 0:
                raise ValueError("circle needs radius > 0")
        elif self.kind == "box":
            if not self.size or len(self.size) != 2 or min(self.size) <= 0:
                raise ValueError("box needs size [width, height] > 0")
        else:
            if not self.vertices or len(self.vertices) < 3:
                raise ValueError("polygon needs at least 3 vertices")
        return self


class BodyConfig(BaseModel):
    name: str
    shape: ShapeConfig
    mass: float = 0.05
    friction: float = 0.8
    restitution: float = 0.1
    static: bool = False
    collides: bool = True
    pose: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    keypoints: Dict[str, List[float]] = Field(default_factory=dict)

    @field_validator("pose")
    @classmethod
    def _pose3(cls, v):
        if len(v) != 3:
            raise ValueError("pose is [x, y, theta]")
        return v


class FingerConfig(BaseModel):
    name: str
    mount: List[float]  # palm frame [x, y, angle]
    lengths: List[float]
    closing_sign: Literal[-1, 1]


def _default_fingers() -> List[FingerConfig]:
    return [
        FingerConfig(name="index", mount=[0.0, 0.025, 0.0], lengths=[0.06], closing_sign=-1),
        FingerConfig(name="middle", mount=[0.0, 0.04, 0.0], lengths=[0.065], closing_sign=-1),
        FingerConfig(name="thumb", mount=[0.0, -0.025, 0.0], lengths=[0.035, 0.03], closing_sign=1),
    ]


class RobotConfig(BaseModel):
    base: List[float] = Field(default_factory=lambda: [0.0, 0.0])
    link_lengths: List[float] = Field(default_factory=lambda: [0.30, 0.25, 0.06])
    link_radius: float = 0.018
    circles_per_link: int = 3
    fingers: List[FingerConfig] = Field(default_factory=_default_fingers)
    fingertip_radius: float = 0.006
    joint_lower: List[float] = Field(default_factory=lambda: [-3.1, -2.8, -5.5, -0.6, -0.6, -0.5, -0.5])
    joint_upper: List[float] = Field(default_factory=lambda: [3.1, 2.8, 5.5, 0.5, 0.5, 0.6, 0.6])
    kp: List[float] = Field(default_factory=lambda: [900.0] * 7)
    kd: List[float] = Field(default_factory=lambda: [60.0] * 7)
    friction: float = 0.9
    grip_gain: float = 2.0  # N*m per rad of squeeze
    grip_center: List[float] = Field(default_factory=lambda: [0.05, 0.0])
    q_init: List[float] = Field(default_factory=lambda: [0.0, 1.2, 0.3, 0.35, 0.35, -0.3, -0.1])
    open_fingers: List[float] = Field(default_factory=lambda: [0.35, 0.35, -0.3, -0.1])
    closed_fingers: List[float] = Field(default_factory=lambda: [-0.45, -0.45, 0.45, 0.3])

    @model_validator(mode="after")
    def _dof(self):
        n = 3 + sum(len(f.lengths) for f in self.fingers)
        for name in ("joint_lower", "joint_upper", "kp", "kd", "q_init"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have {n} entries")
        n_f = n - 3
        if len(self.open_fingers) != n_f or len(self.closed_fingers) != n_f:
            raise ValueError(f"finger presets must have {n_f} entries")
        if any(lo > hi for lo, hi in zip(self.joint_lower, self.joint_upper)):
            raise ValueError("joint_lower must not exceed joint_upper")
        return self


class ContactConfig(BaseModel):
    iterations: int = 4
    penetration_tolerance: float = 1e-3
    baumgarte: float = 0.2
    contact_threshold: float = 0.1  # N
    restitution_velocity: float = 0.2  # m/s, below this no bounce
    detection_slop: float = 0.005
    slip_steps: int = 3


class ObservationConfig(BaseModel):
    n_points: int = 256
    point_noise: float = 0.002
    p_fly: float = 0.005
    fly_noise: float = 0.1


class WorldConfig(BaseModel):
    dt: float = 0.01
    gravity: List[float] = Field(default_factory=lambda: [0.0, 0.0])
    table_gravity: float = 9.81
    table_friction: float = 0.5
    floor_y: Optional[float] = None
    action_noise_units: float = 0.05  # rad of joint target per unit of action noise
    workspace: List[List[float]] = Field(default_factory=lambda: [[-0.1, 0.8], [-0.6, 0.6]])
    robot: RobotConfig = Field(default_factory=RobotConfig)
    contact: ContactConfig = Field(default_factory=ContactConfig)
    observation: ObservationConfig = Field(default_factory=ObservationConfig)

    @field_validator("dt")
    @classmethod
    def _dt(cls, v):
        if v <= 0:
            raise ValueError("dt must be > 0")
        return v


class DistributionConfig(BaseModel):
    kind: Literal["scaling", "additive"]
    dist: Literal["uniform", "normal", "exp_uniform"]
    a: float  # uniform/exp_uniform: low; normal: mean
    b: float  # uniform/exp_uniform: high; normal: variance


def _table_ranges() -> Dict[str, DistributionConfig]:
    D = DistributionConfig
    return {
        "object_mass": D(kind="scaling", dist="uniform", a=0.5, b=1.5),
        "object_friction": D(kind="scaling", dist="uniform", a=0.7, b=1.3),
        "robot_friction": D(kind="scaling", dist="uniform", a=0.7, b=1.3),
        "state_observation": D(kind="additive", dist="uniform", a=-0.002, b=0.002),
        "action": D(kind="additive", dist="normal", a=0.0, b=0.01),
        "restitution": D(kind="scaling", dist="uniform", a=0.5, b=1.5),
        "joint_lower": D(kind="additive", dist="normal", a=0.0, b=0.01),
        "joint_upper": D(kind="additive", dist="normal", a=0.0, b=0.01),
        "joint_damping": D(kind="scaling", dist="exp_uniform", a=0.3, b=3.0),
        "joint_stiffness": D(kind="scaling", dist="exp_uniform", a=0.75, b=1.5),
        "gravity": D(kind="scaling", dist="uniform", a=0.9, b=1.1),
        "compliance": D(kind="scaling", dist="uniform", a=0.5, b=1.5),
    }


class RandomizationSpec(BaseModel):
    """Per-parameter distributions. Noise entries (state_observation, action) are applied per draw."""

    params: Dict[str, DistributionConfig] = Field(default_factory=_table_ranges)

    def widened(self, factor: float) -> "RandomizationSpec":
        out = {}
        for name, d in self.params.items():
            if d.dist == "normal":
                out[name] = d.model_copy(update={"b": d.b * factor * factor})
            elif d.dist == "exp_uniform":
                mid = 0.5 * (math.log(d.a) + math.log(d.b))
                half = 0.5 * (math.log(d.b) - math.log(d.a)) * factor
                out[name] = d.model_copy(update={"a": math.exp(mid - half), "b": math.exp(mid + half)})
            else:
                mid, half = 0.5 * (d.a + d.b), 0.5 * (d.b - d.a) * factor
                lo = mid - half
                if d.kind == "scaling":
                    lo = max(lo, 0.05)
                out[name] = d.model_copy(update={"a": lo, "b": mid + half})
        return RandomizationSpec(params=out)

    @classmethod
    def identity(cls) -> "RandomizationSpec":
        D = DistributionConfig
        params = {}
        for name, d in _table_ranges().items():
            if d.kind == "scaling":
                params[name] = D(kind="scaling", dist="uniform", a=1.0, b=1.0)
            elif d.dist == "normal":
                params[name] = D(kind="additive", dist="normal", a=0.0, b=0.0)
            else:
                params[name] = D(kind="additive", dist="uniform", a=0.0, b=0.0)
        return cls(params=params)
