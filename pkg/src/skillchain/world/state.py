# src/skillchain/world/state.py
import copy
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from ..schema.world_schema import BodyConfig, ObservationConfig, WorldConfig
from .geometry import Shape, transform, wrap_angle
from .robot import ARM_DOF, RobotModel


@dataclass(frozen=True)
class BodyModel:
    name: str
    shape: Shape
    mass: float
    inertia: float
    friction: float
    restitution: float
    static: bool
    collides: bool
    keypoints: Dict[str, np.ndarray]

    @property
    def inv_mass(self) -> float:
        return 0.0 if self.static or self.mass <= 0 else 1.0 / self.mass

    @property
    def inv_inertia(self) -> float:
        return 0.0 if self.static or self.inertia <= 0 else 1.0 / self.inertia

    @staticmethod
    def from_config(cfg: BodyConfig) -> "BodyModel":
        s = cfg.shape
        if s.kind == "circle":
            shape = Shape.circle(s.radius)
        elif s.kind == "box":
            shape = Shape.box(*s.size)
        else:
            shape = Shape.polygon(s.vertices)
        kps = {k: np.asarray(v, float) for k, v in cfg.keypoints.items()}
        for k, v in kps.items():
            if not shape.contains(v, tol=1e-6):
                raise ValueError(f"keypoint {k} of {cfg.name} lies outside its shape")
        return BodyModel(cfg.name, shape, cfg.mass, shape.inertia(cfg.mass), cfg.friction,
                         cfg.restitution, cfg.static, cfg.collides, kps)


@dataclass(frozen=True)
class ContactParams:
    iterations: int
    penetration_tolerance: float
    baumgarte: float
    contact_threshold: float
    restitution_velocity: float
    detection_slop: float
    slip_steps: int


@dataclass(frozen=True)
class WorldModel:
    """Physical parameters of one world instance (nominal or randomized)."""

    robot: RobotModel
    bodies: Dict[str, BodyModel]
    gravity: np.ndarray
    table_gravity: float
    table_friction: float
    floor_y: Optional[float]
    dt: float
    contact: ContactParams
    observation: ObservationConfig
    workspace: np.ndarray  # [[xmin, xmax], [ymin, ymax]]
    restitution_scale: float = 1.0
    obs_noise: tuple = ("uniform", 0.0, 0.0)
    action_noise: tuple = ("normal", 0.0, 0.0)
    action_noise_units: float = 0.05

    @staticmethod
    def from_config(cfg: WorldConfig, bodies: List[BodyConfig]) -> "WorldModel":
        c = cfg.contact
        return WorldModel(
            robot=RobotModel.from_config(cfg.robot),
            bodies={b.name: BodyModel.from_config(b) for b in bodies},
            gravity=np.asarray(cfg.gravity, float),
            table_gravity=cfg.table_gravity,
            table_friction=cfg.table_friction,
            floor_y=cfg.floor_y,
            dt=cfg.dt,
            contact=ContactParams(c.iterations, c.penetration_tolerance, c.baumgarte, c.contact_threshold,
                                  c.restitution_velocity, c.detection_slop, c.slip_steps),
            observation=cfg.observation,
            workspace=np.asarray(cfg.workspace, float),
            action_noise_units=cfg.action_noise_units,
        )

    @property
    def dynamic_names(self) -> List[str]:
        return [n for n, b in self.bodies.items() if not b.static]

    def replace(self, **kw) -> "WorldModel":
        return replace(self, **kw)


@dataclass
class BodyState:
    model: BodyModel
    pose: np.ndarray  # x, y, theta
    velocity: np.ndarray  # vx, vy, omega
    unwrapped: float = 0.0  # cumulative rotation, not wrapped

    @property
    def shape(self) -> Shape:
        return self.model.shape

    @property
    def keypoint_anchors(self) -> Dict[str, np.ndarray]:
        return self.model.keypoints

    def keypoints_world(self) -> Dict[str, np.ndarray]:
        return {k: transform(self.pose, v) for k, v in self.model.keypoints.items()}

    def copy(self) -> "BodyState":
        return BodyState(self.model, self.pose.copy(), self.velocity.copy(), self.unwrapped)


@dataclass
class RobotState:
    q: np.ndarray  # arm joints then finger joints
    qd: np.ndarray
    fingertip_poses: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def arm_q(self) -> np.ndarray:
        return self.q[:ARM_DOF]

    @property
    def arm_qd(self) -> np.ndarray:
        return self.qd[:ARM_DOF]

    @property
    def finger_q(self) -> np.ndarray:
        return self.q[ARM_DOF:]

    @property
    def finger_qd(self) -> np.ndarray:
        return self.qd[ARM_DOF:]

    @staticmethod
    def at(model: RobotModel, q: np.ndarray, qd: Optional[np.ndarray] = None) -> "RobotState":
        q = np.asarray(q, float).copy()
        qd = np.zeros_like(q) if qd is None else np.asarray(qd, float).copy()
        return RobotState(q, qd, model.fingertip_poses(q))

    def copy(self) -> "RobotState":
        return RobotState(self.q.copy(), self.qd.copy(), {k: v.copy() for k, v in self.fingertip_poses.items()})


@dataclass
class ContactRecord:
    a: str
    b: str
    point: np.ndarray
    normal: np.ndarray  # from a to b
    force_magnitude: float


@dataclass
class GraspState:
    body: str
    relative: np.ndarray  # object pose in palm frame
    finger_lock: np.ndarray  # finger joint values at engagement
    fingers: tuple  # fingers holding the object
    slip_count: int = 0


@dataclass
class ControlCommand:
    targets: np.ndarray  # joint position targets, one per DOF


@dataclass
class WorldState:
    model: WorldModel
    robot: RobotState
    bodies: Dict[str, BodyState]
    contacts: List[ContactRecord] = field(default_factory=list)
    time: float = 0.0
    rand: Optional["RandomizationSample"] = None  # noqa: F821
    grasp: Optional[GraspState] = None
    initial_poses: Dict[str, np.ndarray] = field(default_factory=dict)
    targets: Optional[np.ndarray] = None
    seed: int = 0
    tick: int = 0

    def copy(self) -> "WorldState":
        return WorldState(
            model=self.model,
            robot=self.robot.copy(),
            bodies={k: b.copy() for k, b in self.bodies.items()},
            contacts=list(self.contacts),
            time=self.time,
            rand=self.rand,
            grasp=copy.deepcopy(self.grasp),
            initial_poses={k: v.copy() for k, v in self.initial_poses.items()},
            targets=None if self.targets is None else self.targets.copy(),
            seed=self.seed,
            tick=self.tick,
        )

    def capture_initial_poses(self) -> "WorldState":
        """Reset the reference poses used by the pose observation mode and object atoms."""
        self.initial_poses = {k: b.pose.copy() for k, b in self.bodies.items() if not b.model.static}
        for b in self.bodies.values():
            b.unwrapped = 0.0
        return self

    def keypoints(self) -> Dict[str, np.ndarray]:
        kp = self.model.robot.keypoints(self.robot.q)
        for b in self.bodies.values():
            kp.update(b.keypoints_world())
        return kp

    def held(self) -> Optional[str]:
        return self.grasp.body if self.grasp is not None else None

    def is_finite(self) -> bool:
        if not (np.all(np.isfinite(self.robot.q)) and np.all(np.isfinite(self.robot.qd))):
            return False
        return all(np.all(np.isfinite(b.pose)) and np.all(np.isfinite(b.velocity)) for b in self.bodies.values())


def make_state(model: WorldModel, poses: Optional[Dict[str, np.ndarray]] = None,
               q: Optional[np.ndarray] = None, seed: int = 0) -> WorldState:
    bodies = {}
    for name, bm in model.bodies.items():
        p = np.asarray(poses[name], float) if poses and name in poses else None
        if p is None:
            raise KeyError(f"no pose for body {name}")
        p = np.array([p[0], p[1], wrap_angle(p[2])])
        bodies[name] = BodyState(bm, p, np.zeros(3))
    q = model.robot.q_init if q is None else np.asarray(q, float)
    q = np.clip(q, model.robot.lower, model.robot.upper)
    state = WorldState(model=model, robot=RobotState.at(model.robot, q), bodies=bodies,
                       targets=q.copy(), seed=seed)
    return state.capture_initial_poses()
