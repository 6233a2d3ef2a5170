# src/skillchain/tasks/oracle/context.py
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ...errors import OracleFailure
from ...schema.task_schema import TargetConfig
from ...world import WorldState
from ...world.geometry import compose, invert, rot, wrap_angle
from ...world.robot import ARM_DOF

POS_TOL = 0.002
ANGLE_TOL = 0.02


@dataclass
class OracleContext:
    """Mutable scripting state shared by the primitives of one demo."""

    task: "TaskSpec"  # noqa: F821
    state: WorldState
    rng: np.random.Generator
    action_jitter: float = 0.0
    waypoint_jitter: float = 0.0
    palm_cmd: np.ndarray = field(default=None)
    fingers_cmd: np.ndarray = field(default=None)
    q_cmd: np.ndarray = field(default=None)

    def __post_init__(self):
        robot = self.state.model.robot
        q = self.state.robot.q if self.state.targets is None else self.state.targets
        self.q_cmd = np.asarray(q, float).copy()
        self.palm_cmd = robot.palm_pose(self.q_cmd)
        self.fingers_cmd = self.q_cmd[ARM_DOF:].copy()

    @property
    def robot(self):
        return self.state.model.robot

    def grip_offset(self) -> np.ndarray:
        gc = self.robot.grip_center
        return np.array([gc[0], gc[1], 0.0])

    def grip_to_palm(self, grip: np.ndarray) -> np.ndarray:
        gc = self.robot.grip_center
        return compose(grip, np.array([-gc[0], -gc[1], 0.0]))

    def command(self, palm: np.ndarray) -> np.ndarray:
        """Joint targets for a palm pose and the current finger command. IK failure aborts the demo."""
        arm = self.robot.ik_palm(palm, self.q_cmd)
        if arm is None:
            raise OracleFailure(f"palm pose {np.round(palm, 3).tolist()} is out of reach")
        self.palm_cmd = np.asarray(palm, float).copy()
        self.q_cmd = np.concatenate([arm, self.fingers_cmd])
        return self.q_cmd.copy()

    def hold(self) -> np.ndarray:
        self.q_cmd = np.concatenate([self.q_cmd[:ARM_DOF], self.fingers_cmd])
        return self.q_cmd.copy()

    def settled(self) -> bool:
        actual = self.robot.palm_pose(self.state.robot.q)
        return (float(np.hypot(*(actual[:2] - self.palm_cmd[:2]))) <= POS_TOL
                and abs(wrap_angle(actual[2] - self.palm_cmd[2])) <= ANGLE_TOL)

    # ---------------- target resolution ----------------

    def resolve(self, target: TargetConfig) -> np.ndarray:
        """Palm pose the target asks for."""
        off = np.asarray(target.offset, float)
        kps = self.state.keypoints()
        if target.mode == "place":
            return self._place(target, kps, off)
        if target.mode == "body":
            grip = compose(self._body(target.ref).pose, off)
        elif target.mode == "radial":
            p = self._keypoint(kps, target.ref)
            base = self.robot.base
            phi = math.atan2(p[1] - base[1], p[0] - base[0])
            grip = compose(np.array([p[0], p[1], phi]), off)
        elif target.mode == "world":
            grip = off.copy()
        else:
            grip = compose(compose(self.palm_cmd, self.grip_offset()), off)
        if target.angle is not None:
            grip[2] = wrap_angle(target.angle)
        if self.waypoint_jitter > 0.0:
            grip[:2] += self.rng.normal(0.0, self.waypoint_jitter, 2)
        return self.grip_to_palm(grip)

    def _place(self, target: TargetConfig, kps, off: np.ndarray) -> np.ndarray:
        g = self.state.grasp
        if g is None:
            raise OracleFailure("place target while nothing is held")
        body = self.state.bodies[g.body]
        anchor = body.model.keypoints[target.point] if target.point else np.zeros(2)
        goal = self._keypoint(kps, target.ref) + off[:2]
        if self.waypoint_jitter > 0.0:
            goal = goal + self.rng.normal(0.0, self.waypoint_jitter, 2)
        phi = self.palm_cmd[2] if target.angle is None else target.angle
        phi = phi + off[2]
        theta = phi + g.relative[2]
        obj = np.array([*(goal - rot(theta) @ anchor), theta])
        return compose(obj, invert(g.relative))

    def _body(self, name: Optional[str]):
        try:
            return self.state.bodies[name]
        except KeyError:
            raise OracleFailure(f"unknown body {name!r} in oracle target") from None

    @staticmethod
    def _keypoint(kps, name: Optional[str]) -> np.ndarray:
        try:
            return np.asarray(kps[name], float)
        except KeyError:
            raise OracleFailure(f"unknown keypoint {name!r} in oracle target") from None
