# src/skillchain/tasks/oracle/primitives.py
import math
from typing import Iterator

import numpy as np

from ...errors import OracleFailure
from ...schema.task_schema import PrimitiveConfig
from ...world.geometry import rot, transform, wrap_angle
from .base import OraclePrimitive
from .context import OracleContext


def _settle(ctx: OracleContext, steps: int) -> Iterator[np.ndarray]:
    for _ in range(steps):
        if ctx.settled():
            return
        yield ctx.hold()


class MovePrimitive(OraclePrimitive):
    """Straight-line palm motion to a resolved target at bounded linear and angular speed."""

    def detect(self, cfg: PrimitiveConfig) -> bool:
        return cfg.kind == "move"

    def plan(self, ctx: OracleContext, cfg: PrimitiveConfig) -> Iterator[np.ndarray]:
        goal = ctx.resolve(cfg.target)
        start = ctx.palm_cmd.copy()
        delta = np.array([goal[0] - start[0], goal[1] - start[1], wrap_angle(goal[2] - start[2])])
        dt = ctx.state.model.dt
        n = max(1, math.ceil(np.hypot(delta[0], delta[1]) / (cfg.speed * dt)),
                math.ceil(abs(delta[2]) / (cfg.turn_speed * dt)))
        for k in range(1, n + 1):
            yield ctx.command(start + delta * (k / n))
        yield from _settle(ctx, cfg.settle_steps)

    def name(self) -> str:
        return "move"


class PushPrimitive(MovePrimitive):
    """A move that is expected to drive into a body; no settling at the end."""

    def detect(self, cfg: PrimitiveConfig) -> bool:
        return cfg.kind == "push"

    def plan(self, ctx: OracleContext, cfg: PrimitiveConfig) -> Iterator[np.ndarray]:
        yield from super().plan(ctx, cfg.model_copy(update={"settle_steps": 0}))

    def name(self) -> str:
        return "push"


class GripperPrimitive(OraclePrimitive):

    def detect(self, cfg: PrimitiveConfig) -> bool:
        return cfg.kind in ("open", "close")

    def plan(self, ctx: OracleContext, cfg: PrimitiveConfig) -> Iterator[np.ndarray]:
        robot = ctx.robot
        ctx.fingers_cmd = (robot.closed_fingers if cfg.kind == "close" else robot.open_fingers).copy()
        for _ in range(cfg.steps):
            yield ctx.hold()

    def name(self) -> str:
        return "gripper"


class TurnPrimitive(OraclePrimitive):
    """Rotate the held body about one of its keypoints (its centre by default)."""

    def detect(self, cfg: PrimitiveConfig) -> bool:
        return cfg.kind == "turn"

    def plan(self, ctx: OracleContext, cfg: PrimitiveConfig) -> Iterator[np.ndarray]:
        g = ctx.state.grasp
        if g is None:
            raise OracleFailure("turn while nothing is held")
        anchor = ctx.state.bodies[g.body].model.keypoints[cfg.point] if cfg.point else np.zeros(2)
        palm0 = ctx.palm_cmd.copy()
        obj_xy = transform(palm0, g.relative[:2])
        obj_theta = palm0[2] + g.relative[2]
        pivot = obj_xy + rot(obj_theta) @ anchor
        # palm position relative to the pivot rotates rigidly with the body
        arm = palm0[:2] - pivot
        n = max(1, math.ceil(abs(cfg.angle) / (cfg.speed * ctx.state.model.dt)))
        for k in range(1, n + 1):
            a = cfg.angle * k / n
            p = pivot + rot(a) @ arm
            yield ctx.command(np.array([p[0], p[1], wrap_angle(palm0[2] + a)]))
        yield from _settle(ctx, cfg.settle_steps)

    def name(self) -> str:
        return "turn"


class DwellPrimitive(OraclePrimitive):

    def detect(self, cfg: PrimitiveConfig) -> bool:
        return True

    def plan(self, ctx: OracleContext, cfg: PrimitiveConfig) -> Iterator[np.ndarray]:
        for _ in range(cfg.steps):
            yield ctx.hold()

    def name(self) -> str:
        return "dwell"
