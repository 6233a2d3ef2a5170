# src/skillchain/world/collision.py
"""Kinematic collision queries used by sampling, augmentation and planning."""
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .geometry import Shape, collide, collide_floor, compose, wrap_angle
from .state import WorldState


def _circle(r: float) -> Shape:
    return Shape("circle", radius=r)


def robot_hits(state: WorldState, q: np.ndarray, margin: float = 0.0,
               ignore: Iterable[str] = ()) -> List[Tuple[str, str, float]]:
    """Robot circles (at q) closer than `margin` to any collidable body other than the held one."""
    ignore = set(ignore)
    held = state.held()
    out = []
    for cid, c, r in state.model.robot.circles(q):
        cpose = np.array([c[0], c[1], 0.0])
        for name, b in state.bodies.items():
            if not b.model.collides or name == held or name in ignore:
                continue
            if np.hypot(*(c - b.pose[:2])) > r + b.shape.bounding_radius + margin:
                continue
            for _, _, d in collide(_circle(r), cpose, b.shape, b.pose, slop=margin):
                if d > -margin:
                    out.append((cid, name, d))
                    break
    return out


def held_pose_at(state: WorldState, q: np.ndarray) -> Optional[np.ndarray]:
    if state.grasp is None:
        return None
    return compose(state.model.robot.palm_pose(q), state.grasp.relative)


def held_hits(state: WorldState, q: np.ndarray, margin: float = 0.0,
              ignore: Iterable[str] = ()) -> List[Tuple[str, str, float]]:
    """Attached object (moving with the hand at q) against the other bodies."""
    if state.grasp is None:
        return []
    ignore = set(ignore)
    name = state.grasp.body
    held = state.bodies[name]
    pose = held_pose_at(state, q)
    out = []
    for other, b in state.bodies.items():
        if other == name or other in ignore or not b.model.collides or not held.model.collides:
            continue
        if np.hypot(*(pose[:2] - b.pose[:2])) > held.shape.bounding_radius + b.shape.bounding_radius + margin:
            continue
        for _, _, d in collide(held.shape, pose, b.shape, b.pose, slop=margin):
            if d > -margin:
                out.append((name, other, d))
                break
    return out


def config_free(state: WorldState, q: np.ndarray, margin: float, ignore: Iterable[str] = ()) -> bool:
    return not robot_hits(state, q, margin, ignore) and not held_hits(state, q, margin, ignore)


def max_penetration(state: WorldState, include_robot: bool = True) -> float:
    """Deepest overlap among bodies (and robot circles vs dynamic bodies), grasp pairs excluded."""
    names = [n for n, b in state.bodies.items() if b.model.collides]
    worst = 0.0
    for i, a in enumerate(names):
        ba = state.bodies[a]
        for b in names[i + 1:]:
            bb = state.bodies[b]
            if ba.model.static and bb.model.static:
                continue
            for _, _, d in collide(ba.shape, ba.pose, bb.shape, bb.pose):
                worst = max(worst, d)
        if state.model.floor_y is not None and not ba.model.static:
            for _, _, d in collide_floor(ba.shape, ba.pose, state.model.floor_y):
                worst = max(worst, d)
    if include_robot:
        held = state.held()
        for cid, c, r in state.model.robot.circles(state.robot.q):
            cpose = np.array([c[0], c[1], 0.0])
            for a in names:
                b = state.bodies[a]
                if a == held or b.model.static:
                    continue
                for _, _, d in collide(_circle(r), cpose, b.shape, b.pose):
                    worst = max(worst, d)
    return worst


def project_out(state: WorldState, movable: Iterable[str], tolerance: float, iterations: int = 20) -> float:
    """Push the movable bodies out of overlaps in place. Returns the remaining max penetration."""
    movable = [m for m in movable if m != state.held()]
    for _ in range(iterations):
        moved = False
        for name in movable:
            b = state.bodies[name]
            if not b.model.collides:
                continue
            push = np.zeros(2)
            for other, ob in state.bodies.items():
                if other == name or not ob.model.collides:
                    continue
                for _, n, d in collide(ob.shape, ob.pose, b.shape, b.pose):
                    if d > 0.0:
                        push += n * (d + 0.25 * tolerance)
            for cid, c, r in state.model.robot.circles(state.robot.q):
                for _, n, d in collide(_circle(r), np.array([c[0], c[1], 0.0]), b.shape, b.pose):
                    if d > 0.0:
                        push += n * (d + 0.25 * tolerance)
            if np.any(push):
                b.pose = np.array([b.pose[0] + push[0], b.pose[1] + push[1], wrap_angle(b.pose[2])])
                moved = True
        if not moved:
            break
    return max_penetration(state)
