# src/skillchain/world/observe.py
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..errors import UnsupportedMode
from .geometry import transform
from .randomization import noise_draw
from .state import WorldModel, WorldState

MODES = ("pose", "pointset", "privileged")


@dataclass
class Observation:
    mode: str
    vector: np.ndarray
    points: Optional[np.ndarray] = None  # (N, 2) for pointset mode

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


def observed_objects(model: WorldModel) -> List[str]:
    return model.dynamic_names


def observation_dim(model: WorldModel, mode: str) -> int:
    dof = model.robot.dof
    n_obj = len(observed_objects(model))
    if mode == "pose":
        return dof + 3 * n_obj
    if mode == "pointset":
        return dof + 2 * model.observation.n_points
    if mode == "privileged":
        n_f = len(model.robot.fingers)
        return 2 * dof + 6 * n_obj + 3 * n_f + n_f
    raise UnsupportedMode(mode)


def _state_noise(state: WorldState, rng: np.random.Generator, size: int) -> np.ndarray:
    return noise_draw(state.model.obs_noise, rng, size)


def sample_points(state: WorldState, rng: np.random.Generator, n: int) -> np.ndarray:
    bodies = list(state.bodies.values())
    per = np.array([b.shape.perimeter() for b in bodies])
    owner = rng.choice(len(bodies), size=n, p=per / per.sum())
    u = rng.random(n)
    pts = np.empty((n, 2))
    for i, b in enumerate(bodies):
        sel = owner == i
        if np.any(sel):
            pts[sel] = transform(b.pose, b.shape.sample_contour(u[sel]))
    return pts


def observe(state: WorldState, mode: str, rng: np.random.Generator, noisy: bool = True) -> Observation:
    """Observation vector for one of the supported modes.

    pose mode reports the object poses captured at the last reset/skill start, not live poses.
    """
    m = state.model
    q = state.robot.q
    objs = observed_objects(m)

    if mode == "pose":
        parts = [q]
        for name in objs:
            parts.append(state.initial_poses.get(name, state.bodies[name].pose))
        vec = np.concatenate(parts).astype(float)
        if noisy:
            vec = vec + _state_noise(state, rng, vec.shape[0])
        return Observation(mode, vec)

    if mode == "pointset":
        oc = m.observation
        pts = sample_points(state, rng, oc.n_points)
        if noisy:
            pts = pts + rng.normal(0.0, oc.point_noise, pts.shape)
            fly = rng.random(oc.n_points) < oc.p_fly
            if np.any(fly):
                pts[fly] = pts[fly] + rng.normal(0.0, oc.fly_noise, (int(fly.sum()), 2))
        vec = np.concatenate([q, pts.reshape(-1)])
        return Observation(mode, vec, points=pts)

    if mode == "privileged":
        parts = [q, state.robot.qd]
        for name in objs:
            b = state.bodies[name]
            parts += [b.pose, b.velocity]
        forces = {f.name: 0.0 for f in m.robot.fingers}
        for f in m.robot.fingers:
            parts.append(state.robot.fingertip_poses[f.name])
        for c in state.contacts:
            if c.a in forces:
                forces[c.a] += c.force_magnitude
        parts.append(np.array([forces[f.name] for f in m.robot.fingers]))
        vec = np.concatenate(parts).astype(float)
        if noisy:
            vec = vec + _state_noise(state, rng, vec.shape[0])
        return Observation(mode, vec)

    raise UnsupportedMode(f"observation mode {mode!r} is not one of {MODES}")
