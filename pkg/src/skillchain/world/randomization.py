# src/skillchain/world/randomization.py
"""Domain randomization: sampling per-episode parameters and applying them to a world."""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Tuple

import numpy as np

from ..errors import MalformedSpec
from ..schema.world_schema import DistributionConfig, RandomizationSpec
from .state import WorldState

logger = logging.getLogger(__name__)

NOISE_PARAMS = ("state_observation", "action")

KNOWN_PARAMS = (
    "object_mass", "object_friction", "robot_friction", "state_observation", "action",
    "restitution", "joint_lower", "joint_upper", "joint_damping", "joint_stiffness",
    "gravity", "compliance",
)


@dataclass(frozen=True)
class RandomizationSample:
    values: Dict[str, float]
    # noise distributions are redrawn at every observe/step; (dist, a, b)
    noise: Dict[str, Tuple[str, float, float]] = field(default_factory=dict)

    def get(self, name: str) -> float:
        if name in self.values:
            return self.values[name]
        return 1.0 if name not in ("joint_lower", "joint_upper") and name not in NOISE_PARAMS else 0.0

    @classmethod
    def identity(cls) -> "RandomizationSample":
        values = {n: 0.0 if n in ("joint_lower", "joint_upper") + NOISE_PARAMS else 1.0 for n in KNOWN_PARAMS}
        noise = {"state_observation": ("uniform", 0.0, 0.0), "action": ("normal", 0.0, 0.0)}
        return cls(values=values, noise=noise)


def check_distribution(name: str, d: DistributionConfig) -> None:
    if d.dist in ("uniform", "exp_uniform") and d.a > d.b:
        raise MalformedSpec(f"{name}: low {d.a} exceeds high {d.b}")
    if d.dist == "exp_uniform" and d.a <= 0:
        raise MalformedSpec(f"{name}: exp_uniform needs a > 0")
    if d.dist == "normal" and d.b < 0:
        raise MalformedSpec(f"{name}: negative variance {d.b}")


def draw(d: DistributionConfig, rng: np.random.Generator, size=None):
    if d.dist == "normal":
        return rng.normal(d.a, math.sqrt(d.b), size)
    if d.dist == "uniform":
        lo, hi = d.a, d.b
    else:
        lo, hi = math.log(d.a), math.log(d.b)
    u = rng.uniform(lo, hi, size) if hi > lo else np.full(size if size else (), lo)
    if d.dist == "exp_uniform":
        return np.clip(np.exp(u), d.a, d.b)
    return u


def sample_randomization(spec: RandomizationSpec, rng: np.random.Generator) -> RandomizationSample:
    values, noise = {}, {}
    for name in sorted(spec.params):
        d = spec.params[name]
        check_distribution(name, d)
        values[name] = float(draw(d, rng))
        if name in NOISE_PARAMS:
            noise[name] = (d.dist, d.a, d.b)
    return RandomizationSample(values=values, noise=noise)


def apply_randomization(template: WorldState, sample: RandomizationSample) -> WorldState:
    """Scale/offset the template's physical parameters; noise entries are stored for observe/step."""
    m = template.model
    r = m.robot
    mass_s = sample.get("object_mass")
    fric_s = sample.get("object_friction")
    bodies = {}
    for name, b in m.bodies.items():
        if b.static:
            bodies[name] = replace(b, friction=b.friction * fric_s)
        else:
            bodies[name] = replace(b, mass=b.mass * mass_s, inertia=b.inertia * mass_s, friction=b.friction * fric_s)

    lower = r.lower + sample.get("joint_lower")
    upper = r.upper + sample.get("joint_upper")
    upper = np.maximum(upper, lower)
    robot = replace(
        r,
        lower=lower,
        upper=upper,
        kp=r.kp * sample.get("joint_stiffness"),
        kd=r.kd * sample.get("joint_damping"),
        friction=r.friction * sample.get("robot_friction"),
    )
    g = sample.get("gravity")
    action_noise = m.action_noise
    if "action" in sample.noise:
        dist, a, b = sample.noise["action"]
        u = m.action_noise_units
        action_noise = (dist, a * u, b * u * u) if dist == "normal" else (dist, a * u, b * u)
    contact = replace(m.contact, baumgarte=min(1.0, m.contact.baumgarte * sample.get("compliance")))
    model = replace(
        m,
        robot=robot,
        bodies=bodies,
        gravity=m.gravity * g,
        table_gravity=m.table_gravity * g,
        contact=contact,
        restitution_scale=m.restitution_scale * sample.get("restitution"),
        obs_noise=sample.noise.get("state_observation", m.obs_noise),
        action_noise=action_noise,
    )

    out = template.copy()
    out.model = model
    out.rand = sample
    for name, b in out.bodies.items():
        b.model = bodies[name]
    out.robot.q = np.clip(out.robot.q, robot.lower, robot.upper)
    out.robot.fingertip_poses = robot.fingertip_poses(out.robot.q)
    logger.debug("applied randomization %s", sample.values)
    return out


def noise_draw(desc: Tuple[str, float, float], rng: np.random.Generator, size) -> np.ndarray:
    dist, a, b = desc
    if dist == "normal":
        return rng.normal(a, math.sqrt(b), size) if b > 0 else np.full(size, a)
    if b > a:
        return rng.uniform(a, b, size)
    return np.full(size, a)
