# src/skillchain/segmentation/boundary.py
"""Initiation/termination exemplar sets per skill and their object-centric augmentation."""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import AugmentationInfeasible, EmptySet
from ..schema.segmentation_schema import AugmentConfig
from ..world import WorldModel, WorldState, hold_control, step
from ..world.collision import config_free, max_penetration, project_out
from ..world.geometry import compose, invert, wrap_angle
from ..world.robot import ARM_DOF
from .labeling import SegmentedDemo

logger = logging.getLogger(__name__)

PENETRATION_TOLERANCE = 1e-3


@dataclass
class BoundarySets:
    init_real: Dict[int, List[WorldState]]
    term_real: Dict[int, List[WorldState]]
    init_aug: Dict[int, List[WorldState]] = field(default_factory=dict)
    term_aug: Dict[int, List[WorldState]] = field(default_factory=dict)
    params: Optional[AugmentConfig] = None

    @property
    def K(self) -> int:
        return len(self.init_real)

    def init(self, i: int, augmented: bool = True) -> List[WorldState]:
        pool = self.init_aug.get(i) if augmented else None
        out = pool if pool else self.init_real.get(i, [])
        if not out:
            raise EmptySet(f"no initiation exemplars for skill {i}")
        return out

    def term(self, i: int, augmented: bool = True) -> List[WorldState]:
        pool = self.term_aug.get(i) if augmented else None
        out = pool if pool else self.term_real.get(i, [])
        if not out:
            raise EmptySet(f"no termination exemplars for skill {i}")
        return out

    def extended(self, term_extra: Dict[int, Sequence[WorldState]],
                 model: Optional[WorldModel] = None) -> "BoundarySets":
        """Termination sets grown by extra reached states (e.g. successful skill rollouts).

        Extras join the augmented pool, which starts from the real exemplars when empty.
        """
        term_aug = {}
        for i in self.term_real:
            pool = list(self.term_aug.get(i) or self.term_real[i])
            pool.extend(rebind(s, model) if model is not None else s for s in term_extra.get(i, ()))
            term_aug[i] = pool
        added = sum(len(term_extra.get(i, ())) for i in self.term_real)
        logger.debug("termination sets extended by %d reached states", added)
        return BoundarySets(self.init_real, self.term_real, dict(self.init_aug), term_aug, self.params)


def boundary_sets(demos: Sequence[SegmentedDemo]) -> BoundarySets:
    """First and last state of every skill segment, across demos."""
    if not demos:
        raise EmptySet("boundary sets need at least one segmented demo")
    K = demos[0].K
    init = {i: [] for i in range(1, K + 1)}
    term = {i: [] for i in range(1, K + 1)}
    for d in demos:
        for i, (start, last) in d.skill_bounds().items():
            init[i].append(d.traj.states[start])
            term[i].append(d.traj.states[last])
    return BoundarySets(init, term)


def rebind(state: WorldState, model: WorldModel) -> WorldState:
    """Copy of `state` whose bodies point at `model`."""
    out = state.copy()
    out.model = model
    for name, b in out.bodies.items():
        b.model = model.bodies[name]
    return out


def _touching(state: WorldState) -> Dict[str, bool]:
    fingers = set(state.model.robot.finger_names)
    out = {}
    for c in state.contacts:
        if c.a in fingers:
            out[c.b] = True
    if state.grasp is not None:
        out[state.grasp.body] = True
    return out


def _perturb_one(src: WorldState, cfg: AugmentConfig, rng: np.random.Generator) -> Optional[WorldState]:
    s = src.copy()
    robot = s.model.robot
    held = s.held()
    for name in s.model.dynamic_names:
        b = s.bodies[name]
        rho = cfg.pos_radius * math.sqrt(rng.random())
        phi = rng.uniform(0.0, 2.0 * math.pi)
        dth = rng.uniform(-cfg.rot_range, cfg.rot_range) if cfg.rot_range > 0 else 0.0
        b.pose = np.array([b.pose[0] + rho * math.cos(phi), b.pose[1] + rho * math.sin(phi),
                           wrap_angle(b.pose[2] + dth)])
        b.unwrapped += dth
        if name == held:
            # the hand follows the held body
            arm = robot.ik_palm(compose(b.pose, invert(s.grasp.relative)), s.robot.q)
            if arm is None:
                return None
            q = s.robot.q.copy()
            q[:ARM_DOF] = arm
            s.robot.q = q
            s.robot.fingertip_poses = robot.fingertip_poses(q)
            if s.targets is not None:
                s.targets = s.targets.copy()
                s.targets[:ARM_DOF] = arm
    movable = [n for n in s.model.dynamic_names if n != held]
    pen = project_out(s, movable, PENETRATION_TOLERANCE)
    if pen > PENETRATION_TOLERANCE or not config_free(s, s.robot.q, 0.0):
        return None
    return s


def _keeps_topology(src: WorldState, out: WorldState) -> bool:
    before = _touching(src)
    if not before:
        return True
    settled = step(out, hold_control(out))
    after = _touching(settled)
    return all(after.get(b, False) for b in before)


def augment_states(real: Sequence[WorldState], cfg: AugmentConfig, rng: np.random.Generator,
                   n_out: Optional[int] = None, model: Optional[WorldModel] = None) -> List[WorldState]:
    """Perturb dynamic-body poses of real exemplars (uniform disk translation, uniform rotation).

    Grasped bodies keep their pose relative to the hand, which is moved by IK.
    Outputs that stay penetrating, collide, or lose a fingertip contact are
    resampled up to `cfg.max_tries` times.
    """
    if not real:
        raise EmptySet("no exemplars to augment")
    n_out = cfg.n_out if n_out is None else n_out
    n_out = max(n_out, len(real))
    out: List[WorldState] = []
    for k in range(n_out):
        idx = k if k < len(real) else int(rng.integers(len(real)))
        src = real[idx]
        if model is not None:
            src = rebind(src, model)
        for _ in range(cfg.max_tries):
            cand = _perturb_one(src, cfg, rng)
            if cand is not None and (not cfg.settle_check or _keeps_topology(src, cand)):
                out.append(cand)
                break
        else:
            raise AugmentationInfeasible(f"exemplar {idx}: no valid perturbation in {cfg.max_tries} tries")
    logger.debug("augmented %d exemplars into %d states", len(real), len(out))
    return out


def augment_boundary_sets(sets: BoundarySets, cfg: AugmentConfig, rng: np.random.Generator,
                          model: Optional[WorldModel] = None) -> BoundarySets:
    init_aug = {i: augment_states(v, cfg, rng, model=model) for i, v in sets.init_real.items()}
    term_aug = {i: augment_states(v, cfg, rng, model=model) for i, v in sets.term_real.items()}
    return BoundarySets(sets.init_real, sets.term_real, init_aug, term_aug, cfg)


def exemplar_penetration(states: Sequence[WorldState]) -> float:
    return max((max_penetration(s) for s in states), default=0.0)
