# src/skillchain/learn/termination.py
"""Skill termination tests for rollouts: the success predicate or membership in an exemplar ball."""
from typing import Callable, Sequence

import numpy as np

from ..schema.learn_schema import CollectConfig
from ..tasks import subtask_success
from ..world import WorldState
from ..world.geometry import wrap_angle

Termination = Callable[[WorldState], bool]


def in_exemplar_ball(state: WorldState, exemplars: Sequence[WorldState], pos_tol: float = 0.01,
                     rot_tol: float = 0.1) -> bool:
    """True when every dynamic body lies within (pos_tol, rot_tol) of its pose in some exemplar."""
    names = state.model.dynamic_names
    for ex in exemplars:
        ok = True
        for n in names:
            a, b = state.bodies[n].pose, ex.bodies[n].pose
            if np.hypot(a[0] - b[0], a[1] - b[1]) > pos_tol or abs(wrap_angle(a[2] - b[2])) > rot_tol:
                ok = False
                break
        if ok:
            return True
    return False


def make_termination(task, skill: int, cfg: CollectConfig, exemplars: Sequence[WorldState] = ()) -> Termination:
    if cfg.termination == "exemplar":
        if not exemplars:
            raise ValueError("exemplar termination needs termination exemplars")
        pool = list(exemplars)
        return lambda s: in_exemplar_ball(s, pool, cfg.pos_tol, cfg.rot_tol)
    return lambda s: subtask_success(task, skill, s)
