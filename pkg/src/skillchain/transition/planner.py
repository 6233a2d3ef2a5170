# src/skillchain/transition/planner.py
"""Joint-space motion planning between boundary states, replayed through the simulator."""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import Infeasible, NonFiniteState
from ..schema.transition_schema import PlannerConfig
from ..segmentation.trajectory import Trajectory, TrajectoryMeta
from ..world import WorldState, hold_control, step
from ..world.collision import held_hits, held_pose_at, robot_hits
from ..world.geometry import compose, relative, wrap_angle
from ..world.robot import ARM_DOF

logger = logging.getLogger(__name__)

HELD_POS_TOL = 0.005
HELD_ROT_TOL = 0.05
ESCAPE_STEPS = 2  # step sizes around start and goal where resting contact is tolerated
SAME_TOL = 1e-9

Path = List[np.ndarray]


@dataclass
class PlanStats:
    algorithm: str
    iterations: int = 0
    waypoints: int = 0
    smoothed: int = 0
    path_length: float = 0.0
    frames: int = 0
    anchor: Optional[str] = None
    extra: Dict[str, float] = field(default_factory=dict)


class CollisionChecker:
    """Robot (and attached held object) against the bodies of a fixed world snapshot.

    Every body except the anchor must stay `margin` away. The anchor, and any
    body near the start or goal configuration, may only be touched up to
    `tol` of overlap.
    """

    def __init__(self, state: WorldState, cfg: PlannerConfig, anchor: Optional[str],
                 start: np.ndarray, goal: np.ndarray):
        self.state = state
        self.cfg = cfg
        self.anchor = anchor
        self.start, self.goal = start, goal
        self.escape = ESCAPE_STEPS * cfg.step_size
        self.checks = 0

    def _deep(self, q: np.ndarray, only: Optional[str] = None) -> bool:
        hits = robot_hits(self.state, q, 0.0) + held_hits(self.state, q, 0.0)
        return any(d > self.cfg.penetration_tol and (only is None or b == only) for _, b, d in hits)

    def free(self, q: np.ndarray) -> bool:
        self.checks += 1
        near_end = (np.linalg.norm(q - self.start) <= self.escape or np.linalg.norm(q - self.goal) <= self.escape)
        if self._deep(q, None if near_end else self.anchor):
            return False
        if near_end:
            return True
        ignore = () if self.anchor is None else (self.anchor,)
        return not robot_hits(self.state, q, self.cfg.margin, ignore) and \
            not held_hits(self.state, q, self.cfg.margin, ignore)

    def segment_free(self, a: np.ndarray, b: np.ndarray, resolution: float) -> bool:
        n = max(1, int(math.ceil(np.max(np.abs(b - a)) / resolution)))
        return all(self.free(a + (b - a) * (k / n)) for k in range(1, n + 1))


def _steer(a: np.ndarray, b: np.ndarray, step_size: float) -> np.ndarray:
    d = b - a
    dist = float(np.max(np.abs(d)))
    if dist <= step_size:
        return b.copy()
    return a + d * (step_size / dist)


def _nearest(nodes: List[np.ndarray], q: np.ndarray) -> int:
    return int(np.argmin(np.linalg.norm(np.asarray(nodes) - q, axis=1)))


def _trace(nodes: List[np.ndarray], parents: List[int], i: int) -> Path:
    out = []
    while i >= 0:
        out.append(nodes[i])
        i = parents[i]
    return out


def rrt_connect(start: np.ndarray, goal: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                checker: CollisionChecker, cfg: PlannerConfig, rng: np.random.Generator
                ) -> Tuple[Optional[Path], int]:
    """Bidirectional RRT with greedy connect; returns (path or None, iterations)."""
    trees = [([start.copy()], [-1]), ([goal.copy()], [-1])]
    for it in range(1, cfg.max_iterations + 1):
        a_nodes, a_par = trees[0]
        b_nodes, b_par = trees[1]
        target = b_nodes[0] if rng.random() < cfg.goal_bias else rng.uniform(lower, upper)
        i_near = _nearest(a_nodes, target)
        q_new = _steer(a_nodes[i_near], target, cfg.step_size)
        if checker.segment_free(a_nodes[i_near], q_new, cfg.step_size):
            a_nodes.append(q_new)
            a_par.append(i_near)
            # greedy connect of the other tree towards q_new
            j = _nearest(b_nodes, q_new)
            while True:
                q_b = _steer(b_nodes[j], q_new, cfg.step_size)
                if not checker.segment_free(b_nodes[j], q_b, cfg.step_size):
                    break
                b_nodes.append(q_b)
                b_par.append(j)
                j = len(b_nodes) - 1
                if np.allclose(q_b, q_new, atol=1e-9):
                    pa = _trace(a_nodes, a_par, len(a_nodes) - 1)[::-1]
                    pb = _trace(b_nodes, b_par, j)[1:]
                    path = pa + pb
                    if not np.allclose(path[0], start):
                        path = path[::-1]
                    return path, it
        trees.reverse()
    return None, cfg.max_iterations


def straight_line_with_repair(start: np.ndarray, goal: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                              checker: CollisionChecker, cfg: PlannerConfig, rng: np.random.Generator
                              ) -> Tuple[Optional[Path], int]:
    """Direct interpolation; when blocked, try one random via-point around the midpoint."""
    if checker.segment_free(start, goal, cfg.step_size):
        return [start.copy(), goal.copy()], 1
    mid = 0.5 * (start + goal)
    spread = 0.5 * np.abs(goal - start) + cfg.step_size
    for k in range(1, cfg.repair_samples + 1):
        via = np.clip(mid + rng.normal(0.0, 1.0, mid.shape) * spread, lower, upper)
        if checker.free(via) and checker.segment_free(start, via, cfg.step_size) and \
                checker.segment_free(via, goal, cfg.step_size):
            return [start.copy(), via, goal.copy()], k + 1
    return None, cfg.repair_samples + 1


def shortcut(path: Path, checker: CollisionChecker, passes: int, step_size: float,
             rng: np.random.Generator) -> Path:
    path = list(path)
    for _ in range(passes):
        if len(path) <= 2:
            break
        i = int(rng.integers(0, len(path) - 1))
        j = int(rng.integers(i + 1, len(path)))
        if j - i > 1 and checker.segment_free(path[i], path[j], step_size):
            path = path[:i + 1] + path[j:]
    return path


def path_length(path: Sequence[np.ndarray]) -> float:
    return float(sum(np.linalg.norm(b - a) for a, b in zip(path, path[1:])))


def time_parameterize(path: Sequence[np.ndarray], max_velocity: float, dt: float) -> List[np.ndarray]:
    """Joint targets every `dt` along the path with no joint exceeding `max_velocity`."""
    out = []
    for a, b in zip(path, path[1:]):
        n = max(1, int(math.ceil(np.max(np.abs(b - a)) / (max_velocity * dt))))
        out.extend(a + (b - a) * (k / n) for k in range(1, n + 1))
    return out


def dense_audit(path: Sequence[np.ndarray], checker: CollisionChecker, resolution: float) -> bool:
    """Independent re-check of every segment at the given (finer) resolution."""
    return all(checker.segment_free(a, b, resolution) for a, b in zip(path, path[1:]))


def choose_anchor(s_from: WorldState, s_to: WorldState) -> Optional[str]:
    """Non-held collidable body closest to the destination grip point."""
    grip = s_to.model.robot.grip_point(s_to.robot.q)[:2]
    held = {s_from.held(), s_to.held()}
    best, best_d = None, math.inf
    for name, b in s_to.bodies.items():
        if name in held or not b.model.collides:
            continue
        d = float(np.hypot(*(b.pose[:2] - grip)))
        if d < best_d:
            best, best_d = name, d
    return best


def goal_configuration(s_from: WorldState, s_to: WorldState, anchor: Optional[str]) -> Tuple[np.ndarray, np.ndarray]:
    """(goal joints, goal palm pose): the destination palm pose re-expressed relative to the anchor."""
    robot = s_from.model.robot
    palm_to = robot.palm_pose(s_to.robot.q)
    if anchor is not None:
        palm_goal = compose(s_from.bodies[anchor].pose, relative(s_to.bodies[anchor].pose, palm_to))
    else:
        palm_goal = palm_to
    arm = robot.ik_palm(palm_goal, s_to.robot.q)
    if arm is None:
        raise Infeasible("no-path", "goal palm pose is outside the arm's reach")
    if s_from.held() is not None:
        fingers = hold_control(s_from)[ARM_DOF:]
    else:
        fingers = (s_to.targets if s_to.targets is not None else s_to.robot.q)[ARM_DOF:]
    q = np.concatenate([arm, fingers])
    return np.clip(q, robot.lower, robot.upper), palm_goal


def _same(s_from: WorldState, s_to: WorldState) -> bool:
    if not np.allclose(s_from.robot.q, s_to.robot.q, atol=SAME_TOL):
        return False
    return all(np.allclose(b.pose, s_to.bodies[n].pose, atol=SAME_TOL) for n, b in s_from.bodies.items())


def _moved(before: WorldState, after: WorldState, names: Sequence[str], tol: float) -> List[str]:
    return [n for n in names if np.hypot(*(after.bodies[n].pose[:2] - before.bodies[n].pose[:2])) > tol]


def replay(s_from: WorldState, targets: Sequence[np.ndarray], decimation: int, settle_steps: int
           ) -> Tuple[List[WorldState], List[np.ndarray]]:
    """Execute policy-rate targets (each held for `decimation` simulator steps) and then hold the last one.

    Object reference poses are re-captured at the transition start, as the executor does.
    """
    states, actions = [], []
    s = s_from.copy().capture_initial_poses()
    final = targets[-1] if len(targets) else hold_control(s)
    n_settle = int(math.ceil(settle_steps / decimation))
    for t in list(targets) + [final] * n_settle:
        states.append(s)
        actions.append(np.asarray(t, float))
        for _ in range(decimation):
            s = step(s, t)
    states.append(s)
    actions.append(np.asarray(final, float))
    return states, actions


def plan(s_from: WorldState, s_to: WorldState, cfg: PlannerConfig, rng: np.random.Generator,
         decimation: int = 2, task_name: str = "") -> Tuple[Trajectory, PlanStats]:
    """Collision-free transition from s_from to the robot pose of s_to, replayed at policy rate.

    Objects are checked at their s_from poses; a held object moves with the
    hand. Raises Infeasible("no-path" | "replay-collision" | "replay-divergence").
    """
    stats = PlanStats(cfg.algorithm)
    dt = s_from.model.dt * decimation
    meta = TrajectoryMeta(task=task_name, seed=s_from.seed, source="transition", dt=dt)
    if _same(s_from, s_to):
        return Trajectory([s_from.copy()], np.asarray([hold_control(s_from)]), meta), stats

    anchor = choose_anchor(s_from, s_to)
    stats.anchor = anchor
    robot = s_from.model.robot
    start = np.asarray(s_from.robot.q, float).copy()
    goal, palm_goal = goal_configuration(s_from, s_to, anchor)
    checker = CollisionChecker(s_from, cfg, anchor, start, goal)
    if not checker.free(goal):
        raise Infeasible("no-path", "goal configuration collides")

    search = rrt_connect if cfg.algorithm == "rrt-connect" else straight_line_with_repair
    path, stats.iterations = search(start, goal, robot.lower, robot.upper, checker, cfg, rng)
    if path is None:
        raise Infeasible("no-path", f"{cfg.algorithm} found no path in {stats.iterations} iterations")
    stats.waypoints = len(path)
    path = shortcut(path, checker, cfg.shortcut_passes, cfg.step_size, rng)
    stats.smoothed = len(path)
    stats.path_length = path_length(path)
    if not dense_audit(path, checker, cfg.step_size / cfg.audit_factor):
        raise Infeasible("replay-collision", "dense audit found a colliding configuration")

    targets = time_parameterize(path, cfg.max_joint_velocity, dt)
    try:
        states, actions = replay(s_from, targets, decimation, cfg.settle_steps)
    except NonFiniteState as e:
        raise Infeasible("replay-divergence", str(e)) from e
    _check_replay(s_from, states, cfg, anchor, palm_goal)
    stats.frames = len(states)
    return Trajectory(states, np.stack(actions), meta), stats


def _check_replay(s_from: WorldState, states: Sequence[WorldState], cfg: PlannerConfig, anchor: Optional[str],
                  palm_goal: np.ndarray) -> None:
    held = s_from.held()
    bystanders = [n for n in s_from.model.dynamic_names if n not in (held, anchor)]

    def depths(s: WorldState) -> Dict[str, float]:
        out: Dict[str, float] = {}
        for _, b, d in robot_hits(s, s.robot.q, 0.0) + held_hits(s, s.robot.q, 0.0):
            if b != anchor:
                out[b] = max(out.get(b, 0.0), d)
        return out

    # contact already present in s_from is allowed to persist, not to deepen
    allowed = depths(states[0])
    for s in states[1:]:
        for b, d in depths(s).items():
            if d > allowed.get(b, 0.0) + cfg.penetration_tol:
                raise Infeasible("replay-collision", f"{b} hit at t={s.time:.3f} ({d:.4f} m)")
    final = states[-1]
    moved = _moved(s_from, final, bystanders, cfg.goal_pos_tol)
    if moved:
        raise Infeasible("replay-collision", f"pushed {', '.join(moved)}")
    if held is not None:
        if final.held() != held:
            raise Infeasible("replay-divergence", f"lost grasp on {held}")
        predicted = held_pose_at(final, final.robot.q)
        actual = final.bodies[held].pose
        if np.hypot(*(predicted[:2] - actual[:2])) > HELD_POS_TOL or \
                abs(wrap_angle(predicted[2] - actual[2])) > HELD_ROT_TOL:
            raise Infeasible("replay-divergence", f"{held} drifted from its kinematic prediction")
    palm = final.model.robot.palm_pose(final.robot.q)
    if np.hypot(*(palm[:2] - palm_goal[:2])) > cfg.goal_pos_tol or \
            abs(wrap_angle(palm[2] - palm_goal[2])) > cfg.goal_rot_tol:
        raise Infeasible("replay-divergence", "palm did not reach the goal pose")
