# src/skillchain/world/sim.py
"""Semi-implicit Euler stepping with PD joint control and sequential-impulse contacts."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import NonFiniteState
from .geometry import Shape, collide, collide_floor, compose, cross2, perp, relative, wrap_angle
from .randomization import noise_draw
from .state import ContactRecord, ControlCommand, GraspState, RobotState, WorldState

logger = logging.getLogger(__name__)

STREAM_ACTION = 1
GRASP_SLOP = 0.002
SLIP_DISTANCE = 0.01

Control = Union[ControlCommand, np.ndarray, Sequence[float]]


def counter_rng(seed: int, tick: int, stream: int) -> np.random.Generator:
    """Per-environment counter-based stream; independent of scheduling."""
    return np.random.default_rng([int(seed), int(tick), int(stream)])


@dataclass
class _Contact:
    a: str
    b: str
    ia: Optional[str]  # dynamic body name or None
    ib: Optional[str]
    va: np.ndarray  # kinematic velocity of a when not a dynamic body
    point: np.ndarray
    normal: np.ndarray
    depth: float
    mu: float
    e: float
    ra: np.ndarray = None
    rb: np.ndarray = None
    kn: float = 0.0
    kt: float = 0.0
    target: float = 0.0
    pn: float = 0.0
    pt: float = 0.0
    robot: bool = False


def _as_targets(control: Control, dof: int) -> np.ndarray:
    t = control.targets if isinstance(control, ControlCommand) else control
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.shape[0] != dof:
        raise ValueError(f"control has {t.shape[0]} entries, robot has {dof} DOF")
    return t


def _detect(state: WorldState, circles, circle_vel, slop: float) -> List[_Contact]:
    m = state.model
    held = state.held()
    out: List[_Contact] = []
    names = list(state.bodies)
    zero = np.zeros(2)
    robot_mu = m.robot.friction

    for i, na in enumerate(names):
        ba = state.bodies[na]
        if not ba.model.collides:
            continue
        for nb in names[i + 1:]:
            bb = state.bodies[nb]
            if not bb.model.collides or (ba.model.static and bb.model.static):
                continue
            if np.hypot(*(ba.pose[:2] - bb.pose[:2])) > ba.shape.bounding_radius + bb.shape.bounding_radius + slop:
                continue
            mu = float(np.sqrt(ba.model.friction * bb.model.friction))
            e = max(ba.model.restitution, bb.model.restitution)
            for p, n, d in collide(ba.shape, ba.pose, bb.shape, bb.pose, slop):
                out.append(_Contact(na, nb, None if ba.model.static else na, None if bb.model.static else nb,
                                    zero, p, n, d, mu, e))
        if m.floor_y is not None and not ba.model.static:
            mu = float(np.sqrt(ba.model.friction * 0.8))
            for p, n, d in collide_floor(ba.shape, ba.pose, m.floor_y, slop):
                out.append(_Contact("floor", na, None, na, zero, p, n, d, mu, ba.model.restitution))

    for (cid, c, r), v in zip(circles, circle_vel):
        cs = Shape("circle", radius=r)
        cpose = np.array([c[0], c[1], 0.0])
        for nb, bb in state.bodies.items():
            if bb.model.static or not bb.model.collides or nb == held:
                continue
            if np.hypot(*(c - bb.pose[:2])) > r + bb.shape.bounding_radius + slop:
                continue
            mu = float(np.sqrt(robot_mu * bb.model.friction))
            for p, n, d in collide(cs, cpose, bb.shape, bb.pose, slop):
                out.append(_Contact(cid, nb, None, nb, v, p, n, d, mu, bb.model.restitution, robot=True))
    return out


def _prepare(contacts: List[_Contact], state: WorldState, dt: float, vel: Dict[str, np.ndarray]) -> None:
    m = state.model
    cp = m.contact
    for c in contacts:
        xa = state.bodies[c.ia].pose[:2] if c.ia else c.point
        xb = state.bodies[c.ib].pose[:2] if c.ib else c.point
        c.ra, c.rb = c.point - xa, c.point - xb
        ima = state.bodies[c.ia].model.inv_mass if c.ia else 0.0
        iia = state.bodies[c.ia].model.inv_inertia if c.ia else 0.0
        imb = state.bodies[c.ib].model.inv_mass if c.ib else 0.0
        iib = state.bodies[c.ib].model.inv_inertia if c.ib else 0.0
        n = c.normal
        t = np.array([-n[1], n[0]])
        c.kn = ima + imb + iia * cross2(c.ra, n) ** 2 + iib * cross2(c.rb, n) ** 2
        c.kt = ima + imb + iia * cross2(c.ra, t) ** 2 + iib * cross2(c.rb, t) ** 2
        vn0 = float(_rel_vel(c, vel) @ n)
        if c.depth < 0.0:
            target = c.depth / dt  # speculative: allow closing the gap, not more
        else:
            target = cp.baumgarte / dt * max(0.0, c.depth - cp.penetration_tolerance)
        e = min(1.0, c.e * m.restitution_scale)
        if vn0 < -cp.restitution_velocity and e > 0.0:
            target = max(target, -e * vn0)
        c.target = target


def _point_vel(name: Optional[str], r: np.ndarray, vel: Dict[str, np.ndarray], kin: np.ndarray) -> np.ndarray:
    if name is None:
        return kin
    v = vel[name]
    return v[:2] + perp(v[2], r)


def _rel_vel(c: _Contact, vel) -> np.ndarray:
    return _point_vel(c.ib, c.rb, vel, np.zeros(2)) - _point_vel(c.ia, c.ra, vel, c.va)


def _apply(state: WorldState, name: Optional[str], r: np.ndarray, p: np.ndarray, vel) -> None:
    if name is None:
        return
    bm = state.bodies[name].model
    v = vel[name]
    v[:2] += bm.inv_mass * p
    v[2] += bm.inv_inertia * cross2(r, p)


def _solve_contact(c: _Contact, state: WorldState, vel) -> None:
    n = c.normal
    t = np.array([-n[1], n[0]])
    if c.kn > 0.0:
        dv = _rel_vel(c, vel)
        lam = (c.target - float(dv @ n)) / c.kn
        new = max(0.0, c.pn + lam)
        lam, c.pn = new - c.pn, new
        p = lam * n
        _apply(state, c.ia, c.ra, -p, vel)
        _apply(state, c.ib, c.rb, p, vel)
    if c.kt > 0.0:
        dv = _rel_vel(c, vel)
        lam = -float(dv @ t) / c.kt
        cap = c.mu * c.pn
        new = float(np.clip(c.pt + lam, -cap, cap))
        lam, c.pt = new - c.pt, new
        p = lam * t
        _apply(state, c.ia, c.ra, -p, vel)
        _apply(state, c.ib, c.rb, p, vel)


class _Weld:
    """Friction-bounded weld between the palm and the held body."""

    def __init__(self, state: WorldState, palm_new: np.ndarray, grip_force: float, dt: float):
        g = state.grasp
        body = state.bodies[g.body]
        self.name = g.body
        self.mass = body.model.mass
        self.inertia = body.model.inertia
        desired = compose(palm_new, g.relative)
        self.v_target = np.array([
            (desired[0] - body.pose[0]) / dt,
            (desired[1] - body.pose[1]) / dt,
            wrap_angle(desired[2] - body.pose[2]) / dt,
        ])
        mu = float(np.sqrt(state.model.robot.friction * body.model.friction))
        n_fingers = max(1, len(g.fingers))
        self.cap_lin = mu * grip_force * n_fingers * dt
        self.cap_ang = self.cap_lin * body.shape.bounding_radius
        self.p = np.zeros(2)
        self.l = 0.0
        self.saturated = False

    def solve(self, vel) -> None:
        v = vel[self.name]
        want = self.p + self.mass * (self.v_target[:2] - v[:2])
        norm = float(np.hypot(want[0], want[1]))
        lin_sat = norm > self.cap_lin
        if lin_sat:
            want = want * (self.cap_lin / norm)
        v[:2] += (want - self.p) / self.mass
        self.p = want
        want_l = float(np.clip(self.l + self.inertia * (self.v_target[2] - v[2]), -self.cap_ang, self.cap_ang))
        v[2] += (want_l - self.l) / self.inertia
        ang_sat = abs(want_l) >= self.cap_ang and self.cap_ang > 0.0
        self.l = want_l
        self.saturated = lin_sat or ang_sat


def _grip_force(state: WorldState, targets: np.ndarray) -> float:
    r = state.model.robot
    g = state.grasp
    squeeze = []
    for fname in g.fingers:
        f = r.finger(fname)
        s = 0.0
        for j in f.joints:
            s += max(0.0, f.closing_sign * (targets[j] - g.finger_lock[j - 3]))
        squeeze.append(s * r.grip_gain / sum(f.lengths))
    return min(squeeze) if squeeze else 0.0


def _try_engage(state: WorldState, contacts: List[_Contact], targets: np.ndarray, palm: np.ndarray) -> None:
    r = state.model.robot
    q = state.robot.q
    fingers = {f.name: f for f in r.fingers}

    def closing(fname: str) -> bool:
        f = fingers[fname]
        return any(f.closing_sign * (targets[j] - q[j]) > 1e-4 for j in f.joints)

    touching: Dict[str, set] = {}
    for c in contacts:
        if c.a in fingers and c.ib is not None and c.depth >= -GRASP_SLOP:
            touching.setdefault(c.ib, set()).add(c.a)
    for body, tips in sorted(touching.items()):
        if "thumb" not in tips:
            continue
        others = sorted(t for t in tips if t != "thumb")
        if not others or not closing("thumb") or not any(closing(o) for o in others):
            continue
        holders = tuple(["thumb"] + [o for o in others if closing(o)])
        state.grasp = GraspState(body=body, relative=relative(palm, state.bodies[body].pose),
                                 finger_lock=q[3:].copy(), fingers=holders)
        logger.debug("grasp engaged on %s by %s at t=%.2f", body, holders, state.time)
        return


def step(state: WorldState, control: Control, dt: Optional[float] = None) -> WorldState:
    """Advance one step. Deterministic for identical inputs; raises NonFiniteState on blow-up."""
    m = state.model
    r = m.robot
    dt = m.dt if dt is None else float(dt)
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    targets = _as_targets(control, r.dof)
    s = state.copy()

    ndesc = m.action_noise
    if ndesc[0] == "normal" and ndesc[2] > 0.0 or ndesc[0] == "uniform" and ndesc[2] > ndesc[1]:
        targets = targets + noise_draw(ndesc, counter_rng(s.seed, s.tick, STREAM_ACTION), r.dof)
    targets = np.clip(targets, r.lower, r.upper)

    # --- robot: PD joint dynamics (unit inertia), kinematic in contacts
    q_old = s.robot.q
    circles_old = r.circles(q_old)
    palm_old = r.palm_pose(q_old)
    qd = s.robot.qd + dt * (r.kp * (targets - q_old) - r.kd * s.robot.qd)
    q = q_old + dt * qd
    lo, hi = q < r.lower, q > r.upper
    q = np.clip(q, r.lower, r.upper)
    qd[lo | hi] = 0.0
    if s.grasp is not None:
        for fname in s.grasp.fingers:
            f = r.finger(fname)
            for j in f.joints:
                lock = s.grasp.finger_lock[j - 3]
                if f.closing_sign * (q[j] - lock) > 0.0:
                    q[j] = lock
                    qd[j] = 0.0
    s.robot = RobotState(q, qd, r.fingertip_poses(q))
    circles = r.circles(q)
    circle_vel = [(c_new[1] - c_old[1]) / dt for c_new, c_old in zip(circles, circles_old)]
    palm_new = r.palm_pose(q)

    # --- external forces and table friction
    vel: Dict[str, np.ndarray] = {}
    mu_t = m.table_friction * m.table_gravity
    for name, b in s.bodies.items():
        if b.model.static:
            continue
        v = b.velocity.copy()
        v[:2] += dt * m.gravity
        if mu_t > 0.0:
            dec = mu_t * dt
            speed = float(np.hypot(v[0], v[1]))
            v[:2] = 0.0 if speed <= dec else v[:2] * (1.0 - dec / speed)
            r_g = np.sqrt(b.model.inertia / b.model.mass) if b.model.mass > 0 else 1.0
            dw = dec / max(r_g, 1e-6)
            v[2] = 0.0 if abs(v[2]) <= dw else v[2] - np.sign(v[2]) * dw
        vel[name] = v

    # --- grasp bookkeeping
    grip = 0.0
    if s.grasp is not None:
        grip = _grip_force(s, targets)
        held = s.bodies[s.grasp.body]
        desired = compose(palm_new, s.grasp.relative)
        if grip <= 0.0 or np.hypot(*(desired[:2] - held.pose[:2])) > SLIP_DISTANCE:
            logger.debug("grasp on %s released at t=%.2f", s.grasp.body, s.time)
            s.grasp = None
            grip = 0.0

    contacts = _detect(s, circles, circle_vel, m.contact.detection_slop)
    if s.grasp is None:
        _try_engage(s, contacts, targets, palm_new)
        if s.grasp is not None:
            grip = _grip_force(s, targets)
            contacts = [c for c in contacts if not (c.robot and c.ib == s.grasp.body)]

    # --- sequential impulses
    _prepare(contacts, s, dt, vel)
    weld = _Weld(s, palm_new, grip, dt) if s.grasp is not None and grip > 0.0 else None
    for _ in range(m.contact.iterations):
        if weld is not None:
            weld.solve(vel)
        for c in contacts:
            _solve_contact(c, s, vel)
    if s.grasp is not None:
        if weld is not None and weld.saturated:
            s.grasp.slip_count += 1
            if s.grasp.slip_count >= m.contact.slip_steps:
                logger.debug("grasp on %s slipped at t=%.2f", s.grasp.body, s.time)
                s.grasp = None
        elif s.grasp is not None:
            s.grasp.slip_count = 0

    # --- integrate positions
    for name, v in vel.items():
        b = s.bodies[name]
        b.velocity = v
        b.pose = np.array([b.pose[0] + dt * v[0], b.pose[1] + dt * v[1], wrap_angle(b.pose[2] + dt * v[2])])
        b.unwrapped += dt * v[2]

    # --- contact records
    records = []
    for c in contacts:
        if c.pn > 0.0:
            records.append(ContactRecord(c.a, c.b, c.point, c.normal, c.pn / dt))
    if s.grasp is not None:
        body = s.bodies[s.grasp.body]
        for fname in s.grasp.fingers:
            tip = s.robot.fingertip_poses[fname][:2]
            d = body.pose[:2] - tip
            n = d / max(float(np.hypot(d[0], d[1])), 1e-12)
            records.append(ContactRecord(fname, s.grasp.body, tip.copy(), n, grip))
    s.contacts = records
    s.targets = targets
    s.time = state.time + dt
    s.tick = state.tick + 1

    if not s.is_finite():
        raise NonFiniteState("step", s.tick)
    return s


def step_batch(states: Sequence[WorldState], controls: Sequence[Control], dt: Optional[float] = None,
               workers: int = 1) -> Tuple[List[Optional[WorldState]], Dict[int, NonFiniteState]]:
    """Step independent environments. Failed elements come back as None with their error collected."""
    if len(states) != len(controls):
        raise ValueError("states and controls must have equal length")

    def one(i: int):
        try:
            return step(states[i], controls[i], dt), None
        except NonFiniteState as e:
            return None, e

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(len(states))))
    else:
        results = [one(i) for i in range(len(states))]
    out = [r[0] for r in results]
    failures = {i: r[1] for i, r in enumerate(results) if r[1] is not None}
    if failures:
        logger.warning("step_batch: %d of %d environments became non-finite", len(failures), len(states))
    return out, failures


def hold_control(state: WorldState) -> np.ndarray:
    """Targets that keep the robot where it is."""
    return state.robot.q.copy() if state.targets is None else state.targets.copy()
