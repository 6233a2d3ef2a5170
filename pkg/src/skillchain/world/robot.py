# src/skillchain/world/robot.py
"""Planar 3-link arm with a two-finger + thumb hand: kinematics and collision circles."""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..schema.world_schema import RobotConfig
from .geometry import compose, wrap_angle

ARM_DOF = 3


@dataclass(frozen=True)
class FingerModel:
    name: str
    mount: np.ndarray  # palm-frame pose
    lengths: Tuple[float, ...]
    closing_sign: int
    joints: Tuple[int, ...]  # indices into q


@dataclass(frozen=True)
class RobotCircle:
    id: str
    radius: float


@dataclass(frozen=True)
class RobotModel:
    base: np.ndarray
    link_lengths: Tuple[float, float, float]
    link_radius: float
    circles_per_link: int
    fingers: Tuple[FingerModel, ...]
    fingertip_radius: float
    lower: np.ndarray
    upper: np.ndarray
    kp: np.ndarray
    kd: np.ndarray
    friction: float
    grip_gain: float
    grip_center: np.ndarray
    q_init: np.ndarray
    open_fingers: np.ndarray
    closed_fingers: np.ndarray

    @staticmethod
    def from_config(cfg: RobotConfig) -> "RobotModel":
        fingers, j = [], ARM_DOF
        for f in cfg.fingers:
            idx = tuple(range(j, j + len(f.lengths)))
            j += len(f.lengths)
            fingers.append(FingerModel(f.name, np.asarray(f.mount, float), tuple(f.lengths), f.closing_sign, idx))
        return RobotModel(
            base=np.asarray(cfg.base, float),
            link_lengths=tuple(cfg.link_lengths),
            link_radius=cfg.link_radius,
            circles_per_link=cfg.circles_per_link,
            fingers=tuple(fingers),
            fingertip_radius=cfg.fingertip_radius,
            lower=np.asarray(cfg.joint_lower, float),
            upper=np.asarray(cfg.joint_upper, float),
            kp=np.asarray(cfg.kp, float),
            kd=np.asarray(cfg.kd, float),
            friction=cfg.friction,
            grip_gain=cfg.grip_gain,
            grip_center=np.asarray(cfg.grip_center, float),
            q_init=np.asarray(cfg.q_init, float),
            open_fingers=np.asarray(cfg.open_fingers, float),
            closed_fingers=np.asarray(cfg.closed_fingers, float),
        )

    @property
    def dof(self) -> int:
        return len(self.lower)

    @property
    def finger_names(self) -> List[str]:
        return [f.name for f in self.fingers]

    def finger(self, name: str) -> FingerModel:
        for f in self.fingers:
            if f.name == name:
                return f
        raise KeyError(name)

    # ---------------- forward kinematics ----------------

    def link_frames(self, q: np.ndarray) -> List[np.ndarray]:
        """Poses of the arm joints' link ends; the last one is the palm frame."""
        frames = []
        x, y = float(self.base[0]), float(self.base[1])
        a = 0.0
        for i in range(ARM_DOF):
            a += q[i]
            x += self.link_lengths[i] * math.cos(a)
            y += self.link_lengths[i] * math.sin(a)
            frames.append(np.array([x, y, wrap_angle(a)]))
        return frames

    def palm_pose(self, q: np.ndarray) -> np.ndarray:
        return self.link_frames(q)[-1]

    def finger_chain(self, palm: np.ndarray, f: FingerModel, q: np.ndarray) -> List[np.ndarray]:
        """Pose at each finger link end, in world frame."""
        pose = compose(palm, f.mount)
        out = []
        for L, j in zip(f.lengths, f.joints):
            pose = compose(pose, np.array([0.0, 0.0, q[j]]))
            pose = compose(pose, np.array([L, 0.0, 0.0]))
            out.append(pose)
        return out

    def fingertip_poses(self, q: np.ndarray) -> Dict[str, np.ndarray]:
        palm = self.palm_pose(q)
        return {f.name: self.finger_chain(palm, f, q)[-1] for f in self.fingers}

    def grip_point(self, q: np.ndarray) -> np.ndarray:
        return compose(self.palm_pose(q), np.array([self.grip_center[0], self.grip_center[1], 0.0]))

    def keypoints(self, q: np.ndarray) -> Dict[str, np.ndarray]:
        """Robot keypoints usable in discriminators."""
        palm = self.palm_pose(q)
        kp = {"palm": palm[:2].copy(), "grip_center": self.grip_point(q)[:2].copy()}
        for name, pose in self.fingertip_poses(q).items():
            kp[f"{name}_tip"] = pose[:2].copy()
        return kp

    def circles(self, q: np.ndarray) -> List[Tuple[str, np.ndarray, float]]:
        """Collision circles (id, centre, radius). Fingertip circles carry the finger's name."""
        out = []
        prev = self.base.copy()
        frames = self.link_frames(q)
        for i, fr in enumerate(frames):
            end = fr[:2]
            for k in range(1, self.circles_per_link + 1):
                c = prev + (end - prev) * (k / self.circles_per_link)
                out.append((f"link{i + 1}", c, self.link_radius))
            prev = end
        palm = frames[-1]
        for f in self.fingers:
            chain = self.finger_chain(palm, f, q)
            start = compose(palm, f.mount)[:2]
            for pose in chain[:-1]:
                out.append((f"{f.name}_proximal", pose[:2], self.fingertip_radius))
            mid = 0.5 * (start + chain[0][:2])
            out.append((f"{f.name}_proximal", mid, self.fingertip_radius))
            out.append((f.name, chain[-1][:2], self.fingertip_radius))
        return out

    # ---------------- inverse kinematics ----------------

    def ik_palm(self, palm: np.ndarray, q_ref: Optional[np.ndarray] = None) -> Optional[np.ndarray]:
        """Arm joint angles placing the palm frame at `palm`; branch closest to q_ref. None if unreachable."""
        L1, L2, L3 = self.link_lengths
        phi = palm[2]
        wx = palm[0] - L3 * math.cos(phi) - self.base[0]
        wy = palm[1] - L3 * math.sin(phi) - self.base[1]
        r2 = wx * wx + wy * wy
        c2 = (r2 - L1 * L1 - L2 * L2) / (2.0 * L1 * L2)
        if c2 > 1.0 + 1e-9 or c2 < -1.0 - 1e-9:
            return None
        c2 = max(-1.0, min(1.0, c2))
        ref = q_ref[:ARM_DOF] if q_ref is not None else self.q_init[:ARM_DOF]
        best, best_cost = None, math.inf
        for sign in (1.0, -1.0):
            q2 = sign * math.acos(c2)
            q1 = math.atan2(wy, wx) - math.atan2(L2 * math.sin(q2), L1 + L2 * math.cos(q2))
            q1 = ref[0] + wrap_angle(q1 - ref[0])
            q3 = phi - q1 - q2
            q3 = ref[2] + wrap_angle(q3 - ref[2])
            cand = np.array([q1, q2, q3])
            if np.any(cand < self.lower[:ARM_DOF] - 1e-9) or np.any(cand > self.upper[:ARM_DOF] + 1e-9):
                continue
            cost = float(np.sum((cand - ref) ** 2))
            if cost < best_cost:
                best, best_cost = cand, cost
        return best

    def ik_grip(self, grip: np.ndarray, q_ref: Optional[np.ndarray] = None) -> Optional[np.ndarray]:
        """Arm joints placing the grip centre at `grip` (x, y, approach angle)."""
        palm = compose(grip, np.array([-self.grip_center[0], -self.grip_center[1], 0.0]))
        return self.ik_palm(palm, q_ref)
