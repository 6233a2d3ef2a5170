# src/skillchain/segmentation/tracking.py
import logging
from dataclasses import replace
from typing import Dict, List

import numpy as np

from ..schema.segmentation_schema import KeypointTrackConfig
from .trajectory import Keypoints, Trajectory

logger = logging.getLogger(__name__)


def track_keypoints(traj: Trajectory, cfg: KeypointTrackConfig, rng: np.random.Generator) -> Trajectory:
    """Noisy stand-in for a point tracker.

    Each keypoint is the exact forward transform plus N(0, sigma_kp) per axis. With
    probability p_drop per frame a keypoint is lost and repeats its last reported
    value for `hold_frames` frames.
    """
    names = sorted(traj.frame_keypoints(len(traj) - 1))
    held_until: Dict[str, int] = {n: -1 for n in names}
    last: Dict[str, np.ndarray] = {}
    out: List[Keypoints] = []
    for t, state in enumerate(traj.states):
        if state is None:
            raise ValueError("keypoint tracking needs every frame's state")
        exact = state.keypoints()
        noise = rng.normal(0.0, cfg.sigma_kp, (len(names), 2)) if cfg.sigma_kp > 0 else np.zeros((len(names), 2))
        drops = rng.random(len(names)) < cfg.p_drop if cfg.p_drop > 0 else np.zeros(len(names), bool)
        frame = {}
        for j, n in enumerate(names):
            if t <= held_until[n] and n in last:
                frame[n] = last[n]
                continue
            if drops[j] and n in last and cfg.hold_frames > 0:
                held_until[n] = t + cfg.hold_frames - 1
                frame[n] = last[n]
                continue
            frame[n] = exact[n] + noise[j]
            last[n] = frame[n]
        out.append(frame)
    logger.debug("tracked %d keypoints over %d frames (sigma %.4f, p_drop %.3f)",
                 len(names), len(traj), cfg.sigma_kp, cfg.p_drop)
    tracked = replace(traj)
    tracked.keypoints = out
    return tracked
