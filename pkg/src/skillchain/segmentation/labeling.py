# src/skillchain/segmentation/labeling.py
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import IncompleteDemo, OrderViolation
from ..schema.segmentation_schema import DebounceConfig
from ..seglang import Discriminator, eval_discriminator
from .trajectory import Trajectory

logger = logging.getLogger(__name__)

TRANSITION = 0


@dataclass
class LabelResult:
    labels: np.ndarray  # stage per frame: 0 transition, i skill i
    violations: List[OrderViolation] = field(default_factory=list)


def firing_matrix(traj: Trajectory, discriminators: Sequence[Discriminator], task) -> np.ndarray:
    """(T, K) raw discriminator outputs, before debouncing."""
    out = np.zeros((len(traj), len(discriminators)), dtype=bool)
    for t in range(len(traj)):
        frame = traj.frame(t, task)
        for k, d in enumerate(discriminators):
            out[t, k] = eval_discriminator(d, frame)
    return out


def label_from_firings(fires: np.ndarray, debounce: DebounceConfig = DebounceConfig(),
                       strict: bool = False) -> LabelResult:
    """Debounced, monotone stage labels.

    Only the lowest not-yet-completed skill may activate, after m_on consecutive
    firing frames; an active skill ends after m_off consecutive quiet frames or
    when the next skill activates. A debounced firing of skill i after a later
    skill completed is an order violation: reported (raised when strict) and
    never relabels a frame.
    """
    T, K = fires.shape
    labels = np.zeros(T, dtype=np.int64)
    on = np.zeros(K + 1, dtype=np.int64)
    active, completed, off = 0, 0, 0
    violations: List[OrderViolation] = []
    reported = set()
    for t in range(T):
        for i in range(1, K + 1):
            on[i] = on[i] + 1 if fires[t, i - 1] else 0
        if active:
            off = 0 if fires[t, active - 1] else off + 1
            nxt = active + 1
            if nxt <= K and on[nxt] >= debounce.m_on:
                completed, active, off = active, nxt, 0
            elif off >= debounce.m_off:
                completed, active = active, 0
        else:
            nxt = completed + 1
            if nxt <= K and on[nxt] >= debounce.m_on:
                active, off = nxt, 0
        for i in range(1, completed):
            if on[i] >= debounce.m_on and i not in reported:
                v = OrderViolation(i, t, completed)
                if strict:
                    raise v
                reported.add(i)
                violations.append(v)
                logger.warning("❌ %s", v)
        labels[t] = active
    return LabelResult(labels, violations)


def label_frames(traj: Trajectory, discriminators: Sequence[Discriminator], task,
                 debounce: DebounceConfig = DebounceConfig(), strict: bool = False) -> LabelResult:
    return label_from_firings(firing_matrix(traj, discriminators, task), debounce, strict)


@dataclass(frozen=True)
class Segment:
    stage: int
    start: int
    stop: int  # exclusive

    def __len__(self) -> int:
        return self.stop - self.start


@dataclass
class SegmentedDemo:
    traj: Trajectory
    labels: np.ndarray
    segments: List[Segment]
    K: int

    def skill(self, i: int) -> Segment:
        for s in self.segments:
            if s.stage == i:
                return s
        raise IncompleteDemo(i)

    def skill_bounds(self) -> Dict[int, Tuple[int, int]]:
        return {s.stage: (s.start, s.stop - 1) for s in self.segments if s.stage != TRANSITION}

    def skill_trajectory(self, i: int) -> Trajectory:
        s = self.skill(i)
        return self.traj.slice(s.start, s.stop)

    def transitions(self) -> List[Segment]:
        return [s for s in self.segments if s.stage == TRANSITION]


def runs(labels: np.ndarray) -> List[Segment]:
    out: List[Segment] = []
    start = 0
    for t in range(1, len(labels) + 1):
        if t == len(labels) or labels[t] != labels[start]:
            out.append(Segment(int(labels[start]), start, t))
            start = t
    return out


def check_alternating(segments: Sequence[Segment]) -> None:
    skills = [s.stage for s in segments if s.stage != TRANSITION]
    if any(b <= a for a, b in zip(skills, skills[1:])):
        raise ValueError(f"skill order {skills} is not strictly increasing")
    for a, b in zip(segments, segments[1:]):
        if a.stage == TRANSITION and b.stage == TRANSITION:
            raise ValueError("consecutive transition segments")


def extract_segments(labels: np.ndarray, traj: Trajectory, K: int) -> SegmentedDemo:
    """Contiguous label runs as an alternating segment list; every skill 1..K must appear."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(traj):
        raise ValueError(f"{len(labels)} labels for {len(traj)} frames")
    segments = runs(labels) if len(labels) else []
    check_alternating(segments)
    present = {s.stage for s in segments}
    for i in range(1, K + 1):
        if i not in present:
            raise IncompleteDemo(i)
    return SegmentedDemo(traj, labels, segments, K)


def segment_demo(traj: Trajectory, task, debounce: DebounceConfig = DebounceConfig()
                 ) -> Tuple[Optional[SegmentedDemo], LabelResult]:
    result = label_frames(traj, task.discriminators, task, debounce)
    return extract_segments(result.labels, traj, task.K), result
