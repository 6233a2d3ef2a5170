# src/skillchain/segmentation/trajectory.py
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Literal, Optional, Tuple

import numpy as np

from ..seglang import FrameContext
from ..world import WorldState

Source = Literal["oracle-demo", "sim-rollout", "transition"]
Keypoints = Dict[str, np.ndarray]


@dataclass(frozen=True)
class TrajectoryMeta:
    task: str
    seed: int
    source: Source
    dt: float
    attempts: int = 1


@dataclass
class Trajectory:
    """Frame t pairs state t with the action applied from it; the last frame holds.

    `states` may contain None for rollouts that only kept observations; the
    terminal state is always present.
    """

    states: List[Optional[WorldState]]
    actions: np.ndarray  # (T, dof)
    meta: TrajectoryMeta
    keypoints: Optional[List[Keypoints]] = None  # tracked; None means exact
    observations: Optional[np.ndarray] = None  # (T, obs_dim)
    stages: Optional[np.ndarray] = None  # stage per frame for rollouts that know it
    phases: Optional[np.ndarray] = field(default=None, repr=False)  # oracle ground truth, evaluation only

    def __post_init__(self):
        self.actions = np.asarray(self.actions, float)
        if len(self.states) != self.actions.shape[0]:
            raise ValueError(f"{len(self.states)} states but {self.actions.shape[0]} actions")
        if not self.states or self.states[-1] is None:
            raise ValueError("trajectory needs a terminal state")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def initial(self) -> Optional[WorldState]:
        return self.states[0]

    @property
    def terminal(self) -> WorldState:
        return self.states[-1]

    def times(self) -> np.ndarray:
        t0 = next(s.time for s in self.states if s is not None)
        first = next(i for i, s in enumerate(self.states) if s is not None)
        return t0 + (np.arange(len(self)) - first) * self.meta.dt

    def check_timing(self) -> None:
        prev = None
        for i, s in enumerate(self.states):
            if s is None:
                continue
            if prev is not None:
                j, t = prev
                if not np.isclose(s.time - t, (i - j) * self.meta.dt, atol=1e-9):
                    raise ValueError(f"non-uniform timestamps at frame {i}")
            prev = (i, s.time)

    def frame_keypoints(self, t: int) -> Keypoints:
        if self.keypoints is not None:
            return self.keypoints[t]
        return self.states[t].keypoints()

    def frame(self, t: int, task) -> FrameContext:
        state = self.states[t]
        if state is None:
            raise ValueError(f"frame {t} kept no state")
        return task.frame(state, self.frame_keypoints(t))

    def frames(self, task) -> Iterator[Tuple[WorldState, np.ndarray, FrameContext]]:
        for t in range(len(self)):
            yield self.states[t], self.actions[t], self.frame(t, task)

    def slice(self, start: int, stop: int) -> "Trajectory":
        """Frames [start, stop); ground-truth phases stay behind."""
        return Trajectory(
            states=self.states[start:stop],
            actions=self.actions[start:stop],
            meta=self.meta,
            keypoints=None if self.keypoints is None else self.keypoints[start:stop],
            observations=None if self.observations is None else self.observations[start:stop],
            stages=None if self.stages is None else self.stages[start:stop],
        )

    def without_phases(self) -> "Trajectory":
        return Trajectory(self.states, self.actions, self.meta, self.keypoints, self.observations, self.stages)
