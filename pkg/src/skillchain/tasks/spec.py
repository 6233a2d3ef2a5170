# src/skillchain/tasks/spec.py
"""Runtime task definitions: resolved world model, DSL vocabulary, discriminators and success predicates."""
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Union

import numpy as np

from ..errors import DslError
from ..schema.task_schema import OracleConfig, TaskConfig
from ..seglang import Discriminator, FrameContext, Predicate, Vocabulary
from ..validator import load_model
from ..world import WorldModel, WorldState, make_state
from ..world.collision import project_out

logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).resolve().parent / "configs"
BUNDLED = ("bulb-analog", "spray-analog", "pipette-analog")
PENETRATION_TOLERANCE = 1e-3


@dataclass(frozen=True)
class SubtaskSpec:
    index: int  # 1-based
    name: str
    discriminator: Discriminator
    success: Predicate
    timeout: int
    oracle: OracleConfig


@dataclass(frozen=True)
class TaskSpec:
    config: TaskConfig
    model: WorldModel
    vocabulary: Vocabulary
    subtasks: List[SubtaskSpec]
    source: str = ""

    @property
    def name(self) -> str:
        return self.config.name

    @property
    def K(self) -> int:
        return len(self.subtasks)

    @property
    def horizon(self) -> int:
        return self.config.horizon

    @property
    def observation_mode(self) -> str:
        return self.config.observation_mode

    @property
    def constants(self) -> Dict[str, float]:
        return dict(self.config.constants)

    @property
    def discriminators(self) -> List[Discriminator]:
        return [s.discriminator for s in self.subtasks]

    def subtask(self, i: int) -> SubtaskSpec:
        if not 1 <= i <= self.K:
            raise IndexError(f"subtask {i} outside 1..{self.K}")
        return self.subtasks[i - 1]

    def nominal_poses(self) -> Dict[str, np.ndarray]:
        return {b.name: np.asarray(b.pose, float) for b in self.config.bodies}

    def nominal_state(self, seed: int = 0) -> WorldState:
        return make_state(self.model, self.nominal_poses(), seed=seed)

    def frame(self, state: WorldState, keypoints: Optional[Mapping[str, np.ndarray]] = None,
              contact_threshold: Optional[float] = None) -> FrameContext:
        return FrameContext.from_state(state, keypoints, self.config.constants, contact_threshold)

    def config_hash(self) -> str:
        blob = json.dumps(self.config.model_dump(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def discriminator_hashes(self) -> List[str]:
        return [d.digest() for d in self.discriminators]


def task_vocabulary(config: TaskConfig, model: WorldModel) -> Vocabulary:
    robot = model.robot
    keypoints = set(robot.keypoints(robot.q_init))
    for b in model.bodies.values():
        keypoints.update(b.keypoints)
    return Vocabulary.build(keypoints, robot.finger_names, model.bodies, config.constants)


def resolve_task_path(config_path: Union[str, Path]) -> Path:
    p = Path(config_path)
    if p.suffix != ".json" and not p.exists():
        p = CONFIG_DIR / f"{config_path}.json"
    return p


def build_task(config: TaskConfig, source: str = "") -> TaskSpec:
    model = WorldModel.from_config(config.world, config.bodies)
    vocab = task_vocabulary(config, model)
    subtasks = []
    for i, st in enumerate(config.subtasks, start=1):
        try:
            disc = Discriminator.compile(i, st.point, st.contact, vocab)
            success = Predicate.compile(st.success, vocab)
        except DslError as e:
            logger.error("❌ subtask %d (%s): %s", i, st.name, e)
            raise
        subtasks.append(SubtaskSpec(i, st.name, disc, success, st.timeout, st.oracle))
    return TaskSpec(config, model, vocab, subtasks, source)


def load_task(config_path: Union[str, Path]) -> TaskSpec:
    """Load a task from a JSON file or a bundled task name.

    Raises SchemaError for config errors and DslError (with line/column) for
    discriminator or predicate errors.
    """
    path = resolve_task_path(config_path)
    config = load_model(path, TaskConfig)
    task = build_task(config, str(path))
    logger.debug("loaded task %s with %d subtasks from %s", task.name, task.K, path)
    return task


def sample_initial_state(task: TaskSpec, rng: np.random.Generator, scale: float = 1.0,
                         model: Optional[WorldModel] = None) -> WorldState:
    """Draw from the task's initial-state distribution (ranges multiplied by `scale`), then project out overlaps."""
    poses = task.nominal_poses()
    for name, r in task.config.init.items():
        u = np.array([rng.uniform(*r.dx), rng.uniform(*r.dy), rng.uniform(*r.dtheta)])
        mid = 0.5 * np.array([sum(r.dx), sum(r.dy), sum(r.dtheta)])
        poses[name] = poses[name] + mid + (u - mid) * scale
    seed = int(rng.integers(0, 2 ** 31 - 1))
    state = make_state(model or task.model, poses, seed=seed)
    pen = project_out(state, state.model.dynamic_names, PENETRATION_TOLERANCE)
    if pen > PENETRATION_TOLERANCE:
        logger.warning("initial state of %s keeps penetration %.4f m after projection", task.name, pen)
    return state.capture_initial_poses()


def subtask_success(task: TaskSpec, i: int, state: WorldState,
                    keypoints: Optional[Mapping[str, np.ndarray]] = None) -> bool:
    """Subtask i's success predicate on one state. Thresholds are closed (<=, >=)."""
    return task.subtask(i).success(task.frame(state, keypoints))


def bundled_tasks() -> List[str]:
    return [n for n in BUNDLED if (CONFIG_DIR / f"{n}.json").exists()]
