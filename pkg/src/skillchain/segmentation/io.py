# src/skillchain/segmentation/io.py
"""Trajectory logs, segmentations, boundary sets and manifests on disk.

Layouts are described in docs/formats.md.
"""
import json
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel

from ..errors import SchemaError
from ..world import BodyState, ContactRecord, GraspState, RobotState, WorldModel, WorldState
from .boundary import BoundarySets
from .labeling import SegmentedDemo, extract_segments
from .trajectory import Trajectory, TrajectoryMeta

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
PathLike = Union[str, Path]
M = TypeVar("M", bound=BaseModel)


def _arr(v) -> list:
    return np.asarray(v, float).tolist()


# ---------------- single states ----------------

def state_record(state: WorldState) -> dict:
    g = state.grasp
    return {
        "time": state.time,
        "tick": state.tick,
        "seed": state.seed,
        "q": _arr(state.robot.q),
        "qd": _arr(state.robot.qd),
        "targets": None if state.targets is None else _arr(state.targets),
        "bodies": {n: {"pose": _arr(b.pose), "velocity": _arr(b.velocity), "unwrapped": b.unwrapped}
                   for n, b in state.bodies.items()},
        "initial_poses": {n: _arr(p) for n, p in state.initial_poses.items()},
        "grasp": None if g is None else {
            "body": g.body, "relative": _arr(g.relative), "finger_lock": _arr(g.finger_lock),
            "fingers": list(g.fingers), "slip_count": g.slip_count,
        },
        "contacts": [{"a": c.a, "b": c.b, "point": _arr(c.point), "normal": _arr(c.normal),
                      "force": c.force_magnitude} for c in state.contacts],
    }


def state_from_record(rec: dict, model: WorldModel) -> WorldState:
    """Rebuild a state against `model`; bodies the model does not know are an error."""
    bodies = {}
    for name, b in rec["bodies"].items():
        if name not in model.bodies:
            raise SchemaError("trajectory log", [f"body {name!r} is not in the world model"])
        bodies[name] = BodyState(model.bodies[name], np.asarray(b["pose"], float),
                                 np.asarray(b["velocity"], float), float(b.get("unwrapped", 0.0)))
    robot = RobotState.at(model.robot, np.asarray(rec["q"], float), np.asarray(rec["qd"], float))
    g = rec.get("grasp")
    grasp = None if g is None else GraspState(
        g["body"], np.asarray(g["relative"], float), np.asarray(g["finger_lock"], float),
        tuple(g["fingers"]), int(g.get("slip_count", 0)))
    contacts = [ContactRecord(c["a"], c["b"], np.asarray(c["point"], float), np.asarray(c["normal"], float),
                              float(c["force"])) for c in rec.get("contacts", [])]
    targets = rec.get("targets")
    return WorldState(
        model=model, robot=robot, bodies=bodies, contacts=contacts, time=float(rec["time"]),
        grasp=grasp, initial_poses={n: np.asarray(p, float) for n, p in rec.get("initial_poses", {}).items()},
        targets=None if targets is None else np.asarray(targets, float),
        seed=int(rec.get("seed", 0)), tick=int(rec.get("tick", 0)),
    )


# ---------------- JSON-lines frame logs ----------------

def phase_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name.split(".")[0] + ".phases.json")


def write_jsonl(traj: Trajectory, path: PathLike, with_phases: bool = True) -> Path:
    """One header line, then one record per frame. Ground-truth phases go to a separate file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"format": "skillchain-trajectory", "version": FORMAT_VERSION, "frames": len(traj),
              "meta": asdict(traj.meta), "tracked": traj.keypoints is not None}
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(header) + "\n")
        for t, state in enumerate(traj.states):
            kps = traj.frame_keypoints(t) if state is not None or traj.keypoints is not None else {}
            rec = {
                "t": t,
                "state": None if state is None else state_record(state),
                "action": _arr(traj.actions[t]),
                "keypoints": {k: _arr(v) for k, v in kps.items()},
            }
            if traj.observations is not None:
                rec["observation"] = _arr(traj.observations[t])
            if traj.stages is not None:
                rec["stage"] = int(traj.stages[t])
            f.write(json.dumps(rec) + "\n")
    if with_phases and traj.phases is not None:
        write_phases(traj.phases, phase_path(path))
    return path


def read_jsonl(path: PathLike, model: WorldModel, with_phases: bool = False) -> Trajectory:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            lines = [line for line in f if line.strip()]
    except FileNotFoundError:
        raise SchemaError(str(path), ["file not found"]) from None
    if not lines:
        raise SchemaError(str(path), ["empty trajectory log"])
    try:
        header = json.loads(lines[0])
        records = [json.loads(line) for line in lines[1:]]
    except json.JSONDecodeError as e:
        raise SchemaError(str(path), [f"line {e.lineno}: {e.msg}"]) from None
    if header.get("version") != FORMAT_VERSION:
        raise SchemaError(str(path), [f"unsupported trajectory format version {header.get('version')}"])
    if header.get("frames") != len(records):
        raise SchemaError(str(path), [f"header says {header.get('frames')} frames, found {len(records)}"])

    states = [None if r["state"] is None else state_from_record(r["state"], model) for r in records]
    actions = np.asarray([r["action"] for r in records], float)
    keypoints = None
    if header.get("tracked"):
        keypoints = [{k: np.asarray(v, float) for k, v in r["keypoints"].items()} for r in records]
    observations = np.asarray([r["observation"] for r in records], float) if "observation" in records[0] else None
    stages = np.asarray([r["stage"] for r in records], np.int64) if "stage" in records[0] else None
    phases = None
    if with_phases and phase_path(path).exists():
        phases = read_phases(phase_path(path))
    return Trajectory(states, actions, TrajectoryMeta(**header["meta"]), keypoints, observations, stages, phases)


# ---------------- ground-truth phases (evaluation only) ----------------

def write_phases(phases: np.ndarray, path: PathLike) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"version": FORMAT_VERSION, "phases": np.asarray(phases, np.int64).tolist()}, f)
    return path


def read_phases(path: PathLike) -> np.ndarray:
    with open(path, encoding="utf-8") as f:
        return np.asarray(json.load(f)["phases"], np.int64)


# ---------------- columnar variant ----------------

def trajectory_columns(traj: Trajectory) -> Dict[str, np.ndarray]:
    """Dense per-field arrays; frames without a state are NaN in state columns."""
    T = len(traj)
    template = traj.terminal
    cols: Dict[str, np.ndarray] = {"action": traj.actions}
    dof = template.robot.q.shape[0]
    q = np.full((T, dof), np.nan)
    qd = np.full((T, dof), np.nan)
    time = traj.times().reshape(T, 1)
    held = np.full((T, 1), np.nan)
    poses = {n: np.full((T, 3), np.nan) for n in template.bodies}
    names = list(template.bodies)
    for t, s in enumerate(traj.states):
        if s is None:
            continue
        q[t], qd[t] = s.robot.q, s.robot.qd
        held[t, 0] = -1 if s.grasp is None else names.index(s.grasp.body)
        for n, b in s.bodies.items():
            poses[n][t] = b.pose
    cols.update({"time": time, "q": q, "qd": qd, "held": held})
    cols.update({f"pose.{n}": p for n, p in poses.items()})
    kp_names = sorted(traj.frame_keypoints(T - 1))
    for k in kp_names:
        cols[f"kp.{k}"] = np.asarray([traj.frame_keypoints(t)[k] if traj.states[t] is not None or traj.keypoints
                                      else [np.nan, np.nan] for t in range(T)], float)
    if traj.observations is not None:
        cols["observation"] = traj.observations
    if traj.stages is not None:
        cols["stage"] = np.asarray(traj.stages, float).reshape(T, 1)
    return cols


def write_columnar(traj: Trajectory, path: PathLike) -> Path:
    """Header JSON line (fields, dims, frame count) followed by little-endian float32 column blocks."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = trajectory_columns(traj)
    fields = []
    for name, arr in cols.items():
        arr = np.asarray(arr, float)
        fields.append({"name": name, "dim": 1 if arr.ndim == 1 else int(arr.shape[1])})
    header = {"format": "skillchain-columns", "version": FORMAT_VERSION, "frames": len(traj),
              "meta": asdict(traj.meta), "bodies": list(traj.terminal.bodies), "fields": fields}
    with open(path, "wb") as f:
        f.write((json.dumps(header) + "\n").encode("utf-8"))
        for name in cols:
            f.write(np.ascontiguousarray(cols[name], dtype="<f4").tobytes())
    return path


def read_columnar(path: PathLike) -> Tuple[dict, Dict[str, np.ndarray]]:
    path = Path(path)
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode("utf-8"))
        payload = f.read()
    if header.get("version") != FORMAT_VERSION:
        raise SchemaError(str(path), [f"unsupported columnar format version {header.get('version')}"])
    T = int(header["frames"])
    out: Dict[str, np.ndarray] = {}
    offset = 0
    for fld in header["fields"]:
        n = T * int(fld["dim"])
        block = np.frombuffer(payload, dtype="<f4", count=n, offset=offset)
        out[fld["name"]] = block.reshape(T, int(fld["dim"])).astype(np.float32)
        offset += 4 * n
    if offset != len(payload):
        raise SchemaError(str(path), [f"{len(payload) - offset} trailing bytes after the last column"])
    return header, out


# ---------------- segmentations ----------------

def write_segmentation(demo: SegmentedDemo, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rec = {
        "version": FORMAT_VERSION,
        "K": demo.K,
        "labels": demo.labels.astype(int).tolist(),
        "segments": [{"stage": s.stage, "start": s.start, "stop": s.stop} for s in demo.segments],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(rec, f)
    return path


def read_segmentation(path: PathLike, traj: Trajectory) -> SegmentedDemo:
    """Labels are re-validated through extract_segments."""
    with open(path, encoding="utf-8") as f:
        rec = json.load(f)
    return extract_segments(np.asarray(rec["labels"], np.int64), traj, int(rec["K"]))


# ---------------- boundary sets ----------------

def _iter_sets(sets: BoundarySets) -> Iterable[Tuple[str, int, bool, List[WorldState]]]:
    for kind, real, aug in (("init", sets.init_real, sets.init_aug), ("term", sets.term_real, sets.term_aug)):
        for i, states in real.items():
            yield kind, i, False, states
        for i, states in aug.items():
            yield kind, i, True, states


def write_boundary_sets(sets: BoundarySets, path: PathLike) -> Path:
    """JSON lines: a header with augmentation params, then one state per line tagged (kind, skill, augmented)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        header = {"format": "skillchain-boundary", "version": FORMAT_VERSION, "K": sets.K,
                  "params": None if sets.params is None else sets.params.model_dump()}
        f.write(json.dumps(header) + "\n")
        for kind, i, aug, states in _iter_sets(sets):
            for s in states:
                f.write(json.dumps({"kind": kind, "skill": i, "augmented": aug, "state": state_record(s)}) + "\n")
    return path


def read_boundary_sets(path: PathLike, model: WorldModel) -> BoundarySets:
    from ..schema.segmentation_schema import AugmentConfig

    if not Path(path).exists():
        raise SchemaError(str(path), ["file not found"])
    with open(path, encoding="utf-8") as f:
        header = json.loads(f.readline())
        K = int(header["K"])
        sets = BoundarySets({i: [] for i in range(1, K + 1)}, {i: [] for i in range(1, K + 1)},
                            params=None if header.get("params") is None else AugmentConfig(**header["params"]))
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            pool = {("init", False): sets.init_real, ("term", False): sets.term_real,
                    ("init", True): sets.init_aug, ("term", True): sets.term_aug}[(rec["kind"], rec["augmented"])]
            pool.setdefault(int(rec["skill"]), []).append(state_from_record(rec["state"], model))
    return sets


# ---------------- manifests ----------------

def write_manifest(record: BaseModel, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(record.model_dump_json(indent=2))
    return path


def read_manifest(path: PathLike, cls: Type[M]) -> M:
    from ..validator import load_model

    return load_model(path, cls)


def stale_segmentation(manifest, task) -> Optional[str]:
    """Reason the stored segmentation no longer matches the task's discriminators, or None."""
    current = task.discriminator_hashes()
    stored = list(manifest.discriminator_hashes)
    if len(stored) != len(current):
        return f"manifest has {len(stored)} discriminators, task has {len(current)}"
    for i, (a, b) in enumerate(zip(stored, current), start=1):
        if a != b:
            return f"discriminator {i} changed"
    return None
