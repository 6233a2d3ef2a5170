# src/skillchain/transition/dataset.py
"""Transition families start->1, 1->2, ..., K-1->K planned between boundary exemplars."""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
from tqdm import tqdm

from ..errors import EmptySet, Infeasible, YieldTooLow
from ..logging_setup import progress_enabled
from ..schema.transition_schema import TransitionConfig
from ..segmentation.boundary import BoundarySets
from ..segmentation.io import read_columnar, write_columnar
from ..segmentation.trajectory import Trajectory
from ..tasks import TaskSpec, sample_initial_state
from ..world import WorldState, observe
from .planner import PlanStats, plan
from .sampling import sample_pair

logger = logging.getLogger(__name__)

STREAM_OBS = 13
REJECT_REASONS = Infeasible.REASONS


def family_key(i: int) -> str:
    """Name of the family ending in skill i ("start->1", "1->2", ...)."""
    return f"{'start' if i == 1 else i - 1}->{i}"


@dataclass
class TransitionRecord:
    traj: Trajectory  # observations and stage labels filled in
    attempt: int
    pair: Tuple[int, int]  # (end exemplar index or -1 for an initial state, start exemplar index)
    stats: PlanStats


@dataclass
class FamilyStats:
    attempts: int = 0
    successes: int = 0
    rejects: Dict[str, int] = field(default_factory=lambda: {r: 0 for r in REJECT_REASONS})

    @property
    def ratio(self) -> float:
        return self.successes / self.attempts if self.attempts else 0.0


@dataclass
class TransitionDataset:
    K: int
    obs_mode: str
    families: Dict[int, List[TransitionRecord]]
    stats: Dict[int, FamilyStats]

    def __len__(self) -> int:
        return sum(len(v) for v in self.families.values())

    def stats_report(self) -> dict:
        return {family_key(i): {**asdict(s), "ratio": s.ratio} for i, s in sorted(self.stats.items())}


def label_stages(n_frames: int, skill: int, n_handoff: int) -> np.ndarray:
    """0 (transition) everywhere except the last `n_handoff` frames, which carry `skill`."""
    stages = np.zeros(n_frames, np.int64)
    stages[max(0, n_frames - n_handoff):] = skill
    return stages


def _index_of(states: List[WorldState], s: WorldState) -> int:
    return next((j for j, x in enumerate(states) if x is s), -1)


def _attempt(task: TaskSpec, sets: BoundarySets, i: int, attempt: int, cfg: TransitionConfig,
             obs_mode: str, decimation: int) -> Union[TransitionRecord, Infeasible]:
    rng = np.random.default_rng([cfg.seed, i, attempt])
    nxt = sets.init(i)
    if i == 1:
        prev = None
        s_end, s_start = sample_pair(lambda r: sample_initial_state(task, r), nxt, rng)
    else:
        prev = sets.term(i - 1)
        s_end, s_start = sample_pair(prev, nxt, rng)
    try:
        traj, stats = plan(s_end, s_start, cfg.planner, rng, decimation, task.name)
    except Infeasible as e:
        return e
    obs_rng = np.random.default_rng([cfg.seed, i, attempt, STREAM_OBS])
    traj.observations = np.stack([observe(s, obs_mode, obs_rng).vector for s in traj.states])
    traj.stages = label_stages(len(traj), i, cfg.n_handoff)
    pair = (-1 if prev is None else _index_of(prev, s_end), _index_of(nxt, s_start))
    return TransitionRecord(traj, attempt, pair, stats)


def generate_family(task: TaskSpec, sets: BoundarySets, i: int, cfg: TransitionConfig, obs_mode: str = "pose",
                    decimation: int = 2, workers: int = 1) -> Tuple[List[TransitionRecord], FamilyStats]:
    """Plan attempts 0, 1, 2, ... until `cfg.n_per_transition` succeed.

    Attempt k draws its pair from its own seeded generator and results are
    accepted in attempt order, so the output does not depend on `workers`.
    """
    sets.init(i)
    if i > 1:
        sets.term(i - 1)
    stats = FamilyStats()
    records: List[TransitionRecord] = []
    budget = cfg.n_per_transition * cfg.max_attempts_factor
    batch = max(1, workers) * 4
    bar = tqdm(total=cfg.n_per_transition, desc=f"transitions {family_key(i)}", disable=not progress_enabled())
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while len(records) < cfg.n_per_transition:
            if stats.attempts >= budget:
                raise YieldTooLow(f"transition {family_key(i)} (attempt budget spent)", stats.ratio, cfg.min_yield)
            ids = range(stats.attempts, min(stats.attempts + batch, budget))

            def run(k: int):
                return _attempt(task, sets, i, k, cfg, obs_mode, decimation)

            results = list(pool.map(run, ids)) if pool else [run(k) for k in ids]
            for out in results:
                stats.attempts += 1
                if isinstance(out, Infeasible):
                    stats.rejects[out.reason] = stats.rejects.get(out.reason, 0) + 1
                else:
                    stats.successes += 1
                    records.append(out)
                    bar.update(1)
                if stats.attempts == cfg.pilot_pairs and stats.ratio < cfg.min_yield:
                    raise YieldTooLow(f"transition {family_key(i)}", stats.ratio, cfg.min_yield)
                if len(records) == cfg.n_per_transition:
                    break
    finally:
        bar.close()
        if pool:
            pool.shutdown()
    return records, stats


def generate_transition_dataset(sets: BoundarySets, task: TaskSpec, cfg: TransitionConfig, obs_mode: str = "pose",
                                decimation: int = 2, workers: int = 1) -> TransitionDataset:
    """Every family from the episode start to skill K, with planner rejection statistics."""
    if sets.K != task.K:
        raise EmptySet(f"boundary sets cover {sets.K} skills, task has {task.K}")
    families, stats = {}, {}
    for i in range(1, task.K + 1):
        families[i], stats[i] = generate_family(task, sets, i, cfg, obs_mode, decimation, workers)
        rejects = ", ".join(f"{k} {v}" for k, v in stats[i].rejects.items() if v)
        logger.info("  ✔ %s: %d trajectories from %d attempts%s", family_key(i), len(families[i]),
                    stats[i].attempts, f" (rejected: {rejects})" if rejects else "")
    return TransitionDataset(task.K, obs_mode, families, stats)


# ---------------- on disk ----------------

def write_transition_dataset(ds: TransitionDataset, out_dir: Union[str, Path]) -> Path:
    """`<out>/<i>/<nnnn>.cols` per trajectory plus `stats.json` and `index.json`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = {"K": ds.K, "obs_mode": ds.obs_mode, "families": {}}
    for i, recs in sorted(ds.families.items()):
        entries = []
        for n, rec in enumerate(recs):
            rel = f"{i}/{n:04d}.cols"
            write_columnar(rec.traj, out_dir / rel)
            entries.append({"file": rel, "attempt": rec.attempt, "pair": list(rec.pair),
                            "planner": asdict(rec.stats)})
        index["families"][str(i)] = entries
    (out_dir / "index.json").write_text(json.dumps(index, indent=2), encoding="utf-8")
    (out_dir / "stats.json").write_text(json.dumps(ds.stats_report(), indent=2), encoding="utf-8")
    return out_dir


def read_transition_arrays(out_dir: Union[str, Path]) -> Tuple[int, str, Dict[int, List[Dict[str, np.ndarray]]]]:
    """(K, observation mode, family -> per-trajectory columns with observation, action and stage)."""
    out_dir = Path(out_dir)
    index = json.loads((out_dir / "index.json").read_text(encoding="utf-8"))
    families: Dict[int, List[Dict[str, np.ndarray]]] = {}
    for key, entries in index["families"].items():
        rows = []
        for e in entries:
            _, cols = read_columnar(out_dir / e["file"])
            rows.append({"observation": cols["observation"], "action": cols["action"],
                         "stage": cols["stage"][:, 0].astype(np.int64)})
        families[int(key)] = rows
    return int(index["K"]), index["obs_mode"], families


def dataset_arrays(ds: TransitionDataset) -> Dict[int, List[Dict[str, np.ndarray]]]:
    return {i: [{"observation": r.traj.observations, "action": r.traj.actions, "stage": r.traj.stages}
                for r in recs] for i, recs in ds.families.items()}


