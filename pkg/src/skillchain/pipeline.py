# src/skillchain/pipeline.py
"""
Staged pipeline: demo -> segment -> train-skill -> gen-transitions -> train-srt -> eval
Outputs (under the artifact root):
    <stage>/<key>/          stage artifacts, with .stage.json holding the full cache key
    runs/<label>/seed_<s>/  metrics reports of one pipeline run
    logs/report.csv         one row per stage per run
    logs/run.log
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, TypeVar, Union

import numpy as np
import pandas as pd

from .errors import IncompleteDemo, SkillchainError, StageError
from .evaluate import MetricsReport, PolicyBundle, binomial_interval, evaluate
from .learn import (ChunkPolicy, SkillEnv, collect_success_rollouts, cotrain_skill, make_termination,
                    train_bc, train_finetune_ppo, train_residual_ppo)
from .schema.pipeline_schema import AblationToggles, PipelineConfig
from .schema.record_schema import DemoEntry, DemoManifest, SegmentationManifest, TransitionManifest
from .segmentation import (BoundarySets, SegmentedDemo, augment_boundary_sets, boundary_sets, extract_segments,
                           label_frames, read_boundary_sets, read_jsonl, read_manifest, read_segmentation,
                           stale_segmentation, track_keypoints, write_boundary_sets, write_jsonl, write_manifest,
                           write_segmentation)
from .segmentation.io import phase_path
from .segmentation.trajectory import Trajectory
from .srt import SrtPolicy, train_srt
from .tasks import TaskSpec, generate_demos, load_task
from .transition import generate_transition_dataset, read_transition_arrays, write_transition_dataset
from .validator import validate_and_score
from .world import WorldState

logger = logging.getLogger(__name__)

STAGES = ("demo", "segment", "train-skill", "gen-transitions", "train-srt", "eval")
STREAM_TRACK = 41
STREAM_AUGMENT = 43
STREAM_PREDEFINED = 47

T = TypeVar("T")


# -------------------------------
# Cache keys
# -------------------------------
def chain_key(*parts: str) -> str:
    return hashlib.sha256("|".join(parts).encode("utf-8")).hexdigest()


def _toggle_blob(cfg: PipelineConfig, *names: str) -> str:
    return json.dumps({n: getattr(cfg.toggles, n) for n in names}, sort_keys=True)


def stage_keys(cfg: PipelineConfig, task: TaskSpec) -> Dict[str, str]:
    """Chained sha256 keys; a stage's key changes exactly when something it (or an upstream stage) reads changes."""
    keys = {}
    keys["demo"] = chain_key("demo", task.config_hash(), cfg.section_hash("demo"))
    keys["segment"] = chain_key(
        "segment", keys["demo"], cfg.section_hash("track", "debounce", "augment"), str(cfg.seeds),
        *task.discriminator_hashes(),
        _toggle_blob(cfg, "predefined_skills", "predefined_offset", "no_sim_augmentation"))
    keys["train-skill"] = chain_key(
        "train-skill", keys["segment"],
        cfg.section_hash("base_policy", "skill_policy", "bc", "ppo", "schedule", "collect", "cotrain",
                         "randomization"),
        _toggle_blob(cfg, "rl_finetune", "no_real_cotraining"))
    if cfg.toggles.no_transition:
        keys["gen-transitions"] = keys["train-srt"] = ""
    else:
        # transitions also target the states the trained skills reach
        keys["gen-transitions"] = chain_key("gen-transitions", keys["train-skill"], cfg.section_hash("transition"),
                                            cfg.srt.obs_mode, str(cfg.srt.decimation))
        keys["train-srt"] = chain_key("train-srt", keys["gen-transitions"], cfg.section_hash("srt"))
    keys["eval"] = chain_key("eval", keys["train-skill"], keys["train-srt"],
                             cfg.section_hash("eval", "ood", "chaining", "randomization", "transition"),
                             _toggle_blob(cfg, "no_transition"))
    return keys


def stage_dir(root: Path, stage: str, key: str) -> Path:
    return root / stage / key[:16]


def _cached(d: Path, key: str) -> bool:
    marker = d / ".stage.json"
    if not marker.exists():
        return False
    try:
        return json.loads(marker.read_text(encoding="utf-8")).get("key") == key
    except json.JSONDecodeError:
        return False


def _mark(d: Path, stage: str, key: str) -> None:
    d.mkdir(parents=True, exist_ok=True)
    (d / ".stage.json").write_text(json.dumps({"stage": stage, "key": key}, sort_keys=True), encoding="utf-8")


# -------------------------------
# Seeding
# -------------------------------
def seeded(cfg: PipelineConfig, seed: int) -> PipelineConfig:
    """Copy of `cfg` with every component seed offset by `seed`."""
    out = cfg.model_copy(deep=True)
    out.demo.seed += seed
    out.bc.seed += seed
    out.ppo.seed += seed
    out.collect.seed += seed
    out.cotrain.bc.seed += seed
    out.transition.seed += seed
    out.srt.seed += seed
    out.seeds = [seed]
    return out


# -------------------------------
# Predefined segments (ablation)
# -------------------------------
def predefined_labels(phases: np.ndarray, offset: int, rng: np.random.Generator) -> np.ndarray:
    """Ground-truth phase labels with every boundary moved by a uniform integer offset in [-offset, offset].

    Boundaries are clamped so every run keeps at least one frame.
    """
    phases = np.asarray(phases, np.int64)
    starts = [0] + [t for t in range(1, len(phases)) if phases[t] != phases[t - 1]]
    values = [int(phases[s]) for s in starts]
    bounds = starts[1:] + [len(phases)]
    moved = list(starts)
    for j in range(1, len(starts)):
        shifted = starts[j] + int(rng.integers(-offset, offset + 1))
        moved[j] = int(np.clip(shifted, moved[j - 1] + 1, bounds[j] - 1))
    labels = np.empty_like(phases)
    ends = moved[1:] + [len(phases)]
    for v, a, b in zip(values, moved, ends):
        labels[a:b] = v
    return labels


# -------------------------------
# Stage artifacts
# -------------------------------
@dataclass
class SkillArtifacts:
    base: List[ChunkPolicy]
    final: List[ChunkPolicy]
    sets: Optional[BoundarySets] = None  # termination sets grown by successful rollouts


@dataclass
class PipelineResult:
    label: str
    seed: int
    keys: Dict[str, str]
    reports: Dict[str, MetricsReport] = field(default_factory=dict)  # "<label>/<regime>"
    cache_hits: List[str] = field(default_factory=list)


class Pipeline:
    """One pipeline run for one seed. Stages load their artifacts from the cache when the key matches."""

    def __init__(self, cfg: PipelineConfig, root: Union[str, Path], seed: int = 0, task: Optional[TaskSpec] = None):
        self.cfg = seeded(cfg, seed)
        self.seed = seed
        self.root = Path(root)
        self.task = task or load_task(cfg.task)
        self.keys = stage_keys(self.cfg, self.task)
        self.label = self.cfg.toggles.label()
        self.report_rows: List[dict] = []
        self.result = PipelineResult(self.label, seed, self.keys)
        self.dof = self.task.model.robot.dof

    def dir(self, stage: str) -> Path:
        return stage_dir(self.root, stage, self.keys[stage])

    def _run(self, stage: str, build: Callable[[Path], None], load: Callable[[Path], T]) -> T:
        d = self.dir(stage)
        key = self.keys[stage]
        if _cached(d, key):
            try:
                out = load(d)
            except SkillchainError as e:
                logger.warning("  ❌ stage %s: cached artifacts unusable (%s), rebuilding", stage, e)
            else:
                logger.info("  ✔ stage %s: cache hit (%s)", stage, key[:12])
                self.result.cache_hits.append(stage)
                self._row(stage, "cached", d, "")
                return out
        try:
            d.mkdir(parents=True, exist_ok=True)
            build(d)
            _mark(d, stage, key)
            out = load(d)
        except Exception as e:
            logger.error("  ❌ stage %s failed: %s", stage, e)
            self._row(stage, "failed", d, str(e))
            raise StageError(stage, e) from e
        logger.info("  ✔ stage %s: done (%s)", stage, key[:12])
        self._row(stage, "success", d, "")
        return out

    def _row(self, stage: str, status: str, d: Path, error: str) -> None:
        self.report_rows.append({"label": self.label, "seed": self.seed, "stage": stage, "status": status,
                                 "key": self.keys[stage][:16], "dir": str(d), "error_message": error})

    # ---- demo ----
    def _build_demos(self, d: Path) -> None:
        demos = generate_demos(self.task, self.cfg.demo)
        entries = []
        for k, traj in enumerate(demos):
            path = write_jsonl(traj, d / "demos" / f"{k:04d}.jsonl")
            entries.append(DemoEntry(path=str(path.relative_to(d)), seed=traj.meta.seed, attempts=traj.meta.attempts,
                                     frames=len(traj), phase_path=str(phase_path(path).relative_to(d))))
        raw = {"task": self.task.name, "task_config_hash": self.task.config_hash(),
               "demo_config_hash": self.cfg.section_hash("demo"),
               "entries": [e.model_dump() for e in entries]}
        validated, _ = validate_and_score("demo_manifest", raw)
        write_manifest(DemoManifest.model_validate(validated), d / "manifest.json")

    def _load_demos(self, d: Path) -> List[Trajectory]:
        manifest = read_manifest(d / "manifest.json", DemoManifest)
        return [read_jsonl(d / e.path, self.task.model, with_phases=True) for e in manifest.entries]

    def demos(self) -> List[Trajectory]:
        return self._run("demo", self._build_demos, self._load_demos)

    # ---- segment ----
    def _build_segments(self, d: Path, demos: List[Trajectory]) -> None:
        cfg, task = self.cfg, self.task
        track_rng = np.random.default_rng([self.seed, STREAM_TRACK])
        pre_rng = np.random.default_rng([self.seed, STREAM_PREDEFINED])
        accepted, rejected, violations = [], {}, []
        segmented: List[SegmentedDemo] = []
        for k, traj in enumerate(demos):
            name = f"{k:04d}"
            try:
                if cfg.toggles.predefined_skills:
                    if traj.phases is None:
                        raise IncompleteDemo(1)
                    seg = extract_segments(predefined_labels(traj.phases, cfg.toggles.predefined_offset, pre_rng),
                                           traj, task.K)
                else:
                    # tracked keypoints drive the discriminators; segments keep the raw frames
                    result = label_frames(track_keypoints(traj, cfg.track, track_rng), task.discriminators, task,
                                          cfg.debounce)
                    violations.extend(f"{name}: {v}" for v in result.violations)
                    seg = extract_segments(result.labels, traj, task.K)
            except (IncompleteDemo, ValueError) as e:
                rejected[name] = str(e)
                logger.warning("  ❌ demo %s rejected: %s", name, e)
                continue
            write_segmentation(seg, d / "segmentations" / f"{name}.seg.json")
            accepted.append(name)
            segmented.append(seg)
        if not segmented:
            raise IncompleteDemo(1)

        sets = boundary_sets(segmented)
        if not cfg.toggles.no_sim_augmentation:
            sets = augment_boundary_sets(sets, cfg.augment, np.random.default_rng([self.seed, STREAM_AUGMENT]),
                                         task.model)
        write_boundary_sets(sets, d / "boundary.jsonl")
        raw = {"task": task.name, "discriminator_hashes": task.discriminator_hashes(),
               "demo_manifest_hash": self.keys["demo"], "track": cfg.track.model_dump(),
               "debounce": cfg.debounce.model_dump(), "n_demos": len(demos), "accepted": accepted,
               "rejected": rejected, "order_violations": violations}
        validated, _ = validate_and_score("segmentation", raw)
        write_manifest(SegmentationManifest.model_validate(validated), d / "manifest.json")
        logger.info("  ✔ %d of %d demos segmented", len(accepted), len(demos))

    def _load_segments(self, d: Path, demos: List[Trajectory]) -> Tuple[List[SegmentedDemo], BoundarySets]:
        manifest = read_manifest(d / "manifest.json", SegmentationManifest)
        reason = stale_segmentation(manifest, self.task)
        if reason is not None:
            raise SkillchainError(f"stale segmentation: {reason}")
        segmented = [read_segmentation(d / "segmentations" / f"{name}.seg.json", demos[int(name)])
                     for name in manifest.accepted]
        return segmented, read_boundary_sets(d / "boundary.jsonl", self.task.model)

    def segments(self, demos: List[Trajectory]) -> Tuple[List[SegmentedDemo], BoundarySets]:
        return self._run("segment", lambda d: self._build_segments(d, demos),
                         lambda d: self._load_segments(d, demos))

    # ---- train-skill ----
    def env_factory(self, i: int, sets: BoundarySets):
        cfg, task = self.cfg, self.task
        exemplars = sets.term(i) if cfg.collect.termination == "exemplar" else ()
        termination = make_termination(task, i, cfg.collect, exemplars)
        init = sets.init(i)

        def factory(n: int, seed: int) -> SkillEnv:
            return SkillEnv(init, termination, cfg.randomization, n, seed, cfg.base_policy.decimation,
                            cfg.ppo.episode_length, cfg.ppo.workers, label=f"skill {i}")

        return factory

    def _build_skills(self, d: Path, segmented: List[SegmentedDemo], sets: BoundarySets) -> None:
        cfg, task = self.cfg, self.task
        dt = task.model.dt
        reached: Dict[int, List[WorldState]] = {}
        for i in range(1, task.K + 1):
            sd = d / f"skill_{i}"
            segs = [s.skill_trajectory(i) for s in segmented]
            base = train_bc(segs, cfg.base_policy, cfg.bc, dt, self.dof, sd / "bc_metrics.csv", desc=f"bc skill {i}")
            base.save(sd / "base.ckpt")
            factory = self.env_factory(i, sets)
            if cfg.toggles.rl_finetune:
                final = train_finetune_ppo(factory, base, cfg.ppo, i, sd / "ppo_metrics.csv")
            else:
                residual = train_residual_ppo(factory, base, cfg.ppo, cfg.schedule, i, sd / "ppo_metrics.csv",
                                              sd / "residual_checkpoints" if cfg.ppo.checkpoint_every else None)
                residual.save(sd / "residual.ckpt")
                collected = collect_success_rollouts(factory, base, residual, i, cfg.collect, task.name,
                                                     n_envs=min(cfg.ppo.n_envs, cfg.collect.n_target))
                reached[i] = collected.terminal_states
                demo_part = [] if cfg.toggles.no_real_cotraining else segs
                final = cotrain_skill(collected.trajectories, demo_part, cfg.skill_policy, cfg.cotrain, dt, self.dof,
                                      sd / "cotrain_metrics.csv", desc=f"cotrain skill {i}")
            final.save(sd / "policy.ckpt")
        extended = sets.extended(reached, task.model)
        write_boundary_sets(extended, d / "boundary.jsonl")
        logger.info("  ✔ termination sets grown by %d rollout states", sum(len(v) for v in reached.values()))

    def _load_skills(self, d: Path) -> SkillArtifacts:
        K = self.task.K
        return SkillArtifacts([ChunkPolicy.load(d / f"skill_{i}" / "base.ckpt") for i in range(1, K + 1)],
                              [ChunkPolicy.load(d / f"skill_{i}" / "policy.ckpt") for i in range(1, K + 1)],
                              read_boundary_sets(d / "boundary.jsonl", self.task.model))

    def skills(self, segmented: List[SegmentedDemo], sets: BoundarySets) -> SkillArtifacts:
        return self._run("train-skill", lambda d: self._build_skills(d, segmented, sets), self._load_skills)

    # ---- gen-transitions ----
    def _build_transitions(self, d: Path, sets: BoundarySets) -> None:
        cfg = self.cfg
        ds = generate_transition_dataset(sets, self.task, cfg.transition, obs_mode=cfg.srt.obs_mode,
                                         decimation=cfg.srt.decimation, workers=cfg.workers)
        write_transition_dataset(ds, d / "data")
        raw = {"task": self.task.name, "families": {str(i): len(v) for i, v in sorted(ds.families.items())},
               "stats": {"attempts": sum(s.attempts for s in ds.stats.values()),
                         "accepted": sum(s.successes for s in ds.stats.values())}}
        validated, _ = validate_and_score("transition", raw)
        write_manifest(TransitionManifest.model_validate(validated), d / "manifest.json")

    def transitions(self, sets: BoundarySets):
        return self._run("gen-transitions", lambda d: self._build_transitions(d, sets),
                         lambda d: read_transition_arrays(d / "data"))

    # ---- train-srt ----
    def _build_srt(self, d: Path, families) -> None:
        policy, _ = train_srt(families, self.task.K, self.cfg.srt, self.dof, d / "srt_metrics.csv")
        policy.save(d / "srt.ckpt")

    def srt(self, families) -> SrtPolicy:
        return self._run("train-srt", lambda d: self._build_srt(d, families), lambda d: SrtPolicy.load(d / "srt.ckpt"))

    # ---- eval ----
    def bundles(self, skills: SkillArtifacts, srt: Optional[SrtPolicy], sets: BoundarySets) -> List[PolicyBundle]:
        init_sets = {i: sets.init(i) for i in range(1, self.task.K + 1)}
        out = [PolicyBundle(self.label, skills.final, srt, init_sets)]
        if self.cfg.eval.baseline:
            out.append(PolicyBundle("bc-baseline", skills.base, srt, init_sets))
        return out

    def _build_eval(self, d: Path, bundles: List[PolicyBundle]) -> None:
        index = []
        for b in bundles:
            for regime in self.cfg.eval.regimes:
                evaluate(b, self.task, self.cfg, regime, d, workers=self.cfg.workers)
                index.append(f"{b.label}_{regime}")
        (d / "index.json").write_text(json.dumps(index, indent=2), encoding="utf-8")

    def _load_eval(self, d: Path) -> Dict[str, MetricsReport]:
        index = json.loads((d / "index.json").read_text(encoding="utf-8"))
        return {name: MetricsReport(**json.loads((d / f"{name}.json").read_text(encoding="utf-8")))
                for name in index}

    def evaluation(self, bundles: List[PolicyBundle]) -> Dict[str, MetricsReport]:
        return self._run("eval", lambda d: self._build_eval(d, bundles), self._load_eval)

    # ---- all stages ----
    def run(self, until: str = "eval") -> PipelineResult:
        if until not in STAGES:
            raise ValueError(f"unknown stage {until!r}; expected one of {STAGES}")
        stop = STAGES.index(until)
        logger.info("\n[%s seed %d] %s", self.label, self.seed, self.task.name)
        demos = self.demos()
        if stop < 1:
            return self.result
        segmented, sets = self.segments(demos)
        if stop < 2:
            return self.result
        skills = self.skills(segmented, sets)
        srt = None
        if not self.cfg.toggles.no_transition and stop >= 3:
            families = self.transitions(skills.sets or sets)[2]
            if stop >= 4:
                srt = self.srt(families)
        if stop < 5:
            return self.result
        self.result.reports = self.evaluation(self.bundles(skills, srt, sets))
        return self.result


# -------------------------------
# Entry points
# -------------------------------
def write_run_report(rows: List[dict], root: Path) -> Path:
    path = root / "logs" / "report.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = ["label", "seed", "stage", "status", "key", "dir", "error_message"]
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False)
    return path


def copy_reports(result: PipelineResult, root: Path) -> None:
    d = root / "runs" / result.label / f"seed_{result.seed}"
    d.mkdir(parents=True, exist_ok=True)
    for name, rep in sorted(result.reports.items()):
        (d / f"{name}.json").write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True), encoding="utf-8")


def run_pipeline(cfg: PipelineConfig, root: Union[str, Path], until: str = "eval") -> List[PipelineResult]:
    """Every stage for every configured seed; failures carry their stage as a StageError."""
    root = Path(root)
    task = load_task(cfg.task)
    rows, results = [], []
    try:
        for seed in cfg.seeds:
            p = Pipeline(cfg, root, seed, task)
            try:
                results.append(p.run(until))
            finally:
                rows.extend(p.report_rows)
            copy_reports(results[-1], root)
    finally:
        report_path = write_run_report(rows, root)
    _banner(results, report_path)
    return results


def _banner(results: List[PipelineResult], report_path: Path) -> None:
    logger.info("\n=====================================")
    logger.info("Pipeline Completed.")
    for r in results:
        hits = f", cached: {', '.join(r.cache_hits)}" if r.cache_hits else ""
        for name, rep in sorted(r.reports.items()):
            logger.info("  %s seed %d %s: success %.2f [%.2f, %.2f]%s", r.label, r.seed, name, rep.success_rate,
                        rep.ci_low, rep.ci_high, hits)
    logger.info("Full report saved to: %s", report_path)
    logger.info("=====================================")


ABLATION_ROWS: Dict[str, dict] = {
    "full": {},
    "predefined-skills": {"predefined_skills": True},
    "rl-finetune": {"rl_finetune": True},
    "no-transition": {"no_transition": True},
    "no-sim-augmentation": {"no_sim_augmentation": True},
    "no-real-cotraining": {"no_real_cotraining": True},
}


def ablation_config(cfg: PipelineConfig, row: str) -> PipelineConfig:
    toggles = AblationToggles(predefined_offset=cfg.toggles.predefined_offset, **ABLATION_ROWS[row])
    raw = cfg.model_dump(mode="json")
    raw["toggles"] = toggles.model_dump()
    raw["eval"]["baseline"] = False
    if toggles.no_transition:
        raw["eval"]["router"] = "planner"
    return PipelineConfig.model_validate(raw)


def ordering_checks(table: pd.DataFrame, margin: float = 0.10) -> Dict[str, bool]:
    """Directional checks on pooled deployment-regime success: full leads the no-transition and no-augmentation rows."""
    dep = table[table["regime"] == "deployment"].set_index("row")["success_rate"]
    checks = {}
    for row in ("no-transition", "no-sim-augmentation"):
        if "full" in dep and row in dep:
            checks[f"full>={row}+{margin:.2f}"] = bool(dep["full"] >= dep[row] + margin)
    return checks


def ablation_suite(cfg: PipelineConfig, root: Union[str, Path], rows: Optional[List[str]] = None) -> pd.DataFrame:
    """Run the full method and each ablation row; write ablation.csv and ablation.json at the root.

    Stages shared between rows (same cache key) run once.
    """
    root = Path(root)
    rows = rows or list(ABLATION_ROWS)
    if "full" not in rows:
        rows = ["full"] + rows
    records, report_rows = [], []
    for row in dict.fromkeys(rows):
        row_cfg = ablation_config(cfg, row)
        task = load_task(row_cfg.task)
        per_regime: Dict[str, List[MetricsReport]] = {}
        for seed in row_cfg.seeds:
            p = Pipeline(row_cfg, root, seed, task)
            try:
                result = p.run()
            except StageError as e:
                logger.error("❌ ablation row %s seed %d: %s", row, seed, e)
                records.extend({"row": row, "regime": r, "seed": seed, "n_episodes": 0, "successes": 0,
                                "success_rate": float("nan"), "ci_low": float("nan"), "ci_high": float("nan"),
                                "error": str(e)} for r in row_cfg.eval.regimes)
                continue
            finally:
                report_rows.extend(p.report_rows)
            copy_reports(result, root)
            for name, rep in result.reports.items():
                per_regime.setdefault(rep.regime, []).append(rep)
                records.append({"row": row, "regime": rep.regime, "seed": seed, "n_episodes": rep.n_episodes,
                                "successes": rep.successes, "success_rate": rep.success_rate, "ci_low": rep.ci_low,
                                "ci_high": rep.ci_high, "error": ""})
    write_run_report(report_rows, root)
    per_seed = pd.DataFrame(records)
    table = _pool(per_seed, cfg.eval.confidence)
    table.to_csv(root / "ablation.csv", index=False, float_format="%.6g")
    summary = {"rows": table.to_dict(orient="records"), "checks": ordering_checks(table),
               "config_hash": cfg.config_hash()}
    (root / "ablation.json").write_text(json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8")
    for name, ok in summary["checks"].items():
        logger.info("  %s %s", "✔" if ok else "❌", name)
    return table


def _pool(per_seed: pd.DataFrame, confidence: float) -> pd.DataFrame:
    out = []
    if per_seed.empty:
        return pd.DataFrame(columns=["row", "regime", "n_episodes", "successes", "success_rate", "ci_low", "ci_high"])
    ok = per_seed[per_seed["n_episodes"] > 0]
    order = list(dict.fromkeys(per_seed["row"]))
    for (row, regime), g in ok.groupby(["row", "regime"], sort=False):
        n, k = int(g["n_episodes"].sum()), int(g["successes"].sum())
        lo, hi = binomial_interval(k, n, confidence)
        out.append({"row": row, "regime": regime, "n_episodes": n, "successes": k, "success_rate": k / n,
                    "ci_low": lo, "ci_high": hi})
    table = pd.DataFrame(out)
    if not table.empty:
        table["_order"] = table["row"].map(order.index)
        table = table.sort_values(["_order", "regime"]).drop(columns="_order").reset_index(drop=True)
    return table


__all__ = ["STAGES", "Pipeline", "PipelineResult", "SkillArtifacts", "chain_key", "stage_keys", "seeded",
           "predefined_labels", "run_pipeline", "ablation_suite", "ablation_config", "ordering_checks",
           "ABLATION_ROWS", "write_run_report"]
