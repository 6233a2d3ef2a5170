# src/skillchain/evaluate.py
"""Long-horizon evaluation: success rates with binomial intervals, per-stage failure analysis, OOD regimes."""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from .learn.policy import ChunkPolicy
from .schema.pipeline_schema import PipelineConfig
from .schema.world_schema import RandomizationSpec
from .segmentation.io import write_columnar
from .srt import (EpisodeResult, OracleRouter, OracleSkill, PlannerRouter, PolicySkill, SrtPolicy, SrtRouter,
                  execute_long_horizon, stage_names)
from .srt.executor import NOT_ATTEMPTED, SUCCESS
from .tasks import TaskSpec, sample_initial_state
from .validator import validate_and_score
from .world import WorldState, apply_randomization, sample_randomization
from .world.collision import project_out

logger = logging.getLogger(__name__)

STREAM_SIM = 31
STREAM_DEPLOY = 37  # held-out seeds for the deployment-analog regime


@dataclass
class PolicyBundle:
    label: str
    skills: Optional[List[ChunkPolicy]] = None  # None runs the scripted skills
    srt: Optional[SrtPolicy] = None
    init_sets: Dict[int, List[WorldState]] = field(default_factory=dict)  # planner router goals


@dataclass
class MetricsReport:
    label: str
    task: str
    regime: str
    n_episodes: int
    successes: int
    success_rate: float
    ci_low: float
    ci_high: float
    stages: List[str]
    cumulative_failure: List[float]
    failure_histogram: Dict[str, int]
    failure_causes: Dict[str, Dict[str, int]]
    out_of_order: int
    seeds: List[int]
    config_hash: str
    data_quality: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def binomial_interval(successes: int, n: int, confidence: float = 0.95) -> tuple:
    """Exact (Clopper-Pearson) interval for a success rate."""
    if n == 0:
        return 0.0, 1.0
    ci = stats.binomtest(successes, n).proportion_ci(confidence_level=confidence, method="exact")
    return float(ci.low), float(ci.high)


def cumulative_failure(results: Sequence[EpisodeResult], K: int) -> List[float]:
    """Fraction of episodes that have failed at or before each stage."""
    names = stage_names(K)
    n = len(results)
    counts = np.zeros(len(names))
    for r in results:
        if not r.success:
            counts[names.index(r.failure_stage)] += 1
    return (np.cumsum(counts) / max(n, 1)).tolist()


def survival_failure(results: Sequence[EpisodeResult], K: int) -> List[float]:
    """The same curve from per-stage outcomes: 1 - product of stage-wise survival rates."""
    out, surv = [], 1.0
    for s in range(2 * K):
        attempted = [r for r in results if r.outcomes[s] != NOT_ATTEMPTED]
        passed = sum(r.outcomes[s] == SUCCESS for r in attempted)
        if attempted:
            surv *= passed / len(attempted)
        out.append(1.0 - surv)
    return out


def deployment_randomization(spec: RandomizationSpec, widen: float, noise_factor: float) -> RandomizationSpec:
    """Held-out regime: every range widened by `widen`, state-observation noise scaled by `noise_factor`."""
    wide = spec.widened(widen)
    params = dict(wide.params)
    if "state_observation" in params:
        d = params["state_observation"]
        base = spec.params["state_observation"]
        if d.dist == "normal":
            params["state_observation"] = base.model_copy(update={"b": base.b * noise_factor ** 2})
        else:
            params["state_observation"] = base.model_copy(update={"a": base.a * noise_factor,
                                                                  "b": base.b * noise_factor})
    return RandomizationSpec(params=params)


def make_kick(magnitude: float, rotation: float, window: Sequence[float], cap: int, rng: np.random.Generator):
    """One random pose kick of a non-held dynamic object at a random step inside `window` of the episode."""
    at = max(1, int(rng.uniform(*window) * cap))
    angle, dtheta, pick = rng.uniform(-np.pi, np.pi), rng.uniform(-rotation, rotation), rng.random()

    def disturb(step: int, state: WorldState) -> None:
        if step != at:
            return
        names = [n for n in state.model.dynamic_names if n != state.held()]
        if not names:
            return
        name = names[min(int(pick * len(names)), len(names) - 1)]
        b = state.bodies[name]
        b.pose = b.pose + np.array([magnitude * np.cos(angle), magnitude * np.sin(angle), dtheta])
        project_out(state, [name], state.model.contact.penetration_tolerance)
        logger.debug("kicked %s by %.3f m at step %d", name, magnitude, step)

    return disturb


def _controllers(bundle: PolicyBundle, task: TaskSpec, cfg: PipelineConfig, rng: np.random.Generator, seed: int):
    ev = cfg.eval
    if ev.router == "srt":
        if bundle.srt is None:
            raise ValueError(f"{bundle.label}: srt router requested but no SRT policy in the bundle")
        router = SrtRouter(bundle.srt, cfg.chaining, seed)
    elif ev.router == "planner":
        router = PlannerRouter(bundle.init_sets, cfg.transition.planner, rng, cfg.srt.decimation,
                               cfg.chaining.planner_retries)
    else:
        router = OracleRouter(task, rng)
    if ev.skills == "oracle" or bundle.skills is None:
        skills = [OracleSkill(task, i, rng) for i in range(1, task.K + 1)]
    else:
        skills = [PolicySkill(p, rng, seed) for p in bundle.skills]
    return router, skills


def run_episode(bundle: PolicyBundle, task: TaskSpec, cfg: PipelineConfig, regime: str, seed: int,
                episode: int) -> EpisodeResult:
    stream = STREAM_DEPLOY if regime == "deployment" else STREAM_SIM
    rng = np.random.default_rng([seed, episode, stream])
    spec = cfg.randomization
    if regime == "deployment":
        spec = deployment_randomization(spec, cfg.eval.widen, cfg.eval.obs_noise_factor)
    state = sample_initial_state(task, rng, scale=cfg.ood.init_scale)
    state = apply_randomization(state, sample_randomization(spec, rng)).capture_initial_poses()
    cap = cfg.chaining.episode_cap if cfg.chaining.episode_cap is not None else task.horizon
    disturb = None
    if cfg.ood.kick > 0.0 or cfg.ood.kick_rotation > 0.0:
        disturb = make_kick(cfg.ood.kick, cfg.ood.kick_rotation, cfg.ood.kick_window, cap, rng)
    router, skills = _controllers(bundle, task, cfg, rng, int(rng.integers(0, 2 ** 31 - 1)))
    return execute_long_horizon(state, router, skills, task, cfg.chaining, record=cfg.eval.write_traces,
                                disturb=disturb, seed=seed * 100_000 + episode)


def summarize(results: Sequence[EpisodeResult], bundle_label: str, task: TaskSpec, cfg: PipelineConfig,
              regime: str) -> MetricsReport:
    n = len(results)
    k = sum(r.success for r in results)
    lo, hi = binomial_interval(k, n, cfg.eval.confidence)
    names = stage_names(task.K)
    hist = {s: 0 for s in names}
    causes: Dict[str, Dict[str, int]] = {}
    for r in results:
        if not r.success:
            hist[r.failure_stage] += 1
            by = causes.setdefault(r.failure_stage, {})
            by[r.failure_cause or "unknown"] = by.get(r.failure_cause or "unknown", 0) + 1
    report = MetricsReport(
        label=bundle_label, task=task.name, regime=regime, n_episodes=n, successes=k,
        success_rate=k / n if n else 0.0, ci_low=lo, ci_high=hi, stages=names,
        cumulative_failure=cumulative_failure(results, task.K), failure_histogram=hist,
        failure_causes={s: dict(sorted(c.items())) for s, c in sorted(causes.items())},
        out_of_order=sum(r.out_of_order for r in results), seeds=list(cfg.eval.seeds),
        config_hash=cfg.config_hash())
    validated, _ = validate_and_score("metrics", {"task": task.name, "label": bundle_label, "n_episodes": n,
                                                  "success_rate": report.success_rate, "ci_low": lo, "ci_high": hi,
                                                  "cumulative_failure": report.cumulative_failure})
    report.data_quality = validated["data_quality"]
    return report


def evaluate(bundle: PolicyBundle, task: TaskSpec, cfg: PipelineConfig, regime: str = "sim",
             out_dir: Optional[Union[str, Path]] = None, workers: int = 1) -> MetricsReport:
    """`cfg.eval.n_episodes` episodes per evaluation seed; reports are written under `out_dir` when given."""
    jobs = [(s, e) for s in cfg.eval.seeds for e in range(cfg.eval.n_episodes)]

    def one(job):
        return run_episode(bundle, task, cfg, regime, *job)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    report = summarize(results, bundle.label, task, cfg, regime)
    logger.info("  ✔ eval %s [%s]: success %.2f (%d/%d, CI %.2f-%.2f)", bundle.label, regime,
                report.success_rate, report.successes, report.n_episodes, report.ci_low, report.ci_high)
    if out_dir is not None:
        write_report(report, results, Path(out_dir) / f"{bundle.label}_{regime}")
    return report


def write_report(report: MetricsReport, results: Sequence[EpisodeResult], prefix: Path) -> None:
    """`<prefix>.json` summary, `<prefix>_stages.csv` (plot-ready failure curve), `<prefix>_episodes.csv`."""
    prefix.parent.mkdir(parents=True, exist_ok=True)
    prefix.with_name(prefix.name + ".json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True),
                                                        encoding="utf-8")
    pd.DataFrame({"stage": report.stages, "cumulative_failure": report.cumulative_failure,
                  "failures": [report.failure_histogram[s] for s in report.stages]}).to_csv(
        prefix.with_name(prefix.name + "_stages.csv"), index=False, float_format="%.6g")
    rows = [{"seed": r.seed, "success": int(r.success), "reached_stage": r.reached_stage,
             "failure_stage": r.failure_stage, "failure_cause": r.failure_cause or "", "steps": r.steps,
             "out_of_order": r.out_of_order} for r in results]
    pd.DataFrame(rows).to_csv(prefix.with_name(prefix.name + "_episodes.csv"), index=False)
    traced = [r for r in results if r.trace is not None]
    for r in traced:
        path = prefix.parent / "traces" / f"{prefix.name}_{r.seed}.cols"
        write_columnar(r.trace, path)
        r.trace_path = str(path)


__all__ = ["PolicyBundle", "MetricsReport", "binomial_interval", "cumulative_failure", "survival_failure",
           "deployment_randomization", "make_kick", "run_episode", "summarize", "evaluate", "write_report"]
