# tests/test_pipeline.py
import json

import numpy as np
import pandas as pd
import pytest

from skillchain.cli import ARTIFACT_ENV, artifact_root, build_parser, load_config, main, seglang_check
from skillchain.evaluate import (PolicyBundle, binomial_interval, cumulative_failure, deployment_randomization,
                                 evaluate, make_kick, summarize, survival_failure)
from skillchain.pipeline import (ABLATION_ROWS, STAGES, ablation_config, chain_key, ordering_checks,
                                 predefined_labels, seeded, stage_dir, stage_keys)
from skillchain.schema.pipeline_schema import AblationToggles, EvalConfig, PipelineConfig
from skillchain.schema.world_schema import RandomizationSpec
from skillchain.srt import EpisodeResult

S, F, N = "success", "failure", "not-attempted"


def episode(outcomes, stage="none", cause=None, reached=0):
    return EpisodeResult(success=stage == "none", reached_stage=reached, outcomes=outcomes, failure_stage=stage,
                         failure_cause=cause)


@pytest.fixture
def mixed_results():
    return [
        episode([S, S, S, S], reached=2),
        episode([S, F, N, N], "skill_1", "timeout"),
        episode([S, S, F, N], "transition_2", "collision", reached=1),
        episode([F, N, N, N], "transition_1", "no-path"),
    ]


# -------------------------------
# Cache keys
# -------------------------------
def test_stage_keys_only_change_downstream(bulb_task):
    base = PipelineConfig()
    keys = stage_keys(base, bulb_task)
    assert set(keys) == set(STAGES)
    assert all(len(k) == 64 for k in keys.values())

    srt_only = stage_keys(base.model_copy(update={"srt": base.srt.model_copy(update={"steps": 10})}), bulb_task)
    for stage in ("demo", "segment", "train-skill", "gen-transitions"):
        assert srt_only[stage] == keys[stage]
    assert srt_only["train-srt"] != keys["train-srt"]
    assert srt_only["eval"] != keys["eval"]

    eval_only = stage_keys(base.model_copy(update={"eval": EvalConfig(n_episodes=3)}), bulb_task)
    assert [eval_only[s] == keys[s] for s in STAGES] == [True] * 5 + [False]

    demo = stage_keys(base.model_copy(update={"demo": base.demo.model_copy(update={"n_demos": 3})}), bulb_task)
    assert all(demo[s] != keys[s] for s in STAGES)


def test_transition_key_follows_skill_training(bulb_task):
    base = PipelineConfig()
    keys = stage_keys(base, bulb_task)
    more = stage_keys(base.model_copy(update={"collect": base.collect.model_copy(update={"n_target": 5})}), bulb_task)
    assert more["segment"] == keys["segment"]
    for stage in ("train-skill", "gen-transitions", "train-srt", "eval"):
        assert more[stage] != keys[stage]


def test_no_transition_has_no_transition_stages(bulb_task):
    cfg = PipelineConfig(toggles=AblationToggles(no_transition=True))
    keys = stage_keys(cfg, bulb_task)
    assert keys["gen-transitions"] == keys["train-srt"] == ""
    assert keys["eval"]
    assert cfg.eval.router == "planner"


def test_stage_dir_uses_a_key_prefix(tmp_path):
    key = chain_key("a", "b")
    assert stage_dir(tmp_path, "segment", key) == tmp_path / "segment" / key[:16]
    assert chain_key("a", "b") != chain_key("ab")


def test_config_hash_is_stable_and_sensitive():
    a, b = PipelineConfig(), PipelineConfig()
    assert a.config_hash() == b.config_hash()
    assert PipelineConfig(workers=2).config_hash() != a.config_hash()


def test_seeded_offsets_every_component_seed():
    cfg = seeded(PipelineConfig(), 3)
    base = PipelineConfig()
    assert cfg.seeds == [3]
    assert cfg.demo.seed == base.demo.seed + 3
    assert cfg.srt.seed == base.srt.seed + 3
    assert cfg.transition.seed == base.transition.seed + 3
    assert base.seeds == [0]


def test_predefined_labels_keep_every_run():
    phases = np.array([0] * 4 + [1] * 3 + [2] * 5 + [3] * 2)
    assert predefined_labels(phases, 0, np.random.default_rng(0)).tolist() == phases.tolist()
    rng = np.random.default_rng(1)
    for _ in range(50):
        labels = predefined_labels(phases, 10, rng)
        assert len(labels) == len(phases)
        assert np.all(np.diff(labels) >= 0)
        assert sorted(set(labels.tolist())) == [0, 1, 2, 3]


def test_ablation_rows_switch_one_toggle_each():
    cfg = PipelineConfig()
    for row in ABLATION_ROWS:
        out = ablation_config(cfg, row)
        assert out.toggles.label() == ("full" if row == "full" else row)
        assert out.eval.baseline is False
    assert ablation_config(cfg, "no-transition").eval.router == "planner"


def test_ordering_checks_compare_deployment_success():
    table = pd.DataFrame([
        {"row": "full", "regime": "deployment", "success_rate": 0.8},
        {"row": "full", "regime": "sim", "success_rate": 0.9},
        {"row": "no-transition", "regime": "deployment", "success_rate": 0.5},
        {"row": "no-sim-augmentation", "regime": "deployment", "success_rate": 0.75},
    ])
    assert ordering_checks(table) == {"full>=no-transition+0.10": True, "full>=no-sim-augmentation+0.10": False}
    assert ordering_checks(table[table["row"] == "full"]) == {}


# -------------------------------
# Metrics
# -------------------------------
def test_binomial_interval_is_exact():
    assert binomial_interval(0, 0) == (0.0, 1.0)
    lo, hi = binomial_interval(10, 10)
    assert hi == 1.0
    assert lo == pytest.approx(0.025 ** 0.1, rel=1e-3)
    lo, hi = binomial_interval(5, 10)
    assert lo < 0.5 < hi
    assert lo == pytest.approx(1.0 - hi, abs=1e-9)


def test_cumulative_failure_matches_survival(mixed_results):
    assert cumulative_failure(mixed_results, 2) == pytest.approx([0.25, 0.5, 0.75, 0.75])
    assert survival_failure(mixed_results, 2) == pytest.approx(cumulative_failure(mixed_results, 2))


def test_failure_curve_is_monotone_on_random_outcomes():
    rng = np.random.default_rng(0)
    results = []
    for _ in range(60):
        fail_at = int(rng.integers(0, 5))
        if fail_at == 4:
            results.append(episode([S] * 4, reached=2))
        else:
            outcomes = [S] * fail_at + [F] + [N] * (3 - fail_at)
            results.append(episode(outcomes, ["transition_1", "skill_1", "transition_2", "skill_2"][fail_at]))
    curve = cumulative_failure(results, 2)
    assert np.all(np.diff(curve) >= 0)
    assert curve == pytest.approx(survival_failure(results, 2))
    assert curve[-1] == pytest.approx(1.0 - sum(r.success for r in results) / len(results))


def test_episode_result_requires_consistent_failure_stage():
    with pytest.raises(ValueError):
        EpisodeResult(success=True, reached_stage=2, outcomes=[S] * 4, failure_stage="skill_1")


def test_summarize_counts_failures_by_stage_and_cause(bulb_task):
    results = [
        episode([S] * 8, reached=4),
        episode([S, F] + [N] * 6, "skill_1", "timeout"),
        episode([S, S, F] + [N] * 5, "transition_2", "collision", reached=1),
        episode([S, S, F] + [N] * 5, "transition_2", "slip", reached=1),
    ]
    report = summarize(results, "full", bulb_task, PipelineConfig(), "sim")
    assert report.n_episodes == 4 and report.successes == 1
    assert report.failure_histogram["skill_1"] == 1
    assert report.failure_histogram["skill_4"] == 0
    assert report.failure_causes["transition_2"] == {"collision": 1, "slip": 1}
    assert report.cumulative_failure[-1] == pytest.approx(0.75)
    assert 0.0 <= report.data_quality["score"] <= 1.0


def test_deployment_regime_widens_ranges_and_scales_noise():
    spec = RandomizationSpec()
    dep = deployment_randomization(spec, 1.25, 2.0)
    mass = dep.params["object_mass"]
    assert (mass.a, mass.b) == pytest.approx((0.375, 1.625))
    noise = dep.params["state_observation"]
    assert (noise.a, noise.b) == pytest.approx((-0.004, 0.004))
    action = dep.params["action"]
    assert action.b == pytest.approx(0.01 * 1.25 ** 2)
    assert spec.params["object_mass"].a == 0.5


def test_kick_fires_once_inside_the_window(nominal_state):
    rng = np.random.default_rng(0)
    disturb = make_kick(0.03, 0.0, [0.5, 0.5], 100, rng)
    state = nominal_state.copy()
    before = state.bodies["bulb"].pose.copy()
    for step in range(1, 50):
        disturb(step, state)
    np.testing.assert_array_equal(state.bodies["bulb"].pose, before)
    disturb(50, state)
    assert np.hypot(*(state.bodies["bulb"].pose[:2] - before[:2])) > 0.0
    moved = state.bodies["bulb"].pose.copy()
    disturb(51, state)
    np.testing.assert_array_equal(state.bodies["bulb"].pose, moved)


@pytest.mark.slow
def test_oracle_bundle_evaluation_writes_reports(tmp_path, bulb_task):
    cfg = PipelineConfig(eval=EvalConfig(n_episodes=2, seeds=[0], router="oracle", skills="oracle",
                                         write_traces=True, regimes=["sim"]))
    report = evaluate(PolicyBundle("oracle"), bulb_task, cfg, "sim", out_dir=tmp_path)
    assert report.n_episodes == 2
    assert report.stages[0] == "transition_1"
    summary = json.loads((tmp_path / "oracle_sim.json").read_text(encoding="utf-8"))
    assert summary["n_episodes"] == 2
    stages = pd.read_csv(tmp_path / "oracle_sim_stages.csv")
    assert list(stages["stage"]) == report.stages
    episodes = pd.read_csv(tmp_path / "oracle_sim_episodes.csv")
    assert len(episodes) == 2
    assert len(list((tmp_path / "traces").glob("oracle_sim_*.cols"))) == 2


# -------------------------------
# CLI
# -------------------------------
def test_artifact_root_precedence(monkeypatch, tmp_path):
    monkeypatch.delenv(ARTIFACT_ENV, raising=False)
    assert str(artifact_root(None)) == "output"
    monkeypatch.setenv(ARTIFACT_ENV, str(tmp_path))
    assert artifact_root(None) == tmp_path
    assert str(artifact_root("elsewhere")) == "elsewhere"


def test_parser_knows_every_stage_verb():
    parser = build_parser()
    for verb in list(STAGES) + ["pipeline", "ablate"]:
        args = parser.parse_args([verb, "--seed", "3", "--out", "x"])
        assert args.verb == verb and args.seed == 3 and args.out == "x"
    args = parser.parse_args(["ablate", "--rows", "full", "no-transition"])
    assert args.rows == ["full", "no-transition"]
    with pytest.raises(SystemExit):
        parser.parse_args(["deploy"])


def test_load_config_overrides_the_seed(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"task": "bulb-analog", "seeds": [0, 1, 2]}), encoding="utf-8")
    assert load_config(str(path), None).seeds == [0, 1, 2]
    assert load_config(str(path), 7).seeds == [7]
    assert load_config(None, None) == PipelineConfig()


def test_seglang_check_reports_well_formed_expressions(capsys):
    assert seglang_check("bulb-analog", "dist(bulb_center, socket_center) <= eps_pos", "predicate") == 0
    assert "✔" in capsys.readouterr().out
    assert seglang_check("bulb-analog", "dist(bulb_centre, socket_center) <= eps_pos", "predicate") == 1
    assert "❌" in capsys.readouterr().out
    assert seglang_check("bulb-analog", "dist(bulb_center, socket_center) <=", "predicate") == 1
    assert seglang_check("bulb-analog", None, "predicate") == 0


def test_main_exit_codes(tmp_path):
    assert main(["seglang-check", "bulb-analog"]) == 0
    assert main(["demo", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    assert (tmp_path / "logs" / "run.log").exists()
