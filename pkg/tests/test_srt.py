# tests/test_srt.py
import numpy as np
import pytest

from skillchain.errors import EmptyDataset, MissingFamily
from skillchain.learn.normalize import RangeNormalizer, StandardNormalizer
from skillchain.schema.model_schema import DiffusionHeadSpec, MlpSpec, OptimizerConfig, TransformerSpec
from skillchain.schema.srt_schema import ChainingConfig, SrtConfig
from skillchain.srt import (OracleRouter, OracleSkill, RouteStep, Router, SkillController, SrtOutput, SrtPolicy,
                            SrtRouter, SrtWindows, execute_long_horizon, srt_infer, stage_names, train_srt)
from skillchain.srt.train import check_families
from skillchain.tasks import sample_initial_state
from skillchain.transition import label_stages
from skillchain.world import hold_control
from skillchain.world.observe import observation_dim


def tiny_cfg(**kw) -> SrtConfig:
    base = dict(transformer=TransformerSpec(hidden=32, heads=2, blocks=1), history=4, chunk=3,
                action_head=MlpSpec(widths=[32]), encoder=MlpSpec(widths=[32]), batch_size=32, steps=300,
                optimizer=OptimizerConfig(lr=3e-3), log_every=100, val_fraction=0.2)
    base.update(kw)
    return SrtConfig(**base)


def synthetic_families(K: int = 2, per_family: int = 6, T: int = 5, seed: int = 0):
    """Transitions whose last frame is flagged in the observation and labelled with the destination skill."""
    rng = np.random.default_rng(seed)
    families = {}
    for i in range(1, K + 1):
        trajs = []
        for _ in range(per_family):
            t = np.arange(T)
            obs = np.column_stack([np.full(T, float(i)), t / (T - 1), (t == T - 1).astype(float)])
            obs += rng.normal(0.0, 0.01, obs.shape)
            action = np.column_stack([0.1 * i + 0.01 * t, -0.02 * t])
            trajs.append({"observation": obs, "action": action, "stage": label_stages(T, i, 1)})
        families[i] = trajs
    return families


def tiny_policy(cfg: SrtConfig, obs_dim: int, dof: int, K: int = 2, center=None) -> SrtPolicy:
    rng = np.random.default_rng(0)
    center = np.zeros(dof) if center is None else np.asarray(center, float)
    action_norm = RangeNormalizer.fit(np.vstack([center - 0.1, center + 0.1]))
    obs_norm = StandardNormalizer.fit(rng.normal(size=(32, obs_dim)), cfg.obs_clip)
    return SrtPolicy(cfg, obs_dim, dof, dof, K, action_norm, obs_norm)


def test_margin_is_top_two_gap():
    out = SrtOutput(np.zeros((1, 2)), 1, np.array([0.2, 0.7, 0.1]))
    assert out.margin == pytest.approx(0.5)
    assert SrtOutput(np.zeros((1, 2)), 0, np.array([1.0])).margin == 1.0


def test_window_left_pads_short_histories():
    policy = tiny_policy(tiny_cfg(), obs_dim=3, dof=2)
    hist = [np.full(3, 1.0), np.full(3, 2.0)]
    obs, pad = policy.window(hist)
    assert obs.shape == (4, 3)
    assert pad.tolist() == [True, True, False, False]
    np.testing.assert_array_equal(obs[:2], 0.0)
    np.testing.assert_array_equal(obs[3], 2.0)

    long = [np.full(3, float(k)) for k in range(7)]
    obs, pad = policy.window(long)
    assert not pad.any()
    assert obs[:, 0].tolist() == [3.0, 4.0, 5.0, 6.0]


def test_inference_needs_an_observation():
    policy = tiny_policy(tiny_cfg(), obs_dim=3, dof=2)
    with pytest.raises(ValueError):
        policy.infer([])


def test_inference_output_shapes_and_probabilities():
    policy = tiny_policy(tiny_cfg(), obs_dim=3, dof=2, K=3)
    out = srt_infer(policy, [np.zeros(3)])
    assert out.actions.shape == (3, 2)
    assert out.probs.shape == (4,)
    assert out.probs.sum() == pytest.approx(1.0, abs=1e-5)
    assert 0 <= out.stage <= 3
    # actions stay inside the fitted range after clipping
    assert np.all(np.abs(out.actions) <= 0.1 + 1e-6)


def test_diffusion_inference_is_reproducible_under_a_fixed_seed():
    spec = DiffusionHeadSpec(pred_horizon=8, action_horizon=4, train_timesteps=20, inference_steps=4,
                             embed_dim=16, down_dims=[16, 32], width_scale=1.0, n_groups=8)
    policy = tiny_policy(tiny_cfg(head="diffusion", diffusion=spec), obs_dim=3, dof=2)
    hist = [np.ones(3), np.zeros(3)]
    a, b = srt_infer(policy, hist, seed=4), srt_infer(policy, hist, seed=4)
    np.testing.assert_array_equal(a.actions, b.actions)
    np.testing.assert_array_equal(a.probs, b.probs)
    assert a.actions.shape == (3, 2)


def test_diffusion_horizon_must_cover_the_chunk():
    with pytest.raises(ValueError):
        tiny_cfg(head="diffusion", chunk=10, diffusion=DiffusionHeadSpec(pred_horizon=8, action_horizon=4))


def test_windows_pad_before_each_trajectory_start():
    families = synthetic_families(K=1, per_family=2, T=3)
    data = SrtWindows(families, history=4, predicted=2)
    assert len(data) == 6
    # first frame of the second trajectory sees only itself
    assert data.obs_idx[3].tolist() == [-1, -1, -1, 3]
    assert data.obs_idx[5].tolist() == [-1, 3, 4, 5]
    # actions past the end repeat the last one
    assert data.act_idx[2].tolist() == [2, 2]
    obs, pad, actions, stages = data.windows(np.array([3]))
    assert pad[0].tolist() == [True, True, True, False]
    np.testing.assert_array_equal(obs[0, :3], 0.0)
    assert actions.shape == (1, 2, 2)
    assert stages.tolist() == [0]


def test_windows_reject_an_empty_dataset():
    with pytest.raises(EmptyDataset):
        SrtWindows({1: []}, history=4, predicted=2)


def test_missing_family_names_the_skill():
    families = synthetic_families(K=3)
    families[2] = []
    with pytest.raises(MissingFamily) as exc:
        check_families(families, 3)
    assert exc.value.skill == 2
    with pytest.raises(MissingFamily):
        train_srt(families, 3, tiny_cfg(steps=1), dof=2)


def test_srt_learns_the_handoff_frame(tmp_path):
    families = synthetic_families(K=2, per_family=8)
    policy, df = train_srt(families, 2, tiny_cfg(), dof=2, metrics_path=tmp_path / "srt.csv")
    assert list(df.columns) == ["step", "loss", "action_loss", "stage_loss", "val_stage_acc"]
    assert df["step"].tolist() == [100, 200, 300]
    assert (tmp_path / "srt.csv").exists()
    assert policy.meta["train_stage_acc"] >= 0.97

    last = families[2][0]["observation"]
    out = srt_infer(policy, list(last))
    assert out.stage == 2
    out = srt_infer(policy, list(last[:2]))
    assert out.stage == 0


def test_srt_checkpoint_round_trip(tmp_path):
    policy = tiny_policy(tiny_cfg(), obs_dim=3, dof=2)
    policy.meta["val_stage_acc"] = 0.5
    path = policy.save(tmp_path / "srt.ckpt")
    loaded = SrtPolicy.load(path)
    hist = [np.ones(3)]
    np.testing.assert_allclose(srt_infer(loaded, hist).actions, srt_infer(policy, hist).actions)
    assert loaded.meta["val_stage_acc"] == 0.5
    assert loaded.K == 2


def test_chaining_config_bounds():
    assert ChainingConfig().c_exec == 5
    with pytest.raises(ValueError):
        ChainingConfig(c_exec=0)
    with pytest.raises(ValueError):
        ChainingConfig(c_exec=11)


def test_srt_router_re_infers_every_c_exec_actions(nominal_state):
    model = nominal_state.model
    dof = model.robot.dof
    cfg = tiny_cfg(decimation=2)
    policy = tiny_policy(cfg, observation_dim(model, "pose"), dof, K=4, center=nominal_state.robot.q)
    router = SrtRouter(policy, ChainingConfig(c_exec=2), seed=3, noisy=False)
    router.reset(nominal_state, 1)
    steps = [router.act(nominal_state) for _ in range(8)]
    assert [s.inferred for s in steps] == [True, False, False, False, True, False, False, False]
    # each action is held for `decimation` simulator steps
    np.testing.assert_array_equal(steps[0].target, steps[1].target)
    assert router.inferences == 2
    assert router.history_length() == 4


class ScriptedRouter(Router):
    """Holds position, then emits the given stage predictions one per step."""

    def __init__(self, script, hold_steps: int = 0):
        self.script = list(script)
        self.hold_steps = hold_steps

    def reset(self, state, expected):
        self.queue = list(self.script)
        self.left = self.hold_steps

    def act(self, state):
        if self.left > 0:
            self.left -= 1
            return RouteStep(hold_control(state))
        if not self.queue:
            return RouteStep(hold_control(state))
        item = self.queue.pop(0)
        if item is None:
            return RouteStep(None)
        stage, margin = item
        return RouteStep(hold_control(state), stage, margin, True)

    def name(self):
        return "scripted"


class HoldSkill(SkillController):
    def reset(self, state):
        pass

    def act(self, state):
        return hold_control(state)


def test_stage_names_alternate():
    assert stage_names(2) == ["transition_1", "skill_1", "transition_2", "skill_2"]


def test_router_giving_up_is_a_no_path_failure(bulb_task, nominal_state):
    result = execute_long_horizon(nominal_state, ScriptedRouter([None]), [HoldSkill()] * bulb_task.K, bulb_task,
                                  ChainingConfig())
    assert not result.success
    assert result.failure_stage == "transition_1"
    assert result.failure_cause == "no-path"
    assert result.reached_stage == 0
    assert result.outcomes[0] == "failure"
    assert set(result.outcomes[1:]) == {"not-attempted"}


def test_out_of_order_predictions_are_suppressed_and_counted(bulb_task, nominal_state):
    router = ScriptedRouter([(3, 0.9), (2, 0.95), (1, 0.3), (1, 0.9)], hold_steps=2)
    cfg = ChainingConfig(skill_timeout=3)
    result = execute_long_horizon(nominal_state, router, [HoldSkill()] * bulb_task.K, bulb_task, cfg, record=True)
    assert result.out_of_order == 2
    assert result.outcomes[:2] == ["success", "failure"]
    assert result.failure_stage == "skill_1"
    assert result.failure_cause == "timeout"
    # two holds, three rejected predictions, then three skill steps
    assert result.steps == 2 + 3 + 3
    assert len(result.trace) == result.steps + 1
    assert result.trace.stages.tolist() == [0] * 5 + [1] * 4


def test_low_margin_handoff_times_out(bulb_task, nominal_state):
    router = ScriptedRouter([(1, 0.3)] * 50)
    cfg = ChainingConfig(transition_timeout=10)
    result = execute_long_horizon(nominal_state, router, [HoldSkill()] * bulb_task.K, bulb_task, cfg)
    assert result.failure_stage == "transition_1"
    assert result.failure_cause == "timeout"
    assert result.steps == 10


def test_episode_cap_ends_the_episode(bulb_task, nominal_state):
    router = ScriptedRouter([], hold_steps=100)
    cfg = ChainingConfig(episode_cap=7, transition_timeout=50)
    result = execute_long_horizon(nominal_state, router, [HoldSkill()] * bulb_task.K, bulb_task, cfg)
    assert result.failure_cause == "cap"
    assert result.steps == 7


def test_skill_count_must_match_the_task(bulb_task, nominal_state):
    with pytest.raises(ValueError):
        execute_long_horizon(nominal_state, ScriptedRouter([]), [HoldSkill()], bulb_task, ChainingConfig())


@pytest.mark.slow
def test_oracle_chain_completes_the_task(bulb_task):
    rng = np.random.default_rng(21)
    state = sample_initial_state(bulb_task, rng)
    skills = [OracleSkill(bulb_task, i, rng) for i in range(1, bulb_task.K + 1)]
    result = execute_long_horizon(state, OracleRouter(bulb_task, rng), skills, bulb_task,
                                  ChainingConfig(transition_timeout=4000), seed=21)
    assert result.success, (result.failure_stage, result.failure_cause)
    assert result.reached_stage == bulb_task.K
    assert set(result.outcomes) == {"success"}
    assert result.failure_stage == "none"


@pytest.mark.slow
def test_zero_skill_timeout_fails_the_first_skill(bulb_task):
    rng = np.random.default_rng(22)
    state = sample_initial_state(bulb_task, rng)
    skills = [OracleSkill(bulb_task, i, rng) for i in range(1, bulb_task.K + 1)]
    result = execute_long_horizon(state, OracleRouter(bulb_task, rng), skills, bulb_task,
                                  ChainingConfig(skill_timeout=0, transition_timeout=4000))
    assert result.outcomes[0] == "success"
    assert result.failure_stage == "skill_1"
    assert result.failure_cause == "timeout"
    assert result.reached_stage == 0
