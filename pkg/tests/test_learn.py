# tests/test_learn.py
import numpy as np
import pytest
import torch

from skillchain.errors import EmptyDataset
from skillchain.learn import (ChunkDataset, ChunkPolicy, MixedDataset, RangeNormalizer, RunningMeanStd,
                              StandardNormalizer, adapt_lr, clipped_surrogate, combined_action, epsilon, fit_policy,
                              in_exemplar_ball, make_policy, make_termination, validation_loss)
from skillchain.schema.learn_schema import (BcConfig, CollectConfig, ExplorationSchedule, PolicySpec, PpoConfig)
from skillchain.schema.model_schema import MlpSpec, OptimizerConfig


def test_epsilon_ramps_linearly_then_saturates():
    sched = ExplorationSchedule(horizon=1000)
    assert epsilon(0, sched) == 0.0
    assert epsilon(250, sched) == 0.25
    assert epsilon(1000, sched) == 1.0
    assert epsilon(5000, sched) == 1.0
    with pytest.raises(ValueError):
        epsilon(-1, sched)


def test_adapt_lr_follows_the_kl_band():
    cfg = PpoConfig(desired_kl=0.16, min_lr=1e-6, max_lr=1e-2)
    assert adapt_lr(1e-3, 0.5, cfg) == pytest.approx(5e-4)
    assert adapt_lr(1e-3, 0.01, cfg) == pytest.approx(1.5e-3)
    assert adapt_lr(1e-3, 0.16, cfg) == 1e-3
    assert adapt_lr(1e-2, 0.0, cfg) == 1e-2
    assert adapt_lr(1e-6, 1.0, cfg) == 1e-6


def test_clipped_surrogate_stops_gradient_outside_the_trust_region():
    ratio = torch.tensor([1.5, 0.5, 1.1], requires_grad=True)
    adv = torch.tensor([1.0, -1.0, 1.0])
    loss = clipped_surrogate(ratio, adv, 0.2)
    assert loss.tolist() == pytest.approx([-1.2, 0.8, -1.1])
    loss.sum().backward()
    assert ratio.grad.tolist() == pytest.approx([0.0, 0.0, -1.0])


def test_combined_action_mixes_with_probability_eps():
    rng = np.random.default_rng(0)
    base, res = np.zeros((4000, 2)), np.full((4000, 2), 5.0)
    out, used = combined_action(base, res, 0.3, rng, scale=0.3)
    assert used.mean() == pytest.approx(0.3, abs=0.03)
    assert np.allclose(out[used], 0.3)
    assert np.all(out[~used] == 0.0)
    none, used0 = combined_action(base, res, 0.0, rng)
    assert not used0.any() and np.all(none == 0.0)


def test_range_normalizer_maps_onto_unit_box():
    data = np.array([[0.0, 2.0, 1.0], [10.0, 4.0, 1.0]])
    norm = RangeNormalizer.fit(data)
    out = norm.normalize(data)
    assert out[:, :2].tolist() == [[-1.0, -1.0], [1.0, 1.0]]
    assert np.all(out[:, 2] == 0.0)
    assert np.allclose(norm.denormalize(norm.normalize(np.array([5.0, 3.0, 1.0]))), [5.0, 3.0, 1.0])
    assert np.allclose(RangeNormalizer.from_dict(norm.to_dict()).high, norm.high)


def test_standard_normalizer_clips():
    data = np.random.default_rng(0).normal(3.0, 2.0, (5000, 2))
    norm = StandardNormalizer.fit(data, clip=1.0)
    assert np.allclose(norm.mean, 3.0, atol=0.1)
    assert np.all(np.abs(norm.normalize(data)) <= 1.0)


def test_standard_normalizer_pools_point_axes():
    rng = np.random.default_rng(0)
    q = rng.normal(0.0, 1.0, (100, 2))
    pts = np.concatenate([rng.normal(5.0, 1.0, (100, 1)), rng.normal(-5.0, 1.0, (100, 1)),
                          rng.normal(1.0, 1.0, (100, 1)), rng.normal(-1.0, 1.0, (100, 1))], axis=1)
    norm = StandardNormalizer.fit(np.concatenate([q, pts], axis=1), pooled_from=2)
    assert norm.mean[2] == pytest.approx(norm.mean[4])
    assert norm.mean[3] == pytest.approx(norm.mean[5])
    assert norm.mean[2] == pytest.approx(3.0, abs=0.3)


def test_running_mean_std_matches_batch_moments():
    data = np.random.default_rng(1).normal(2.0, 3.0, (600, 3))
    rms = RunningMeanStd(3)
    for chunk in np.split(data, 6):
        rms.update(chunk)
    assert np.allclose(rms.mean, data.mean(axis=0), atol=1e-6)
    assert np.allclose(rms.var, data.var(axis=0), rtol=1e-4)


def test_chunk_windows_clamp_at_trajectory_edges():
    obs = np.arange(4, dtype=float)[:, None]
    act = np.arange(4, dtype=float)[:, None] * 10
    ds = ChunkDataset([(obs, act)], obs_horizon=2, chunk=3)
    o, a = ds.windows(np.array([0, 3]))
    assert o[:, :, 0].tolist() == [[0.0, 0.0], [2.0, 3.0]]
    assert a[:, :, 0].tolist() == [[0.0, 10.0, 20.0], [30.0, 30.0, 30.0]]


def test_chunk_windows_never_cross_trajectories():
    parts = [(np.zeros((3, 1)), np.zeros((3, 1))), (np.ones((3, 1)), np.ones((3, 1)))]
    ds = ChunkDataset(parts, obs_horizon=3, chunk=4)
    o, a = ds.windows(np.arange(len(ds)))
    for k in range(len(ds)):
        assert len(set(o[k].ravel())) == 1 and len(set(a[k].ravel())) == 1


def test_empty_dataset():
    with pytest.raises(EmptyDataset):
        ChunkDataset([(np.zeros((0, 2)), np.zeros((0, 2)))], 2, 4)


def test_mixed_dataset_respects_weights():
    sim = ChunkDataset([(np.zeros((10, 1)), np.zeros((10, 1)))], 1, 1)
    demo = ChunkDataset([(np.ones((10, 1)), np.ones((10, 1)))], 1, 1)
    mixed = MixedDataset([sim, demo], [0.75, 0.25])
    o, a, source = mixed.sample(np.random.default_rng(0), 4000)
    assert (source == 1).mean() == pytest.approx(0.25, abs=0.03)
    assert np.array_equal(o[:, 0, 0], source.astype(float))
    with pytest.raises(ValueError):
        MixedDataset([sim], [0.0])


def test_exemplar_ball(nominal_state):
    moved = nominal_state.copy()
    moved.bodies["bulb"].pose = moved.bodies["bulb"].pose + np.array([0.005, 0.0, 0.05])
    far = nominal_state.copy()
    far.bodies["bulb"].pose = far.bodies["bulb"].pose + np.array([0.05, 0.0, 0.0])
    assert in_exemplar_ball(moved, [nominal_state], pos_tol=0.01, rot_tol=0.1)
    assert not in_exemplar_ball(moved, [nominal_state], pos_tol=0.01, rot_tol=0.01)
    assert not in_exemplar_ball(far, [nominal_state])
    assert in_exemplar_ball(far, [nominal_state, far])


def test_make_termination(bulb_task, nominal_state):
    predicate = make_termination(bulb_task, 1, CollectConfig())
    assert predicate(nominal_state) is False
    ball = make_termination(bulb_task, 1, CollectConfig(termination="exemplar"), [nominal_state])
    assert ball(nominal_state)
    with pytest.raises(ValueError):
        make_termination(bulb_task, 1, CollectConfig(termination="exemplar"))


def _toy_policy():
    rng = np.random.default_rng(0)
    obs = rng.uniform(-1.0, 1.0, (64, 3))
    act = np.concatenate([obs[:, :2] * 0.5, obs[:, 2:] ** 2], axis=1)
    spec = PolicySpec(obs_horizon=1, chunk=1, exec_horizon=1, trunk=MlpSpec(widths=[64, 64]))
    return make_policy(spec, obs, act, dof=3), ChunkDataset([(obs, act)], 1, 1)


def test_bc_fits_a_smooth_map():
    policy, ds = _toy_policy()
    before = validation_loss(policy, *ds.windows(np.arange(len(ds))))
    cfg = BcConfig(steps=400, batch_size=32, log_every=100,
                   optimizer=OptimizerConfig(algorithm="adam", lr=1e-3))
    df = fit_policy(policy, lambda r, n: ds.sample(r, n), cfg)
    after = validation_loss(policy, *ds.windows(np.arange(len(ds))))
    assert list(df["step"]) == [100, 200, 300, 400]
    assert df["loss"].dtype == np.float64 and np.isfinite(df["loss"]).all()
    assert after < 0.25 * before


def test_policy_checkpoint_round_trip(tmp_path):
    policy, ds = _toy_policy()
    o, _ = ds.windows(np.arange(8))
    back = ChunkPolicy.load(policy.save(tmp_path / "policy.ckpt"))
    assert np.allclose(back.predict(o), policy.predict(o))
    assert np.allclose(back.action_norm.low, policy.action_norm.low)
