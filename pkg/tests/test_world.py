# tests/test_world.py
import numpy as np
import pytest
from scipy import stats

from skillchain.errors import MalformedSpec, NonFiniteState, UnsupportedMode
from skillchain.schema.world_schema import BodyConfig, DistributionConfig, RandomizationSpec, ShapeConfig, WorldConfig
from skillchain.world import (MODES, RandomizationSample, WorldModel, apply_randomization, hold_control, make_state,
                              observation_dim, observe, sample_randomization, step, step_batch)
from skillchain.world.randomization import check_distribution, draw


def _same(a, b):
    assert np.array_equal(a.robot.q, b.robot.q)
    assert np.array_equal(a.robot.qd, b.robot.qd)
    for name in a.bodies:
        assert np.array_equal(a.bodies[name].pose, b.bodies[name].pose)
        assert np.array_equal(a.bodies[name].velocity, b.bodies[name].velocity)


def _reach(state):
    return hold_control(state) + 0.05


def test_step_is_deterministic(nominal_state):
    a = b = nominal_state
    for _ in range(25):
        a = step(a, _reach(a))
        b = step(b, _reach(b))
    _same(a, b)
    assert a.tick == 25
    assert a.time == pytest.approx(25 * nominal_state.model.dt)


def test_step_does_not_mutate_its_input(nominal_state):
    before = nominal_state.copy()
    step(nominal_state, _reach(nominal_state))
    _same(nominal_state, before)
    assert nominal_state.tick == 0


def test_step_is_deterministic_under_action_noise(bulb_task, rng):
    spec = RandomizationSpec()
    template = apply_randomization(bulb_task.nominal_state(seed=3), sample_randomization(spec, rng))
    a = step(template, _reach(template))
    b = step(template, _reach(template))
    _same(a, b)


def test_step_rejects_wrong_control_width(nominal_state):
    with pytest.raises(ValueError):
        step(nominal_state, np.zeros(nominal_state.model.robot.dof + 1))


def test_non_finite_state_is_reported(nominal_state):
    broken = nominal_state.copy()
    broken.bodies["bulb"].velocity = np.array([np.nan, 0.0, 0.0])
    with pytest.raises(NonFiniteState):
        step(broken, hold_control(broken))


def test_hold_control_is_a_copy(nominal_state):
    c = hold_control(nominal_state)
    c += 1.0
    assert not np.array_equal(c, hold_control(nominal_state))


def test_step_batch_matches_individual_steps(nominal_state):
    other = nominal_state.copy()
    other.robot.q = other.robot.q + 0.01
    states = [nominal_state, other]
    controls = [_reach(s) for s in states]
    out, failures = step_batch(states, controls, workers=2)
    assert failures == {}
    for s, c, o in zip(states, controls, out):
        _same(step(s, c), o)


def test_step_batch_collects_failures(nominal_state):
    broken = nominal_state.copy()
    broken.bodies["bulb"].velocity = np.array([np.nan, 0.0, 0.0])
    out, failures = step_batch([nominal_state, broken], [hold_control(nominal_state), hold_control(broken)])
    assert out[0] is not None and out[1] is None
    assert list(failures) == [1]


def test_step_batch_length_mismatch(nominal_state):
    with pytest.raises(ValueError):
        step_batch([nominal_state], [])


@pytest.mark.parametrize("mode", MODES)
def test_observation_width_matches_declared_dim(nominal_state, rng, mode):
    obs = observe(nominal_state, mode, rng)
    assert obs.dim == observation_dim(nominal_state.model, mode)
    assert np.all(np.isfinite(obs.vector))


def test_pose_observation_layout(bulb_task, nominal_state, rng):
    model = nominal_state.model
    assert observation_dim(model, "pose") == model.robot.dof + 3 * len(model.dynamic_names)
    obs = observe(nominal_state, "pose", rng, noisy=False)
    assert np.array_equal(obs.vector[:model.robot.dof], nominal_state.robot.q)


def test_pointset_observation_carries_points(nominal_state, rng):
    obs = observe(nominal_state, "pointset", rng)
    assert obs.points.shape == (nominal_state.model.observation.n_points, 2)


def test_unsupported_mode(nominal_state, rng):
    with pytest.raises(UnsupportedMode):
        observe(nominal_state, "rgb", rng)
    with pytest.raises(UnsupportedMode):
        observation_dim(nominal_state.model, "rgb")


def test_default_ranges_sample_inside_support(rng):
    spec = RandomizationSpec()
    for _ in range(50):
        sample = sample_randomization(spec, rng)
        for name, d in spec.params.items():
            if d.dist in ("uniform", "exp_uniform"):
                assert d.a <= sample.values[name] <= d.b


def test_uniform_draws_match_their_distribution(rng):
    d = DistributionConfig(kind="scaling", dist="uniform", a=0.5, b=1.5)
    x = draw(d, rng, 4000)
    assert stats.kstest(x, stats.uniform(loc=0.5, scale=1.0).cdf).pvalue > 1e-3


def test_exp_uniform_is_uniform_in_log_space(rng):
    d = DistributionConfig(kind="scaling", dist="exp_uniform", a=0.3, b=3.0)
    x = draw(d, rng, 4000)
    lo, hi = np.log(0.3), np.log(3.0)
    assert stats.kstest(np.log(x), stats.uniform(loc=lo, scale=hi - lo).cdf).pvalue > 1e-3


def test_normal_parameter_is_a_variance(rng):
    d = DistributionConfig(kind="additive", dist="normal", a=1.0, b=4.0)
    x = draw(d, rng, 20000)
    assert np.mean(x) == pytest.approx(1.0, abs=0.05)
    assert np.std(x) == pytest.approx(2.0, rel=0.03)


def test_degenerate_uniform_returns_the_point(rng):
    d = DistributionConfig(kind="scaling", dist="uniform", a=1.0, b=1.0)
    assert float(draw(d, rng)) == 1.0
    assert np.array_equal(draw(d, rng, 3), np.ones(3))


@pytest.mark.parametrize("d", [
    DistributionConfig(kind="scaling", dist="uniform", a=2.0, b=1.0),
    DistributionConfig(kind="scaling", dist="exp_uniform", a=0.0, b=1.0),
    DistributionConfig(kind="additive", dist="normal", a=0.0, b=-1.0),
])
def test_malformed_distributions(d, rng):
    with pytest.raises(MalformedSpec):
        check_distribution("param", d)
    with pytest.raises(MalformedSpec):
        sample_randomization(RandomizationSpec(params={"object_mass": d}), rng)


def test_identity_randomization_leaves_physics_alone(nominal_state, rng):
    out = apply_randomization(nominal_state, sample_randomization(RandomizationSpec.identity(), rng))
    for name, b in out.model.bodies.items():
        assert b.mass == pytest.approx(nominal_state.model.bodies[name].mass)
        assert b.friction == pytest.approx(nominal_state.model.bodies[name].friction)
    assert np.allclose(out.model.robot.kp, nominal_state.model.robot.kp)


def test_apply_randomization_scales_mass_without_touching_template(nominal_state):
    sample = RandomizationSample(values={"object_mass": 2.0})
    out = apply_randomization(nominal_state, sample)
    bulb = nominal_state.model.bodies["bulb"]
    assert out.model.bodies["bulb"].mass == pytest.approx(2.0 * bulb.mass)
    assert nominal_state.model.bodies["bulb"].mass == bulb.mass
    assert out.bodies["bulb"].model is out.model.bodies["bulb"]


def test_widened_spec_keeps_centres(rng):
    spec = RandomizationSpec()
    wide = spec.widened(2.0)
    d, w = spec.params["object_friction"], wide.params["object_friction"]
    assert (w.a + w.b) / 2 == pytest.approx((d.a + d.b) / 2)
    assert w.b - w.a == pytest.approx(2.0 * (d.b - d.a))
    assert wide.params["action"].b == pytest.approx(4.0 * spec.params["action"].b)


def _disc_world(pose, **world):
    # far from the arm so only the floor can touch it
    disc = BodyConfig(name="disc", shape=ShapeConfig(kind="circle", radius=0.02), mass=0.05, pose=pose)
    model = WorldModel.from_config(WorldConfig(**world), [disc])
    return make_state(model, {"disc": pose})


def _run(state, n):
    for _ in range(n):
        state = step(state, hold_control(state))
    return state


def test_free_fall_follows_the_integrator_closed_form():
    g, dt, k = 9.81, 0.01, 50
    state = _run(_disc_world([3.0, 1.0, 0.0], gravity=[0.0, -g], table_gravity=0.0, dt=dt), k)
    disc = state.bodies["disc"]
    assert disc.pose[1] == pytest.approx(1.0 - g * dt * dt * k * (k + 1) / 2, abs=1e-9)
    assert disc.velocity[1] == pytest.approx(-g * dt * k, abs=1e-9)
    assert disc.pose[0] == pytest.approx(3.0)


def test_gravity_scale_scales_one_step_of_free_fall():
    one = _run(_disc_world([3.0, 1.0, 0.0], gravity=[0.0, -9.81], table_gravity=0.0), 1)
    scaled = _run(_disc_world([3.0, 1.0, 0.0], gravity=[0.0, -0.9 * 9.81], table_gravity=0.0), 1)
    assert 1.0 - scaled.bodies["disc"].pose[1] == pytest.approx(0.9 * (1.0 - one.bodies["disc"].pose[1]))


def test_resting_disc_stays_on_the_floor():
    state = _run(_disc_world([3.0, 0.02, 0.0], gravity=[0.0, -9.81], floor_y=0.0), 100)
    disc = state.bodies["disc"]
    depth = 0.0 - (disc.pose[1] - 0.02)
    assert depth <= state.model.contact.penetration_tolerance + 1e-9
    assert abs(disc.velocity[1]) <= 1e-3


def test_frictionless_disc_keeps_its_velocity():
    state = _disc_world([3.0, 0.0, 0.0], table_friction=0.0)
    v0 = np.array([0.3, -0.2, 1.0])
    state.bodies["disc"].velocity = v0.copy()
    out = _run(state, 100)
    disc = out.bodies["disc"]
    assert np.allclose(disc.velocity, v0)
    assert np.allclose(disc.pose[:2], [3.0 + 0.3, -0.2])
    assert disc.unwrapped == pytest.approx(1.0)
