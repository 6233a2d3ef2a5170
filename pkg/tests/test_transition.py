# tests/test_transition.py
import math

import numpy as np
import pytest
from scipy import stats

from skillchain.errors import EmptySet, Infeasible
from skillchain.schema.transition_schema import PlannerConfig, TransitionConfig
from skillchain.transition import CollisionChecker, dense_audit, label_stages, plan, sample_pair
from skillchain.transition.planner import (path_length, rrt_connect, shortcut, straight_line_with_repair,
                                           time_parameterize)


class StubChecker:
    """Configuration-space checker over a plain predicate."""

    def __init__(self, blocked=lambda q: False):
        self.blocked = blocked
        self.checks = 0

    def free(self, q):
        self.checks += 1
        return not self.blocked(q)

    def segment_free(self, a, b, resolution):
        n = max(1, int(math.ceil(np.max(np.abs(b - a)) / resolution)))
        return all(self.free(a + (b - a) * (k / n)) for k in range(1, n + 1))


def wall(q):
    return abs(q[0]) < 0.1 and q[1] < 0.5


LOWER, UPPER = np.array([-1.0, -1.0]), np.array([1.0, 1.0])


def test_sample_pair_draws_uniformly_from_both_sets():
    prev, nxt = ["a", "b", "c"], ["x", "y"]
    rng = np.random.default_rng(0)
    counts_prev = {k: 0 for k in prev}
    counts_next = {k: 0 for k in nxt}
    for _ in range(3000):
        s_end, s_start = sample_pair(prev, nxt, rng)
        counts_prev[s_end] += 1
        counts_next[s_start] += 1
    assert stats.chisquare(list(counts_prev.values())).pvalue > 0.001
    assert stats.chisquare(list(counts_next.values())).pvalue > 0.001


def test_sample_pair_accepts_an_initial_state_sampler():
    calls = []

    def sampler(rng):
        calls.append(rng)
        return "init"

    rng = np.random.default_rng(0)
    s_end, s_start = sample_pair(sampler, ["x"], rng)
    assert (s_end, s_start) == ("init", "x")
    assert calls == [rng]


def test_sample_pair_rejects_empty_sets(rng):
    with pytest.raises(EmptySet, match="initiation"):
        sample_pair(["a"], [], rng)
    with pytest.raises(EmptySet, match="termination"):
        sample_pair([], ["x"], rng)


@pytest.mark.parametrize("n, skill, handoff, expected", [
    (10, 3, 1, [0] * 9 + [3]),
    (2, 3, 5, [3, 3]),
    (4, 2, 0, [0, 0, 0, 0]),
    (5, 1, 2, [0, 0, 0, 1, 1]),
])
def test_label_stages_marks_only_the_handoff_tail(n, skill, handoff, expected):
    assert label_stages(n, skill, handoff).tolist() == expected


def test_identical_endpoints_give_a_single_frame_plan(nominal_state, rng):
    traj, plan_stats = plan(nominal_state, nominal_state.copy(), PlannerConfig(), rng, task_name="bulb-analog")
    assert len(traj) == 1
    assert traj.meta.source == "transition"
    np.testing.assert_allclose(traj.actions[0], nominal_state.robot.q)
    assert plan_stats.frames == 0


def test_time_parameterization_respects_the_velocity_bound():
    path = [np.zeros(3), np.array([0.3, -0.1, 0.0]), np.array([0.3, 0.5, 0.2])]
    dt, vmax = 0.02, 1.0
    targets = time_parameterize(path, vmax, dt)
    steps = np.diff(np.vstack([path[0]] + targets), axis=0)
    assert np.max(np.abs(steps)) <= vmax * dt + 1e-12
    np.testing.assert_allclose(targets[-1], path[-1])
    assert 45 <= len(targets) <= 47


def test_straight_line_in_free_space_is_direct():
    checker = StubChecker()
    start, goal = np.array([-0.5, 0.0]), np.array([0.5, 0.0])
    path, iterations = straight_line_with_repair(start, goal, LOWER, UPPER, checker, PlannerConfig(),
                                                 np.random.default_rng(0))
    assert iterations == 1
    assert len(path) == 2
    np.testing.assert_array_equal(path[0], start)
    np.testing.assert_array_equal(path[1], goal)


def test_rrt_connect_steps_stay_within_the_step_size():
    cfg = PlannerConfig(step_size=0.05)
    start, goal = np.array([-0.5, -0.2]), np.array([0.5, 0.3])
    path, _ = rrt_connect(start, goal, LOWER, UPPER, StubChecker(), cfg, np.random.default_rng(3))
    assert path is not None
    np.testing.assert_allclose(path[0], start)
    np.testing.assert_allclose(path[-1], goal)
    for a, b in zip(path, path[1:]):
        assert np.max(np.abs(b - a)) <= cfg.step_size + 1e-12


def test_rrt_connect_routes_around_a_wall():
    cfg = PlannerConfig(step_size=0.05, max_iterations=4000)
    checker = StubChecker(wall)
    start, goal = np.array([-0.5, 0.0]), np.array([0.5, 0.0])
    rng = np.random.default_rng(5)
    assert straight_line_with_repair(start, goal, LOWER, UPPER, StubChecker(wall), PlannerConfig(repair_samples=0),
                                     rng)[0] is None
    path, iterations = rrt_connect(start, goal, LOWER, UPPER, checker, cfg, rng)
    assert path is not None and iterations <= cfg.max_iterations
    assert all(not wall(q) for q in path)
    assert max(q[1] for q in path) >= 0.5


def test_shortcut_never_lengthens_and_keeps_endpoints():
    rng = np.random.default_rng(2)
    zigzag = [np.array([x, 0.1 * (-1) ** i]) for i, x in enumerate(np.linspace(-0.5, 0.5, 11))]
    short = shortcut(zigzag, StubChecker(), passes=60, step_size=0.05, rng=rng)
    assert path_length(short) <= path_length(zigzag)
    np.testing.assert_array_equal(short[0], zigzag[0])
    np.testing.assert_array_equal(short[-1], zigzag[-1])
    assert len(short) < len(zigzag)


def test_dense_audit_catches_a_thin_obstacle_between_waypoints():
    def thin(q):
        return abs(q[0]) < 0.004

    path = [np.array([-0.04, 0.0]), np.array([0.03, 0.0])]
    assert StubChecker(thin).segment_free(path[0], path[1], 0.05)
    assert not dense_audit(path, StubChecker(thin), 0.005)
    assert dense_audit(path, StubChecker(), 0.005)


def test_collision_checker_accepts_the_resting_start_configuration(nominal_state):
    q = np.asarray(nominal_state.robot.q, float)
    checker = CollisionChecker(nominal_state, PlannerConfig(), None, q, q)
    assert checker.free(q)
    assert checker.checks == 1


def test_infeasible_only_knows_three_reasons():
    assert Infeasible("no-path", "x").reason == "no-path"
    with pytest.raises(ValueError):
        Infeasible("stuck")


def test_transition_config_defaults():
    cfg = TransitionConfig()
    assert cfg.n_per_transition == 200
    assert cfg.n_handoff == 1
    assert cfg.planner.algorithm == "rrt-connect"


@pytest.mark.slow
def test_small_arm_motion_is_planned_and_replayed(nominal_state):
    cfg = PlannerConfig()
    goal = nominal_state.copy()
    goal.robot.q = np.asarray(goal.robot.q, float).copy()
    goal.robot.q[0] += 0.02
    traj, plan_stats = plan(nominal_state, goal, cfg, np.random.default_rng(0), decimation=2)
    assert plan_stats.frames == len(traj) > 1
    dt = nominal_state.model.dt * 2
    steps = np.diff(traj.actions[:, :3], axis=0)
    assert np.max(np.abs(steps)) <= cfg.max_joint_velocity * dt + 1e-9
    assert plan_stats.path_length > 0.0
