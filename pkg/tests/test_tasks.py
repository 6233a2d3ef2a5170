# tests/test_tasks.py
import numpy as np
import pytest

from skillchain.errors import DslError, SchemaError
from skillchain.schema.task_schema import TaskConfig
from skillchain.tasks import BUNDLED, build_task, bundled_tasks, load_task, sample_initial_state, subtask_success
from skillchain.validator import parse_model


def test_every_bundled_task_loads():
    assert bundled_tasks() == list(BUNDLED)
    for name in bundled_tasks():
        task = load_task(name)
        assert task.name == name
        assert task.K >= 2
        assert len(task.discriminator_hashes()) == task.K


def test_bulb_task_shape(bulb_task):
    assert [s.name for s in bulb_task.subtasks] == ["grasp", "reorient", "insert", "screw"]
    assert {"bulb_center", "socket_center", "grip_center"} <= bulb_task.vocabulary.keypoints
    assert {"thumb", "index"} <= bulb_task.vocabulary.fingers
    assert bulb_task.constants["eps_pos"] == pytest.approx(0.005)
    with pytest.raises(IndexError):
        bulb_task.subtask(bulb_task.K + 1)


def test_config_hash_tracks_content(bulb_task):
    data = bulb_task.config.model_dump()
    assert build_task(TaskConfig(**data)).config_hash() == bulb_task.config_hash()
    data["constants"]["eps_pos"] = 0.006
    assert build_task(TaskConfig(**data)).config_hash() != bulb_task.config_hash()


def test_bad_predicate_reports_position(bulb_task):
    data = bulb_task.config.model_dump()
    data["subtasks"][0]["success"] = "dist(bulb_center, socket_centre) <= eps_pos"
    with pytest.raises(DslError) as info:
        build_task(TaskConfig(**data))
    assert info.value.line == 1
    assert "socket_centre" in str(info.value)


def test_incomplete_task_file_is_a_schema_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"name": "broken"}', encoding="utf-8")
    with pytest.raises(SchemaError):
        load_task(path)


def test_parse_model_collects_field_errors(bulb_task):
    data = bulb_task.config.model_dump()
    data["horizon"] = "long"
    with pytest.raises(SchemaError) as info:
        parse_model(data, TaskConfig, "inline")
    assert any("horizon" in d for d in info.value.diagnostics)


def test_initial_states_vary_inside_their_box(bulb_task):
    rng = np.random.default_rng(0)
    nominal = bulb_task.nominal_poses()["bulb"]
    poses = [sample_initial_state(bulb_task, rng).bodies["bulb"].pose for _ in range(20)]
    offsets = np.array([p[:2] - nominal[:2] for p in poses])
    assert np.all(np.abs(offsets) <= 0.02 + 1e-3)
    assert np.std(offsets[:, 0]) > 0.0


def test_initial_state_scale_zero_is_the_box_centre(bulb_task):
    state = sample_initial_state(bulb_task, np.random.default_rng(0), scale=0.0)
    assert np.allclose(state.bodies["bulb"].pose[:2], bulb_task.nominal_poses()["bulb"][:2], atol=1e-3)


def test_no_subtask_is_done_at_the_start(bulb_task, nominal_state):
    assert not any(subtask_success(bulb_task, i, nominal_state) for i in range(1, bulb_task.K + 1))


@pytest.mark.slow
def test_scripted_demos_complete_every_subtask_in_order(bulb_task, bulb_demos):
    for demo in bulb_demos:
        skills = demo.phases[demo.phases > 0]
        assert np.all(np.diff(skills) >= 0)
        assert set(skills.tolist()) == set(range(1, bulb_task.K + 1))
        assert subtask_success(bulb_task, bulb_task.K, demo.terminal)
        assert demo.meta.attempts >= 1
        assert len(demo) <= bulb_task.horizon + 1


@pytest.mark.slow
def test_scripted_demos_are_reproducible(bulb_task, bulb_demos):
    from skillchain.schema.task_schema import DemoConfig
    from skillchain.tasks import generate_demos

    again = generate_demos(bulb_task, DemoConfig(n_demos=1, seed=11))[0]
    assert np.array_equal(again.phases, bulb_demos[0].phases)
    assert np.array_equal(again.actions, bulb_demos[0].actions)


def test_seated_band_outlasts_tracker_noise(bulb_task, nominal_state):
    from skillchain.seglang import eval_expr

    kp = nominal_state.keypoints()
    kp["bulb_center"] = kp["socket_center"] + np.array([0.008, 0.0])
    frame = bulb_task.frame(nominal_state, kp)
    screw = bulb_task.subtask(bulb_task.K)
    assert eval_expr(screw.discriminator.point_expr, frame)
    assert not screw.success(frame)


def test_pick_skills_carry_no_contact_constraint():
    for name in bundled_tasks():
        first = load_task(name).subtask(1)
        assert first.discriminator.contact_expr is None
        assert first.discriminator.contact_src == ""


def test_lock_script_turns_past_its_threshold_and_backs_off():
    task = load_task("spray-analog")
    lock = next(s for s in task.subtasks if s.name == "lock_cap")
    c = task.constants
    turns = [p for p in lock.oracle.skill if p.kind == "turn"]
    assert sum(p.angle for p in turns) > c["lock_angle"]
    retreat = lock.oracle.skill[-1]
    assert retreat.target.mode == "current"
    assert -retreat.target.offset[0] >= 2 * c["reach"]
    assert c["mouth_radius"] > c["seat_dist"]


@pytest.fixture(scope="module", params=list(BUNDLED))
def task_demos(request):
    from skillchain.schema.task_schema import DemoConfig
    from skillchain.tasks import generate_demos

    task = load_task(request.param)
    return task, generate_demos(task, DemoConfig(n_demos=2, seed=11))


@pytest.mark.slow
def test_every_task_oracle_finishes_its_chain(task_demos):
    task, demos = task_demos
    for demo in demos:
        skills = demo.phases[demo.phases > 0]
        assert np.all(np.diff(skills) >= 0)
        assert set(skills.tolist()) == set(range(1, task.K + 1))
        assert subtask_success(task, task.K, demo.terminal)
    assert np.mean([d.meta.attempts for d in demos]) <= 2


@pytest.mark.slow
def test_every_task_segments_like_its_oracle_phases(task_demos):
    from skillchain.segmentation import segment_demo

    task, demos = task_demos
    for demo in demos:
        seg, result = segment_demo(demo, task)
        assert result.violations == []
        assert np.mean(seg.labels == demo.phases) >= 0.9
