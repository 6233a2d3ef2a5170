# tests/test_segmentation.py
import numpy as np
import pytest

from conftest import make_trajectory
from skillchain.errors import EmptySet, IncompleteDemo, OrderViolation, SchemaError
from skillchain.schema.record_schema import SegmentationManifest
from skillchain.schema.segmentation_schema import AugmentConfig, DebounceConfig, KeypointTrackConfig
from skillchain.segmentation import (BoundarySets, augment_states, boundary_sets, extract_segments,
                                     label_from_firings, phase_path, read_boundary_sets, read_jsonl, read_manifest,
                                     read_segmentation, segment_demo, stale_segmentation, track_keypoints,
                                     write_boundary_sets, write_jsonl, write_manifest, write_segmentation)


def _fires(T, K, spans):
    out = np.zeros((T, K), dtype=bool)
    for k, (a, b) in spans:
        out[a:b, k - 1] = True
    return out


def test_debounced_labels_lag_and_release():
    fires = _fires(17, 2, [(1, (2, 7)), (2, (9, 14))])
    result = label_from_firings(fires, DebounceConfig(m_on=3, m_off=3))
    assert result.labels.tolist() == [0, 0, 0, 0, 1, 1, 1, 1, 1, 0, 0, 2, 2, 2, 2, 2, 0]
    assert result.violations == []


def test_short_blips_never_activate():
    fires = _fires(10, 2, [(1, (2, 4))])
    assert label_from_firings(fires).labels.tolist() == [0] * 10


def test_only_the_next_skill_may_activate():
    fires = _fires(12, 2, [(2, (0, 6)), (1, (6, 12))])
    labels = label_from_firings(fires).labels
    assert 2 not in labels
    assert labels[8] == 1


def test_direct_handoff_without_transition():
    fires = _fires(12, 2, [(1, (0, 8)), (2, (5, 12))])
    labels = label_from_firings(fires).labels.tolist()
    assert labels == [0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2]


def test_late_firing_of_an_earlier_skill_is_a_violation():
    fires = _fires(30, 3, [(1, (0, 5)), (2, (8, 13)), (1, (20, 25))])
    result = label_from_firings(fires)
    assert len(result.violations) == 1
    v = result.violations[0]
    assert (v.skill, v.frame, v.completed) == (1, 22, 2)
    assert result.labels[20:25].tolist() == [0] * 5
    with pytest.raises(OrderViolation):
        label_from_firings(fires, strict=True)


def test_labels_never_decrease_across_skills():
    rng = np.random.default_rng(5)
    for _ in range(20):
        fires = rng.random((80, 4)) < 0.4
        labels = label_from_firings(fires, DebounceConfig(m_on=2, m_off=2)).labels
        skills = labels[labels > 0]
        assert np.all(np.diff(skills) >= 0)


def test_extract_segments_alternates(nominal_state):
    labels = np.array([0, 0, 1, 1, 0, 2, 2, 2, 0])
    demo = extract_segments(labels, make_trajectory(nominal_state, len(labels)), 2)
    assert [(s.stage, s.start, s.stop) for s in demo.segments] == [
        (0, 0, 2), (1, 2, 4), (0, 4, 5), (2, 5, 8), (0, 8, 9)]
    assert demo.skill_bounds() == {1: (2, 3), 2: (5, 7)}
    assert len(demo.skill_trajectory(2)) == 3
    assert len(demo.transitions()) == 3


def test_missing_skill_is_incomplete(nominal_state):
    labels = np.array([0, 1, 1, 0, 0])
    with pytest.raises(IncompleteDemo) as info:
        extract_segments(labels, make_trajectory(nominal_state, 5), 2)
    assert info.value.skill == 2


def test_label_count_must_match_frames(nominal_state):
    with pytest.raises(ValueError):
        extract_segments(np.array([0, 1]), make_trajectory(nominal_state, 3), 1)


def test_segmentation_file_round_trip(tmp_path, nominal_state):
    traj = make_trajectory(nominal_state, 6)
    demo = extract_segments(np.array([0, 1, 1, 0, 2, 2]), traj, 2)
    back = read_segmentation(write_segmentation(demo, tmp_path / "seg.json"), traj)
    assert back.labels.tolist() == demo.labels.tolist()
    assert back.segments == demo.segments


def test_boundary_sets_fall_back_to_real_exemplars(nominal_state):
    other = nominal_state.copy()
    sets = BoundarySets({1: [nominal_state]}, {1: [other]}, init_aug={1: [other, other]})
    assert len(sets.init(1)) == 2
    assert sets.init(1, augmented=False)[0] is nominal_state
    assert sets.term(1)[0] is other
    with pytest.raises(EmptySet):
        sets.init(2)


def test_boundary_sets_take_first_and_last_skill_frames(nominal_state):
    states = []
    for t in range(6):
        s = nominal_state.copy()
        s.tick = t
        states.append(s)
    traj = make_trajectory(nominal_state, 6)
    traj.states = states
    demo = extract_segments(np.array([0, 1, 1, 1, 0, 2]), traj, 2)
    sets = boundary_sets([demo])
    assert [s.tick for s in sets.init_real[1]] == [1]
    assert [s.tick for s in sets.term_real[1]] == [3]
    assert [s.tick for s in sets.init_real[2] + sets.term_real[2]] == [5, 5]


def test_reached_states_extend_termination_sets(nominal_state):
    other = nominal_state.copy()
    sets = BoundarySets({1: [nominal_state], 2: [nominal_state]}, {1: [other], 2: [other]},
                        term_aug={2: [other, other]})
    reached = [nominal_state.copy(), nominal_state.copy()]
    grown = sets.extended({1: reached, 2: reached[:1]}, nominal_state.model)
    assert len(grown.term(1)) == 1 + 2
    assert len(grown.term(2)) == 2 + 1
    assert grown.term(1)[0] is other
    assert grown.term(1)[1] is not reached[0]
    assert grown.term(1)[1].bodies["bulb"].model is nominal_state.model.bodies["bulb"]
    assert len(sets.term(1)) == 1
    assert grown.init(1)[0] is nominal_state


def test_missing_boundary_file_is_a_schema_error(tmp_path, nominal_state):
    with pytest.raises(SchemaError):
        read_boundary_sets(tmp_path / "boundary.jsonl", nominal_state.model)


def test_augmented_states_stay_near_their_source(nominal_state):
    cfg = AugmentConfig(pos_radius=0.01, rot_range=0.1, n_out=6, settle_check=False)
    out = augment_states([nominal_state], cfg, np.random.default_rng(2))
    assert len(out) == 6
    src = nominal_state.bodies["bulb"].pose
    for s in out:
        assert np.hypot(*(s.bodies["bulb"].pose[:2] - src[:2])) <= 0.01 + 1e-3
    assert not all(np.array_equal(s.bodies["bulb"].pose, src) for s in out)


def test_boundary_sets_file_round_trip(tmp_path, nominal_state):
    sets = BoundarySets({1: [nominal_state]}, {1: [nominal_state]}, init_aug={1: [nominal_state, nominal_state]},
                        params=AugmentConfig(n_out=2))
    back = read_boundary_sets(write_boundary_sets(sets, tmp_path / "boundary.jsonl"), nominal_state.model)
    assert len(back.init(1)) == 2
    assert back.params.n_out == 2
    assert np.allclose(back.term(1)[0].bodies["bulb"].pose, nominal_state.bodies["bulb"].pose)


def test_trajectory_log_keeps_phases_apart(tmp_path, nominal_state):
    traj = make_trajectory(nominal_state, 4, source="oracle-demo")
    traj.phases = np.array([0, 1, 1, 1])
    path = write_jsonl(traj, tmp_path / "demo.jsonl")
    assert phase_path(path).exists()
    assert read_jsonl(path, nominal_state.model).phases is None
    assert read_jsonl(path, nominal_state.model, with_phases=True).phases.tolist() == [0, 1, 1, 1]


def test_corrupt_trajectory_log(tmp_path, nominal_state):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"format": "skillchain-trajectory", "version": 99, "frames": 0}\n', encoding="utf-8")
    with pytest.raises(SchemaError, match="version"):
        read_jsonl(path, nominal_state.model)


def test_stale_segmentation_detects_edited_discriminators(tmp_path, bulb_task):
    manifest = SegmentationManifest(task=bulb_task.name, discriminator_hashes=bulb_task.discriminator_hashes())
    manifest = read_manifest(write_manifest(manifest, tmp_path / "segmentation.json"), SegmentationManifest)
    assert stale_segmentation(manifest, bulb_task) is None
    edited = manifest.model_copy(update={"discriminator_hashes": ["0" * 16] + manifest.discriminator_hashes[1:]})
    assert stale_segmentation(edited, bulb_task) == "discriminator 1 changed"
    short = manifest.model_copy(update={"discriminator_hashes": manifest.discriminator_hashes[:2]})
    assert "2 discriminators" in stale_segmentation(short, bulb_task)


def test_tracking_without_noise_is_exact(nominal_state, rng):
    traj = make_trajectory(nominal_state, 3)
    tracked = track_keypoints(traj, KeypointTrackConfig(), rng)
    exact = nominal_state.keypoints()
    for t in range(3):
        for name, p in tracked.keypoints[t].items():
            assert np.array_equal(p, exact[name])


def test_dropped_keypoints_hold_their_last_value(nominal_state):
    traj = make_trajectory(nominal_state, 40)
    tracked = track_keypoints(traj, KeypointTrackConfig(sigma_kp=0.01, p_drop=0.5, hold_frames=3),
                              np.random.default_rng(0))
    name = "bulb_center"
    values = [tuple(tracked.keypoints[t][name]) for t in range(40)]
    assert len(set(values)) < 40


def _agreement(task, demos, track=None):
    scores = []
    for i, demo in enumerate(demos):
        traj = demo if track is None else track_keypoints(demo, track, np.random.default_rng(i))
        seg, _ = segment_demo(traj, task)
        scores.append(np.mean(seg.labels == demo.phases))
    return float(np.mean(scores))


@pytest.mark.slow
def test_oracle_demos_segment_like_their_phases(bulb_task, bulb_demos):
    assert _agreement(bulb_task, bulb_demos) >= 0.95


@pytest.mark.slow
def test_segmentation_tolerates_tracker_noise(bulb_task, bulb_demos):
    assert _agreement(bulb_task, bulb_demos, KeypointTrackConfig(sigma_kp=0.002)) >= 0.90
