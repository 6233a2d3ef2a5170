# src/skillchain/segmentation/__init__.py
from .boundary import BoundarySets, augment_boundary_sets, augment_states, boundary_sets, exemplar_penetration
from .io import (
    phase_path,
    read_boundary_sets,
    read_columnar,
    read_jsonl,
    read_manifest,
    read_phases,
    read_segmentation,
    stale_segmentation,
    write_boundary_sets,
    write_columnar,
    write_jsonl,
    write_manifest,
    write_phases,
    write_segmentation,
)
from .labeling import (
    TRANSITION,
    LabelResult,
    Segment,
    SegmentedDemo,
    extract_segments,
    firing_matrix,
    label_frames,
    label_from_firings,
    segment_demo,
)
from .tracking import track_keypoints
from .trajectory import Trajectory, TrajectoryMeta

__all__ = [
    "BoundarySets", "augment_boundary_sets", "augment_states", "boundary_sets", "exemplar_penetration",
    "phase_path", "read_boundary_sets", "read_columnar", "read_jsonl", "read_manifest", "read_phases",
    "read_segmentation", "stale_segmentation", "write_boundary_sets", "write_columnar", "write_jsonl",
    "write_manifest", "write_phases", "write_segmentation", "TRANSITION", "LabelResult", "Segment",
    "SegmentedDemo", "extract_segments", "firing_matrix", "label_frames", "label_from_firings", "segment_demo",
    "track_keypoints", "Trajectory", "TrajectoryMeta",
]
