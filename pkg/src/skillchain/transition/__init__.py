# src/skillchain/transition/__init__.py
from .dataset import (FamilyStats, TransitionDataset, TransitionRecord, dataset_arrays, family_key,
                      generate_family, generate_transition_dataset, label_stages, read_transition_arrays,
                      write_transition_dataset)
from .planner import CollisionChecker, PlanStats, dense_audit, plan, replay
from .sampling import sample_pair

__all__ = [
    "FamilyStats", "TransitionDataset", "TransitionRecord", "dataset_arrays", "family_key", "generate_family",
    "generate_transition_dataset", "label_stages", "read_transition_arrays", "write_transition_dataset",
    "CollisionChecker", "PlanStats", "dense_audit", "plan", "replay", "sample_pair",
]
