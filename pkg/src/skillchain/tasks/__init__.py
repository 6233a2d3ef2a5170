# src/skillchain/tasks/__init__.py
from .demo import generate_demos, scripted_demo
from .oracle import OracleRunner, PrimitiveRegistry
from .spec import (BUNDLED, SubtaskSpec, TaskSpec, build_task, bundled_tasks, load_task, sample_initial_state,
                   subtask_success)
