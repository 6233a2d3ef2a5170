# src/skillchain/learn/schedule.py
from ..schema.learn_schema import ExplorationSchedule


def epsilon(step: int, schedule: ExplorationSchedule) -> float:
    """Probability of adding the residual: 0 at step 0, linear up to 1 at `schedule.horizon`."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return min(step / schedule.horizon, 1.0)
