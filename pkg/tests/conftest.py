# tests/conftest.py
import numpy as np
import pytest

from skillchain.tasks import load_task


@pytest.fixture(scope="session")
def bulb_task():
    return load_task("bulb-analog")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def nominal_state(bulb_task):
    return bulb_task.nominal_state(seed=7)


@pytest.fixture(scope="session")
def bulb_demos(bulb_task):
    from skillchain.schema.task_schema import DemoConfig
    from skillchain.tasks import generate_demos

    return generate_demos(bulb_task, DemoConfig(n_demos=2, seed=11))


def make_trajectory(state, T: int, source: str = "sim-rollout"):
    from skillchain.segmentation import Trajectory, TrajectoryMeta

    meta = TrajectoryMeta(task="bulb-analog", seed=state.seed, source=source, dt=state.model.dt)
    return Trajectory([state] * T, np.zeros((T, state.model.robot.dof)), meta)
