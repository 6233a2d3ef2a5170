# src/skillchain/world/__init__.py
from .geometry import Shape, wrap_angle
from .observe import MODES, Observation, observation_dim, observe
from .randomization import RandomizationSample, apply_randomization, sample_randomization
from .robot import RobotModel
from .sim import counter_rng, hold_control, step, step_batch
from .state import (BodyModel, BodyState, ContactRecord, ControlCommand, GraspState, RobotState, WorldModel,
                    WorldState, make_state)
