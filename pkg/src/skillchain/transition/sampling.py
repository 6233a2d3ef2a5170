# src/skillchain/transition/sampling.py
from typing import Callable, Sequence, Tuple, Union

import numpy as np

from ..errors import EmptySet
from ..world import WorldState

StateSource = Union[Sequence[WorldState], Callable[[np.random.Generator], WorldState]]


def sample_pair(prev: StateSource, nxt: Sequence[WorldState], rng: np.random.Generator
                ) -> Tuple[WorldState, WorldState]:
    """Independent uniform draws (s_end, s_start).

    `prev` is either the previous skill's termination exemplars or, for the
    approach to the first skill, a sampler of episode-initial states.
    """
    if not len(nxt):
        raise EmptySet("no initiation exemplars to plan towards")
    if callable(prev):
        s_end = prev(rng)
    else:
        if not len(prev):
            raise EmptySet("no termination exemplars to plan from")
        s_end = prev[int(rng.integers(len(prev)))]
    s_start = nxt[int(rng.integers(len(nxt)))]
    return s_end, s_start
