# src/skillchain/tasks/oracle/runner.py
import logging
from typing import Iterator, List, Optional, Sequence

import numpy as np

from ...schema.task_schema import PrimitiveConfig
from ...seglang import Predicate
from ...world import WorldState
from .context import OracleContext
from .registry import PrimitiveRegistry

logger = logging.getLogger(__name__)


class OracleRunner:
    """Closed-loop driver over a primitive list: feed the current state, get the next joint targets.

    `act` returns None once every primitive has finished. A primitive's `until`
    predicate is checked on each incoming state and ends that primitive early.
    """

    def __init__(self, task, primitives: Sequence[PrimitiveConfig], state: WorldState,
                 rng: Optional[np.random.Generator] = None, action_jitter: float = 0.0,
                 waypoint_jitter: float = 0.0, registry: Optional[PrimitiveRegistry] = None,
                 ctx: Optional[OracleContext] = None):
        self.task = task
        self.primitives: List[PrimitiveConfig] = list(primitives)
        self.registry = registry or PrimitiveRegistry()
        if ctx is None:
            ctx = OracleContext(task, state, rng if rng is not None else np.random.default_rng(0),
                                action_jitter, waypoint_jitter)
        self.ctx = ctx
        self._index = -1
        self._plan: Optional[Iterator[np.ndarray]] = None
        self._until: Optional[Predicate] = None

    @property
    def done(self) -> bool:
        return self._index >= len(self.primitives)

    def _next_primitive(self) -> bool:
        self._index += 1
        if self._index >= len(self.primitives):
            self._plan = None
            return False
        cfg = self.primitives[self._index]
        prim = self.registry.detect(cfg)
        self._until = Predicate.compile(cfg.until, self.task.vocabulary) if cfg.until else None
        self._plan = prim.plan(self.ctx, cfg)
        logger.debug("oracle primitive %d: %s", self._index, prim.name())
        return True

    def act(self, state: WorldState) -> Optional[np.ndarray]:
        self.ctx.state = state
        if self._plan is None and not self.done and not self._next_primitive():
            return None
        while self._plan is not None:
            if self._until is not None and self._until(self.task.frame(state)):
                self._next_primitive()
                continue
            try:
                target = next(self._plan)
            except StopIteration:
                self._next_primitive()
                continue
            if self.ctx.action_jitter > 0.0:
                target = target + self.ctx.rng.normal(0.0, self.ctx.action_jitter, target.shape)
            return target
        return None
