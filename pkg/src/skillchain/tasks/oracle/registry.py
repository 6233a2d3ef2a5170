# src/skillchain/tasks/oracle/registry.py
import logging
from typing import List, Optional

from ...schema.task_schema import PrimitiveConfig
from .base import OraclePrimitive
from .primitives import DwellPrimitive, GripperPrimitive, MovePrimitive, PushPrimitive, TurnPrimitive

logger = logging.getLogger(__name__)


class PrimitiveRegistry:

    def __init__(self, primitives: Optional[List[OraclePrimitive]] = None):
        if primitives is None:
            # push before move so push configs are not taken by the generic mover
            self.primitives = [
                PushPrimitive(),
                MovePrimitive(),
                GripperPrimitive(),
                TurnPrimitive(),
            ]
        else:
            self.primitives = primitives
        self.fallback = DwellPrimitive()

    def detect(self, cfg: PrimitiveConfig) -> OraclePrimitive:
        for prim in self.primitives:
            if prim.detect(cfg):
                return prim
        if cfg.kind != "dwell":
            logger.debug("no primitive for %r, dwelling instead", cfg.kind)
        return self.fallback
