# src/skillchain/tasks/oracle/base.py
from abc import ABC, abstractmethod
from typing import Iterator

import numpy as np

from ...schema.task_schema import PrimitiveConfig


class OraclePrimitive(ABC):
    """
    Abstract scripted motion that each oracle primitive kind must implement.
    """

    @abstractmethod
    def detect(self, cfg: PrimitiveConfig) -> bool:
        """Return True if this primitive handles the given config."""

    @abstractmethod
    def plan(self, ctx: "OracleContext", cfg: PrimitiveConfig) -> Iterator[np.ndarray]:  # noqa: F821
        """
        Yield joint-position targets, one per simulator step.
        The driver steps the world after each yield and refreshes ctx.state.
        """

    @abstractmethod
    def name(self) -> str:
        """Return the primitive kind."""
