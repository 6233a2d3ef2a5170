# src/skillchain/tasks/oracle/__init__.py
from .base import OraclePrimitive
from .context import OracleContext
from .primitives import DwellPrimitive, GripperPrimitive, MovePrimitive, PushPrimitive, TurnPrimitive
from .registry import PrimitiveRegistry
from .runner import OracleRunner
