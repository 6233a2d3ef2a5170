# src/skillchain/seglang/evaluate.py
import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence

import numpy as np

from ..errors import DslError, EvalError
from .ast import And, BinOp, Bool, Call, Compare, Name, Neg, Node, Not, Number, Or, pretty
from .parser import parse
from .typecheck import Vocabulary, typecheck


@dataclass(frozen=True)
class FrameContext:
    """Everything a discriminator may look at in one frame."""

    keypoints: Mapping[str, np.ndarray]
    contacts: Sequence = ()  # ContactRecord-like: a, b, force_magnitude
    fingers: FrozenSet[str] = frozenset()
    robot_parts: FrozenSet[str] = frozenset()
    contact_threshold: float = 0.1
    rotations: Mapping[str, float] = field(default_factory=dict)
    travel: Mapping[str, float] = field(default_factory=dict)
    constants: Mapping[str, float] = field(default_factory=dict)

    @staticmethod
    def from_state(state, keypoints: Optional[Mapping[str, np.ndarray]] = None,
                   constants: Optional[Mapping[str, float]] = None,
                   contact_threshold: Optional[float] = None) -> "FrameContext":
        robot = state.model.robot
        parts = {c[0] for c in robot.circles(state.robot.q)}
        rotations, travel = {}, {}
        for name, b in state.bodies.items():
            rotations[name] = float(b.unwrapped)
            ref = state.initial_poses.get(name, b.pose)
            travel[name] = float(np.hypot(*(b.pose[:2] - ref[:2])))
        return FrameContext(
            keypoints=dict(keypoints) if keypoints is not None else state.keypoints(),
            contacts=tuple(state.contacts),
            fingers=frozenset(robot.finger_names),
            robot_parts=frozenset(parts),
            contact_threshold=state.model.contact.contact_threshold if contact_threshold is None
            else float(contact_threshold),
            rotations=rotations,
            travel=travel,
            constants=dict(constants or {}),
        )

    def with_threshold(self, threshold: float) -> "FrameContext":
        return FrameContext(self.keypoints, self.contacts, self.fingers, self.robot_parts, threshold,
                            self.rotations, self.travel, self.constants)


def _kp(frame: FrameContext, name: str) -> np.ndarray:
    try:
        return np.asarray(frame.keypoints[name], float)
    except KeyError:
        raise DslError(f"keypoint {name!r} missing from frame") from None


def _axis(a: str) -> int:
    return 0 if a == "x" else 1


def _touching(frame: FrameContext, part: str, obj: str) -> bool:
    for c in frame.contacts:
        if c.force_magnitude > frame.contact_threshold and {c.a, c.b} == {part, obj}:
            return True
    return False


def _call(node: Call, frame: FrameContext):
    f, a = node.func, node.args
    if f == "dist":
        d = _kp(frame, a[0]) - _kp(frame, a[1])
        return float(math.hypot(d[0], d[1]))
    if f == "dist_axis":
        return float(abs(_kp(frame, a[0])[_axis(a[2])] - _kp(frame, a[1])[_axis(a[2])]))
    if f == "angle_between":
        u = _kp(frame, a[0]) - _kp(frame, a[1])
        v = _kp(frame, a[2]) - _kp(frame, a[1])
        nu, nv = math.hypot(*u), math.hypot(*v)
        if nu == 0.0 or nv == 0.0:
            return 0.0
        return float(math.acos(max(-1.0, min(1.0, float(u @ v) / (nu * nv)))))
    if f == "coord":
        return float(_kp(frame, a[0])[_axis(a[1])])
    if f == "rotation":
        return float(frame.rotations.get(a[0], 0.0))
    if f == "travel":
        return float(frame.travel.get(a[0], 0.0))
    if f == "contact":
        return _touching(frame, a[0], a[1])
    if f == "any_contact":
        return any(_touching(frame, p, a[0]) for p in frame.robot_parts)
    raise DslError(f"unknown function {f!r}", node.line, node.column)


def eval_expr(node: Node, frame: FrameContext):
    """Evaluate an AST. Pure: the frame is never mutated."""
    if isinstance(node, Number):
        return float(node.value)
    if isinstance(node, Bool):
        return bool(node.value)
    if isinstance(node, Name):
        try:
            return float(frame.constants[node.ident])
        except KeyError:
            raise DslError(f"constant {node.ident!r} not bound", node.line, node.column) from None
    if isinstance(node, Call):
        return _call(node, frame)
    if isinstance(node, Neg):
        return -eval_expr(node.operand, frame)
    if isinstance(node, Not):
        return not eval_expr(node.operand, frame)
    if isinstance(node, BinOp):
        lhs, rhs = eval_expr(node.left, frame), eval_expr(node.right, frame)
        if node.op == "+":
            return lhs + rhs
        if node.op == "-":
            return lhs - rhs
        if node.op == "*":
            return lhs * rhs
        if rhs == 0.0:
            raise EvalError("division by zero", pretty(node))
        return lhs / rhs
    if isinstance(node, Compare):
        lhs, rhs = eval_expr(node.left, frame), eval_expr(node.right, frame)
        return {"<": lhs < rhs, "<=": lhs <= rhs, ">": lhs > rhs, ">=": lhs >= rhs}[node.op]
    if isinstance(node, And):
        lhs, rhs = eval_expr(node.left, frame), eval_expr(node.right, frame)
        return bool(lhs and rhs)
    if isinstance(node, Or):
        lhs, rhs = eval_expr(node.left, frame), eval_expr(node.right, frame)
        return bool(lhs or rhs)
    raise DslError(f"cannot evaluate {type(node).__name__}")


@dataclass(frozen=True)
class Discriminator:
    skill_index: int
    point_expr: Node
    contact_expr: Optional[Node]
    point_src: str = ""
    contact_src: str = ""

    @staticmethod
    def compile(skill_index: int, point_src: str, contact_src: Optional[str] = None,
                vocab: Optional[Vocabulary] = None) -> "Discriminator":
        """Parse both halves; with a vocabulary, the first typecheck diagnostic is raised as DslError.

        A missing contact constraint leaves the point constraint to decide alone.
        """
        point = parse(point_src)
        contact = parse(contact_src) if contact_src is not None else None
        if vocab is not None:
            for expr, role in ((point, "point"), (contact, "contact")):
                if expr is None:
                    continue
                diags = typecheck(expr, vocab, role)
                if diags:
                    d = diags[0]
                    raise DslError(f"skill {skill_index} {role} constraint: {d.message}", d.line, d.column)
        return Discriminator(skill_index, point, contact, point_src, contact_src or "")

    def diagnostics(self, vocab: Vocabulary) -> List[str]:
        return ([f"point: {d}" for d in typecheck(self.point_expr, vocab, "point")]
                + ([f"contact: {d}" for d in typecheck(self.contact_expr, vocab, "contact")]
                   if self.contact_expr is not None else []))

    def digest(self) -> str:
        contact = pretty(self.contact_expr) if self.contact_expr is not None else ""
        return hashlib.sha256(f"{pretty(self.point_expr)}\n{contact}".encode()).hexdigest()[:16]


def eval_discriminator(d: Discriminator, frame: FrameContext) -> bool:
    point = bool(eval_expr(d.point_expr, frame))
    if d.contact_expr is None:
        return point
    return point and bool(eval_expr(d.contact_expr, frame))


@dataclass(frozen=True)
class Predicate:
    expr: Node
    src: str = ""

    @staticmethod
    def compile(src: str, vocab: Optional[Vocabulary] = None) -> "Predicate":
        expr = parse(src)
        if vocab is not None:
            diags = typecheck(expr, vocab, "predicate")
            if diags:
                raise DslError(f"predicate: {diags[0].message}", diags[0].line, diags[0].column)
        return Predicate(expr, src)

    def __call__(self, frame: FrameContext) -> bool:
        return bool(eval_expr(self.expr, frame))
