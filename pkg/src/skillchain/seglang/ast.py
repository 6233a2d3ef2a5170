# src/skillchain/seglang/ast.py
"""Immutable AST for discriminator and predicate expressions."""
from dataclasses import dataclass, field
from typing import Iterator, Tuple, Union


@dataclass(frozen=True)
class Node:
    line: int = field(default=0, compare=False, repr=False)
    column: int = field(default=0, compare=False, repr=False)

    def children(self) -> Tuple["Node", ...]:
        return ()

    def walk(self) -> Iterator["Node"]:
        yield self
        for c in self.children():
            yield from c.walk()


@dataclass(frozen=True)
class Number(Node):
    value: float = 0.0


@dataclass(frozen=True)
class Bool(Node):
    value: bool = False


@dataclass(frozen=True)
class Name(Node):
    """Bare identifier: a named constant from the task config."""

    ident: str = ""


@dataclass(frozen=True)
class Call(Node):
    func: str = ""
    args: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Neg(Node):
    operand: Node = None

    def children(self):
        return (self.operand,)


@dataclass(frozen=True)
class Not(Node):
    operand: Node = None

    def children(self):
        return (self.operand,)


@dataclass(frozen=True)
class BinOp(Node):
    op: str = "+"  # + - * /
    left: Node = None
    right: Node = None

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Compare(Node):
    op: str = "<"  # < <= > >=
    left: Node = None
    right: Node = None

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class And(Node):
    left: Node = None
    right: Node = None

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Or(Node):
    left: Node = None
    right: Node = None

    def children(self):
        return (self.left, self.right)


Expr = Union[Number, Bool, Name, Call, Neg, Not, BinOp, Compare, And, Or]

CONTACT_FUNCS = ("contact", "any_contact")
SCALAR_FUNCS = ("dist", "dist_axis", "angle_between", "coord", "rotation", "travel")


def pretty(node: Node) -> str:
    """Fully parenthesised source text that reparses to the same tree."""
    if isinstance(node, Number):
        return repr(float(node.value))
    if isinstance(node, Bool):
        return "true" if node.value else "false"
    if isinstance(node, Name):
        return node.ident
    if isinstance(node, Call):
        return f"{node.func}({', '.join(node.args)})"
    if isinstance(node, Neg):
        return f"-({pretty(node.operand)})"
    if isinstance(node, Not):
        return f"!({pretty(node.operand)})"
    if isinstance(node, (BinOp, Compare)):
        return f"({pretty(node.left)} {node.op} {pretty(node.right)})"
    if isinstance(node, And):
        return f"({pretty(node.left)} && {pretty(node.right)})"
    if isinstance(node, Or):
        return f"({pretty(node.left)} || {pretty(node.right)})"
    raise TypeError(f"not an expression node: {node!r}")
