# src/skillchain/seglang/typecheck.py
import difflib
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional

from .ast import And, BinOp, Bool, Call, Compare, CONTACT_FUNCS, Name, Neg, Node, Not, Number, Or, pretty

ROLES = ("point", "contact", "predicate")
AXES = ("x", "y")

# argument kinds per function: k = keypoint, a = axis, f = finger, o = object
SIGNATURES = {
    "dist": "kk",
    "dist_axis": "kka",
    "angle_between": "kkk",
    "coord": "ka",
    "rotation": "o",
    "travel": "o",
    "contact": "fo",
    "any_contact": "o",
}
KIND_NAMES = {"k": "keypoint", "a": "axis", "f": "finger", "o": "object"}


@dataclass(frozen=True)
class Vocabulary:
    keypoints: FrozenSet[str]
    fingers: FrozenSet[str]
    objects: FrozenSet[str]
    constants: Dict[str, float] = field(default_factory=dict)

    @staticmethod
    def build(keypoints: Iterable[str], fingers: Iterable[str], objects: Iterable[str],
              constants: Optional[Dict[str, float]] = None) -> "Vocabulary":
        return Vocabulary(frozenset(keypoints), frozenset(fingers), frozenset(objects), dict(constants or {}))

    def members(self, kind: str) -> FrozenSet[str]:
        if kind == "k":
            return self.keypoints
        if kind == "f":
            return self.fingers
        if kind == "o":
            return self.objects
        return frozenset(AXES)


@dataclass(frozen=True)
class Diagnostic:
    message: str
    line: int = 0
    column: int = 0

    def __str__(self):
        return f"{self.line}:{self.column}: {self.message}" if self.line else self.message


def _suggest(word: str, pool: Iterable[str]) -> str:
    close = difflib.get_close_matches(word, sorted(pool), n=1, cutoff=0.6)
    return f" (did you mean {close[0]!r}?)" if close else ""


class _Checker:
    def __init__(self, vocab: Vocabulary, role: str):
        self.vocab = vocab
        self.role = role
        self.diags: List[Diagnostic] = []

    def err(self, node: Node, msg: str) -> None:
        self.diags.append(Diagnostic(msg, node.line, node.column))

    def sort(self, node: Node) -> Optional[str]:
        """'bool', 'scalar' or None when the subtree is already broken."""
        if isinstance(node, Number):
            if self.role == "contact":
                self.err(node, "numeric literal in contact constraint")
            return "scalar"
        if isinstance(node, Bool):
            return "bool"
        if isinstance(node, Name):
            if self.role == "contact":
                self.err(node, f"constant {node.ident!r} in contact constraint")
            if node.ident not in self.vocab.constants:
                self.err(node, f"unknown constant {node.ident!r}" + _suggest(node.ident, self.vocab.constants))
                return None
            return "scalar"
        if isinstance(node, Call):
            return self.call(node)
        if isinstance(node, Neg):
            return self.expect(node.operand, "scalar", "operand of unary minus")
        if isinstance(node, Not):
            return self.expect(node.operand, "bool", "operand of not")
        if isinstance(node, BinOp):
            if self.role == "contact":
                self.err(node, "arithmetic in contact constraint")
            self.expect(node.left, "scalar", f"left operand of {node.op!r}")
            self.expect(node.right, "scalar", f"right operand of {node.op!r}")
            if node.op == "/" and isinstance(node.right, Number) and node.right.value == 0.0:
                self.err(node, f"division by literal zero in {pretty(node)}")
            return "scalar"
        if isinstance(node, Compare):
            if self.role == "contact":
                self.err(node, "comparison in contact constraint")
            self.expect(node.left, "scalar", f"left side of {node.op!r}")
            self.expect(node.right, "scalar", f"right side of {node.op!r}")
            return "bool"
        if isinstance(node, (And, Or)):
            self.expect(node.left, "bool", "operand of boolean operator")
            self.expect(node.right, "bool", "operand of boolean operator")
            return "bool"
        self.err(node, f"unknown node {type(node).__name__}")
        return None

    def expect(self, node: Node, want: str, what: str) -> Optional[str]:
        got = self.sort(node)
        if got is not None and got != want:
            self.err(node, f"{what} must be {want}, got {got}")
        return want

    def call(self, node: Call) -> Optional[str]:
        sig = SIGNATURES.get(node.func)
        if sig is None:
            self.err(node, f"unknown function {node.func!r}" + _suggest(node.func, SIGNATURES))
            return None
        is_contact = node.func in CONTACT_FUNCS
        if is_contact and self.role == "point":
            self.err(node, "contact atom in point constraint")
        if not is_contact and self.role == "contact":
            self.err(node, f"non-contact atom {node.func!r} in contact constraint")
        if len(node.args) != len(sig):
            self.err(node, f"{node.func} takes {len(sig)} argument(s), got {len(node.args)}")
            return "bool" if is_contact else "scalar"
        for arg, kind in zip(node.args, sig):
            pool = self.vocab.members(kind)
            if arg not in pool:
                self.err(node, f"unknown {KIND_NAMES[kind]} {arg!r} in {node.func}" + _suggest(arg, pool))
        return "bool" if is_contact else "scalar"


def typecheck(expr: Node, vocab: Vocabulary, role: str = "predicate") -> List[Diagnostic]:
    """Diagnostics for `expr` used in `role`; an empty list means the expression is well formed."""
    if role not in ROLES:
        return [Diagnostic(f"unknown role {role!r}; expected one of {ROLES}")]
    checker = _Checker(vocab, role)
    top = checker.sort(expr)
    if top is not None and top != "bool":
        checker.err(expr, f"{role} expression must be boolean, got {top}")
    return checker.diags


def identifiers(expr: Node) -> List[str]:
    out = []
    for n in expr.walk():
        if isinstance(n, Call):
            out.extend(n.args)
        elif isinstance(n, Name):
            out.append(n.ident)
    return out
