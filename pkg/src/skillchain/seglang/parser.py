# src/skillchain/seglang/parser.py
from functools import lru_cache
from pathlib import Path

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedToken, VisitError

from ..errors import DslError, ParseError
from .ast import And, BinOp, Bool, Call, Compare, Name, Neg, Node, Not, Number, Or

GRAMMAR = r"""
    ?start: or_expr

    ?or_expr: and_expr
            | or_expr ("||" | "or") and_expr      -> or_op

    ?and_expr: cmp_expr
             | and_expr ("&&" | "and") cmp_expr   -> and_op

    ?cmp_expr: sum
             | sum CMP sum                        -> compare

    ?sum: product
        | sum "+" product                         -> add
        | sum "-" product                         -> sub

    ?product: unary
            | product "*" unary                   -> mul
            | product "/" unary                   -> div

    ?unary: primary
          | ("!" | "not") unary                   -> not_op
          | "-" unary                             -> neg

    ?primary: NUMBER                              -> number
            | "true"                              -> true
            | "false"                             -> false
            | NAME "(" [args] ")"                 -> call
            | NAME                                -> name
            | "(" or_expr ")"

    args: NAME ("," NAME)*

    CMP: "<=" | ">=" | "<" | ">"
    NAME: /[A-Za-z_][A-Za-z0-9_]*/

    %import common.NUMBER
    %import common.WS
    %ignore WS
"""

SCALAR_STARTS = {"NUMBER", "NAME", "LPAR", "MINUS"}


def _pos(meta):
    return dict(line=getattr(meta, "line", 0) or 0, column=getattr(meta, "column", 0) or 0)


@v_args(meta=True)
class _ToAst(Transformer):
    def number(self, meta, children):
        return Number(value=float(children[0]), **_pos(meta))

    def true(self, meta, children):
        return Bool(value=True, **_pos(meta))

    def false(self, meta, children):
        return Bool(value=False, **_pos(meta))

    def name(self, meta, children):
        return Name(ident=str(children[0]), **_pos(meta))

    def args(self, meta, children):
        return tuple(str(c) for c in children)

    def call(self, meta, children):
        func = str(children[0])
        args = children[1] if len(children) > 1 and children[1] is not None else ()
        return Call(func=func, args=tuple(args), **_pos(meta))

    def neg(self, meta, children):
        return Neg(operand=children[-1], **_pos(meta))

    def not_op(self, meta, children):
        return Not(operand=children[-1], **_pos(meta))

    def _bin(self, op, meta, children):
        left, right = [c for c in children if isinstance(c, Node)]
        return BinOp(op=op, left=left, right=right, **_pos(meta))

    def add(self, meta, children):
        return self._bin("+", meta, children)

    def sub(self, meta, children):
        return self._bin("-", meta, children)

    def mul(self, meta, children):
        return self._bin("*", meta, children)

    def div(self, meta, children):
        return self._bin("/", meta, children)

    def compare(self, meta, children):
        left, op, right = children
        return Compare(op=str(op), left=left, right=right, **_pos(meta))

    def and_op(self, meta, children):
        left, right = [c for c in children if isinstance(c, Node)]
        return And(left=left, right=right, **_pos(meta))

    def or_op(self, meta, children):
        left, right = [c for c in children if isinstance(c, Node)]
        return Or(left=left, right=right, **_pos(meta))


class SegParser:
    """LALR parser for discriminator / predicate expressions."""

    def __init__(self):
        self.lark = Lark(GRAMMAR, start="start", parser="lalr", propagate_positions=True,
                         maybe_placeholders=True)

    def _describe(self, expected) -> list:
        out = set()
        for t in expected:
            if t in ("NUMBER", "NAME"):
                out.add("scalar" if t == "NUMBER" else "identifier")
                continue
            try:
                pat = self.lark.get_terminal(t).pattern
                out.add(repr(pat.value) if pat.type == "str" else t)
            except KeyError:
                out.add(t)
        if SCALAR_STARTS & set(expected):
            out.add("scalar")
        return sorted(out)

    def parse(self, src: str) -> Node:
        if not src or not src.strip():
            raise ParseError("empty expression", 1, 1)
        try:
            tree = self.lark.parse(src)
            return _ToAst().transform(tree)
        except UnexpectedToken as e:
            line, col = e.line, e.column
            if e.token.type == "$END" or line in (None, -1):
                line, col = _end_position(src)
                what = "unexpected end of input"
            else:
                what = f"unexpected token {str(e.token)!r}"
            raise ParseError(what, line, col, self._describe(e.expected)) from None
        except UnexpectedEOF as e:
            line, col = _end_position(src)
            raise ParseError("unexpected end of input", line, col, self._describe(e.expected)) from None
        except UnexpectedCharacters as e:
            raise ParseError(f"unexpected character {src[e.pos_in_stream]!r}", e.line, e.column,
                             self._describe(e.allowed or ())) from None
        except VisitError as e:
            raise DslError(str(e.orig_exc)) from None


def _end_position(src: str):
    lines = src.split("\n")
    return len(lines), len(lines[-1]) + 1


@lru_cache(maxsize=1)
def _default() -> SegParser:
    return SegParser()


def parse(src: str) -> Node:
    return _default().parse(src)


def grammar_text() -> str:
    return GRAMMAR


def load_ebnf() -> str:
    path = Path(__file__).resolve().parents[3] / "docs" / "seglang.ebnf"
    return path.read_text(encoding="utf-8")
