# src/skillchain/seglang/__init__.py
from .ast import pretty
from .evaluate import Discriminator, FrameContext, Predicate, eval_discriminator, eval_expr
from .parser import SegParser, parse
from .typecheck import Diagnostic, Vocabulary, typecheck
