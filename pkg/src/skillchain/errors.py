# src/skillchain/errors.py
from typing import Any, Dict, Iterable, List, Optional


class SkillchainError(Exception):
    """Base class for every error raised by the pipeline."""


class NonFiniteState(SkillchainError):
    def __init__(self, where: str, tick: int = -1):
        super().__init__(f"non-finite simulator state in {where} at tick {tick}")
        self.where = where
        self.tick = tick


class MalformedSpec(SkillchainError):
    pass


class UnsupportedMode(SkillchainError):
    pass


class SchemaError(SkillchainError):
    """Config or record failed validation. `diagnostics` holds one entry per field error."""

    def __init__(self, source: str, diagnostics: Iterable[Any]):
        self.source = source
        self.diagnostics: List[str] = [str(d) for d in diagnostics]
        super().__init__(f"{source}: " + "; ".join(self.diagnostics))


class DslError(SkillchainError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.message = message
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ParseError(DslError):
    def __init__(self, message: str, line: int, column: int, expected: Iterable[str] = ()):
        self.expected = sorted(set(expected))
        if self.expected:
            message = f"{message}; expected one of: {', '.join(self.expected)}"
        super().__init__(message, line, column)


class EvalError(DslError):
    def __init__(self, message: str, subexpression: str = ""):
        self.subexpression = subexpression
        super().__init__(f"{message}: {subexpression}" if subexpression else message)


class OracleFailure(SkillchainError):
    pass


class OrderViolation(SkillchainError):
    def __init__(self, skill: int, frame: int, completed: int):
        self.skill = skill
        self.frame = frame
        self.completed = completed
        super().__init__(
            f"discriminator {skill} fired at frame {frame} after skill {completed} completed"
        )


class IncompleteDemo(SkillchainError):
    def __init__(self, skill: int):
        self.skill = skill
        super().__init__(f"demo is missing skill {skill}")


class AugmentationInfeasible(SkillchainError):
    pass


class ContextOverflow(SkillchainError):
    pass


class EmptyDataset(SkillchainError):
    pass


class TrainingDiverged(SkillchainError):
    pass


class YieldTooLow(SkillchainError):
    def __init__(self, what: str, ratio: float, floor: float):
        self.ratio = ratio
        super().__init__(f"{what}: success ratio {ratio:.3f} below {floor:.3f}")


class EmptySet(SkillchainError):
    pass


class Infeasible(SkillchainError):
    REASONS = ("no-path", "replay-collision", "replay-divergence")

    def __init__(self, reason: str, detail: str = ""):
        if reason not in self.REASONS:
            raise ValueError(f"unknown infeasibility reason {reason!r}")
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


class MissingFamily(SkillchainError):
    def __init__(self, skill: int):
        self.skill = skill
        super().__init__(f"transition dataset has no trajectories ending in skill {skill}")


class StageError(SkillchainError):
    """Wraps a failure with the pipeline stage it came from."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage} failed: {cause}")


def pydantic_diagnostics(errors: List[Dict[str, Any]]) -> List[str]:
    out = []
    for e in errors:
        loc = ".".join(str(p) for p in e.get("loc", ()))
        out.append(f"{loc}: {e.get('msg', '')}" if loc else str(e.get("msg", "")))
    return out
