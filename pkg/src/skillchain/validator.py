# src/skillchain/validator.py
"""Schema validation for config files and stage records, plus a 0-1 quality score per record."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

from .errors import SchemaError, pydantic_diagnostics
from .schema.task_schema import DemoConfig, TaskConfig

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)


def _schema_map() -> Dict[str, Type[BaseModel]]:
    from .schema.pipeline_schema import PipelineConfig
    from .schema.record_schema import DemoManifest, MetricsRecord, SegmentationManifest, TransitionManifest

    return {
        "task": TaskConfig,
        "demo": DemoConfig,
        "pipeline": PipelineConfig,
        "demo_manifest": DemoManifest,
        "segmentation": SegmentationManifest,
        "transition": TransitionManifest,
        "metrics": MetricsRecord,
    }


def load_model(path: Union[str, Path], cls: Type[M]) -> M:
    """Read a JSON file into `cls`. Any failure becomes a SchemaError with one diagnostic per field."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SchemaError(str(path), ["file not found"]) from None
    except json.JSONDecodeError as e:
        raise SchemaError(str(path), [f"line {e.lineno}, column {e.colno}: {e.msg}"]) from None
    return parse_model(raw, cls, str(path))


def parse_model(raw: Any, cls: Type[M], source: str = "<memory>") -> M:
    try:
        return cls.model_validate(raw)
    except ValidationError as ve:
        raise SchemaError(source, pydantic_diagnostics(ve.errors())) from None


def compute_score_and_errors(kind: str, raw: dict) -> Tuple[float, List[str]]:
    """
    Heuristic quality of a stage record:
     - start at 1.0
     - deduct for low yields and missing pieces
    Returns (score, error_list)
    """
    score = 1.0
    errors = []

    if kind == "demo_manifest":
        entries = raw.get("entries") or []
        if not entries:
            score -= 0.5
            errors.append("No trajectories listed in demo manifest.")
        retries = sum(e.get("attempts", 1) - 1 for e in entries)
        if entries and retries > len(entries):
            score -= 0.1
            errors.append(f"Oracle needed {retries} retries for {len(entries)} demos.")

    elif kind == "segmentation":
        n_in, n_ok = raw.get("n_demos", 0), len(raw.get("accepted") or [])
        if n_in and n_ok < n_in:
            score -= 0.3 * (n_in - n_ok) / n_in
            errors.append(f"{n_in - n_ok} of {n_in} demos rejected during segmentation.")
        if raw.get("order_violations"):
            score -= 0.1
            errors.append(f"{len(raw['order_violations'])} discriminator order violations.")

    elif kind == "transition":
        stats = raw.get("stats") or {}
        attempts, accepted = stats.get("attempts", 0), stats.get("accepted", 0)
        if attempts and accepted / attempts < 0.5:
            score -= 0.2
            errors.append(f"Planner accepted {accepted} of {attempts} pairs.")
        if not raw.get("families"):
            score -= 0.5
            errors.append("No transition families generated.")

    elif kind == "metrics":
        if raw.get("n_episodes", 0) == 0:
            score -= 0.5
            errors.append("Metrics computed over zero episodes.")

    score = max(0.0, round(score, 2))
    return score, errors


def validate_and_score(kind: str, record: dict) -> Tuple[Dict[str, Any], List[str]]:
    """
    Validate a record against its schema (if one is registered).
    Returns:
      - validated dict with a data_quality block
      - errors (list of strings)
    """
    schema_cls = _schema_map().get(kind)
    errors: List[str] = []
    validated = dict(record)

    if schema_cls is not None:
        try:
            validated = schema_cls.model_validate(validated).model_dump()
        except ValidationError as ve:
            errors.extend(pydantic_diagnostics(ve.errors()))

    score, heuristic_errors = compute_score_and_errors(kind, validated)
    errors.extend(heuristic_errors)
    validated["data_quality"] = {"score": score, "errors": list(errors)}
    if errors:
        logger.debug("%s record: %s", kind, "; ".join(errors))
    return validated, errors
