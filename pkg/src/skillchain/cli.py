# src/skillchain/cli.py
"""
Command-line entry point.
Usage:
    python -m skillchain pipeline --config cfg.json --out output/
    python -m skillchain eval --config cfg.json --seed 3
    python -m skillchain seglang-check bulb-analog --expr "dist(bulb_center, socket_center) <= eps_pos"
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from .errors import DslError, SchemaError, SkillchainError, StageError
from .logging_setup import configure_logging
from .pipeline import ablation_suite, run_pipeline
from .schema.pipeline_schema import PipelineConfig
from .seglang import parse, typecheck
from .tasks import load_task
from .validator import load_model

logger = logging.getLogger(__name__)

ARTIFACT_ENV = "SKILLCHAIN_ARTIFACTS"
STAGE_VERBS = {"demo": "demo", "segment": "segment", "train-skill": "train-skill",
               "gen-transitions": "gen-transitions", "train-srt": "train-srt", "eval": "eval", "pipeline": "eval"}


def artifact_root(flag: Optional[str]) -> Path:
    return Path(flag or os.environ.get(ARTIFACT_ENV) or "output")


def load_config(path: Optional[str], seed: Optional[int]) -> PipelineConfig:
    cfg = load_model(path, PipelineConfig) if path else PipelineConfig()
    if seed is not None:
        cfg = cfg.model_copy(update={"seeds": [seed]})
    return cfg


def seglang_check(task_name: str, expr: Optional[str], role: str) -> int:
    """Typecheck one expression against a task vocabulary, or every expression of the task config."""
    try:
        task = load_task(task_name)
    except (DslError, SchemaError) as e:
        print(f"❌ {e}")
        return 1
    if expr is None:
        print(f"✔ {task.name}: {task.K} discriminators and success predicates typecheck")
        return 0
    try:
        diags = typecheck(parse(expr), task.vocabulary, role)
    except DslError as e:
        print(f"❌ {e}")
        return 1
    for d in diags:
        print(f"❌ {d}")
    if not diags:
        print(f"✔ well-formed {role} expression")
    return 1 if diags else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skillchain", description="Desk-scale skill-chaining pipeline.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Warnings only (no progress bars)")
    sub = parser.add_subparsers(dest="verb", required=True)

    for verb in list(STAGE_VERBS) + ["ablate"]:
        p = sub.add_parser(verb, help=f"Run the pipeline up to and including {STAGE_VERBS.get(verb, 'eval')}"
                           if verb != "ablate" else "Run every ablation row and write the comparison table")
        p.add_argument("-c", "--config", help="PipelineConfig JSON (defaults when omitted)")
        p.add_argument("-s", "--seed", type=int, help="Run this seed only")
        p.add_argument("-o", "--out", help=f"Artifact root (else ${ARTIFACT_ENV}, else ./output)")
        if verb == "ablate":
            p.add_argument("--rows", nargs="*", help="Subset of ablation rows")

    p = sub.add_parser("seglang-check", help="Typecheck a task config or a single DSL expression")
    p.add_argument("task", help="Bundled task name or task JSON path")
    p.add_argument("--expr", help="Expression to check against the task vocabulary")
    p.add_argument("--role", default="predicate", choices=["point", "contact", "predicate"])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    if args.verb == "seglang-check":
        configure_logging(level)
        return seglang_check(args.task, args.expr, args.role)

    root = artifact_root(args.out)
    configure_logging(level, root / "logs")
    try:
        cfg = load_config(args.config, args.seed)
        if args.verb == "ablate":
            ablation_suite(cfg, root, args.rows)
        else:
            until = STAGE_VERBS[args.verb]
            run_pipeline(cfg, root, until)
    except StageError as e:
        logger.error("❌ %s", e)
        return 2
    except SkillchainError as e:
        logger.error("❌ %s", e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
