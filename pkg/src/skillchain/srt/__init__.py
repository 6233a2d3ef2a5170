# src/skillchain/srt/__init__.py
from .executor import EpisodeResult, execute_long_horizon, stage_names
from .policy import SrtOutput, SrtPolicy, srt_infer
from .routers import (OracleRouter, OracleSkill, PlannerRouter, PolicySkill, Router, RouteStep, SkillController,
                      SrtRouter)
from .train import SrtWindows, stage_accuracy, train_srt

__all__ = [
    "EpisodeResult", "execute_long_horizon", "stage_names", "SrtOutput", "SrtPolicy", "srt_infer",
    "OracleRouter", "OracleSkill", "PlannerRouter", "PolicySkill", "Router", "RouteStep", "SkillController",
    "SrtRouter", "SrtWindows", "stage_accuracy", "train_srt",
]
