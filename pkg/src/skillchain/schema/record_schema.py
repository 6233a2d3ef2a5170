# src/skillchain/schema/record_schema.py
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class DemoEntry(BaseModel):
    path: str
    seed: int
    attempts: int = 1
    frames: int
    phase_path: Optional[str] = Field(None, description="Ground-truth phases; evaluation only")


class DemoManifest(BaseModel):
    task: str
    task_config_hash: str
    demo_config_hash: str
    entries: List[DemoEntry] = []
    data_quality: dict = {"score": 0.0, "errors": []}


class SegmentationManifest(BaseModel):
    task: str
    discriminator_hashes: List[str]
    demo_manifest_hash: str = ""
    track: dict = {}
    debounce: dict = {}
    n_demos: int = 0
    accepted: List[str] = []
    rejected: Dict[str, str] = {}
    order_violations: List[str] = []
    data_quality: dict = {"score": 0.0, "errors": []}


class TransitionManifest(BaseModel):
    task: str
    families: Dict[str, int] = {}  # "i->j": trajectory count
    stats: Dict[str, int] = {}
    data_quality: dict = {"score": 0.0, "errors": []}


class MetricsRecord(BaseModel):
    task: str
    label: str = "full"
    n_episodes: int = 0
    success_rate: float = 0.0
    ci_low: float = 0.0
    ci_high: float = 0.0
    cumulative_failure: List[float] = []
    data_quality: dict = {"score": 0.0, "errors": []}
