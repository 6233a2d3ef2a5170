# src/skillchain/schema/pipeline_schema.py
import hashlib
import json
from typing import List, Literal

from pydantic import BaseModel, Field, field_validator, model_validator

from .learn_schema import BcConfig, CollectConfig, CotrainConfig, ExplorationSchedule, PolicySpec, PpoConfig
from .segmentation_schema import AugmentConfig, DebounceConfig, KeypointTrackConfig
from .srt_schema import ChainingConfig, SrtConfig
from .task_schema import DemoConfig
from .transition_schema import TransitionConfig
from .world_schema import RandomizationSpec


class OodConfig(BaseModel):
    init_scale: float = 1.0  # multiplies the initial-pose ranges
    kick: float = 0.0  # m, random pose kick of one object at a random mid-episode step
    kick_rotation: float = 0.0  # rad
    kick_window: List[float] = Field(default_factory=lambda: [0.3, 0.7])  # fraction of the episode cap

    @field_validator("init_scale")
    @classmethod
    def _scale(cls, v):
        if v <= 0:
            raise ValueError("init_scale must be > 0")
        return v


class EvalConfig(BaseModel):
    n_episodes: int = 20
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    router: Literal["srt", "planner", "oracle"] = "srt"
    skills: Literal["learned", "oracle"] = "learned"
    widen: float = 1.25  # deployment-analog randomization widening
    obs_noise_factor: float = 2.0  # deployment-analog observation noise multiplier
    confidence: float = 0.95
    write_traces: bool = False
    baseline: bool = True  # also evaluate the demo-only BC skills under the same router
    regimes: List[Literal["sim", "deployment"]] = Field(default_factory=lambda: ["sim", "deployment"])

    @field_validator("n_episodes")
    @classmethod
    def _n(cls, v):
        if v < 1:
            raise ValueError("n_episodes must be >= 1")
        return v


class AblationToggles(BaseModel):
    predefined_skills: bool = False
    rl_finetune: bool = False
    no_transition: bool = False
    no_sim_augmentation: bool = False
    no_real_cotraining: bool = False
    predefined_offset: int = 10  # frames of boundary offset for hand-set segments

    def label(self) -> str:
        on = [name.replace("_", "-") for name in ("predefined_skills", "rl_finetune", "no_transition",
                                                   "no_sim_augmentation", "no_real_cotraining")
              if getattr(self, name)]
        return "+".join(on) if on else "full"


class PipelineConfig(BaseModel):
    task: str = "bulb-analog"
    seeds: List[int] = Field(default_factory=lambda: [0])
    demo: DemoConfig = Field(default_factory=DemoConfig)
    track: KeypointTrackConfig = Field(default_factory=KeypointTrackConfig)
    debounce: DebounceConfig = Field(default_factory=DebounceConfig)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)
    randomization: RandomizationSpec = Field(default_factory=RandomizationSpec)
    base_policy: PolicySpec = Field(default_factory=PolicySpec)
    skill_policy: PolicySpec = Field(default_factory=PolicySpec)
    bc: BcConfig = Field(default_factory=BcConfig)
    ppo: PpoConfig = Field(default_factory=PpoConfig)
    schedule: ExplorationSchedule = Field(default_factory=ExplorationSchedule)
    collect: CollectConfig = Field(default_factory=CollectConfig)
    cotrain: CotrainConfig = Field(default_factory=CotrainConfig)
    transition: TransitionConfig = Field(default_factory=TransitionConfig)
    srt: SrtConfig = Field(default_factory=SrtConfig)
    chaining: ChainingConfig = Field(default_factory=ChainingConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    ood: OodConfig = Field(default_factory=OodConfig)
    toggles: AblationToggles = Field(default_factory=AblationToggles)
    workers: int = 1

    @model_validator(mode="after")
    def _consistent(self):
        if self.toggles.no_transition and self.eval.router == "srt":
            self.eval.router = "planner"
        if self.toggles.no_real_cotraining:
            self.cotrain.allow_sim_only = True
        if self.base_policy.obs_mode == "privileged" or self.skill_policy.obs_mode == "privileged":
            raise ValueError("base and skill policies observe pose or pointset state only")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        return self

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def section_hash(self, *names: str) -> str:
        """Hash over a subset of sections; stage cache keys chain these."""
        dump = self.model_dump(mode="json")
        part = {n: dump[n] for n in names}
        return hashlib.sha256(json.dumps(part, sort_keys=True, separators=(",", ":")).encode("utf-8")).hexdigest()
