# src/skillchain/schema/segmentation_schema.py
from pydantic import BaseModel, Field, field_validator


class KeypointTrackConfig(BaseModel):
    sigma_kp: float = Field(0.0, description="Per-frame Gaussian keypoint noise (m)")
    p_drop: float = Field(0.0, description="Per-keypoint per-frame tracking-loss probability")
    hold_frames: int = Field(5, description="Frames a lost keypoint keeps its last value")

    @field_validator("sigma_kp")
    @classmethod
    def _sigma(cls, v):
        if v < 0:
            raise ValueError("sigma_kp must be >= 0")
        return v

    @field_validator("p_drop")
    @classmethod
    def _p(cls, v):
        if not 0.0 <= v < 1.0:
            raise ValueError("p_drop must lie in [0, 1)")
        return v

    @field_validator("hold_frames")
    @classmethod
    def _hold(cls, v):
        if v < 0:
            raise ValueError("hold_frames must be >= 0")
        return v


class DebounceConfig(BaseModel):
    m_on: int = 3
    m_off: int = 3

    @field_validator("m_on", "m_off")
    @classmethod
    def _positive(cls, v):
        if v < 1:
            raise ValueError("debounce windows are at least one frame")
        return v


class AugmentConfig(BaseModel):
    pos_radius: float = 0.02  # m, uniform disk
    rot_range: float = 0.17  # rad, uniform(-rot_range, rot_range)
    n_out: int = 200
    max_tries: int = 100
    settle_check: bool = True

    @field_validator("pos_radius", "rot_range")
    @classmethod
    def _nonneg(cls, v):
        if v < 0:
            raise ValueError("perturbation magnitudes must be >= 0")
        return v
