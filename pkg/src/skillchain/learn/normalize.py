# src/skillchain/learn/normalize.py
from dataclasses import dataclass
from typing import Optional

import numpy as np

EPS = 1e-6


@dataclass
class RangeNormalizer:
    """Per-dimension affine map of [low, high] onto [-1, 1]; constant dimensions map to 0."""

    low: np.ndarray
    high: np.ndarray

    @classmethod
    def fit(cls, data: np.ndarray) -> "RangeNormalizer":
        data = np.asarray(data, float).reshape(-1, np.asarray(data).shape[-1])
        return cls(data.min(axis=0), data.max(axis=0))

    @property
    def span(self) -> np.ndarray:
        return self.high - self.low

    def normalize(self, x: np.ndarray) -> np.ndarray:
        span = self.span
        safe = np.where(span > EPS, span, 1.0)
        out = 2.0 * (np.asarray(x, float) - self.low) / safe - 1.0
        return np.where(span > EPS, out, 0.0)

    def denormalize(self, y: np.ndarray) -> np.ndarray:
        return self.low + (np.asarray(y, float) + 1.0) * 0.5 * self.span

    def to_dict(self) -> dict:
        return {"low": self.low.tolist(), "high": self.high.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RangeNormalizer":
        return cls(np.asarray(d["low"], float), np.asarray(d["high"], float))


@dataclass
class StandardNormalizer:
    """(x - mean) / std, clipped to ±clip."""

    mean: np.ndarray
    std: np.ndarray
    clip: float = 5.0

    @classmethod
    def fit(cls, data: np.ndarray, clip: float = 5.0, pooled_from: Optional[int] = None) -> "StandardNormalizer":
        """`pooled_from`: dimensions from this index on are 2-D points sharing one mean/std per axis."""
        data = np.asarray(data, float).reshape(-1, np.asarray(data).shape[-1])
        mean, std = data.mean(axis=0), data.std(axis=0)
        if pooled_from is not None and data.shape[1] > pooled_from:
            pts = data[:, pooled_from:].reshape(-1, 2)
            n = (data.shape[1] - pooled_from) // 2
            mean[pooled_from:] = np.tile(pts.mean(axis=0), n)
            std[pooled_from:] = np.tile(pts.std(axis=0), n)
        return cls(mean, np.maximum(std, EPS), clip)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return np.clip((np.asarray(x, float) - self.mean) / self.std, -self.clip, self.clip)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "clip": self.clip}

    @classmethod
    def from_dict(cls, d: dict) -> "StandardNormalizer":
        return cls(np.asarray(d["mean"], float), np.asarray(d["std"], float), float(d.get("clip", 5.0)))


class RunningMeanStd:
    """Streaming mean/variance for on-policy observation normalization."""

    def __init__(self, dim: int, clip: float = 5.0):
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = EPS
        self.clip = clip

    def update(self, x: np.ndarray) -> None:
        x = np.asarray(x, float).reshape(-1, self.mean.shape[0])
        b_mean, b_var, b_count = x.mean(axis=0), x.var(axis=0), x.shape[0]
        delta = b_mean - self.mean
        total = self.count + b_count
        self.mean = self.mean + delta * b_count / total
        m2 = self.var * self.count + b_var * b_count + delta ** 2 * self.count * b_count / total
        self.var = m2 / total
        self.count = total

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return np.clip((np.asarray(x, float) - self.mean) / np.sqrt(self.var + 1e-8), -self.clip, self.clip)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "var": self.var.tolist(), "count": self.count, "clip": self.clip}

    @classmethod
    def from_dict(cls, d: dict) -> "RunningMeanStd":
        out = cls(len(d["mean"]), float(d.get("clip", 5.0)))
        out.mean = np.asarray(d["mean"], float)
        out.var = np.asarray(d["var"], float)
        out.count = float(d["count"])
        return out
