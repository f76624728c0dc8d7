"""Model inputs and deficit targets derived from daily records."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rimsim.synthgen import DailyRecord

FEATURES = ("distance", "sleep", "bmi", "age", "breakfast", "meal", "gender")
TARGETS = ("d_sleep", "d_distance")
FEATURE_VERSION = 1

_STD_FLOOR = 1e-8


class InvalidRecordError(ValueError):
    pass


@dataclass(frozen=True)
class IdealRanges:
    sleep: tuple[float, float] = (7.0, 9.0)
    distance: tuple[float, float] = (5.0, 8.0)

    def validate(self) -> None:
        for name in ("sleep", "distance"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} range must satisfy min < max, got {(lo, hi)}")


@dataclass(frozen=True)
class ScalerStats:
    mean: np.ndarray
    std: np.ndarray
    count: int

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "count": self.count}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerStats":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float),
                   int(d["count"]))


def bmi(weight_kg: float, height_cm: float) -> float:
    if height_cm <= 0:
        raise InvalidRecordError(f"height must be > 0, got {height_cm}")
    h = height_cm / 100.0
    return weight_kg / (h * h)


def engineer(record: DailyRecord) -> np.ndarray:
    """Feature vector in canonical order; steps and raw height/weight are dropped."""
    return np.array([
        record.distance,
        record.sleep,
        bmi(record.weight, record.height),
        record.age,
        record.breakfast,
        record.lunch + record.dinner,
        record.gender,
    ], dtype=float)


def engineer_many(records: Sequence[DailyRecord]) -> np.ndarray:
    if not records:
        return np.empty((0, len(FEATURES)))
    return np.stack([engineer(r) for r in records])


def fit_scaler(rows: np.ndarray) -> ScalerStats:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ValueError("cannot fit a scaler on an empty set")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)  # population (1/n)
    std = np.where(std < _STD_FLOOR, 1.0, std)
    return ScalerStats(mean, std, rows.shape[0])


def transform(stats: ScalerStats, x: np.ndarray) -> np.ndarray:
    return stats.transform(x)


def deficit(value: float, lo: float, hi: float) -> float:
    if value < lo:
        return lo - value
    if value > hi:
        return -(value - hi)
    return 0.0


def deficit_labels(record: DailyRecord, ranges: IdealRanges = IdealRanges()) -> np.ndarray:
    """``[d_sleep, d_distance]``: positive below the range, negative above, zero inside."""
    return np.array([
        deficit(record.sleep, *ranges.sleep),
        deficit(record.distance, *ranges.distance),
    ])


def labels_many(records: Sequence[DailyRecord], ranges: IdealRanges = IdealRanges()) -> np.ndarray:
    if not records:
        return np.empty((0, len(TARGETS)))
    return np.stack([deficit_labels(r, ranges) for r in records])
