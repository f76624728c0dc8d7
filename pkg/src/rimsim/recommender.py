"""Risk scoring over predicted deficits and daily features.

Every risk is a weight times a magnitude. The two model-driven risks come
from the sleep and distance deficits; rule risks cover skipped meals, BMI
outside a healthy range, and two interactions. All risks are summed into a
composite score, weak ones are filtered out, and the strongest few messages
are returned.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from rimsim.features import FEATURES

# Tie-break order for equal risks; lower sorts first.
PRECEDENCE = {"sleep": 0, "distance": 1, "bmi": 2, "meal": 3}
_INTERACTION_RANK = 4


def load_catalog(path: str | Path | None = None) -> dict:
    if path is None:
        text = resources.files("rimsim").joinpath("data/messages.toml").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return tomllib.loads(text)


@dataclass(frozen=True)
class RiskItem:
    source: str
    risk: float
    message: str

    def __post_init__(self):
        if self.risk < 0:
            raise ValueError(f"risk must be >= 0, got {self.risk}")
        if not self.message:
            raise ValueError("message must be non-empty")

    @property
    def rank(self) -> int:
        return PRECEDENCE.get(self.source, _INTERACTION_RANK)


@dataclass(frozen=True)
class RecommenderConfig:
    w_sleep: float = 1.0
    w_distance: float = 0.8
    w_bmi: float = 1.0
    w_meal: float = 1.0
    tau_sleep: float = 0.5
    tau_distance: float = 0.5
    theta: float = 0.5
    r_high: float = 3.0
    top_n: int = 2
    bmi_range: tuple[float, float] = (18.5, 24.9)
    bmi_cap: float = 3.0
    interaction_factor: float = 0.5
    catalog: dict = field(default_factory=load_catalog, compare=False)

    def validate(self) -> None:
        for name in ("w_sleep", "w_distance", "w_bmi", "w_meal", "theta", "tau_sleep",
                     "tau_distance", "bmi_cap", "interaction_factor"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")
        if not self.bmi_range[0] < self.bmi_range[1]:
            raise ValueError("bmi_range must satisfy min < max")

    def message(self, source: str, key: str) -> str:
        return self.catalog[source][key]


@dataclass(frozen=True)
class RecommendationSet:
    messages: tuple[str, ...]
    high_priority: bool
    score: float
    items: tuple[RiskItem, ...] = ()
    fallback: bool = False

    def render(self, tag: str = "[HIGH PRIORITY]") -> str:
        lines = list(self.messages)
        if self.high_priority:
            lines[0] = f"{tag} {lines[0]}"
        return "\n".join(lines)


def param_risks(deficits: Sequence[float], cfg: RecommenderConfig) -> list[RiskItem]:
    d_sleep, d_distance = (float(v) for v in deficits)
    items = []
    for source, d, w, tau in (("sleep", d_sleep, cfg.w_sleep, cfg.tau_sleep),
                              ("distance", d_distance, cfg.w_distance, cfg.tau_distance)):
        if abs(d) > tau:
            direction = "low" if d > 0 else "high"
            items.append(RiskItem(source, w * abs(d), cfg.message(source, direction)))
    return items


def rule_risks(features: Sequence[float], deficits: Sequence[float],
               cfg: RecommenderConfig) -> list[RiskItem]:
    """Meal, BMI and interaction rules over raw (unstandardized) features."""
    f = dict(zip(FEATURES, (float(v) for v in features)))
    d_sleep, d_distance = (float(v) for v in deficits)
    items = []

    meal_risk = cfg.w_meal * (1 - f["breakfast"]) + cfg.w_meal * (2 - f["meal"]) / 2
    if meal_risk > 0:
        key = "breakfast" if f["breakfast"] == 0 else "meals"
        items.append(RiskItem("meal", meal_risk, cfg.message("meal", key)))

    lo, hi = cfg.bmi_range
    bmi = f["bmi"]
    if bmi < lo or bmi > hi:
        gap = lo - bmi if bmi < lo else bmi - hi
        items.append(RiskItem("bmi", cfg.w_bmi * min(gap, cfg.bmi_cap),
                              cfg.message("bmi", "low" if bmi < lo else "high")))

    if d_sleep > cfg.tau_sleep and f["breakfast"] == 0:
        items.append(RiskItem("interaction:sleep_breakfast", cfg.interaction_factor * cfg.w_sleep,
                              cfg.message("interaction", "sleep_breakfast")))
    if d_distance > cfg.tau_distance and f["meal"] < 2:
        items.append(RiskItem("interaction:distance_meal",
                              cfg.interaction_factor * cfg.w_distance,
                              cfg.message("interaction", "distance_meal")))
    return items


def composite(items: Sequence[RiskItem]) -> float:
    return float(sum(i.risk for i in items))


def select(items: Sequence[RiskItem], score: float, cfg: RecommenderConfig) -> RecommendationSet:
    kept = [i for i in items if i.risk >= cfg.theta]
    if not kept:
        # the fallback carries no priority tag whatever the composite score
        return RecommendationSet((cfg.catalog["fallback"],), False, score, (), fallback=True)
    kept.sort(key=lambda i: (-i.risk, i.rank, i.source))
    top = tuple(kept[:cfg.top_n])
    return RecommendationSet(tuple(i.message for i in top), score > cfg.r_high, score, top)


def recommend(features: Sequence[float], deficits: Sequence[float],
              cfg: RecommenderConfig | None = None) -> RecommendationSet:
    cfg = cfg or RecommenderConfig()
    items = param_risks(deficits, cfg) + rule_risks(features, deficits, cfg)
    return select(items, composite(items), cfg)


def deficits_from_model(checkpoint, raw_features: np.ndarray) -> np.ndarray:
    from rimsim import mlp

    x = checkpoint.scaler.transform(np.asarray(raw_features, dtype=float))
    return mlp.forward(checkpoint.params, x, checkpoint.arch.activation)
