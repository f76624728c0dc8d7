"""Seeded synthetic lifestyle data.

Each simulated user gets a profile (gender, height, weight, age) and a
per-user stride length; each day adds step count, derived distance, sleep
hours and three meal flags. Random streams come from numpy's PCG64 seeded
through ``SeedSequence(seed, spawn_key=(user_id, stream))`` so a user's records do
not depend on how many other users are generated or in which order.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CSV_HEADER = (
    "date",
    "steps",
    "distance_km",
    "sleep_hrs",
    "breakfast",
    "lunch",
    "dinner",
    "age",
    "height_cm",
    "weight_kg",
    "gender",
    "user_id",
)

FEMALE, MALE = 0, 1

# Streams under one user seed; fixed so adding a stream never shifts another.
_PROFILE_STREAM = 0
_DAY_STREAM = 1


@dataclass(frozen=True)
class UserProfile:
    user_id: int
    age: int
    gender: int
    height: float
    weight: float
    stride_km: float


@dataclass(frozen=True)
class DailyRecord:
    date: dt.date
    steps: int
    distance: float
    sleep: float
    breakfast: int
    lunch: int
    dinner: int
    age: int
    height: float
    weight: float
    gender: int
    user_id: int = 0

    def validate(self) -> None:
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if self.distance < 0:
            raise ValueError(f"distance must be >= 0, got {self.distance}")
        if not 0 <= self.sleep <= 24:
            raise ValueError(f"sleep must lie in [0, 24], got {self.sleep}")
        for name in ("breakfast", "lunch", "dinner", "gender"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1")


@dataclass
class GeneratorConfig:
    """Distribution parameters for the synthetic cohort.

    Gender is encoded 0 = female, 1 = male. Weight is log-normal with the
    given median and log-scale sd. Step counts are negative binomial with
    the given mean and dispersion (variance = mean + mean**2 / dispersion).
    """

    steps_mean: float = 7000.0
    steps_dispersion: float = 4.0
    stride_mean_km: float = 0.0007
    stride_sd_km: float = 0.00005
    sleep_mean: float = 7.0
    sleep_sd: float = 1.1
    sleep_min: float = 3.0
    sleep_max: float = 12.0
    p_breakfast: float = 0.75
    p_lunch: float = 0.90
    p_dinner: float = 0.90
    height_mean_male: float = 175.0
    height_sd_male: float = 7.0
    height_mean_female: float = 162.0
    height_sd_female: float = 6.0
    weight_median_male: float = 70.0
    weight_median_female: float = 60.0
    weight_log_sd: float = 0.15
    age_mean: float = 21.0
    age_sd: float = 2.0
    age_min: int = 17
    age_max: int = 30
    p_male: float = 0.5
    start_date: str = "2025-04-01"
    seed: int = 0

    def validate(self) -> None:
        for name in ("p_breakfast", "p_lunch", "p_dinner", "p_male"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        for name in (
            "steps_mean", "steps_dispersion", "stride_mean_km", "stride_sd_km",
            "sleep_sd", "height_sd_male", "height_sd_female",
            "weight_median_male", "weight_median_female", "weight_log_sd", "age_sd",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.sleep_min < self.sleep_max:
            raise ValueError("sleep_min must be < sleep_max")
        if not self.age_min < self.age_max:
            raise ValueError("age_min must be < age_max")
        if self.sleep_min < 0 or self.sleep_max > 24:
            raise ValueError("sleep bounds must lie within [0, 24]")
        dt.date.fromisoformat(self.start_date)


def truncated_normal(rng: np.random.Generator, mean: float, sd: float,
                     low: float, high: float) -> float:
    """One draw from Normal(mean, sd) conditioned on [low, high] by rejection."""
    while True:
        v = rng.normal(mean, sd)
        if low <= v <= high:
            return float(v)


def user_rng(seed: int, user_id: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(user_id, stream))
    return np.random.Generator(np.random.PCG64(ss))


def sample_profile(rng: np.random.Generator, cfg: GeneratorConfig,
                   user_id: int = 0) -> UserProfile:
    # gender first: it selects the height/weight parameters
    gender = int(rng.random() < cfg.p_male)
    if gender == MALE:
        height = rng.normal(cfg.height_mean_male, cfg.height_sd_male)
        median = cfg.weight_median_male
    else:
        height = rng.normal(cfg.height_mean_female, cfg.height_sd_female)
        median = cfg.weight_median_female
    weight = rng.lognormal(np.log(median), cfg.weight_log_sd)
    age = round(truncated_normal(rng, cfg.age_mean, cfg.age_sd, cfg.age_min, cfg.age_max))
    stride = truncated_normal(rng, cfg.stride_mean_km, cfg.stride_sd_km, 1e-6, np.inf)
    return UserProfile(
        user_id=user_id,
        age=int(age),
        gender=gender,
        height=float(height),
        weight=float(weight),
        stride_km=stride,
    )


def sample_steps(rng: np.random.Generator, cfg: GeneratorConfig) -> int:
    n = cfg.steps_dispersion
    p = n / (n + cfg.steps_mean)
    return int(rng.negative_binomial(n, p))


def sample_day(profile: UserProfile, rng: np.random.Generator, cfg: GeneratorConfig,
               date: dt.date | None = None) -> DailyRecord:
    steps = sample_steps(rng, cfg)
    sleep = truncated_normal(rng, cfg.sleep_mean, cfg.sleep_sd, cfg.sleep_min, cfg.sleep_max)
    breakfast = int(rng.random() < cfg.p_breakfast)
    lunch = int(rng.random() < cfg.p_lunch)
    dinner = int(rng.random() < cfg.p_dinner)
    return DailyRecord(
        date=date or dt.date.fromisoformat(cfg.start_date),
        steps=steps,
        distance=steps * profile.stride_km,
        sleep=sleep,
        breakfast=breakfast,
        lunch=lunch,
        dinner=dinner,
        age=profile.age,
        height=profile.height,
        weight=profile.weight,
        gender=profile.gender,
        user_id=profile.user_id,
    )


def generate_user(user_id: int, days: int, cfg: GeneratorConfig,
                  seed: int | None = None) -> tuple[UserProfile, list[DailyRecord]]:
    seed = cfg.seed if seed is None else seed
    profile = sample_profile(user_rng(seed, user_id, _PROFILE_STREAM), cfg, user_id)
    rng = user_rng(seed, user_id, _DAY_STREAM)
    start = dt.date.fromisoformat(cfg.start_date)
    records = [
        sample_day(profile, rng, cfg, start + dt.timedelta(days=d)) for d in range(days)
    ]
    return profile, records


def generate_dataset(n_users: int, days_per_user: int, seed: int,
                     cfg: GeneratorConfig | None = None) -> list[list[DailyRecord]]:
    """Records grouped by user, ordered by user_id then date."""
    if n_users < 1:
        raise ValueError(f"n_users must be >= 1, got {n_users}")
    if days_per_user < 1:
        raise ValueError(f"days_per_user must be >= 1, got {days_per_user}")
    cfg = cfg or GeneratorConfig()
    cfg.validate()
    return [generate_user(uid, days_per_user, cfg, seed)[1] for uid in range(n_users)]


def flatten(dataset: list[list[DailyRecord]]) -> list[DailyRecord]:
    return [r for user in dataset for r in user]


def _row(r: DailyRecord) -> list[str]:
    return [
        r.date.isoformat(),
        str(r.steps),
        f"{r.distance:.4f}",
        f"{r.sleep:.4f}",
        str(r.breakfast),
        str(r.lunch),
        str(r.dinner),
        str(r.age),
        f"{r.height:.2f}",
        f"{r.weight:.2f}",
        str(r.gender),
        str(r.user_id),
    ]


def to_csv(records: list[DailyRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(_row(r))
    return buf.getvalue()


def write_csv(records: list[DailyRecord], path: str | Path) -> None:
    Path(path).write_text(to_csv(records), encoding="utf-8", newline="")


def read_csv(path: str | Path) -> list[DailyRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {reader.fieldnames}")
        out = []
        for row in reader:
            rec = DailyRecord(
                date=dt.date.fromisoformat(row["date"]),
                steps=int(row["steps"]),
                distance=float(row["distance_km"]),
                sleep=float(row["sleep_hrs"]),
                breakfast=int(row["breakfast"]),
                lunch=int(row["lunch"]),
                dinner=int(row["dinner"]),
                age=int(row["age"]),
                height=float(row["height_cm"]),
                weight=float(row["weight_kg"]),
                gender=int(row["gender"]),
                user_id=int(row["user_id"]),
            )
            rec.validate()
            out.append(rec)
    return out


def group_by_user(records: list[DailyRecord]) -> list[list[DailyRecord]]:
    users: dict[int, list[DailyRecord]] = {}
    for r in records:
        users.setdefault(r.user_id, []).append(r)
    return [sorted(users[k], key=lambda r: r.date) for k in sorted(users)]
