"""Synthetic self-monitoring datasets with planted clusters and observations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Mapping, Sequence

import numpy as np

from . import rng
from .core import KCAL_PER_G_CARBS, KCAL_PER_G_FAT, KCAL_PER_G_PROTEIN, Dataset, Meal, MealType, Partition
from .errors import InvalidSpec
from .goldstandard import Group, GoldStandard, ObservationAst, Range

SYNTH_FEATURES = ("carbs_g", "fiber_g", "protein_g", "fat_g", "bg_change")
BASELINE_BG = 100.0
_BASE_TIME = datetime(2020, 1, 1, 7, 0, tzinfo=timezone.utc)
_DEFAULT_MIX = {"Breakfast": 1.0, "Lunch": 1.0, "Dinner": 1.0, "Snack": 1.0}


@dataclass(frozen=True)
class SynthSpec:
    n_meals: int
    k_planted: int
    centers: tuple[tuple[float, ...], ...]  # k x (carbs_g, fiber_g, protein_g, fat_g, bg_change)
    noise_sigma: tuple[float, ...]
    meal_type_mix: Mapping[str, float] = field(default_factory=lambda: dict(_DEFAULT_MIX))
    seed: int = 0
    participant_id: str = "synth"
    # planted ranges are center +/- bracket_sigmas * sigma
    bracket_sigmas: float = 2.0

    def __post_init__(self):
        centers = tuple(tuple(float(v) for v in row) for row in self.centers)
        sigma = self.noise_sigma
        if np.ndim(sigma) == 0:
            sigma = (float(sigma),) * len(SYNTH_FEATURES)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "noise_sigma", tuple(float(s) for s in sigma))
        object.__setattr__(self, "meal_type_mix", dict(self.meal_type_mix))
        self.validate()

    def validate(self):
        if self.k_planted < 1:
            raise InvalidSpec("k_planted must be at least 1")
        if self.n_meals < 5 * self.k_planted:
            raise InvalidSpec(f"n_meals must be at least 5 * k_planted = {5 * self.k_planted}")
        if len(self.centers) != self.k_planted:
            raise InvalidSpec(f"expected {self.k_planted} centers, got {len(self.centers)}")
        for row in self.centers:
            if len(row) != len(SYNTH_FEATURES):
                raise InvalidSpec(f"each center needs {len(SYNTH_FEATURES)} values {SYNTH_FEATURES}")
            if not all(np.isfinite(row)):
                raise InvalidSpec("centers must be finite")
        if len(self.noise_sigma) != len(SYNTH_FEATURES):
            raise InvalidSpec(f"noise_sigma needs 1 or {len(SYNTH_FEATURES)} values")
        if any(not np.isfinite(s) or s < 0 for s in self.noise_sigma):
            raise InvalidSpec("noise_sigma must be finite and non-negative")
        if not self.meal_type_mix:
            raise InvalidSpec("meal_type_mix is empty")
        for name, weight in self.meal_type_mix.items():
            if MealType.lookup(name) is None:
                raise InvalidSpec(f"unknown meal type {name!r} in meal_type_mix")
            if not weight >= 0:
                raise InvalidSpec("meal_type_mix weights must be non-negative")
        if sum(self.meal_type_mix.values()) <= 0:
            raise InvalidSpec("meal_type_mix weights sum to zero")
        if not self.bracket_sigmas > 0:
            raise InvalidSpec("bracket_sigmas must be positive")

    @classmethod
    def from_json(cls, data: Mapping) -> SynthSpec:
        known = {
            "n_meals", "k_planted", "centers", "noise_sigma", "meal_type_mix",
            "seed", "participant_id", "bracket_sigmas",
        }
        unknown = set(data) - known
        if unknown:
            raise InvalidSpec(f"unknown spec field(s): {', '.join(sorted(unknown))}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None

    @classmethod
    def load(cls, path) -> SynthSpec:
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidSpec(f"spec is not valid JSON: {exc}") from None
        return cls.from_json(data)

    def to_json(self) -> dict:
        return {
            "n_meals": self.n_meals,
            "k_planted": self.k_planted,
            "centers": [list(c) for c in self.centers],
            "noise_sigma": list(self.noise_sigma),
            "meal_type_mix": dict(self.meal_type_mix),
            "seed": self.seed,
            "participant_id": self.participant_id,
            "bracket_sigmas": self.bracket_sigmas,
        }


def _pick_meal_type(u: float, names: Sequence[str], cumulative: np.ndarray) -> MealType:
    idx = int(np.searchsorted(cumulative, u * cumulative[-1], side="right"))
    return MealType.lookup(names[min(idx, len(names) - 1)])


def generate_dataset(spec: SynthSpec) -> tuple[Dataset, Partition, GoldStandard]:
    """Draw meals around the planted centers.

    Meal ``i`` belongs to cluster ``i % k`` and uses the random stream keyed by
    ``(seed, i)``: five normals for its features, then one uniform for the
    meal type. Grams are clipped at zero; pre-meal glucose is a fixed baseline.
    """
    spec.validate()
    k = spec.k_planted
    centers = np.array(spec.centers)
    sigma = np.array(spec.noise_sigma)
    names = list(spec.meal_type_mix)
    cumulative = np.cumsum([spec.meal_type_mix[n] for n in names])
    n_feat = len(SYNTH_FEATURES)

    meals, labels = [], []
    for i in range(spec.n_meals):
        c = i % k
        key = rng.derive_key(spec.seed, i)
        z = rng.normal(key, n_feat)
        u = float(rng.uniform(key, 1, offset=2 * n_feat)[0])
        x = centers[c] + sigma * z
        carbs, fiber, protein, fat = (max(float(v), 0.0) for v in x[:4])
        post = min(max(BASELINE_BG + float(x[4]), 1.0), 999.0)
        meals.append(
            Meal(
                meal_id=f"m{i + 1:04d}",
                participant_id=spec.participant_id,
                meal_type=_pick_meal_type(u, names, cumulative),
                timestamp=_BASE_TIME + timedelta(hours=6 * i),
                carbs_g=carbs,
                fiber_g=fiber,
                protein_g=protein,
                fat_g=fat,
                calories_kcal=KCAL_PER_G_CARBS * carbs + KCAL_PER_G_PROTEIN * protein + KCAL_PER_G_FAT * fat,
                pre_bg_mgdl=BASELINE_BG,
                post_bg_mgdl=post,
            )
        )
        labels.append(c + 1)
    dataset = Dataset.from_meals(meals, spec.participant_id)
    return dataset, Partition(labels), planted_gold_standard(spec)


def planted_gold_standard(spec: SynthSpec) -> GoldStandard:
    """One observation per planted cluster, bracketing its center on every feature.

    Features with zero noise get a fixed half-width of 1 unit so the range is
    non-empty.
    """
    observations = []
    for c, center in enumerate(spec.centers):
        groups = []
        for name, mu, s in zip(SYNTH_FEATURES, center, spec.noise_sigma):
            half = spec.bracket_sigmas * s if s > 0 else 1.0
            groups.append(Group((Range(mu - half, name, mu + half),)))
        observations.append(ObservationAst(f"planted{c + 1}", tuple(groups)))
    return GoldStandard(spec.participant_id, tuple(observations))


def blob_spec(k: int = 3, n_meals: int = 60, seed: int = 7, sigma_scale: float = 1.0) -> SynthSpec:
    """Well-separated planted clusters (centers at least 10 sigma apart on every feature)."""
    base = [
        (30.0, 3.0, 10.0, 5.0, 10.0),
        (80.0, 10.0, 40.0, 30.0, 90.0),
        (140.0, 17.0, 70.0, 55.0, 170.0),
        (190.0, 24.0, 100.0, 80.0, 250.0),
        (240.0, 31.0, 130.0, 105.0, 330.0),
    ]
    if not 1 <= k <= len(base):
        raise InvalidSpec(f"blob_spec supports 1..{len(base)} clusters")
    sigma = tuple(sigma_scale * s for s in (2.0, 0.3, 1.2, 1.0, 3.0))
    return SynthSpec(n_meals=n_meals, k_planted=k, centers=tuple(base[:k]), noise_sigma=sigma, seed=seed)
