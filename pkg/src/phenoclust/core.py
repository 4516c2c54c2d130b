"""Shared domain types: meals, derived features, datasets and partitions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyDataset, InvalidMeal

# Atwater factors, kcal per gram.
KCAL_PER_G_CARBS = 4.0
KCAL_PER_G_PROTEIN = 4.0
KCAL_PER_G_FAT = 9.0

BG_UPPER_BOUND = 1000.0

DISCARDED = -1
UNMATCHED = -2
SPECIAL_LABELS = {DISCARDED: "DISCARDED", UNMATCHED: "UNMATCHED"}


class MealType(str, enum.Enum):
    BREAKFAST = "Breakfast"
    LUNCH = "Lunch"
    DINNER = "Dinner"
    SNACK = "Snack"
    OTHER = "Other"

    @classmethod
    def lookup(cls, text: str) -> MealType | None:
        """Case-insensitive match; ``None`` when *text* names no meal type."""
        key = text.strip().lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        return None


class FeatureSetKind(str, enum.Enum):
    GRAMS_ONLY = "grams-only"
    PCT_CALORIES_ONLY = "pct-calories-only"
    BG_WITH_GRAMS = "bg-with-grams"
    BG_WITH_PCT_CALORIES = "bg-with-pct-calories"

    @property
    def label(self) -> str:
        return _KIND_LABELS[self]


_KIND_LABELS = {
    FeatureSetKind.GRAMS_ONLY: "grams of macronutrients (no BG)",
    FeatureSetKind.PCT_CALORIES_ONLY: "percent calories of macronutrients (no BG)",
    FeatureSetKind.BG_WITH_GRAMS: "BG with grams of macronutrients",
    FeatureSetKind.BG_WITH_PCT_CALORIES: "BG with percent calories of macronutrients",
}


@dataclass(frozen=True)
class Meal:
    meal_id: str
    participant_id: str
    meal_type: MealType
    timestamp: datetime
    carbs_g: float
    fiber_g: float
    protein_g: float
    fat_g: float
    calories_kcal: float
    pre_bg_mgdl: float
    post_bg_mgdl: float

    def __post_init__(self):
        if not self.meal_id:
            raise InvalidMeal("meal_id must be non-empty")
        for name in ("carbs_g", "fiber_g", "protein_g", "fat_g", "calories_kcal"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidMeal(f"non-finite {name}")
            if value < 0:
                raise InvalidMeal(f"negative {name}")
        for name in ("pre_bg_mgdl", "post_bg_mgdl"):
            value = getattr(self, name)
            if not (math.isfinite(value) and 0 < value < BG_UPPER_BOUND):
                raise InvalidMeal(f"{name} out of range (0, {BG_UPPER_BOUND:g})")


@dataclass(frozen=True)
class DerivedMealFeatures:
    bg_change_mgdl: float
    pct_carbs: float
    pct_protein: float
    pct_fat: float


def derive_features(meal: Meal) -> DerivedMealFeatures:
    """Glucose change and percent-of-calories split for one meal.

    Percentages use Atwater energy from grams, not the recorded calories.
    A meal with no macronutrient energy gets zero for every percentage.
    """
    carbs = KCAL_PER_G_CARBS * meal.carbs_g
    protein = KCAL_PER_G_PROTEIN * meal.protein_g
    fat = KCAL_PER_G_FAT * meal.fat_g
    total = carbs + protein + fat
    if total == 0:
        pct = (0.0, 0.0, 0.0)
    else:
        pct = (100.0 * (carbs / total), 100.0 * (protein / total), 100.0 * (fat / total))
    return DerivedMealFeatures(meal.post_bg_mgdl - meal.pre_bg_mgdl, *pct)


# Variables addressable by feature sets and the observation language.
NUTRITION_VARIABLES = (
    "carbs_g",
    "fiber_g",
    "protein_g",
    "fat_g",
    "calories_kcal",
    "pct_carbs",
    "pct_protein",
    "pct_fat",
)
GLUCOSE_VARIABLES = ("bg_change", "pre_bg", "post_bg")
VARIABLES = NUTRITION_VARIABLES + GLUCOSE_VARIABLES

_VARIABLE_GETTERS = {
    "carbs_g": lambda m, d: m.carbs_g,
    "fiber_g": lambda m, d: m.fiber_g,
    "protein_g": lambda m, d: m.protein_g,
    "fat_g": lambda m, d: m.fat_g,
    "calories_kcal": lambda m, d: m.calories_kcal,
    "pct_carbs": lambda m, d: d.pct_carbs,
    "pct_protein": lambda m, d: d.pct_protein,
    "pct_fat": lambda m, d: d.pct_fat,
    "bg_change": lambda m, d: d.bg_change_mgdl,
    "pre_bg": lambda m, d: m.pre_bg_mgdl,
    "post_bg": lambda m, d: m.post_bg_mgdl,
}


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered, non-empty collection of meals with their derived features."""

    participant_id: str
    meals: tuple[Meal, ...]
    features: tuple[DerivedMealFeatures, ...] = field(default=())

    def __post_init__(self):
        if not self.meals:
            raise EmptyDataset("dataset has no meals")
        meals = tuple(self.meals)
        object.__setattr__(self, "meals", meals)
        if not self.features:
            object.__setattr__(self, "features", tuple(derive_features(m) for m in meals))
        elif len(self.features) != len(meals):
            raise ValueError("features must align with meals")
        seen = set()
        for meal in meals:
            if meal.meal_id in seen:
                raise InvalidMeal(f"duplicate meal_id {meal.meal_id!r}")
            seen.add(meal.meal_id)
        object.__setattr__(self, "_columns", {})

    @classmethod
    def from_meals(cls, meals: Iterable[Meal], participant_id: str | None = None) -> Dataset:
        meals = tuple(meals)
        if not meals:
            raise EmptyDataset("dataset has no meals")
        return cls(participant_id if participant_id is not None else meals[0].participant_id, meals)

    def __len__(self) -> int:
        return len(self.meals)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.participant_id == other.participant_id and self.meals == other.meals

    __hash__ = None

    def column(self, name: str) -> np.ndarray:
        """Values of one variable over all meals, in meal order (read-only)."""
        cache = self._columns
        if name not in cache:
            try:
                getter = _VARIABLE_GETTERS[name]
            except KeyError:
                raise KeyError(f"unknown variable {name!r}") from None
            values = np.array([getter(m, d) for m, d in zip(self.meals, self.features)], dtype=float)
            values.setflags(write=False)
            cache[name] = values
        return cache[name]

    def meal_types(self) -> tuple[MealType, ...]:
        return tuple(m.meal_type for m in self.meals)

    def subset(self, indices: Sequence[int]) -> Dataset:
        return Dataset(
            self.participant_id,
            tuple(self.meals[i] for i in indices),
            tuple(self.features[i] for i in indices),
        )


class Partition:
    """Disjoint labeling of ``n`` elements.

    Ordinary clusters carry positive integer labels. ``DISCARDED`` and
    ``UNMATCHED`` are special labels that still form blocks, so every element
    always has exactly one label.
    """

    __slots__ = ("_labels", "_blocks")

    def __init__(self, labels: Iterable[int]):
        self._labels = tuple(int(x) for x in labels)
        blocks: dict[int, list[int]] = {}
        for i, label in enumerate(self._labels):
            if label <= 0 and label not in SPECIAL_LABELS:
                raise ValueError(f"invalid label {label}")
            blocks.setdefault(label, []).append(i)
        self._blocks = {k: frozenset(v) for k, v in sorted(blocks.items())}

    @classmethod
    def from_blocks(cls, n: int, blocks: Mapping[int, Iterable[int]]) -> Partition:
        labels = [None] * n
        for label, members in blocks.items():
            for i in members:
                if labels[i] is not None:
                    raise ValueError(f"element {i} appears in more than one block")
                labels[i] = label
        if any(x is None for x in labels):
            raise ValueError("blocks do not cover every element")
        return cls(labels)

    @property
    def labels(self) -> tuple[int, ...]:
        return self._labels

    @property
    def block_index(self) -> dict[int, frozenset[int]]:
        return dict(self._blocks)

    @property
    def clusters(self) -> list[int]:
        """Ordinary (non-special) labels in ascending order."""
        return [k for k in self._blocks if k > 0]

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def members(self, label: int) -> frozenset[int]:
        return self._blocks.get(label, frozenset())

    def as_array(self) -> np.ndarray:
        return np.asarray(self._labels, dtype=np.int64)

    def same_grouping(self, other: Partition) -> bool:
        """True when both partitions induce the same blocks, ignoring label names."""
        if len(self) != len(other):
            return False
        return set(self._blocks.values()) == set(other._blocks.values())

    def to_json(self) -> list:
        return [SPECIAL_LABELS.get(x, x) for x in self._labels]

    @classmethod
    def from_json(cls, data: Sequence) -> Partition:
        names = {v: k for k, v in SPECIAL_LABELS.items()}
        return cls(names[x] if isinstance(x, str) else int(x) for x in data)

    def __len__(self) -> int:
        return len(self._labels)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self._labels == other._labels

    def __hash__(self):
        return hash(self._labels)

    def __repr__(self):
        return f"Partition({list(self._labels)!r})"
