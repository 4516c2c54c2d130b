"""CSV ingestion of self-monitoring meal records.

One row is one meal with a single resolved pre/post glucose pair.  Rows that
fail validation are skipped and reported; only a malformed header or a file
with no valid rows is fatal.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime

from .core import Dataset, Meal, MealType
from .errors import EmptyDataset, InvalidMeal, MissingColumn

logger = logging.getLogger(__name__)

COLUMNS = (
    "meal_id",
    "participant_id",
    "meal_type",
    "timestamp",
    "carbs_g",
    "fiber_g",
    "protein_g",
    "fat_g",
    "calories_kcal",
    "pre_bg_mgdl",
    "post_bg_mgdl",
)
NUMERIC_COLUMNS = COLUMNS[4:]


@dataclass
class IngestReport:
    rows_read: int = 0
    meals_accepted: int = 0
    rows_rejected: list[tuple[int, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "meals_accepted": self.meals_accepted,
            "rows_rejected": [{"line": line, "reason": reason} for line, reason in self.rows_rejected],
            "warnings": list(self.warnings),
        }


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC-3339 timestamp (``Z`` suffix accepted)."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def format_timestamp(ts: datetime) -> str:
    return ts.isoformat()


class _RowError(Exception):
    pass


def _number(row: dict, name: str) -> float:
    raw = (row.get(name) or "").strip()
    if not raw:
        raise _RowError(f"missing {name}")
    try:
        value = float(raw)
    except ValueError:
        raise _RowError(f"non-numeric {name}") from None
    if not math.isfinite(value):
        raise _RowError(f"non-finite {name}")
    return value


def parse_meals(csv_text: str) -> tuple[Dataset, IngestReport]:
    """Parse CSV text into a :class:`Dataset` plus an account of every row."""
    if csv_text.startswith("﻿"):
        csv_text = csv_text[1:]
    reader = csv.DictReader(io.StringIO(csv_text, newline=""))
    header = [h.strip() for h in (reader.fieldnames or [])]
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise MissingColumn(f"header lacks required column(s): {', '.join(missing)}")
    reader.fieldnames = header

    report = IngestReport()
    extra = [h for h in header if h not in COLUMNS]
    if extra:
        report.warnings.append(f"ignoring unknown column(s): {', '.join(extra)}")

    meals: list[Meal] = []
    seen_ids: set[str] = set()
    for row in reader:
        line = reader.line_num
        if not any((v or "").strip() for k, v in row.items() if k is not None):
            continue  # blank line
        report.rows_read += 1
        try:
            meal, row_warnings = _parse_row(row, line)
            if meal.meal_id in seen_ids:
                raise _RowError(f"duplicate meal_id {meal.meal_id!r}")
        except _RowError as exc:
            report.rows_rejected.append((line, str(exc)))
            continue
        seen_ids.add(meal.meal_id)
        meals.append(meal)
        report.warnings.extend(row_warnings)

    report.meals_accepted = len(meals)
    if not meals:
        raise EmptyDataset(f"no valid meal rows ({report.rows_read} read, all rejected)")
    participants = sorted({m.participant_id for m in meals})
    if len(participants) > 1:
        report.warnings.append(f"multiple participant ids present: {', '.join(participants)}")
    for line, reason in report.rows_rejected:
        logger.debug("line %d rejected: %s", line, reason)
    return Dataset.from_meals(meals), report


def _parse_row(row: dict, line: int) -> tuple[Meal, list[str]]:
    warnings = []
    meal_id = (row.get("meal_id") or "").strip()
    if not meal_id:
        raise _RowError("missing meal_id")
    type_text = (row.get("meal_type") or "").strip()
    meal_type = MealType.lookup(type_text)
    if meal_type is None:
        warnings.append(f"line {line}: unknown meal_type {type_text!r} mapped to Other")
        meal_type = MealType.OTHER
    ts_text = (row.get("timestamp") or "").strip()
    if not ts_text:
        raise _RowError("missing timestamp")
    try:
        timestamp = parse_timestamp(ts_text)
    except ValueError:
        raise _RowError("invalid timestamp") from None
    values = {name: _number(row, name) for name in NUMERIC_COLUMNS}
    try:
        meal = Meal(
            meal_id=meal_id,
            participant_id=(row.get("participant_id") or "").strip(),
            meal_type=meal_type,
            timestamp=timestamp,
            **values,
        )
    except InvalidMeal as exc:
        raise _RowError(str(exc)) from None
    if meal.fiber_g > meal.carbs_g:
        warnings.append(f"line {line}: fiber_g exceeds carbs_g for meal {meal_id!r}")
    return meal, warnings


def format_meals(dataset: Dataset) -> str:
    """Serialize a dataset in the ingest schema; inverse of :func:`parse_meals`."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for m in dataset.meals:
        writer.writerow(
            [
                m.meal_id,
                m.participant_id,
                m.meal_type.value,
                format_timestamp(m.timestamp),
                *(repr(float(getattr(m, name))) for name in NUMERIC_COLUMNS),
            ]
        )
    return buf.getvalue()


def read_meals(path) -> tuple[Dataset, IngestReport]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_meals(fh.read())
