from datetime import datetime, timedelta, timezone

import pytest

from phenoclust.core import Dataset, Meal, MealType

_BASE = datetime(2021, 3, 1, 8, 0, tzinfo=timezone.utc)
_criteria: dict[int, tuple[str, str]] = {}


def make_meal(i, carbs=0.0, protein=0.0, fat=0.0, fiber=0.0, bg_change=0.0,
              meal_type=MealType.LUNCH, pre=100.0, participant="P1", calories=None):
    if calories is None:
        calories = 4 * carbs + 4 * protein + 9 * fat
    return Meal(
        meal_id=f"m{i}",
        participant_id=participant,
        meal_type=meal_type,
        timestamp=_BASE + timedelta(hours=5 * i),
        carbs_g=float(carbs),
        fiber_g=float(fiber),
        protein_g=float(protein),
        fat_g=float(fat),
        calories_kcal=float(calories),
        pre_bg_mgdl=float(pre),
        post_bg_mgdl=float(pre + bg_change),
    )


def make_dataset(rows):
    """Dataset from dicts of make_meal keyword arguments."""
    return Dataset.from_meals(make_meal(i + 1, **row) for i, row in enumerate(rows))


@pytest.fixture
def ten_meal_dataset():
    """Hand-built fixture for the gold-standard evaluator (truth counted by hand)."""
    B, L, D, S = MealType.BREAKFAST, MealType.LUNCH, MealType.DINNER, MealType.SNACK
    rows = [
        dict(fat=20, bg_change=60, meal_type=L),
        dict(fat=25, bg_change=70, meal_type=D),
        dict(fat=30, bg_change=80, meal_type=L),
        dict(fat=20, bg_change=20, meal_type=L),
        dict(fat=22, bg_change=10, meal_type=B),
        dict(fat=24, bg_change=30, meal_type=D),
        dict(fat=26, bg_change=40, meal_type=S),
        dict(fat=28, bg_change=5, meal_type=D),
        dict(carbs=60, bg_change=90, meal_type=B),
        dict(carbs=45, fat=20, bg_change=100, meal_type=B),
    ]
    return make_dataset(rows)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, name = marker.args
    if rep.when == "call" or rep.failed:
        previous = _criteria.get(number, (name, "passed"))[1]
        status = "failed" if rep.failed or previous == "failed" else rep.outcome
        _criteria[number] = (name, status)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        name, status = _criteria[number]
        verdict = {"passed": "PASS", "failed": "FAIL"}.get(status, status.upper())
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {name}")
