from hypothesis import strategies as st

from phenoclust.core import GLUCOSE_VARIABLES, NUTRITION_VARIABLES, MealType
from phenoclust.goldstandard import (
    Compare,
    Group,
    Literal,
    MealTypeEquals,
    Median,
    ObservationAst,
    Quantile,
    Range,
)

numbers = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
levels = st.floats(min_value=1e-6, max_value=1 - 1e-6, allow_nan=False)
ops = st.sampled_from(["<", "<=", ">", ">="])
all_vars = st.sampled_from(NUTRITION_VARIABLES + GLUCOSE_VARIABLES)


def rhs():
    return st.one_of(
        numbers.map(Literal),
        st.builds(Quantile, all_vars, levels),
        st.builds(Median, all_vars),
    )


@st.composite
def ranges(draw, variables):
    lo = draw(numbers)
    hi = draw(numbers.filter(lambda x: x > lo))
    return Range(lo, draw(st.sampled_from(variables)), hi)


def atoms(variables, with_meal_type):
    choices = [
        st.builds(Compare, st.sampled_from(variables), ops, rhs()),
        ranges(variables),
    ]
    if with_meal_type:
        choices.append(st.sampled_from(list(MealType)).map(MealTypeEquals))
    return st.one_of(choices)


def groups():
    nutrition = st.lists(atoms(NUTRITION_VARIABLES, True), min_size=1, max_size=3)
    glucose = st.lists(atoms(GLUCOSE_VARIABLES, False), min_size=1, max_size=3)
    return st.one_of(nutrition, glucose).map(lambda a: Group(tuple(a)))


obs_ids = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,8}", fullmatch=True).filter(
    lambda s: s not in ("meal_type", "quantile", "median")
)

observations = st.builds(
    ObservationAst, obs_ids, st.lists(groups(), min_size=1, max_size=5).map(tuple)
)
