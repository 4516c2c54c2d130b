"""Expert observations as Boolean queries over meal variables.

Observation language, one observation per line::

    [obs_id ":"] group { "&&" group }
    group   := atom | "(" atom { "||" atom } ")"
    atom    := number "<" var "<" number
             | var ("<" | "<=" | ">" | ">=") rhs
             | "meal_type" "==" "\\"Lunch\\""
    rhs     := number | quantile(var, p) | median(var)

Lines starting with ``#`` are comments.  Every group is either purely about
nutrition or purely about glucose; the split drives the contradiction metric.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Union

import numpy as np

from .core import GLUCOSE_VARIABLES, VARIABLES, Dataset, MealType
from .errors import (
    DslSyntaxError,
    DuplicateObservationId,
    InvalidQuantile,
    InvalidRange,
    MixedOrGroup,
    UnknownVariable,
    UnresolvedThreshold,
)

DEFAULT_OVERFIT_MAX = 2


class GroupClass(str, enum.Enum):
    NUTRITION = "N"
    GLUCOSE = "G"


# ---------------------------------------------------------------- AST


def format_number(x: float) -> str:
    """Shortest text that parses back to exactly ``x``."""
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


@dataclass(frozen=True)
class Literal:
    value: float
    # original threshold expression when this literal came from resolution
    origin: str | None = field(default=None, compare=False)

    def __str__(self):
        return format_number(self.value)


@dataclass(frozen=True)
class Quantile:
    var: str
    p: float

    def __str__(self):
        return f"quantile({self.var}, {format_number(self.p)})"


@dataclass(frozen=True)
class Median:
    var: str

    def __str__(self):
        return f"median({self.var})"


Rhs = Union[Literal, Quantile, Median]


@dataclass(frozen=True)
class Compare:
    var: str
    op: str
    rhs: Rhs

    def __str__(self):
        return f"{self.var} {self.op} {self.rhs}"


@dataclass(frozen=True)
class Range:
    lo: float
    var: str
    hi: float

    def __str__(self):
        return f"{format_number(self.lo)} < {self.var} < {format_number(self.hi)}"


@dataclass(frozen=True)
class MealTypeEquals:
    value: MealType

    def __str__(self):
        return f'meal_type == "{self.value.value}"'


Atom = Union[Compare, Range, MealTypeEquals]


def atom_class(atom: Atom) -> GroupClass:
    if isinstance(atom, MealTypeEquals):
        return GroupClass.NUTRITION
    return GroupClass.GLUCOSE if atom.var in GLUCOSE_VARIABLES else GroupClass.NUTRITION


@dataclass(frozen=True)
class Group:
    atoms: tuple[Atom, ...]

    @property
    def group_class(self) -> GroupClass:
        return atom_class(self.atoms[0])

    def __str__(self):
        if len(self.atoms) == 1:
            return str(self.atoms[0])
        return "(" + " || ".join(str(a) for a in self.atoms) + ")"


@dataclass(frozen=True)
class ObservationAst:
    obs_id: str
    conjuncts: tuple[Group, ...]
    source_text: str = field(default="", compare=False)

    @property
    def classes(self) -> list[GroupClass]:
        return [g.group_class for g in self.conjuncts]

    @property
    def has_glucose(self) -> bool:
        return GroupClass.GLUCOSE in self.classes

    def atoms(self) -> Iterable[Atom]:
        for g in self.conjuncts:
            yield from g.atoms

    @property
    def is_resolved(self) -> bool:
        return all(not isinstance(a, Compare) or isinstance(a.rhs, Literal) for a in self.atoms())

    def to_text(self, with_id: bool = True) -> str:
        body = " && ".join(str(g) for g in self.conjuncts)
        return f"{self.obs_id}: {body}" if with_id else body

    def __str__(self):
        return self.to_text()


@dataclass(frozen=True)
class GoldStandard:
    participant_id: str
    observations: tuple[ObservationAst, ...]

    def __post_init__(self):
        ids = [o.obs_id for o in self.observations]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise DuplicateObservationId(f"duplicate observation id(s): {', '.join(dupes)}")
        object.__setattr__(self, "observations", tuple(self.observations))

    def __len__(self):
        return len(self.observations)

    def to_text(self) -> str:
        return "".join(o.to_text() + "\n" for o in self.observations)


# ---------------------------------------------------------------- parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<string>"[^"]*")
  | (?P<op>&&|\|\||<=|>=|==|<|>|\(|\)|,|:)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.\-]*)
    """,
    re.VERBOSE,
)

_COMPARE_OPS = ("<", "<=", ">", ">=")


@dataclass(frozen=True)
class _Token:
    kind: str  # number | string | op | ident | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def peek(self, offset: int = 1) -> _Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def advance(self) -> _Token:
        tok = self.tok
        self.i += 1
        return tok

    def fail(self, message: str, expected=()):
        tok = self.tok
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise DslSyntaxError(f"{message}, found {found}", tok.pos, expected)

    def expect_op(self, op: str) -> _Token:
        if self.tok.kind == "op" and self.tok.text == op:
            return self.advance()
        self.fail(f"expected {op!r}", (repr(op),))

    def number(self) -> float:
        if self.tok.kind != "number":
            self.fail("expected a number", ("number",))
        return float(self.advance().text)

    def var(self) -> str:
        tok = self.tok
        if tok.kind != "ident":
            self.fail("expected a variable name", ("variable",))
        if tok.text not in VARIABLES:
            raise UnknownVariable(f"unknown variable {tok.text!r} at position {tok.pos}")
        self.advance()
        return tok.text

    # observation := [ident ":"] group {"&&" group}
    def observation(self, default_id: str) -> ObservationAst:
        obs_id = default_id
        if self.tok.kind in ("ident", "number") and self.peek().kind == "op" and self.peek().text == ":":
            obs_id = self.advance().text
            self.advance()
        groups = [self.group()]
        while self.tok.kind == "op" and self.tok.text == "&&":
            self.advance()
            groups.append(self.group())
        if self.tok.kind != "end":
            self.fail("unexpected token", ("'&&'", "end of line"))
        return ObservationAst(obs_id, tuple(groups), self.text)

    def group(self) -> Group:
        if self.tok.kind == "op" and self.tok.text == "(":
            start = self.advance().pos
            atoms = [self.atom()]
            while self.tok.kind == "op" and self.tok.text == "||":
                self.advance()
                atoms.append(self.atom())
            self.expect_op(")")
            classes = {atom_class(a) for a in atoms}
            if len(classes) > 1:
                raise MixedOrGroup(
                    f"OR-group at position {start} mixes nutrition and glucose conditions"
                )
            return Group(tuple(atoms))
        return Group((self.atom(),))

    def atom(self) -> Atom:
        tok = self.tok
        if tok.kind == "number":
            start = tok.pos
            lo = self.number()
            self.expect_op("<")
            var = self.var()
            self.expect_op("<")
            hi = self.number()
            if not lo < hi:
                raise InvalidRange(f"range at position {start} needs lo < hi, got {lo:g} and {hi:g}")
            return Range(lo, var, hi)
        if tok.kind == "ident" and tok.text == "meal_type":
            self.advance()
            self.expect_op("==")
            if self.tok.kind != "string":
                self.fail("expected a quoted meal type", ("quoted string",))
            s = self.advance()
            value = MealType.lookup(s.text[1:-1])
            if value is None:
                raise DslSyntaxError(
                    f"unknown meal type {s.text}", s.pos, tuple(repr(m.value) for m in MealType)
                )
            return MealTypeEquals(value)
        if tok.kind == "ident":
            var = self.var()
            if not (self.tok.kind == "op" and self.tok.text in _COMPARE_OPS):
                self.fail("expected a comparison operator", _COMPARE_OPS)
            op = self.advance().text
            return Compare(var, op, self.rhs())
        self.fail("expected a condition", ("number", "variable", "meal_type", "'('"))

    def rhs(self) -> Rhs:
        tok = self.tok
        if tok.kind == "number":
            return Literal(self.number())
        if tok.kind == "ident" and tok.text in ("quantile", "median"):
            self.advance()
            self.expect_op("(")
            var = self.var()
            if tok.text == "median":
                self.expect_op(")")
                return Median(var)
            self.expect_op(",")
            p_pos = self.tok.pos
            p = self.number()
            if not 0.0 < p < 1.0:
                raise InvalidQuantile(f"quantile level must lie in (0, 1), got {p:g} at position {p_pos}")
            self.expect_op(")")
            return Quantile(var, p)
        self.fail("expected a number, quantile(...) or median(...)", ("number", "quantile", "median"))


def parse_observation(obs_id: str, text: str) -> ObservationAst:
    """Parse one observation. An ``id:`` prefix in ``text`` overrides ``obs_id``."""
    if not text or not text.strip():
        raise DslSyntaxError("empty observation", 0, ("condition",))
    return _Parser(text.strip()).observation(obs_id)


def parse_gold_standard(text: str, participant_id: str = "") -> GoldStandard:
    observations = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        observations.append(parse_observation(f"obs{len(observations) + 1}", line))
    return GoldStandard(participant_id, tuple(observations))


def read_gold_standard(path, participant_id: str = "") -> GoldStandard:
    with open(path, encoding="utf-8") as fh:
        return parse_gold_standard(fh.read(), participant_id)


# ---------------------------------------------------------------- thresholds


def quantile(values: np.ndarray, p: float) -> float:
    """Linear interpolation between order statistics at rank ``(n - 1) p + 1``."""
    return float(np.quantile(np.asarray(values, dtype=float), p, method="linear"))


def resolve_thresholds(ast: ObservationAst, dataset: Dataset) -> ObservationAst:
    """Replace ``quantile``/``median`` references by numbers computed over all meals."""

    def resolve(atom):
        if isinstance(atom, Compare) and not isinstance(atom.rhs, Literal):
            p = 0.5 if isinstance(atom.rhs, Median) else atom.rhs.p
            value = quantile(dataset.column(atom.rhs.var), p)
            return replace(atom, rhs=Literal(value, origin=str(atom.rhs)))
        return atom

    groups = tuple(Group(tuple(resolve(a) for a in g.atoms)) for g in ast.conjuncts)
    return ObservationAst(ast.obs_id, groups, ast.source_text)


def resolve_gold_standard(gs: GoldStandard, dataset: Dataset) -> GoldStandard:
    return GoldStandard(gs.participant_id, tuple(resolve_thresholds(o, dataset) for o in gs.observations))


# ---------------------------------------------------------------- evaluation

_OPS = {
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
}


def atom_mask(atom: Atom, dataset: Dataset) -> np.ndarray:
    if isinstance(atom, MealTypeEquals):
        return np.array([t is atom.value for t in dataset.meal_types()], dtype=bool)
    x = dataset.column(atom.var)
    if isinstance(atom, Range):
        return (atom.lo < x) & (x < atom.hi)
    if not isinstance(atom.rhs, Literal):
        raise UnresolvedThreshold(f"unresolved threshold {atom.rhs} in {atom}")
    return _OPS[atom.op](x, atom.rhs.value)


def group_mask(group: Group, dataset: Dataset) -> np.ndarray:
    mask = np.zeros(len(dataset), dtype=bool)
    for atom in group.atoms:
        mask |= atom_mask(atom, dataset)
    return mask


@dataclass(frozen=True)
class ObservationStats:
    obs_id: str
    text: str
    n_meals: int
    support: frozenset[int]
    contradiction: frozenset[int]
    nutrition_match_count: int
    overfit: bool
    zero_fit: bool
    resolved_thresholds: tuple[tuple[str, float], ...] = ()

    @property
    def support_count(self) -> int:
        return len(self.support)

    @property
    def contradiction_count(self) -> int:
        return len(self.contradiction)

    @property
    def support_frac(self) -> float:
        return self.support_count / self.n_meals

    @property
    def contradiction_frac(self) -> float:
        return self.contradiction_count / self.n_meals

    @property
    def contradictory(self) -> bool:
        return self.contradiction_count > self.support_count

    def to_json(self) -> dict:
        return {
            "obs_id": self.obs_id,
            "query": self.text,
            "support_count": self.support_count,
            "support_frac": self.support_frac,
            "contradiction_count": self.contradiction_count,
            "contradiction_frac": self.contradiction_frac,
            "nutrition_match_count": self.nutrition_match_count,
            "overfit": self.overfit,
            "zero_fit": self.zero_fit,
            "contradictory": self.contradictory,
            "resolved_thresholds": [{"expression": e, "value": v} for e, v in self.resolved_thresholds],
        }


def evaluate_observation(
    ast: ObservationAst, dataset: Dataset, overfit_max: int = DEFAULT_OVERFIT_MAX
) -> ObservationStats:
    """Support, contradiction and over-fit for one resolved observation.

    A meal supports the observation when every group holds, and contradicts it
    when every nutrition group holds but some glucose group fails.
    """
    n = len(dataset)
    nutrition = np.ones(n, dtype=bool)
    glucose = np.ones(n, dtype=bool)
    for group in ast.conjuncts:
        mask = group_mask(group, dataset)
        if group.group_class is GroupClass.GLUCOSE:
            glucose &= mask
        else:
            nutrition &= mask
    support = nutrition & glucose
    contradiction = nutrition & ~glucose
    count = int(support.sum())
    resolved = tuple(
        (a.rhs.origin, a.rhs.value)
        for a in ast.atoms()
        if isinstance(a, Compare) and a.rhs.origin is not None
    )
    return ObservationStats(
        obs_id=ast.obs_id,
        text=ast.to_text(with_id=False),
        n_meals=n,
        support=frozenset(np.flatnonzero(support).tolist()),
        contradiction=frozenset(np.flatnonzero(contradiction).tolist()),
        nutrition_match_count=int(nutrition.sum()),
        overfit=1 <= count <= overfit_max,
        zero_fit=count == 0,
        resolved_thresholds=resolved,
    )


@dataclass(frozen=True)
class GoldStandardReport:
    participant_id: str
    n_meals: int
    observations: tuple[ObservationStats, ...]

    @property
    def supported_meals(self) -> frozenset[int]:
        return frozenset().union(*(s.support for s in self.observations))

    @property
    def contradicted_meals(self) -> frozenset[int]:
        return frozenset().union(*(s.contradiction for s in self.observations))

    @property
    def supported_frac(self) -> float:
        return len(self.supported_meals) / self.n_meals

    @property
    def contradicted_frac(self) -> float:
        return len(self.contradicted_meals) / self.n_meals

    @property
    def n_overfit(self) -> int:
        return sum(s.overfit for s in self.observations)

    @property
    def n_contradictory(self) -> int:
        return sum(s.contradictory for s in self.observations)

    @property
    def n_zero_fit(self) -> int:
        return sum(s.zero_fit for s in self.observations)

    def to_json(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "n_meals": self.n_meals,
            "n_observations": len(self.observations),
            "n_overfit": self.n_overfit,
            "n_contradictory": self.n_contradictory,
            "n_zero_fit": self.n_zero_fit,
            "pct_meals_supported": 100.0 * self.supported_frac,
            "pct_meals_contradicted": 100.0 * self.contradicted_frac,
            "observations": [s.to_json() for s in self.observations],
        }


def gold_standard_report(
    gs: GoldStandard, dataset: Dataset, overfit_max: int = DEFAULT_OVERFIT_MAX
) -> GoldStandardReport:
    """Per-observation quality plus dataset-level coverage (thresholds resolved here)."""
    stats = tuple(
        evaluate_observation(resolve_thresholds(o, dataset), dataset, overfit_max)
        for o in gs.observations
    )
    return GoldStandardReport(gs.participant_id or dataset.participant_id, len(dataset), stats)
