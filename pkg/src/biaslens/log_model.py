"""Event and article data model, input parsing, and count aggregation.

Events carry the raw six-way age category; bucketing into young / middle /
older happens when events are folded into a :class:`CountsMatrix`.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence, TextIO, Union

from .errors import (
    DuplicateArticle,
    EmptyDataset,
    MalformedRecord,
    MissingField,
    ParseError,
    UnknownActionLabel,
    UnknownAgeLabel,
    UnknownGenderLabel,
)

logger = logging.getLogger(__name__)


class Action(str, Enum):
    CLICK = "click"
    LIKE = "like"


class Gender(str, Enum):
    MALE = "male"
    FEMALE = "female"


class AgeCategory(str, Enum):
    UNDER_20 = "u20"
    AGE_20_24 = "20-24"
    AGE_25_29 = "25-29"
    THIRTIES = "30s"
    FORTIES = "40s"
    OVER_50 = "50+"


class AgeBucket(str, Enum):
    YOUNG = "young"
    MIDDLE = "middle"
    OLDER = "older"


class Axis(str, Enum):
    GENDER = "gender"
    AGE = "age"


AttributeValue = Union[Gender, AgeBucket]

AXIS_VALUES: dict[Axis, tuple[AttributeValue, ...]] = {
    Axis.GENDER: tuple(Gender),
    Axis.AGE: tuple(AgeBucket),
}

_BUCKETS = {
    AgeCategory.UNDER_20: AgeBucket.YOUNG,
    AgeCategory.AGE_20_24: AgeBucket.YOUNG,
    AgeCategory.AGE_25_29: AgeBucket.YOUNG,
    AgeCategory.THIRTIES: AgeBucket.MIDDLE,
    AgeCategory.FORTIES: AgeBucket.OLDER,
    AgeCategory.OVER_50: AgeBucket.OLDER,
}

_ACTION_LABELS = {a.value: a for a in Action}
_GENDER_LABELS = {g.value: g for g in Gender}
_AGE_LABELS = {a.value: a for a in AgeCategory}
_ATTRIBUTE_LABELS: dict[str, AttributeValue] = {
    **{g.value: g for g in Gender},
    **{b.value: b for b in AgeBucket},
}


def bucket_age(age: AgeCategory) -> AgeBucket:
    return _BUCKETS[age]


def axis_of(value: AttributeValue) -> Axis:
    if isinstance(value, Gender):
        return Axis.GENDER
    if isinstance(value, AgeBucket):
        return Axis.AGE
    raise TypeError(f"not an attribute value: {value!r}")


def attribute_from_label(label: str) -> AttributeValue:
    """``"female"`` -> ``Gender.FEMALE``, ``"older"`` -> ``AgeBucket.OLDER``."""
    try:
        return _ATTRIBUTE_LABELS[label.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown attribute value {label!r}") from None


@dataclass(frozen=True)
class AttributePair:
    """Ordered pair on one axis. ``first`` is the response (y), ``second`` the predictor (x)."""

    first: AttributeValue
    second: AttributeValue

    def __post_init__(self):
        if self.first == self.second:
            raise ValueError("attribute pair needs two distinct values")
        if axis_of(self.first) is not axis_of(self.second):
            raise ValueError("attribute pair mixes the gender and age axes")

    @property
    def axis(self) -> Axis:
        return axis_of(self.first)

    @property
    def label(self) -> str:
        return f"{self.first.value}-{self.second.value}"

    @property
    def title(self) -> str:
        return f"{self.first.value.capitalize()}--{self.second.value.capitalize()}"

    def reversed(self) -> AttributePair:
        return AttributePair(self.second, self.first)

    @classmethod
    def parse(cls, text: str) -> AttributePair:
        first, sep, second = text.partition("-")
        if not sep:
            raise ValueError(f"pair must look like 'male-female', got {text!r}")
        return cls(attribute_from_label(first), attribute_from_label(second))


CANONICAL_PAIRS: tuple[AttributePair, ...] = (
    AttributePair(Gender.MALE, Gender.FEMALE),
    AttributePair(AgeBucket.YOUNG, AgeBucket.MIDDLE),
    AttributePair(AgeBucket.MIDDLE, AgeBucket.OLDER),
    AttributePair(AgeBucket.OLDER, AgeBucket.YOUNG),
)


@dataclass(frozen=True, slots=True)
class InteractionEvent:
    user_id: str
    article_id: str
    action: Action
    gender: Gender
    age: AgeCategory
    timestamp: str | None = None


@dataclass(frozen=True)
class Article:
    article_id: str
    title: str
    category: str


@dataclass(frozen=True)
class ParsedInput:
    """Records parsed from a file plus every rejected line."""

    records: tuple
    errors: tuple[ParseError, ...] = ()

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


EVENT_FIELDS = ("user_id", "article_id", "action", "gender", "age", "ts")
ARTICLE_FIELDS = ("article_id", "title", "category")


def _rows(stream: Iterable[str], fmt: str) -> Iterator[tuple[int, object]]:
    """Yield ``(line_number, dict | ParseError)`` for every data row."""
    if fmt == "jsonl":
        for lineno, line in enumerate(stream, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                yield lineno, MalformedRecord(lineno, f"invalid JSON ({exc.msg})")
                continue
            if not isinstance(row, dict):
                yield lineno, MalformedRecord(lineno, "expected a JSON object")
                continue
            yield lineno, row
    elif fmt == "csv":
        reader = csv.DictReader(stream)
        for row in reader:
            if None in row:
                yield reader.line_num, MalformedRecord(reader.line_num, "too many columns")
                continue
            yield reader.line_num, {k: v for k, v in row.items() if v not in (None, "")}
    else:
        raise ValueError(f"unsupported format {fmt!r}; expected 'jsonl' or 'csv'")


def _field(row: dict, name: str, lineno: int) -> str:
    value = row.get(name)
    if value is None or value == "":
        raise MissingField(lineno, f"missing field {name!r}")
    if not isinstance(value, str):
        raise MalformedRecord(lineno, f"field {name!r} must be a string")
    return value


def _event_from_row(row: dict, lineno: int) -> InteractionEvent:
    user_id = _field(row, "user_id", lineno)
    article_id = _field(row, "article_id", lineno)
    action_label = _field(row, "action", lineno)
    gender_label = _field(row, "gender", lineno)
    age_label = _field(row, "age", lineno)
    action = _ACTION_LABELS.get(action_label.strip().lower())
    if action is None:
        raise UnknownActionLabel(lineno, f"unknown action {action_label!r}")
    gender = _GENDER_LABELS.get(gender_label.strip().lower())
    if gender is None:
        raise UnknownGenderLabel(lineno, f"unknown gender {gender_label!r}")
    age = _AGE_LABELS.get(age_label.strip().lower())
    if age is None:
        raise UnknownAgeLabel(lineno, f"unknown age {age_label!r}")
    ts = row.get("ts")
    return InteractionEvent(user_id, article_id, action, gender, age, ts)


def parse_events(stream: Iterable[str], fmt: str = "jsonl", strict: bool = False) -> ParsedInput:
    """Parse an events file.

    Rejected lines are collected in ``errors`` (each names its line) unless
    ``strict`` is set, in which case the first one is raised.
    """
    events: list[InteractionEvent] = []
    errors: list[ParseError] = []
    for lineno, row in _rows(stream, fmt):
        try:
            if isinstance(row, ParseError):
                raise row
            events.append(_event_from_row(row, lineno))
        except ParseError as exc:
            if strict:
                raise
            errors.append(exc)
    if errors:
        logger.warning("rejected %d malformed event line(s); first: %s", len(errors), errors[0])
    return ParsedInput(tuple(events), tuple(errors))


def parse_articles(stream: Iterable[str], fmt: str = "jsonl", strict: bool = False) -> ParsedInput:
    articles: list[Article] = []
    errors: list[ParseError] = []
    seen: set[str] = set()
    for lineno, row in _rows(stream, fmt):
        try:
            if isinstance(row, ParseError):
                raise row
            article = Article(
                _field(row, "article_id", lineno),
                _field(row, "title", lineno),
                _field(row, "category", lineno),
            )
            if not article.title.strip():
                raise MissingField(lineno, "title is blank")
            if article.article_id in seen:
                raise DuplicateArticle(lineno, f"duplicate article_id {article.article_id!r}")
            seen.add(article.article_id)
            articles.append(article)
        except ParseError as exc:
            if strict:
                raise
            errors.append(exc)
    if errors:
        logger.warning("rejected %d malformed article line(s); first: %s", len(errors), errors[0])
    return ParsedInput(tuple(articles), tuple(errors))


def detect_format(path: str) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "jsonl"


def write_events_jsonl(events: Iterable[InteractionEvent], out: TextIO) -> None:
    for ev in events:
        row = {
            "user_id": ev.user_id,
            "article_id": ev.article_id,
            "action": ev.action.value,
            "gender": ev.gender.value,
            "age": ev.age.value,
        }
        if ev.timestamp is not None:
            row["ts"] = ev.timestamp
        out.write(json.dumps(row, ensure_ascii=False, separators=(",", ":")))
        out.write("\n")


def write_events_csv(events: Iterable[InteractionEvent], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(EVENT_FIELDS)
    for ev in events:
        writer.writerow([ev.user_id, ev.article_id, ev.action.value, ev.gender.value,
                         ev.age.value, ev.timestamp or ""])


def write_articles_jsonl(articles: Iterable[Article], out: TextIO) -> None:
    for art in articles:
        row = {"article_id": art.article_id, "title": art.title, "category": art.category}
        out.write(json.dumps(row, ensure_ascii=False, separators=(",", ":")))
        out.write("\n")


def write_articles_csv(articles: Iterable[Article], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ARTICLE_FIELDS)
    for art in articles:
        writer.writerow([art.article_id, art.title, art.category])


CellKey = tuple  # (article_id, AttributeValue, Action)


class CountsMatrix:
    """Per (article, attribute value, action) event counts.

    Every event increments one gender cell and one age-bucket cell, so the
    clicks of an article summed over either axis equal its total clicks.
    Instances are immutable; ``+`` merges two shards.
    """

    __slots__ = ("_cells", "_totals")

    def __init__(self, cells: Mapping[CellKey, int], totals: Mapping[str, int]):
        for key, n in cells.items():
            if n < 0:
                raise ValueError(f"negative count at {key}")
        self._cells = MappingProxyType({k: v for k, v in cells.items() if v})
        self._totals = MappingProxyType(dict(totals))

    @classmethod
    def from_events(cls, events: Iterable[InteractionEvent]) -> CountsMatrix:
        cells: Counter = Counter()
        totals: Counter = Counter()
        for ev in events:
            cells[(ev.article_id, ev.gender, ev.action)] += 1
            cells[(ev.article_id, _BUCKETS[ev.age], ev.action)] += 1
            if ev.action is Action.CLICK:
                totals[ev.article_id] += 1
            elif ev.article_id not in totals:
                totals[ev.article_id] = 0
        return cls(cells, totals)

    def __add__(self, other: CountsMatrix) -> CountsMatrix:
        if not isinstance(other, CountsMatrix):
            return NotImplemented
        cells = Counter(self._cells)
        cells.update(other._cells)
        totals = Counter(self._totals)
        totals.update(other._totals)
        return CountsMatrix(cells, totals)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CountsMatrix):
            return NotImplemented
        return dict(self._cells) == dict(other._cells) and dict(self._totals) == dict(other._totals)

    def __repr__(self) -> str:
        return f"CountsMatrix(articles={len(self._totals)}, cells={len(self._cells)})"

    @property
    def articles(self) -> tuple[str, ...]:
        return tuple(sorted(self._totals))

    def get(self, article_id: str, value: AttributeValue, action: Action) -> int:
        return self._cells.get((article_id, value, action), 0)

    def total_clicks(self, article_id: str) -> int:
        return self._totals.get(article_id, 0)

    def items(self):
        return self._cells.items()

    def restrict(self, article_ids: Iterable[str]) -> CountsMatrix:
        keep = set(article_ids)
        cells = {k: v for k, v in self._cells.items() if k[0] in keep}
        totals = {a: n for a, n in self._totals.items() if a in keep}
        return CountsMatrix(cells, totals)


@dataclass(frozen=True)
class DatasetDiagnostics:
    events_seen: int = 0
    unknown_article_events: int = 0
    other_category_events: int = 0
    articles_below_threshold: int = 0
    duplicate_events_dropped: int = 0
    like_exceeds_click_cells: int = 0


@dataclass(frozen=True)
class Dataset:
    catalog: Mapping[str, Article]
    counts: CountsMatrix
    category: str
    min_clicks: int = 100
    diagnostics: DatasetDiagnostics = field(default_factory=DatasetDiagnostics)

    @property
    def article_ids(self) -> tuple[str, ...]:
        return self.counts.articles

    def __len__(self) -> int:
        return len(self.catalog)


def _dedup(events: Iterable[InteractionEvent], dropped: list[int]) -> Iterator[InteractionEvent]:
    seen: set[tuple[str, str, Action]] = set()
    for ev in events:
        key = (ev.user_id, ev.article_id, ev.action)
        if key in seen:
            dropped[0] += 1
            continue
        seen.add(key)
        yield ev


def build_dataset(
    events: Iterable[InteractionEvent],
    catalog: Mapping[str, Article] | Iterable[Article],
    category: str,
    min_clicks: int = 100,
    dedup_users: bool = False,
) -> Dataset:
    """Aggregate the events of one category, keeping articles with more than ``min_clicks`` clicks.

    Raises :class:`EmptyDataset` when no article survives the filters.
    """
    if min_clicks < 0:
        raise ValueError("min_clicks must be >= 0")
    if not isinstance(catalog, Mapping):
        catalog = {a.article_id: a for a in catalog}
    in_category = {aid for aid, art in catalog.items() if art.category == category}

    seen = unknown = other = 0
    dropped = [0]

    def relevant(stream: Iterable[InteractionEvent]) -> Iterator[InteractionEvent]:
        nonlocal seen, unknown, other
        for ev in stream:
            seen += 1
            if ev.article_id in in_category:
                yield ev
            elif ev.article_id in catalog:
                other += 1
            else:
                unknown += 1

    stream = relevant(events)
    if dedup_users:
        stream = _dedup(stream, dropped)
    counts = CountsMatrix.from_events(stream)

    retained = [aid for aid in counts.articles if counts.total_clicks(aid) > min_clicks]
    below = len(counts.articles) - len(retained)
    if unknown:
        logger.warning("%d event(s) reference article ids missing from the catalog", unknown)
    if not retained:
        raise EmptyDataset(
            f"no {category!r} article has more than {min_clicks} clicks "
            f"({len(in_category)} catalog articles in category, {seen} events read)"
        )
    counts = counts.restrict(retained)

    violations = 0
    for aid in retained:
        for values in AXIS_VALUES.values():
            for value in values:
                if counts.get(aid, value, Action.LIKE) > counts.get(aid, value, Action.CLICK):
                    violations += 1
    if violations:
        logger.warning("%d (article, attribute) cell(s) have more likes than clicks", violations)

    diagnostics = DatasetDiagnostics(
        events_seen=seen,
        unknown_article_events=unknown,
        other_category_events=other,
        articles_below_threshold=below,
        duplicate_events_dropped=dropped[0],
        like_exceeds_click_cells=violations,
    )
    kept_catalog = MappingProxyType({aid: catalog[aid] for aid in retained})
    return Dataset(kept_catalog, counts, category, min_clicks, diagnostics)


def aggregate_counts(dataset: Dataset, axis: Axis, action: Action) -> dict[AttributeValue, dict[str, int]]:
    """One zero-filled count vector per attribute value, aligned over the dataset's articles."""
    axis = Axis(axis)
    articles = dataset.article_ids
    return {
        value: {aid: dataset.counts.get(aid, value, action) for aid in articles}
        for value in AXIS_VALUES[axis]
    }


@dataclass(frozen=True)
class ActionRatioTable:
    """Percentage share of each attribute value in all clicks / likes of a dataset."""

    category: str
    n_articles: int
    shares: Mapping[tuple[Axis, Action], Mapping[AttributeValue, float]]
    totals: Mapping[tuple[Axis, Action], Mapping[AttributeValue, int]]


def shares_from_totals(totals: Mapping[AttributeValue, int]) -> dict[AttributeValue, float]:
    grand = sum(totals.values())
    if grand == 0:
        return {v: 0.0 for v in totals}
    return {v: 100.0 * n / grand for v, n in totals.items()}


def action_ratio_table(dataset: Dataset) -> ActionRatioTable:
    shares = {}
    totals = {}
    for axis in Axis:
        for action in Action:
            per_value = aggregate_counts(dataset, axis, action)
            sums = {value: sum(vec.values()) for value, vec in per_value.items()}
            totals[(axis, action)] = sums
            shares[(axis, action)] = shares_from_totals(sums)
    return ActionRatioTable(dataset.category, len(dataset), shares, totals)


def load_events(path: str, strict: bool = False) -> ParsedInput:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_events(fh, detect_format(path), strict=strict)


def load_articles(path: str, strict: bool = False) -> ParsedInput:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_articles(fh, detect_format(path), strict=strict)


def pairs_for_axis(axis: Axis, pairs: Sequence[AttributePair] = CANONICAL_PAIRS) -> list[AttributePair]:
    return [p for p in pairs if p.axis is Axis(axis)]
