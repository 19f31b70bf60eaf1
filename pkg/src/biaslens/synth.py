"""Synthetic interaction logs with planted demographic biases.

Titles are bags of vocabulary words drawn with Zipf-like weights, so the
default tokenizer recovers them exactly. Each (user, article) click is a
Bernoulli draw with probability ``base_click_prob * popularity * planted
multipliers``; a like is a further Bernoulli draw given the click. Users
are exchangeable inside a (gender, age bucket) cell, so a cell's clickers
are drawn as a binomial count followed by a uniform subset, which has the
same distribution as per-user draws.

Randomness comes from a single numpy PCG64 stream seeded by ``seed``.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigInvalid
from .log_model import (
    CANONICAL_PAIRS,
    Action,
    AgeBucket,
    AgeCategory,
    Article,
    AttributePair,
    AttributeValue,
    Gender,
    InteractionEvent,
    attribute_from_label,
    axis_of,
    write_articles_jsonl,
    write_events_jsonl,
)

_EPS = 1e-12

BUCKET_CATEGORIES = {
    AgeBucket.YOUNG: (AgeCategory.UNDER_20, AgeCategory.AGE_20_24, AgeCategory.AGE_25_29),
    AgeBucket.MIDDLE: (AgeCategory.THIRTIES,),
    AgeBucket.OLDER: (AgeCategory.FORTIES, AgeCategory.OVER_50),
}

CELLS: tuple[tuple[Gender, AgeBucket], ...] = tuple((g, b) for g in Gender for b in AgeBucket)


@dataclass(frozen=True)
class PlantedBias:
    """Multiply click (or, with ``action=like``, like) probability for users holding ``value``
    on articles whose title contains ``keyword``."""

    keyword: str
    value: AttributeValue
    multiplier: float
    action: Action = Action.CLICK

    def to_dict(self) -> dict:
        return {
            "keyword": self.keyword,
            "axis": axis_of(self.value).value,
            "value": self.value.value,
            "multiplier": self.multiplier,
            "action": self.action.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> PlantedBias:
        return cls(str(d["keyword"]), attribute_from_label(d["value"]), float(d["multiplier"]),
                   Action(d.get("action", "click")))


def split_users(n_users: int) -> dict[tuple[Gender, AgeBucket], int]:
    base, extra = divmod(n_users, len(CELLS))
    return {cell: base + (i < extra) for i, cell in enumerate(CELLS)}


def default_vocabulary(size: int, planted: Sequence[str]) -> tuple[str, ...]:
    """Filler words ``topic000`` ... with the planted keywords at evenly spaced high ranks.

    Planted words sit between ranks 10 and ~60 so they land comfortably
    inside a top-100 document-frequency selection without dominating it.
    """
    planted = list(dict.fromkeys(planted))
    if len(planted) > size:
        raise ConfigInvalid({"vocabulary_size": "smaller than the number of planted keywords"})
    slots = {}
    if planted:
        last = min(size - 1, 60)
        first = min(10, last)
        step = (last - first) / max(1, len(planted) - 1)
        for i, word in enumerate(planted):
            pos = first + round(i * step)
            while pos in slots:
                pos += 1
            slots[pos] = word
    fillers = (f"topic{i:03d}" for i in range(size * 2))
    words = []
    for pos in range(size):
        if pos in slots:
            words.append(slots[pos])
        else:
            w = next(fillers)
            while w in planted:
                w = next(fillers)
            words.append(w)
    return tuple(words)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_users_per_cell: Mapping[tuple[Gender, AgeBucket], int] = field(
        default_factory=lambda: split_users(10_000))
    n_articles: Mapping[str, int] = field(default_factory=lambda: {"society": 5000})
    vocabulary: tuple[str, ...] = ()
    vocabulary_size: int = 200
    zipf_offset: float = 50.0
    zipf_exponent: float = 1.0
    min_title_keywords: int = 2
    max_title_keywords: int = 6
    popularity_mu: float = 0.0
    popularity_sigma: float = 1.0
    base_click_prob: float = 0.012
    like_given_click_prob: float = 0.1
    planted_biases: tuple[PlantedBias, ...] = ()

    def __post_init__(self):
        problems = {}
        if any(n < 0 for n in self.n_users_per_cell.values()):
            problems["n_users_per_cell"] = "counts must be >= 0"
        if set(self.n_users_per_cell) - set(CELLS):
            problems["n_users_per_cell"] = "keys must be (Gender, AgeBucket) cells"
        if not self.n_articles or any(n < 1 for n in self.n_articles.values()):
            problems["n_articles"] = "need at least one category with >= 1 article"
        if not 0 < self.base_click_prob < 1:
            problems["base_click_prob"] = "must lie in (0, 1)"
        if not 0 < self.like_given_click_prob < 1:
            problems["like_given_click_prob"] = "must lie in (0, 1)"
        if self.popularity_sigma < 0:
            problems["popularity_sigma"] = "must be >= 0"
        if not 1 <= self.min_title_keywords <= self.max_title_keywords:
            problems["min_title_keywords"] = "need 1 <= min_title_keywords <= max_title_keywords"
        if self.zipf_offset <= 0:
            problems["zipf_offset"] = "must be > 0"
        vocab = self.vocabulary or ()
        if vocab and len(set(vocab)) != len(vocab):
            problems["vocabulary"] = "contains duplicate words"
        size = len(vocab) if vocab else self.vocabulary_size
        if size < self.max_title_keywords:
            problems["vocabulary_size"] = "must be >= max_title_keywords"
        for pb in self.planted_biases:
            if not pb.multiplier > 0:
                problems["planted_biases"] = f"multiplier for {pb.keyword!r} must be > 0"
            if vocab and pb.keyword not in vocab:
                problems["planted_biases"] = f"{pb.keyword!r} is not in the vocabulary"
        if problems:
            raise ConfigInvalid(problems)

    @property
    def words(self) -> tuple[str, ...]:
        if self.vocabulary:
            return tuple(self.vocabulary)
        return default_vocabulary(self.vocabulary_size, [p.keyword for p in self.planted_biases])

    @property
    def n_users(self) -> int:
        return sum(self.n_users_per_cell.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_users_per_cell"] = {f"{g.value}/{b.value}": n for (g, b), n in self.n_users_per_cell.items()}
        d["n_articles"] = dict(self.n_articles)
        d["vocabulary"] = list(self.vocabulary)
        d["planted_biases"] = [p.to_dict() for p in self.planted_biases]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> SynthConfig:
        d = dict(d)
        known = set(cls.__dataclass_fields__) | {"n_users"}
        unknown = set(d) - known
        if unknown:
            raise ConfigInvalid({k: "unknown field" for k in sorted(unknown)})
        if "n_users" in d:
            if "n_users_per_cell" in d:
                raise ConfigInvalid({"n_users": "give either n_users or n_users_per_cell"})
            d["n_users_per_cell"] = split_users(int(d.pop("n_users")))
        elif "n_users_per_cell" in d:
            cells = {}
            for key, n in d["n_users_per_cell"].items():
                g, _, b = key.partition("/")
                try:
                    cells[(Gender(g), AgeBucket(b))] = int(n)
                except ValueError:
                    raise ConfigInvalid({"n_users_per_cell": f"bad cell key {key!r}"}) from None
            d["n_users_per_cell"] = cells
        if "vocabulary" in d:
            d["vocabulary"] = tuple(d["vocabulary"])
        if "planted_biases" in d:
            try:
                d["planted_biases"] = tuple(PlantedBias.from_dict(p) for p in d["planted_biases"])
            except (KeyError, ValueError) as exc:
                raise ConfigInvalid({"planted_biases": str(exc)}) from None
        return cls(**d)

    @classmethod
    def load(cls, path: str | os.PathLike) -> SynthConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class TruthItem:
    keyword: str
    pair: AttributePair
    direction: AttributeValue
    action: Action


@dataclass(frozen=True)
class GroundTruth:
    planted: tuple[PlantedBias, ...]
    items: frozenset[TruthItem]

    @classmethod
    def from_planted(cls, planted: Iterable[PlantedBias],
                     pairs: Sequence[AttributePair] = CANONICAL_PAIRS) -> GroundTruth:
        """Every pair containing a planted value is expected to lean toward it (or away, if < 1).

        Click biases carry over to likes because likes are drawn given a click.
        """
        planted = tuple(planted)
        items = set()
        for pb in planted:
            if pb.multiplier == 1:
                continue
            actions = (Action.CLICK, Action.LIKE) if pb.action is Action.CLICK else (Action.LIKE,)
            for pair in pairs:
                if pb.value not in (pair.first, pair.second):
                    continue
                other = pair.second if pb.value == pair.first else pair.first
                direction = pb.value if pb.multiplier > 1 else other
                for action in actions:
                    items.add(TruthItem(pb.keyword, pair, direction, action))
        return cls(planted, frozenset(items))

    def to_json(self) -> list[dict]:
        return [p.to_dict() for p in self.planted]

    @classmethod
    def load(cls, path: str | os.PathLike, pairs: Sequence[AttributePair] = CANONICAL_PAIRS) -> GroundTruth:
        with open(path, encoding="utf-8") as fh:
            return cls.from_planted([PlantedBias.from_dict(d) for d in json.load(fh)], pairs)


@dataclass
class Simulation:
    config: SynthConfig
    articles: list[Article]
    popularity: dict[str, float]
    events: list[InteractionEvent]
    truth: GroundTruth


def simulate(config: SynthConfig) -> Simulation:
    rng = np.random.Generator(np.random.PCG64(config.seed))
    words = config.words
    ranks = np.arange(len(words), dtype=float)
    weights = 1.0 / (ranks + config.zipf_offset) ** config.zipf_exponent
    weights /= weights.sum()

    articles: list[Article] = []
    title_words: list[frozenset[str]] = []
    popularity: dict[str, float] = {}
    j = 0
    for category, n in config.n_articles.items():
        for _ in range(n):
            k = int(rng.integers(config.min_title_keywords, config.max_title_keywords + 1))
            picks = rng.choice(len(words), size=k, replace=False, p=weights)
            aid = f"a{j:06d}"
            kws = [words[i] for i in picks]
            articles.append(Article(aid, " ".join(kws), category))
            title_words.append(frozenset(kws))
            popularity[aid] = float(rng.lognormal(config.popularity_mu, config.popularity_sigma))
            j += 1

    users = []
    start = 0
    for cell in CELLS:
        n = config.n_users_per_cell.get(cell, 0)
        ages = BUCKET_CATEGORIES[cell[1]]
        users.append([(f"u{start + i:06d}", ages[i % len(ages)]) for i in range(n)])
        start += n

    click_bias = [p for p in config.planted_biases if p.action is Action.CLICK]
    like_bias = [p for p in config.planted_biases if p.action is Action.LIKE]

    def multiplier(planted, kws, gender, bucket):
        m = 1.0
        for pb in planted:
            if pb.keyword in kws and pb.value in (gender, bucket):
                m *= pb.multiplier
        return m

    events: list[InteractionEvent] = []
    for art, kws in zip(articles, title_words):
        pop = popularity[art.article_id]
        for (gender, bucket), members in zip(CELLS, users):
            if not members:
                continue
            p = config.base_click_prob * pop * multiplier(click_bias, kws, gender, bucket)
            p = min(max(p, _EPS), 1 - _EPS)
            n_click = int(rng.binomial(len(members), p))
            if not n_click:
                continue
            clickers = np.sort(rng.choice(len(members), size=n_click, replace=False))
            q = config.like_given_click_prob * multiplier(like_bias, kws, gender, bucket)
            q = min(max(q, _EPS), 1 - _EPS)
            liked = rng.random(n_click) < q
            for idx, like in zip(clickers.tolist(), liked.tolist()):
                uid, age = members[idx]
                events.append(InteractionEvent(uid, art.article_id, Action.CLICK, gender, age))
                if like:
                    events.append(InteractionEvent(uid, art.article_id, Action.LIKE, gender, age))

    truth = GroundTruth.from_planted(config.planted_biases)
    return Simulation(config, articles, popularity, events, truth)


@dataclass(frozen=True)
class SynthOutput:
    events_path: Path
    articles_path: Path
    truth_path: Path
    truth: GroundTruth
    n_events: int
    n_articles: int


def generate_dataset(config: SynthConfig, output_dir: str | os.PathLike) -> SynthOutput:
    """Write ``events.jsonl``, ``articles.jsonl`` and ``ground_truth.json`` under ``output_dir``."""
    sim = simulate(config)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    events_path = out / "events.jsonl"
    articles_path = out / "articles.jsonl"
    truth_path = out / "ground_truth.json"
    with open(events_path, "w", encoding="utf-8", newline="\n") as fh:
        write_events_jsonl(sim.events, fh)
    with open(articles_path, "w", encoding="utf-8", newline="\n") as fh:
        write_articles_jsonl(sim.articles, fh)
    with open(truth_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(sim.truth.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return SynthOutput(events_path, articles_path, truth_path, sim.truth,
                       len(sim.events), len(sim.articles))


@dataclass(frozen=True)
class DetectionScore:
    precision: float
    recall: float
    true_positives: int
    n_detected: int
    n_truth: int
    zero_detections: bool = False
    zero_truth: bool = False


Detection = tuple  # (keyword, AttributePair, Action, AttributeValue)


def detections_from_classified(classified: Iterable) -> set[Detection]:
    return {
        (c.keyword, c.pair, c.action, c.biased_toward)
        for c in classified
        if c.bias_class.is_biased
    }


def _score(found: set, expected: set) -> DetectionScore:
    tp = len(found & expected)
    precision = tp / len(found) if found else 1.0
    recall = tp / len(expected) if expected else 1.0
    return DetectionScore(precision, recall, tp, len(found), len(expected),
                          zero_detections=not found, zero_truth=not expected)


def evaluate_detection(detected: Iterable, truth: GroundTruth) -> dict[tuple[AttributePair, Action], DetectionScore]:
    """Precision and recall per (pair, action).

    ``detected`` holds :class:`ClassifiedKeyword` objects or
    ``(keyword, pair, action, biased_toward)`` tuples. A hit needs keyword,
    pair and direction to match; detections are pooled across categories.
    """
    detected = list(detected)
    if detected and not isinstance(detected[0], tuple):
        detected = detections_from_classified(detected)
    found = {}
    for kw, pair, action, toward in set(detected):
        found.setdefault((pair, action), set()).add((kw, toward))
    expected = {}
    for item in truth.items:
        expected.setdefault((item.pair, item.action), set()).add((item.keyword, item.direction))
    cells = sorted(set(found) | set(expected), key=lambda c: (c[0].label, c[1].value))
    return {c: _score(found.get(c, set()), expected.get(c, set())) for c in cells}


def overall_score(detected: Iterable, truth: GroundTruth, action: Action = Action.CLICK) -> DetectionScore:
    """Micro-averaged score over all pairs for one action."""
    detected = list(detected)
    if detected and not isinstance(detected[0], tuple):
        detected = detections_from_classified(detected)
    found = {(kw, pair, toward) for kw, pair, act, toward in detected if act is action}
    expected = {(i.keyword, i.pair, i.direction) for i in truth.items if i.action is action}
    return _score(found, expected)
