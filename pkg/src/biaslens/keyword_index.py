"""Keyword candidates from article titles, ranked by document frequency."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

from .errors import UnknownKeyword
from .log_model import Article

Tokenizer = Callable[[str], Sequence[str]]

_SPLIT = re.compile(r"[\W_]+", re.UNICODE)


def default_tokenizer(title: str) -> list[str]:
    """Lowercase, split on whitespace/punctuation, drop numbers and 1-char tokens.

    Languages written without spaces need a morphological tokenizer plugged
    in instead; this one would return whole runs of text.
    """
    return [t for t in _SPLIT.split(title.lower()) if len(t) > 1 and not t.isnumeric()]


def tokenize_title(title: str, tokenizer: Tokenizer = default_tokenizer) -> list[str]:
    return list(tokenizer(title))


def normalize_token(token: str) -> str:
    return token.strip().lower()


def parse_stopwords(lines: Iterable[str]) -> frozenset[str]:
    words = set()
    for line in lines:
        word = normalize_token(line.split("#", 1)[0])
        if word:
            words.add(word)
    return frozenset(words)


def load_stopwords(path: str) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return parse_stopwords(fh)


@dataclass(frozen=True)
class KeywordIndex:
    keywords: tuple[tuple[str, int], ...]
    postings: Mapping[str, frozenset[str]]

    def __contains__(self, keyword: str) -> bool:
        return keyword in self.postings

    def __len__(self) -> int:
        return len(self.keywords)

    @property
    def words(self) -> list[str]:
        return [k for k, _ in self.keywords]

    def articles_for(self, keyword: str) -> frozenset[str]:
        try:
            return self.postings[keyword]
        except KeyError:
            raise UnknownKeyword(keyword) from None


def select_keywords(
    articles: Iterable[Article] | Mapping[str, Article],
    tokenizer: Tokenizer = default_tokenizer,
    stopwords: Iterable[str] = frozenset(),
    top_n: int = 100,
) -> KeywordIndex:
    """Top ``top_n`` tokens by number of titles containing them.

    Ties at equal frequency are broken lexicographically.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    if isinstance(articles, Mapping):
        articles = articles.values()
    stop = {normalize_token(w) for w in stopwords}
    postings: dict[str, set[str]] = {}
    for art in articles:
        for token in set(tokenizer(art.title)):
            if normalize_token(token) in stop:
                continue
            postings.setdefault(token, set()).add(art.article_id)
    freq = Counter({tok: len(ids) for tok, ids in postings.items()})
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
    kept = MappingProxyType({tok: frozenset(postings[tok]) for tok, _ in ranked})
    return KeywordIndex(tuple(ranked), kept)


def articles_for_keyword(index: KeywordIndex, keyword: str) -> frozenset[str]:
    return index.articles_for(keyword)
