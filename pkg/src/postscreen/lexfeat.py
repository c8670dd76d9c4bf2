"""Metadata features: abusive-word counts, entity counters, lengths.

Feature families follow the m1/m2/m3 naming used throughout the
project: m1 = abusive-word count, m2 = mention/URL/hashtag counts,
m3 = emoji count. A tweet-length feature rides along whenever any
metadata family is enabled.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import Corpus, LabeledPost
from .errors import DataError
from .preprocess import CleanDoc, EmojiTable, EntityCounts, count_entities, _read_lines

log = logging.getLogger(__name__)

# Canonical order of the full metadata vector: abusive count, emoji
# count, hashtags, mentions, URLs, tweet character length.
META_FIELDS = ("abusive", "emojis", "hashtags", "mentions", "urls", "char_length")

META_FAMILIES = {
    "m1": ("abusive",),
    "m2": ("hashtags", "mentions", "urls"),
    "m3": ("emojis",),
    "length": ("char_length",),
}


@dataclass(frozen=True)
class Lexicon:
    """Deduplicated profanity term set used by the abusive-word counter."""

    terms: frozenset[str]
    source: str = ""

    def __len__(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class MetaFeatures:
    """Per-post metadata block, fixed field order for vectorization."""

    abusive_count: int
    entity: EntityCounts
    char_length: int
    token_length: int

    def as_vector(self) -> np.ndarray:
        return np.array(
            [
                self.abusive_count,
                self.entity.emojis,
                self.entity.hashtags,
                self.entity.mentions,
                self.entity.urls,
                self.char_length,
            ],
            dtype=np.float64,
        )


def default_lexicon_path() -> Path:
    return Path(str(resources.files("postscreen.data").joinpath("profanity_hi.txt")))


def load_lexicon(path: str | Path | None = None) -> Lexicon:
    """Load a one-term-per-line UTF-8 lexicon; empty files are rejected."""
    path = Path(path) if path is not None else default_lexicon_path()
    terms = []
    for line in _read_lines(path):
        if any(c.isspace() for c in line):
            raise DataError(f"{path}: lexicon term contains whitespace: {line!r}")
        terms.append(line)
    if not terms:
        raise DataError(f"{path}: lexicon is empty; a zero-term detector is a misconfiguration")
    return Lexicon(terms=frozenset(terms), source=str(path))


def count_abusive(tokens, lexicon: Lexicon, substring_match: bool = False) -> int:
    """Count token occurrences (with multiplicity) hitting the lexicon."""
    if substring_match:
        return sum(1 for t in tokens if any(term in t for term in lexicon.terms))
    return sum(1 for t in tokens if t in lexicon.terms)


def meta_vector(post: LabeledPost, doc: CleanDoc, lexicon: Lexicon | None,
                substring_match: bool = False) -> MetaFeatures:
    """Assemble the metadata block for one post and its cleaned doc."""
    abusive = count_abusive(doc.tokens, lexicon, substring_match) if lexicon else 0
    return MetaFeatures(
        abusive_count=abusive,
        entity=doc.pre_strip,
        char_length=len(post.text),
        token_length=len(doc.tokens),
    )


def profile_counts(
    corpus: Corpus, emoji_table: EmojiTable | None = None
) -> dict[str, dict[str, float]]:
    """Arithmetic mean of each entity counter per coarse and fine class."""
    sums: dict[str, EntityCounts] = defaultdict(EntityCounts)
    sizes: dict[str, int] = defaultdict(int)
    for post in corpus:
        counts = count_entities(post.text, emoji_table)
        for cls in (post.coarse, *post.fine):
            sums[cls] = sums[cls] + counts
            sizes[cls] += 1
    table = {}
    for cls in sorted(sums):
        n = sizes[cls]
        totals = sums[cls]
        table[cls] = {
            "mentions": totals.mentions / n,
            "urls": totals.urls / n,
            "hashtags": totals.hashtags / n,
            "emojis": totals.emojis / n,
            "posts": n,
        }
    return table


class MetaScaler:
    """Per-feature min-max scaling fitted on the train split.

    Constant features scale to 0 so unbounded counts cannot dominate the
    unit-norm text blocks.
    """

    def __init__(self, mins: np.ndarray, maxs: np.ndarray):
        self.mins = np.asarray(mins, dtype=np.float64)
        self.maxs = np.asarray(maxs, dtype=np.float64)

    @classmethod
    def fit(cls, rows: np.ndarray) -> "MetaScaler":
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise DataError("meta scaler needs a non-empty 2-D matrix")
        return cls(rows.min(axis=0), rows.max(axis=0))

    def transform(self, vector: np.ndarray) -> np.ndarray:
        span = self.maxs - self.mins
        out = np.zeros_like(vector, dtype=np.float64)
        nonconst = span > 0
        out[nonconst] = (vector[nonconst] - self.mins[nonconst]) / span[nonconst]
        return out

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "MetaScaler":
        return cls(np.array(data["mins"]), np.array(data["maxs"]))
