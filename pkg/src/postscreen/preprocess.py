"""Tweet cleaning pipelines for English and Hindi posts.

The cleaning order is: contraction expansion (English only), noise
stripping (URLs, mentions, hashtags, numbers, punctuation), emoji
removal, whitespace tokenization, stopword removal. Entity counters are
captured from the raw text before anything is stripped, because the
removed entities feed the metadata features downstream.

All lookup tables (contractions, stopwords, emoji ranges) ship as data
files under ``postscreen/data`` and can be replaced by path.
"""

from __future__ import annotations

import bisect
import logging
import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

ZERO_WIDTH = "​‌‍"
# Joiner code points live in the emoji table for removal but are never
# counted as emojis in their own right.
EMOJI_JOINERS = frozenset({0x200D, 0xFE0E, 0xFE0F})

URL_RE = re.compile(
    r"""(?:https?://\S+|www\.\S+|\b[a-z0-9][a-z0-9.-]*\.[a-z]{2,6}/\S+)""",
    re.IGNORECASE,
)
MENTION_RE = re.compile(r"(?<![\w@])@[A-Za-z0-9_]+")
# \w misses combining marks (category Mn/Mc), so Devanagari matras would
# split hashtags; allow the full block except danda (U+0964-0965).
_HASHTAG_CHAR = r"[\wऀ-ॣ०-ॿ‌‍]"
HASHTAG_RE = re.compile(rf"(?<!\w)#{_HASHTAG_CHAR}+", re.UNICODE)
_NUMBER_ASCII_RE = re.compile(r"\b[0-9]+(?:[.,][0-9]+)*\b")
_NUMBER_DEVANAGARI_RE = re.compile(r"\b[०-९]+(?:[.,][०-९]+)*\b")
_WS_RE = re.compile(r"\s+")
# Leading apostrophe allowed so table keys like "'cause" match.
_CONTRACTION_TOKEN_RE = re.compile(r"[A-Za-z]*(?:['’][A-Za-z]+)+")


def _bundled(name: str) -> Path:
    return Path(str(resources.files("postscreen.data").joinpath(name)))


def _read_lines(path: str | Path) -> list[str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"resource file not found: {path}")
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


@dataclass(frozen=True)
class EntityCounts:
    """Counts of removable tweet entities, taken from raw text."""

    mentions: int = 0
    urls: int = 0
    hashtags: int = 0
    emojis: int = 0

    def __add__(self, other: "EntityCounts") -> "EntityCounts":
        return EntityCounts(
            mentions=self.mentions + other.mentions,
            urls=self.urls + other.urls,
            hashtags=self.hashtags + other.hashtags,
            emojis=self.emojis + other.emojis,
        )


@dataclass(frozen=True)
class CleanDoc:
    """Normalized token sequence plus pre-strip entity counters."""

    tokens: tuple[str, ...]
    pre_strip: EntityCounts = EntityCounts()

    def text(self) -> str:
        return " ".join(self.tokens)


class EmojiTable:
    """Sorted, non-overlapping code point ranges classified as emoji."""

    def __init__(self, ranges: list[tuple[int, int]]):
        self.ranges = sorted(ranges)
        self._starts = [r[0] for r in self.ranges]

    def __contains__(self, char: str) -> bool:
        cp = ord(char)
        i = bisect.bisect_right(self._starts, cp) - 1
        return i >= 0 and cp <= self.ranges[i][1]

    def is_countable(self, char: str) -> bool:
        return char in self and ord(char) not in EMOJI_JOINERS

    @classmethod
    def from_file(cls, path: str | Path) -> "EmojiTable":
        ranges = []
        for line in _read_lines(path):
            token = line.split()[0]
            try:
                start_s, _, end_s = token.partition("-")
                start, end = int(start_s, 16), int(end_s or start_s, 16)
            except ValueError:
                raise DataError(f"{path}: bad emoji range line {line!r}")
            if end < start:
                raise DataError(f"{path}: inverted emoji range {line!r}")
            ranges.append((start, end))
        return cls(ranges)


def load_contractions(path: str | Path | None = None) -> dict[str, str]:
    path = path or _bundled("contractions_en.tsv")
    table = {}
    for line in _read_lines(path):
        key, _, expansion = line.partition("\t")
        if not expansion:
            raise DataError(f"{path}: contraction line without expansion: {line!r}")
        table[key.strip().lower().replace("’", "'")] = expansion.strip()
    return table


def load_stopwords(language: str, path: str | Path | None = None) -> frozenset[str]:
    if path is None:
        path = _bundled("stopwords_hi.txt" if language == "hindi" else "stopwords_en.txt")
    return frozenset(_read_lines(path))


def load_emoji_table(path: str | Path | None = None) -> EmojiTable:
    return EmojiTable.from_file(path or _bundled("emoji_ranges.txt"))


@lru_cache(maxsize=1)
def default_emoji_table() -> EmojiTable:
    return load_emoji_table()


@lru_cache(maxsize=1)
def default_contractions() -> dict[str, str]:
    return load_contractions()


@lru_cache(maxsize=None)
def default_stopwords(language: str) -> frozenset[str]:
    return load_stopwords(language)


def expand_contractions(text: str, table: dict[str, str] | None = None) -> str:
    """Replace whole-token English contractions with their expansions."""
    table = default_contractions() if table is None else table

    def repl(match: re.Match) -> str:
        key = match.group(0).lower().replace("’", "'")
        return table.get(key, match.group(0))

    return _CONTRACTION_TOKEN_RE.sub(repl, text)


def remove_emojis(text: str, table: EmojiTable | None = None) -> str:
    """Delete every emoji code point, including joiners and selectors."""
    table = default_emoji_table() if table is None else table
    return "".join(ch for ch in text if ch not in table)


def count_emojis(text: str, table: EmojiTable | None = None) -> int:
    table = default_emoji_table() if table is None else table
    return sum(1 for ch in text if table.is_countable(ch))


@lru_cache(maxsize=4096)
def _is_punct_or_symbol(cp: int) -> bool:
    return unicodedata.category(chr(cp))[0] in "PS"


def strip_noise(text: str, language: str, emoji_table: EmojiTable | None = None) -> str:
    """Remove URLs, mentions, hashtags, numbers, punctuation, emoji and
    zero-width characters; collapse whitespace.

    Zero-width characters and emoji are deleted in place (joining their
    neighbours); punctuation becomes a space.
    """
    emoji_table = default_emoji_table() if emoji_table is None else emoji_table
    text = URL_RE.sub(" ", text)
    text = MENTION_RE.sub(" ", text)
    text = HASHTAG_RE.sub(" ", text)
    text = remove_emojis(text, emoji_table)
    text = text.translate({ord(c): None for c in ZERO_WIDTH})
    text = _NUMBER_ASCII_RE.sub(" ", text)
    if language == "hindi":
        text = _NUMBER_DEVANAGARI_RE.sub(" ", text)
    text = "".join(" " if _is_punct_or_symbol(ord(ch)) else ch for ch in text)
    return _WS_RE.sub(" ", text).strip()


def tokenize(text: str, language: str) -> list[str]:
    """Split on Unicode whitespace; English tokens are lowercased."""
    tokens = text.split()
    if language == "english":
        tokens = [t.lower() for t in tokens]
    return tokens


def remove_stopwords(
    tokens: list[str], language: str, stopwords: frozenset[str] | None = None
) -> list[str]:
    stopwords = default_stopwords(language) if stopwords is None else stopwords
    return [t for t in tokens if t not in stopwords]


def count_entities(raw_text: str, emoji_table: EmojiTable | None = None) -> EntityCounts:
    """Count mentions, URLs, hashtags and emojis in raw (unstripped) text."""
    emoji_table = default_emoji_table() if emoji_table is None else emoji_table
    return EntityCounts(
        mentions=len(MENTION_RE.findall(raw_text)),
        urls=len(URL_RE.findall(raw_text)),
        hashtags=len(HASHTAG_RE.findall(raw_text)),
        emojis=count_emojis(raw_text, emoji_table),
    )


class TextCleaner:
    """A configured cleaning pipeline for one language."""

    def __init__(
        self,
        language: str,
        contractions: dict[str, str] | None = None,
        stopwords: frozenset[str] | None = None,
        emoji_table: EmojiTable | None = None,
    ):
        if language not in ("hindi", "english"):
            raise ConfigError(f"unknown language {language!r}")
        self.language = language
        self.contractions = (
            (default_contractions() if language == "english" else {})
            if contractions is None
            else contractions
        )
        self.stopwords = default_stopwords(language) if stopwords is None else stopwords
        self.emoji_table = default_emoji_table() if emoji_table is None else emoji_table

    def clean(self, text: str) -> CleanDoc:
        pre_strip = count_entities(text, self.emoji_table)
        if self.language == "english":
            text = expand_contractions(text, self.contractions)
        text = strip_noise(text, self.language, self.emoji_table)
        text = remove_emojis(text, self.emoji_table)
        tokens = tokenize(text, self.language)
        tokens = remove_stopwords(tokens, self.language, self.stopwords)
        return CleanDoc(tokens=tuple(tokens), pre_strip=pre_strip)


@lru_cache(maxsize=4)
def default_cleaner(language: str) -> TextCleaner:
    return TextCleaner(language)


def clean(text: str, language: str) -> CleanDoc:
    """Clean one raw post with the default bundled tables."""
    return default_cleaner(language).clean(text)
