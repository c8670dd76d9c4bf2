"""Dataset ingestion: labeled posts, corpora, and split statistics.

Input files are delimiter-separated values with a header row. The
delimiter is auto-detected from the header (tab vs comma) and can be
forced by the caller. Fine-grain labels arrive comma-joined inside a
single label field, e.g. ``hate,offensive``.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import DataError

log = logging.getLogger(__name__)

LANGUAGES = ("hindi", "english")
TASKS = ("hostility", "fake_news")
SPLITS = ("train", "validation", "test")

# Fine-grain taxonomy (hostility task), kept in report order.
FINE_CLASSES = ("defamation", "fake", "hate", "offensive")

COARSE_CLASSES = {
    "hostility": ("hostile", "non_hostile"),
    "fake_news": ("fake", "real"),
}

# Positive class of the binary (coarse) task, overridable in config.
POSITIVE_COARSE = {"hostility": "hostile", "fake_news": "fake"}

_LABEL_ALIASES = {
    "defame": "defamation",
    "non-hostile": "non_hostile",
    "non hostile": "non_hostile",
    "nonhostile": "non_hostile",
}

_ID_COLUMNS = ("id", "unique id", "unique_id", "tweet_id", "post_id")
_TEXT_COLUMNS = ("text", "tweet", "post", "content")
_LABEL_COLUMNS = ("label", "labels", "labels set", "labels_set", "label set")


@dataclass(frozen=True)
class LabeledPost:
    """One micro-blog record with its gold annotation."""

    id: str
    text: str
    coarse: str
    fine: frozenset[str] = frozenset()
    split: str = "train"
    pseudo: bool = False

    def __post_init__(self):
        if self.fine and self.coarse != "hostile":
            raise DataError(
                f"post {self.id!r}: fine labels {sorted(self.fine)} require coarse label "
                f"'hostile', got {self.coarse!r}"
            )


@dataclass(frozen=True)
class Corpus:
    """An immutable collection of posts sharing one language and task."""

    posts: tuple[LabeledPost, ...]
    language: str
    task: str

    def __len__(self) -> int:
        return len(self.posts)

    def __iter__(self) -> Iterator[LabeledPost]:
        return iter(self.posts)

    def split(self, name: str) -> tuple[LabeledPost, ...]:
        return tuple(p for p in self.posts if p.split == name)

    def merged_with(self, posts: Iterable[LabeledPost]) -> "Corpus":
        return replace(self, posts=self.posts + tuple(posts))


def normalize_label(raw: str) -> str:
    label = raw.strip().lower()
    return _LABEL_ALIASES.get(label, label)


def parse_label_field(field_value: str, task: str, line_num: int) -> tuple[str, frozenset[str]]:
    """Turn a raw label cell into (coarse, fine) for the given task."""
    parts = [normalize_label(p) for p in field_value.split(",") if p.strip()]
    if not parts:
        raise DataError(f"line {line_num}: empty label field")
    if task == "fake_news":
        if len(parts) != 1 or parts[0] not in ("real", "fake"):
            raise DataError(f"line {line_num}: unknown label {field_value.strip()!r}")
        return parts[0], frozenset()
    # hostility: either the single non-hostile tag or a set of fine classes
    if parts == ["non_hostile"]:
        return "non_hostile", frozenset()
    fine = set()
    for part in parts:
        if part not in FINE_CLASSES:
            raise DataError(f"line {line_num}: unknown label {part!r}")
        fine.add(part)
    return "hostile", frozenset(fine)


def detect_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def _resolve_columns(header: Sequence[str], path) -> tuple[int, int, int]:
    lowered = [h.strip().lower().lstrip("﻿") for h in header]
    def find(candidates, what):
        for i, name in enumerate(lowered):
            if name in candidates:
                return i
        raise DataError(f"{path}: no {what} column in header {header!r}")
    id_col = find(_ID_COLUMNS, "id")
    text_col = find(_TEXT_COLUMNS, "text")
    label_col = find(_LABEL_COLUMNS, "label")
    known = {id_col, text_col, label_col}
    extras = [header[i] for i in range(len(header)) if i not in known]
    if extras:
        log.warning("%s: ignoring extra columns %s", path, extras)
    return id_col, text_col, label_col


def load_dataset(
    path: str | Path,
    language: str,
    task: str,
    split: str = "train",
    delimiter: str | None = None,
) -> Corpus:
    """Load one split file into a Corpus.

    Raises DataError for a missing file, a row with the wrong column
    count (named by line number), an unknown label string, or a
    duplicate id within the split.
    """
    path = Path(path)
    if language not in LANGUAGES:
        raise DataError(f"unknown language {language!r}")
    if task not in TASKS:
        raise DataError(f"unknown task {task!r}")
    if split not in SPLITS:
        raise DataError(f"unknown split {split!r}")
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")

    with path.open(encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first.strip():
            raise DataError(f"{path}: missing header row")
        delim = delimiter or detect_delimiter(first)
        fh.seek(0)
        reader = csv.reader(fh, delimiter=delim)
        header = next(reader)
        id_col, text_col, label_col = _resolve_columns(header, path)

        posts = []
        seen_ids = set()
        for row in reader:
            if not row:
                continue
            line_num = reader.line_num
            if len(row) != len(header):
                raise DataError(
                    f"{path}: line {line_num}: expected {len(header)} fields, got {len(row)}"
                )
            post_id = row[id_col].strip()
            if post_id in seen_ids:
                raise DataError(f"{path}: line {line_num}: duplicate id {post_id!r}")
            seen_ids.add(post_id)
            coarse, fine = parse_label_field(row[label_col], task, line_num)
            posts.append(
                LabeledPost(id=post_id, text=row[text_col], coarse=coarse, fine=fine, split=split)
            )

    return Corpus(posts=tuple(posts), language=language, task=task)


def load_splits(
    paths: Mapping[str, str | Path],
    language: str,
    task: str,
    delimiter: str | None = None,
) -> Corpus:
    """Load several split files into one merged Corpus."""
    posts: list[LabeledPost] = []
    for split in SPLITS:
        if split in paths and paths[split]:
            posts.extend(load_dataset(paths[split], language, task, split, delimiter).posts)
    return Corpus(posts=tuple(posts), language=language, task=task)


def split_counts(corpus: Corpus) -> dict[str, dict[str, int]]:
    """Per-split class counts.

    For the hostility task the fine-class columns count label
    membership, so they may sum to more than the hostile total.
    """
    table: dict[str, dict[str, int]] = {}
    for split in SPLITS:
        posts = corpus.split(split)
        counts = Counter()
        for post in posts:
            counts[post.coarse] += 1
            for cls in post.fine:
                counts[cls] += 1
        row = {"total": len(posts)}
        if corpus.task == "hostility":
            row["hostile"] = counts.get("hostile", 0)
            row["non_hostile"] = counts.get("non_hostile", 0)
            for cls in FINE_CLASSES:
                row[cls] = counts.get(cls, 0)
        else:
            row["real"] = counts.get("real", 0)
            row["fake"] = counts.get("fake", 0)
        table[split] = row
    return table
