"""Numeric features: TF-IDF, embedding averages, entity bag-of-words.

Sparse blocks are stored as (indices, values) pairs with strictly
increasing indices. A FeatureVector is the fixed-order concatenation
dense | sparse | meta described by a FeatureLayout, so linear models can
score and update without materializing the full dense row.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus, LabeledPost
from .errors import DataError
from .preprocess import TextCleaner

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SparseVector:
    """Index/value pairs with strictly increasing indices."""

    indices: np.ndarray
    values: np.ndarray

    @classmethod
    def empty(cls) -> "SparseVector":
        return cls(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64))

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def shifted(self, offset: int) -> "SparseVector":
        return SparseVector(self.indices + offset, self.values)


def concat_sparse(parts: Sequence[SparseVector], sizes: Sequence[int]) -> SparseVector:
    """Concatenate sparse blocks, offsetting indices by the block sizes."""
    indices, values, offset = [], [], 0
    for part, size in zip(parts, sizes):
        indices.append(part.indices + offset)
        values.append(part.values)
        offset += size
    if not indices:
        return SparseVector.empty()
    return SparseVector(np.concatenate(indices), np.concatenate(values))


class TfIdfModel:
    """Vocabulary plus smoothed inverse document frequencies."""

    def __init__(self, vocabulary: dict[str, int], idf: np.ndarray, doc_count: int):
        self.vocabulary = vocabulary
        self.idf = np.asarray(idf, dtype=np.float64)
        self.doc_count = doc_count

    def __len__(self) -> int:
        return len(self.vocabulary)

    def to_dict(self) -> dict:
        terms = sorted(self.vocabulary, key=self.vocabulary.get)
        return {"terms": terms, "idf": self.idf.tolist(), "doc_count": self.doc_count}

    @classmethod
    def from_dict(cls, data: dict) -> "TfIdfModel":
        vocab = {t: i for i, t in enumerate(data["terms"])}
        return cls(vocab, np.array(data["idf"], dtype=np.float64), data["doc_count"])


def fit_tfidf(docs: Sequence[Sequence[str]], min_df: int = 1) -> TfIdfModel:
    """Fit vocabulary and idf over token lists.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1, vocabulary restricted to
    terms with document frequency >= min_df, indexed in sorted term
    order.
    """
    n_docs = len(docs)
    if not any(len(d) for d in docs):
        raise DataError("cannot fit tf-idf: all documents are empty")
    df: Counter = Counter()
    for doc in docs:
        df.update(set(doc))
    terms = sorted(t for t, count in df.items() if count >= min_df)
    if not terms:
        log.warning("tf-idf vocabulary is empty at min_df=%d", min_df)
    vocab = {t: i for i, t in enumerate(terms)}
    idf = np.array(
        [math.log((1 + n_docs) / (1 + df[t])) + 1.0 for t in terms], dtype=np.float64
    )
    return TfIdfModel(vocab, idf, n_docs)


def transform_tfidf(model: TfIdfModel, tokens: Sequence[str]) -> SparseVector:
    """Raw term count times idf, L2-normalized; OOV terms are ignored."""
    counts = Counter(t for t in tokens if t in model.vocabulary)
    if not counts:
        return SparseVector.empty()
    indices = np.array(sorted(model.vocabulary[t] for t in counts), dtype=np.int64)
    by_index = {model.vocabulary[t]: c for t, c in counts.items()}
    values = np.array([by_index[i] for i in indices], dtype=np.float64) * model.idf[indices]
    norm = float(np.sqrt(np.dot(values, values)))
    if norm > 0:
        values = values / norm
    return SparseVector(indices, values)


class EmbeddingTable:
    """Pretrained word vectors keyed by token."""

    def __init__(self, dim: int, vectors: dict[str, np.ndarray]):
        self.dim = dim
        self.vectors = vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors


def load_embeddings(path: str | Path, restrict: set[str] | None = None) -> EmbeddingTable:
    """Read a plain-text vector file: header ``count dim``, then one
    ``token v1 ... v_dim`` line per token.

    ``restrict`` keeps only the given tokens (the file is still fully
    validated line by line). Duplicate tokens keep the last occurrence.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"embeddings file not found: {path}")
    vectors: dict[str, np.ndarray] = {}
    duplicates = 0
    with path.open(encoding="utf-8", errors="replace") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}: line 1: expected header 'count dim'")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise DataError(f"{path}: line 1: expected header 'count dim'")
        lines_read = 0
        for line_num, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            lines_read += 1
            token, _, rest = line.rstrip("\n").partition(" ")
            values = np.fromstring(rest, dtype=np.float64, sep=" ")
            if len(values) != dim:
                raise DataError(
                    f"{path}: line {line_num}: expected {dim} values, got {len(values)}"
                )
            if restrict is not None and token not in restrict:
                continue
            if token in vectors:
                duplicates += 1
            vectors[token] = values
    if lines_read != count:
        raise DataError(f"{path}: header promises {count} vectors, found {lines_read}")
    if duplicates:
        log.warning("%s: %d duplicate tokens, kept last occurrence", path, duplicates)
    return EmbeddingTable(dim, vectors)


def embed_average(table: EmbeddingTable, tokens: Sequence[str]) -> np.ndarray:
    """Mean vector of in-vocabulary tokens; zero vector if none match."""
    hits = [table.vectors[t] for t in tokens if t in table.vectors]
    if not hits:
        return np.zeros(table.dim, dtype=np.float64)
    return np.mean(hits, axis=0)


@dataclass(frozen=True)
class EntityVocab:
    """Entity terms selected from misclassification analysis.

    Each term carries its (v_class, t_class, t_other) score triple: the
    group tf-idf score among misclassified validation posts of the
    class, among train posts of the class, and among the remaining train
    posts.
    """

    terms: tuple[str, ...]
    scores: dict[str, tuple[float, float, float]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.terms)

    def save(self, path: str | Path) -> None:
        lines = []
        for term in self.terms:
            v, t_own, t_other = self.scores.get(term, (0.0, 0.0, 0.0))
            lines.append(f"{term}\t{v!r}\t{t_own!r}\t{t_other!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EntityVocab":
        terms, scores = [], {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            term, v, t_own, t_other = line.split("\t")
            terms.append(term)
            scores[term] = (float(v), float(t_own), float(t_other))
        return cls(tuple(terms), scores)

    def to_dict(self) -> dict:
        return {
            "terms": list(self.terms),
            "scores": {t: list(s) for t, s in self.scores.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EntityVocab":
        return cls(
            tuple(data["terms"]),
            {t: tuple(s) for t, s in data["scores"].items()},
        )


def group_term_scores(docs: Sequence[Sequence[str]]) -> dict[str, float]:
    """Per-term tf-idf score of a document group: the mean of the term's
    normalized tf-idf weight over all documents in the group."""
    if not any(len(d) for d in docs):
        return {}
    model = fit_tfidf(docs, min_df=1)
    totals = np.zeros(len(model), dtype=np.float64)
    for doc in docs:
        vec = transform_tfidf(model, doc)
        totals[vec.indices] += vec.values
    totals /= len(docs)
    return {term: float(totals[i]) for term, i in model.vocabulary.items()}


def rank_entity_terms(
    v_scores: Mapping[str, float],
    t_own: Mapping[str, float],
    t_other: Mapping[str, float],
    top_k: int,
    ratio_min: float,
    eps: float = 1e-9,
) -> list[tuple[str, tuple[float, float, float]]]:
    """Apply the selection rule to one class's score tables.

    Keeps terms present in the misclassified group whose
    t_other/(t_own + eps) ratio is at most ratio_min, ranked by
    min(v, t_own) descending with lexicographic tie-break, truncated to
    top_k.
    """
    candidates = []
    for term, v in v_scores.items():
        if v <= 0:
            continue
        own = t_own.get(term, 0.0)
        other = t_other.get(term, 0.0)
        if other / (own + eps) > ratio_min:
            continue
        candidates.append((term, (v, own, other)))
    candidates.sort(key=lambda item: (-min(item[1][0], item[1][1]), item[0]))
    return candidates[: max(top_k, 0)]


def select_entity_terms(
    train: Corpus,
    misclassified_val: Sequence[tuple[LabeledPost, str]],
    cleaner: TextCleaner,
    top_k: int = 50,
    ratio_min: float = 0.25,
    eps: float = 1e-9,
) -> EntityVocab:
    """Select entity terms from validation misclassifications, per class.

    For each true coarse class, terms scoring high both among the
    misclassified validation posts of that class and among the class's
    train posts, while scoring low among the other classes' train posts,
    are kept (top_k per class, union over classes).
    """
    if not misclassified_val:
        log.warning("no misclassified validation posts: entity vocabulary is empty")
        return EntityVocab(terms=())

    train_docs: dict[str, list] = {}
    for post in train:
        train_docs.setdefault(post.coarse, []).append(list(cleaner.clean(post.text).tokens))
    miscl_docs: dict[str, list] = {}
    for post, _predicted in misclassified_val:
        miscl_docs.setdefault(post.coarse, []).append(list(cleaner.clean(post.text).tokens))

    train_scores = {cls: group_term_scores(docs) for cls, docs in train_docs.items()}
    selected: dict[str, tuple[float, float, float]] = {}
    for cls in sorted(miscl_docs):
        v_scores = group_term_scores(miscl_docs[cls])
        t_own = train_scores.get(cls, {})
        t_other = group_term_scores(
            [doc for other_cls, docs in sorted(train_docs.items()) if other_cls != cls
             for doc in docs]
        )
        for term, triple in rank_entity_terms(v_scores, t_own, t_other, top_k, ratio_min, eps):
            if term not in selected or min(triple[0], triple[1]) > min(
                selected[term][0], selected[term][1]
            ):
                selected[term] = triple
    terms = tuple(sorted(selected))
    return EntityVocab(terms=terms, scores={t: selected[t] for t in terms})


def bow_vector(vocab: EntityVocab, tokens: Sequence[str]) -> SparseVector:
    """Binary presence vector over the entity vocabulary."""
    present = set(tokens)
    indices = [i for i, term in enumerate(vocab.terms) if term in present]
    if not indices:
        return SparseVector.empty()
    return SparseVector(
        np.array(indices, dtype=np.int64), np.ones(len(indices), dtype=np.float64)
    )


@dataclass(frozen=True)
class FeatureLayout:
    """Named block sizes in fixed order: dense | sparse blocks | meta."""

    blocks: tuple[tuple[str, int], ...]

    @property
    def total_length(self) -> int:
        return sum(size for _, size in self.blocks)

    def size(self, name: str) -> int:
        for block, block_size in self.blocks:
            if block == name:
                return block_size
        return 0

    def offset(self, name: str) -> int:
        offset = 0
        for block, block_size in self.blocks:
            if block == name:
                return offset
            offset += block_size
        raise KeyError(name)

    @property
    def dense_size(self) -> int:
        return self.size("dense")

    @property
    def sparse_size(self) -> int:
        return self.size("tfidf") + self.size("bow")

    @property
    def meta_size(self) -> int:
        return self.size("meta")

    def to_dict(self) -> dict:
        return {"blocks": [[name, size] for name, size in self.blocks]}

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureLayout":
        return cls(tuple((name, int(size)) for name, size in data["blocks"]))


@dataclass(frozen=True)
class FeatureVector:
    """One post's features: dense block, sparse region, meta block."""

    dense: np.ndarray
    sparse: SparseVector
    meta: np.ndarray
    layout: FeatureLayout

    @property
    def length(self) -> int:
        return self.layout.total_length

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.layout.total_length, dtype=np.float64)
        d = len(self.dense)
        out[:d] = self.dense
        if self.sparse.nnz:
            out[d + self.sparse.indices] = self.sparse.values
        if len(self.meta):
            out[d + self.layout.sparse_size :] = self.meta
        return out


def assemble(
    dense: np.ndarray, sparse: SparseVector, meta: np.ndarray, layout: FeatureLayout
) -> FeatureVector:
    """Validate block lengths against the layout and build the vector."""
    dense = np.asarray(dense, dtype=np.float64)
    meta = np.asarray(meta, dtype=np.float64)
    if len(dense) != layout.dense_size:
        raise DataError(
            f"dense block length {len(dense)} != layout dense size {layout.dense_size}"
        )
    if len(meta) != layout.meta_size:
        raise DataError(f"meta block length {len(meta)} != layout meta size {layout.meta_size}")
    if sparse.nnz:
        if len(sparse.indices) != len(sparse.values):
            raise DataError("sparse indices and values lengths differ")
        if int(sparse.indices[-1]) >= layout.sparse_size:
            raise DataError(
                f"sparse index {int(sparse.indices[-1])} outside sparse region "
                f"of size {layout.sparse_size}"
            )
        if np.any(np.diff(sparse.indices) <= 0):
            raise DataError("sparse indices must be strictly increasing")
    return FeatureVector(dense=dense, sparse=sparse, meta=meta, layout=layout)
