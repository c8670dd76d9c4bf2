"""The end-to-end featurizer: cleaning, text blocks, metadata, layout.

A Featurizer is fitted on the train split and then maps any post to a
FeatureVector with the layout dense | tfidf | bow | meta. Feature
families are switched by FeatureFlags; the tweet-length column rides
along whenever any metadata family is on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .corpus import LabeledPost
from .errors import ConfigError
from .lexfeat import (
    META_FIELDS,
    Lexicon,
    MetaFeatures,
    MetaScaler,
    meta_vector,
)
from .preprocess import CleanDoc, TextCleaner
from .vectorize import (
    EmbeddingTable,
    EntityVocab,
    FeatureLayout,
    FeatureVector,
    SparseVector,
    TfIdfModel,
    assemble,
    bow_vector,
    concat_sparse,
    embed_average,
    fit_tfidf,
    transform_tfidf,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureFlags:
    tfidf: bool = True
    embed: bool = False
    bow: bool = False
    m1: bool = False
    m2: bool = False
    m3: bool = False

    @property
    def any_meta(self) -> bool:
        return self.m1 or self.m2 or self.m3

    def meta_fields(self) -> tuple[str, ...]:
        """Active metadata columns in canonical META_FIELDS order."""
        active = set()
        if self.m1:
            active.add("abusive")
        if self.m2:
            active.update(("hashtags", "mentions", "urls"))
        if self.m3:
            active.add("emojis")
        if active:
            active.add("char_length")
        return tuple(f for f in META_FIELDS if f in active)

    def to_dict(self) -> dict:
        return {
            "tfidf": self.tfidf,
            "embed": self.embed,
            "bow": self.bow,
            "m1": self.m1,
            "m2": self.m2,
            "m3": self.m3,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureFlags":
        return cls(**data)


class Featurizer:
    """Fitted feature pipeline for one task run."""

    def __init__(
        self,
        language: str,
        flags: FeatureFlags,
        cleaner: TextCleaner,
        lexicon: Lexicon | None = None,
        embeddings: EmbeddingTable | None = None,
        entity_vocab: EntityVocab | None = None,
        tfidf_min_df: int = 1,
        substring_match: bool = False,
    ):
        if flags.embed and embeddings is None:
            raise ConfigError("embed feature enabled but no embedding table supplied")
        if flags.m1 and lexicon is None:
            raise ConfigError("m1 feature enabled but no lexicon supplied")
        self.language = language
        self.flags = flags
        self.cleaner = cleaner
        self.lexicon = lexicon
        self.embeddings = embeddings
        self.entity_vocab = entity_vocab if flags.bow else None
        self.tfidf_min_df = tfidf_min_df
        self.substring_match = substring_match
        self.tfidf: TfIdfModel | None = None
        self.meta_scaler: MetaScaler | None = None
        self._meta_fields = flags.meta_fields()
        self._meta_index = [META_FIELDS.index(f) for f in self._meta_fields]
        self._doc_cache: dict[str, CleanDoc] = {}
        self.layout: FeatureLayout | None = None

    def doc(self, post: LabeledPost) -> CleanDoc:
        cached = self._doc_cache.get(post.text)
        if cached is None:
            cached = self.cleaner.clean(post.text)
            self._doc_cache[post.text] = cached
        return cached

    def fit(self, train_posts: Sequence[LabeledPost]) -> "Featurizer":
        if not train_posts:
            raise ConfigError("cannot fit featurizer on an empty train split")
        docs = [self.doc(p) for p in train_posts]
        if self.flags.tfidf:
            self.tfidf = fit_tfidf([list(d.tokens) for d in docs], self.tfidf_min_df)
        if self.flags.any_meta:
            rows = np.stack(
                [self._full_meta(p, d).as_vector() for p, d in zip(train_posts, docs)]
            )
            self.meta_scaler = MetaScaler.fit(rows)
        self.layout = self._build_layout()
        return self

    def _build_layout(self) -> FeatureLayout:
        return FeatureLayout(
            blocks=(
                ("dense", self.embeddings.dim if self.flags.embed else 0),
                ("tfidf", len(self.tfidf) if self.tfidf is not None else 0),
                ("bow", len(self.entity_vocab) if self.entity_vocab is not None else 0),
                ("meta", len(self._meta_fields)),
            )
        )

    def _full_meta(self, post: LabeledPost, doc: CleanDoc) -> MetaFeatures:
        return meta_vector(post, doc, self.lexicon if self.flags.m1 else None,
                           self.substring_match)

    def transform(self, post: LabeledPost) -> FeatureVector:
        if self.layout is None:
            raise ConfigError("featurizer is not fitted")
        doc = self.doc(post)
        tokens = list(doc.tokens)

        dense = (
            embed_average(self.embeddings, tokens)
            if self.flags.embed
            else np.empty(0, dtype=np.float64)
        )

        parts, sizes = [], []
        if self.tfidf is not None:
            parts.append(transform_tfidf(self.tfidf, tokens))
            sizes.append(len(self.tfidf))
        if self.entity_vocab is not None:
            parts.append(bow_vector(self.entity_vocab, tokens))
            sizes.append(len(self.entity_vocab))
        sparse = concat_sparse(parts, sizes) if parts else SparseVector.empty()

        if self._meta_fields:
            full = self._full_meta(post, doc).as_vector()
            scaled = self.meta_scaler.transform(full)
            meta = scaled[self._meta_index]
        else:
            meta = np.empty(0, dtype=np.float64)
        return assemble(dense, sparse, meta, self.layout)

    def transform_many(self, posts: Iterable[LabeledPost]) -> list[FeatureVector]:
        return [self.transform(p) for p in posts]

    def with_entity_vocab(self, vocab: EntityVocab) -> "Featurizer":
        """Clone this fitted featurizer with a bow block added."""
        clone = Featurizer(
            language=self.language,
            flags=replace(self.flags, bow=True),
            cleaner=self.cleaner,
            lexicon=self.lexicon,
            embeddings=self.embeddings,
            entity_vocab=vocab,
            tfidf_min_df=self.tfidf_min_df,
            substring_match=self.substring_match,
        )
        clone.tfidf = self.tfidf
        clone.meta_scaler = self.meta_scaler
        clone._doc_cache = self._doc_cache
        clone.layout = clone._build_layout()
        return clone

    def to_dict(self) -> dict:
        return {
            "language": self.language,
            "flags": self.flags.to_dict(),
            "tfidf_min_df": self.tfidf_min_df,
            "substring_match": self.substring_match,
            "tfidf": self.tfidf.to_dict() if self.tfidf is not None else None,
            "entity_vocab": (
                self.entity_vocab.to_dict() if self.entity_vocab is not None else None
            ),
            "meta_scaler": (
                self.meta_scaler.to_dict() if self.meta_scaler is not None else None
            ),
            "lexicon_terms": sorted(self.lexicon.terms) if self.lexicon else None,
            "embedding_dim": self.embeddings.dim if self.embeddings else None,
        }

    @classmethod
    def from_dict(
        cls,
        data: dict,
        cleaner: TextCleaner,
        embeddings: EmbeddingTable | None,
    ) -> "Featurizer":
        flags = FeatureFlags.from_dict(data["flags"])
        lexicon = (
            Lexicon(terms=frozenset(data["lexicon_terms"]), source="bundle")
            if data.get("lexicon_terms")
            else None
        )
        entity_vocab = (
            EntityVocab.from_dict(data["entity_vocab"]) if data.get("entity_vocab") else None
        )
        featurizer = cls(
            language=data["language"],
            flags=flags,
            cleaner=cleaner,
            lexicon=lexicon,
            embeddings=embeddings,
            entity_vocab=entity_vocab,
            tfidf_min_df=data.get("tfidf_min_df", 1),
            substring_match=data.get("substring_match", False),
        )
        if data.get("tfidf") is not None:
            featurizer.tfidf = TfIdfModel.from_dict(data["tfidf"])
        if data.get("meta_scaler") is not None:
            featurizer.meta_scaler = MetaScaler.from_dict(data["meta_scaler"])
        featurizer.layout = featurizer._build_layout()
        return featurizer
