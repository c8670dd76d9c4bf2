"""Versioned model persistence.

A model file is a JSON document {spec_version, checksum, payload}. The
checksum covers the canonical payload bytes, so a tampered file is
refused at load. External resources (embeddings file, lexicon file,
custom preprocessing tables) are recorded as path + sha256 and
re-verified when the model is loaded; --force downgrades mismatches to
warnings.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .ensemble import ScoredPrediction
from .errors import ConfigError, DataError
from .featurize import Featurizer
from .ioutil import canonical_json, sha256_file, sha256_text
from .model import LinearModel, OneVsAllModel, predict_multilabel, sigmoid
from .preprocess import (
    TextCleaner,
    load_contractions,
    load_emoji_table,
    load_stopwords,
)
from .vectorize import EmbeddingTable, load_embeddings

log = logging.getLogger(__name__)

SPEC_VERSION = 1


@dataclass
class TaskModels:
    """The trained artifacts of one run: coarse head plus optional
    fine-grain one-vs-all head."""

    featurizer: Featurizer
    coarse: LinearModel
    fine: OneVsAllModel | None
    task: str
    positive_label: str
    negative_label: str

    def predict_post(self, post) -> ScoredPrediction:
        x = self.featurizer.transform(post)
        score = self.coarse.decision(x)
        label = self.positive_label if score > 0 else self.negative_label
        prob_pos = sigmoid(score)
        confidence = max(prob_pos, 1.0 - prob_pos)
        scores = {self.positive_label: score}
        fine: frozenset[str] = frozenset()
        if self.fine is not None:
            hostile = label == "hostile"
            fine = predict_multilabel(self.fine, x, hostile)
            scores.update({f"fine:{c}": s for c, s in self.fine.scores(x).items()})
        return ScoredPrediction(coarse=label, fine=fine, confidence=confidence, scores=scores)


def bundle_payload(
    models: TaskModels,
    language: str,
    resources: dict[str, dict],
    train_config: dict,
) -> dict:
    return {
        "task": models.task,
        "language": language,
        "positive_label": models.positive_label,
        "negative_label": models.negative_label,
        "layout": models.featurizer.layout.to_dict(),
        "featurizer": models.featurizer.to_dict(),
        "coarse_model": models.coarse.to_dict(),
        "fine_model": models.fine.to_dict() if models.fine is not None else None,
        "train_config": train_config,
        "resources": resources,
    }


def save_bundle(path: str | Path, payload: dict) -> None:
    body = canonical_json(payload)
    document = {
        "spec_version": SPEC_VERSION,
        "checksum": sha256_text(body),
        "payload": payload,
    }
    Path(path).write_text(
        json.dumps(document, sort_keys=True, ensure_ascii=False, separators=(",", ":")),
        encoding="utf-8",
    )


def _verify_resources(resources: dict[str, dict], force: bool) -> None:
    for name, entry in resources.items():
        path = entry.get("path")
        recorded = entry.get("sha256")
        if not path or not recorded:
            continue
        if not Path(path).is_file():
            message = f"resource {name!r} missing at recorded path {path}"
            if force:
                log.warning("%s (--force: continuing)", message)
                continue
            raise ConfigError(message + " (use --force to override)")
        actual = sha256_file(path)
        if actual != recorded:
            message = f"resource {name!r} at {path} changed since training"
            if force:
                log.warning("%s (--force: continuing)", message)
            else:
                raise ConfigError(message + " (use --force to override)")


def load_bundle(
    path: str | Path,
    force: bool = False,
    restrict_tokens: set[str] | Callable[[TextCleaner], set[str]] | None = None,
) -> TaskModels:
    """Load a model file, verifying the payload checksum and every
    recorded external resource checksum.

    restrict_tokens limits which embedding vectors are materialized; a
    callable receives the rebuilt cleaner so callers can derive the
    token set from the texts they are about to score.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"model file not found: {path}")
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a valid model file: {exc}")
    if document.get("spec_version") != SPEC_VERSION:
        raise ConfigError(
            f"{path}: unsupported model version {document.get('spec_version')!r}"
        )
    payload = document.get("payload", {})
    actual = sha256_text(canonical_json(payload))
    if actual != document.get("checksum"):
        message = f"{path}: model checksum mismatch (file was modified)"
        if force:
            log.warning("%s (--force: continuing)", message)
        else:
            raise ConfigError(message + " (use --force to override)")

    resources = payload.get("resources", {})
    _verify_resources(resources, force)

    def resource_path(name):
        entry = resources.get(name) or {}
        return entry.get("path")

    language = payload["language"]
    contractions_path = resource_path("contractions")
    stopwords_path = resource_path("stopwords")
    emoji_path = resource_path("emoji_ranges")
    cleaner = TextCleaner(
        language,
        contractions=load_contractions(contractions_path) if contractions_path else None,
        stopwords=load_stopwords(language, stopwords_path) if stopwords_path else None,
        emoji_table=load_emoji_table(emoji_path) if emoji_path else None,
    )
    embeddings: EmbeddingTable | None = None
    if payload["featurizer"]["flags"].get("embed"):
        entry = resources.get("embeddings")
        if not entry or not entry.get("path"):
            raise ConfigError(f"{path}: embed feature set but no embeddings path recorded")
        restrict = restrict_tokens(cleaner) if callable(restrict_tokens) else restrict_tokens
        embeddings = load_embeddings(entry["path"], restrict=restrict)
        expected_dim = payload["featurizer"].get("embedding_dim")
        if expected_dim is not None and embeddings.dim != expected_dim:
            raise ConfigError(
                f"{path}: embeddings dim {embeddings.dim} != trained dim {expected_dim}"
            )

    featurizer = Featurizer.from_dict(payload["featurizer"], cleaner, embeddings)
    coarse = LinearModel.from_dict(payload["coarse_model"])
    fine = (
        OneVsAllModel.from_dict(payload["fine_model"])
        if payload.get("fine_model") is not None
        else None
    )
    if coarse.layout.total_length != featurizer.layout.total_length:
        raise ConfigError(
            f"{path}: layout mismatch: model expects {coarse.layout.total_length} "
            f"features, featurizer produces {featurizer.layout.total_length}"
        )
    return TaskModels(
        featurizer=featurizer,
        coarse=coarse,
        fine=fine,
        task=payload["task"],
        positive_label=payload["positive_label"],
        negative_label=payload["negative_label"],
    )
