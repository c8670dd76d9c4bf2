"""Combining base models: voting, logical rules, pseudo-labelling,
and the unanimous-disagreement audit."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .corpus import Corpus, LabeledPost
from .errors import ConfigError

log = logging.getLogger(__name__)

ENSEMBLE_RULES = ("majority", "logical_or", "logical_and")


@dataclass(frozen=True)
class EnsembleSpec:
    """Ordered member list plus combination rule.

    tie_break names the index of the priority member whose prediction
    wins when a vote has no strict winner.
    """

    members: tuple[str, ...]
    rule: str = "majority"
    tie_break: int = 0

    def __post_init__(self):
        if not self.members:
            raise ConfigError("ensemble needs at least one member")
        if self.rule not in ENSEMBLE_RULES:
            raise ConfigError(f"unknown ensemble rule {self.rule!r}")
        if not 0 <= self.tie_break < len(self.members):
            raise ConfigError(
                f"tie_break {self.tie_break} out of range for {len(self.members)} members"
            )


def vote(preds: Sequence[str], spec: EnsembleSpec) -> str:
    """Majority vote; ties fall to the tie_break member's prediction."""
    if not preds:
        raise ConfigError("cannot vote over zero predictions")
    if len(preds) != len(spec.members):
        raise ConfigError(f"got {len(preds)} predictions for {len(spec.members)} members")
    counts = Counter(preds)
    best_count = max(counts.values())
    winners = [label for label, c in counts.items() if c == best_count]
    if len(winners) == 1:
        return winners[0]
    return preds[spec.tie_break]


def logical_combine(preds: Sequence[bool], rule: str) -> bool:
    """OR/AND over binary member predictions (True = positive class)."""
    if rule == "logical_or":
        return any(preds)
    if rule == "logical_and":
        return all(preds)
    raise ConfigError(f"unknown logical rule {rule!r}")


def combine_labels(
    preds: Sequence[str], rule: str, positive: str, negative: str
) -> str:
    result = logical_combine([p == positive for p in preds], rule)
    return positive if result else negative


@dataclass(frozen=True)
class ScoredPrediction:
    """One model's full prediction for a post."""

    coarse: str
    fine: frozenset[str]
    confidence: float
    scores: dict[str, float] | None = None


# A predictor maps a post to a scored prediction (e.g. a loaded bundle).
PredictFn = Callable[[LabeledPost], ScoredPrediction]


def pseudo_label(
    predict_fn: PredictFn,
    unlabeled: Sequence[LabeledPost],
    confidence_min: float,
    train: Corpus,
) -> Corpus:
    """Augment the training corpus with confident predictions.

    Posts whose top-class probability reaches confidence_min join the
    corpus with their predicted labels and pseudo=True; the caller runs
    the retraining round.
    """
    added = []
    for post in unlabeled:
        pred = predict_fn(post)
        if pred.confidence >= confidence_min:
            added.append(
                replace(
                    post,
                    coarse=pred.coarse,
                    fine=pred.fine,
                    split="train",
                    pseudo=True,
                )
            )
    log.info("pseudo-labelling kept %d of %d posts (min confidence %.3f)",
             len(added), len(unlabeled), confidence_min)
    return train.merged_with(added)


@dataclass(frozen=True)
class Disagreement:
    post: LabeledPost
    gold: str
    predicted: str
    mean_confidence: float


def disagreement_report(
    predict_fns: Sequence[PredictFn], corpus: Corpus
) -> list[Disagreement]:
    """Posts where every model agrees on a label that contradicts the
    gold annotation, ranked by mean confidence descending."""
    if len(predict_fns) < 2:
        raise ConfigError("disagreement report needs at least 2 models")
    rows = []
    for post in corpus:
        preds = [fn(post) for fn in predict_fns]
        labels = {p.coarse for p in preds}
        if len(labels) == 1 and post.coarse not in labels:
            rows.append(
                Disagreement(
                    post=post,
                    gold=post.coarse,
                    predicted=next(iter(labels)),
                    mean_confidence=sum(p.confidence for p in preds) / len(preds),
                )
            )
    rows.sort(key=lambda r: (-r.mean_confidence, r.post.id))
    return rows
