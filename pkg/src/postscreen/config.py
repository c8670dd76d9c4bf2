"""Run configuration: a documented JSON schema with CLI overrides.

The file is plain JSON; every field can be overridden on the command
line with dotted ``--set section.key=value`` assignments (flags win).
Relative dataset/resource paths resolve against $POSTSCREEN_DATA_DIR.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError
from .ioutil import canonical_json, sha256_text


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsSection(_Section):
    train: str | None = None
    validation: str | None = None
    test: str | None = None
    unlabeled: str | None = None
    lexicon: str | None = None
    embeddings: str | None = None
    stopwords: str | None = None
    contractions: str | None = None
    emoji_ranges: str | None = None


class FeaturesSection(_Section):
    tfidf: bool = True
    embed: bool = False
    bow: bool = False
    m1: bool = False
    m2: bool = False
    m3: bool = False
    tfidf_min_df: int = Field(default=1, ge=1)
    entity_top_k: int = Field(default=50, ge=0)
    entity_ratio_min: float = Field(default=0.25, ge=0.0)
    substring_match: bool = False


class TrainingSection(_Section):
    loss: Literal["hinge", "logistic"] = "hinge"
    l2: float = Field(default=1e-4, ge=0.0)
    learning_rate: float = Field(default=0.1, gt=0.0)
    epochs: int = Field(default=20, ge=0)
    class_weighting: Literal["none", "inverse_frequency"] = "none"
    threshold: float = Field(default=0.5, ge=0.0, le=1.0)


class FineTrainingSection(TrainingSection):
    class_weighting: Literal["none", "inverse_frequency"] = "inverse_frequency"


class PseudoSection(_Section):
    enabled: bool = False
    source: str = "test"
    confidence_min: float = Field(default=0.9, ge=0.0)
    rounds: int = Field(default=1, ge=1)


class GridSection(_Section):
    learning_rate: list[float] = Field(default_factory=list)
    l2: list[float] = Field(default_factory=list)
    epochs: list[int] = Field(default_factory=list)

    @property
    def enabled(self) -> bool:
        return bool(self.learning_rate or self.l2 or self.epochs)


class EnsembleSection(_Section):
    members: list[str] = Field(default_factory=list)
    rule: Literal["majority", "logical_or", "logical_and"] = "majority"
    tie_break: int = Field(default=0, ge=0)
    stack: Literal["none", "linear"] = "none"
    split: Literal["train", "validation", "test"] = "test"


class RunConfig(_Section):
    task: Literal["hostility", "fake_news"]
    language: Literal["hindi", "english"]
    seed: int = 0
    output_dir: str = "runs/out"
    delimiter: str | None = None
    positive_label: str | None = None
    paths: PathsSection = Field(default_factory=PathsSection)
    features: FeaturesSection = Field(default_factory=FeaturesSection)
    training: TrainingSection = Field(default_factory=TrainingSection)
    fine_training: FineTrainingSection | None = None
    pseudo: PseudoSection = Field(default_factory=PseudoSection)
    grid: GridSection = Field(default_factory=GridSection)
    ensemble: EnsembleSection = Field(default_factory=EnsembleSection)

    def resolved_fine_training(self) -> FineTrainingSection:
        if self.fine_training is not None:
            return self.fine_training
        return FineTrainingSection(**{**self.training.model_dump(),
                                      "class_weighting": "inverse_frequency"})

    def config_hash(self) -> str:
        return sha256_text(canonical_json(self.model_dump(mode="json")))


def _set_dotted(tree: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = tree
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override {dotted!r}: {key!r} is not a section")
    node[keys[-1]] = value


def parse_override(assignment: str) -> tuple[str, object]:
    """Parse one ``key=value``; the value is JSON when it parses, else a
    raw string."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        field = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{field}: {err['msg']}")
    return "invalid config: " + "; ".join(parts)


def load_config(
    path: str | Path | None = None,
    overrides: dict | None = None,
    base: dict | None = None,
) -> RunConfig:
    """Build a RunConfig from an optional JSON file plus overrides."""
    tree: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            tree = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}")
        if not isinstance(tree, dict):
            raise ConfigError(f"{path}: config root must be a JSON object")
    if base:
        for key, value in base.items():
            _set_dotted(tree, key, value)
    for key, value in (overrides or {}).items():
        _set_dotted(tree, key, value)
    return validate_config(tree)


def validate_config(tree: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(tree)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc))
