"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from .config import RunConfig


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorBody(BaseModel):
    kind: Literal["config", "data", "internal"]
    message: str


class PreprocessTextsRequest(BaseModel):
    language: Literal["hindi", "english"]
    texts: list[str]


class CleanedDoc(BaseModel):
    tokens: list[str]
    mentions: int
    urls: int
    hashtags: int
    emojis: int


class PreprocessTextsResponse(BaseModel):
    docs: list[CleanedDoc]


class PreprocessFileRequest(BaseModel):
    config: RunConfig
    split: str | None = None
    input_path: str | None = None
    output_name: str = "cleaned.tsv"


class PreprocessFileResponse(BaseModel):
    output_path: str
    rows: int


class TrainRequest(BaseModel):
    config: RunConfig


class ClassRow(BaseModel):
    name: str
    p: float
    r: float
    f1: float
    support: int


class ReportBody(BaseModel):
    task: str
    split: str
    weighted_f1: float
    classes: list[ClassRow]
    confusion: list[list[int]]
    config_hash: str


class TrainResponse(BaseModel):
    model_path: str
    output_dir: str
    reports: dict[str, ReportBody]
    grid_log: list[dict]
    entity_vocab_size: int | None = None
    pseudo_added: int | None = None


class EvaluateRequest(BaseModel):
    config: RunConfig
    model_path: str
    split: Literal["train", "validation", "test"] = "test"
    force: bool = False


class EvaluateResponse(BaseModel):
    output_dir: str
    reports: dict[str, ReportBody]


class PredictPost(BaseModel):
    id: str
    text: str


class PredictInlineRequest(BaseModel):
    model_path: str
    posts: list[PredictPost]
    force: bool = False


class PredictionRow(BaseModel):
    id: str
    coarse: str
    fine: list[str]
    score: float
    fine_scores: dict[str, float] = Field(default_factory=dict)


class PredictInlineResponse(BaseModel):
    predictions: list[PredictionRow]


class PredictFileRequest(BaseModel):
    config: RunConfig
    model_path: str
    input_path: str
    output_name: str = "predictions.tsv"
    force: bool = False


class PredictFileResponse(BaseModel):
    output_path: str
    rows: int
    warnings: int


class AblateRequest(BaseModel):
    config: RunConfig


class AblateResponse(BaseModel):
    output_dir: str
    tables: dict[str, dict]


class EnsembleRequest(BaseModel):
    config: RunConfig
    force: bool = False


class EnsembleResponse(BaseModel):
    rule: str
    output_dir: str
    reports: dict[str, ReportBody]


class AuditRequest(BaseModel):
    config: RunConfig
    model_paths: list[str]
    split: Literal["train", "validation", "test"] = "test"
    force: bool = False


class AuditItem(BaseModel):
    id: str
    gold: str
    predicted: str
    mean_confidence: float


class AuditResponse(BaseModel):
    output_path: str
    items: list[AuditItem]
