"""Pydantic request/response models for the measurement service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ClassStatsModel(BaseModel):
    precision: float
    recall: float
    f1: float
    support: int


class ConfusionModel(BaseModel):
    tp: float
    fp: float
    fn: float


class ReportModel(BaseModel):
    scope: str
    accuracy: float
    coverage: float
    f1_weighted: float
    f1_macro: float
    n_documents: int
    n_covered: int
    per_class: dict[str, ClassStatsModel]
    confusion: dict[str, ConfusionModel]
    notes: list[str] = Field(default_factory=list)


class ScoreRequest(BaseModel):
    """A run config in the same structure as the TOML file, sent inline."""

    config: dict
    base_dir: Optional[str] = None


class ScoreResponse(BaseModel):
    out_dir: str
    predictions_path: str
    manifest_path: str
    report_paths: dict[str, str]
    reports: dict[str, ReportModel]


class EvaluateRequest(BaseModel):
    dataset: str
    predictions: str
    scopes: list[str] = Field(default_factory=lambda: ["covered_only", "all"])


class EvaluateResponse(BaseModel):
    reports: dict[str, ReportModel]


class BinaryEvaluateRequest(BaseModel):
    dataset: str
    predictions_by_foundation: dict[str, str]


class BinaryRowModel(BaseModel):
    foundation: str
    f1_negative: float
    f1_positive: float
    accuracy: float
    f1_macro: float
    f1_weighted: float


class BinaryEvaluateResponse(BaseModel):
    rows: list[BinaryRowModel]
    averages: dict[str, float]
    fused_report: ReportModel


class BaselineRequest(BaseModel):
    counts: Optional[dict[str, int]] = None
    dataset: Optional[str] = None


class BaselineResponse(BaseModel):
    report: ReportModel


class CurveEmitRequest(BaseModel):
    train_dataset: str
    bench_dataset: str
    task: str
    out_dir: str
    base_model: str
    seeds: list[int] = Field(default_factory=lambda: [0])
    max_batches: Optional[int] = None
    base_train_files: list[str] = Field(default_factory=list)
    prompt_file: Optional[str] = None
    hyperparameters: Optional[dict] = None


class CurveEmitResponse(BaseModel):
    job_files: list[str]
    warnings: list[str]


class CurveIngestRequest(BaseModel):
    jobs_dir: str
    predictions_dir: str
    dataset: str
    thresholds: list[float] = Field(default_factory=lambda: [0.70, 0.80])
    scope: str = "covered_only"


class CurvePointModel(BaseModel):
    batches_used: int
    report: ReportModel


class CurveIngestResponse(BaseModel):
    points: list[CurvePointModel]
    thresholds: dict[str, Optional[int]]
    missing_jobs: list[str]


class SampleMislabeledRequest(BaseModel):
    dataset: str
    predictions: str
    n: int
    foundations: Optional[list[str]] = None
    seed: int = 0


class MislabeledItemModel(BaseModel):
    doc_id: str
    text: str
    gold: str
    predicted: list[str]
    rationale: Optional[str] = None
    approach: str = ""


class SampleMislabeledResponse(BaseModel):
    items: list[MislabeledItemModel]


class TranslateRequest(BaseModel):
    dataset: str
    source: str
    target: str
    out_path: str
    endpoint: dict
    cache_path: Optional[str] = None


class TranslateResponse(BaseModel):
    out_path: str
    translated: int
    failed: int
