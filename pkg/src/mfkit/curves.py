"""Fine-tuning job specs and learning-curve assembly.

Fine-tuning runs across a file boundary: this module emits one JSON job
spec per curve point (train batches accumulate across jobs) for an external
trainer, and ingests the trainer's exchange-format prediction files back
into a learning curve with threshold lookups. The toolkit itself never
trains models, which keeps the measurement side dependency-light and the
metric definitions in one place.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Dataset, make_batches, read_predictions, save_dataset
from .errors import FormatError
from .evaluation import EvalReport, LearningCurve, batches_to_threshold, evaluate

logger = logging.getLogger(__name__)

TASK_BINARY = "binary_per_foundation"
TASK_LORA = "multiclass_lora"

#: Encoder fine-tuning defaults: lr 2e-5, 3 epochs, batch 16, weight decay
#: 0.01, warmup 100 steps, truncation at 512 tokens.
BINARY_HYPERPARAMETERS = {
    "learning_rate": 2e-5,
    "epochs": 3,
    "batch_size": 16,
    "weight_decay": 0.01,
    "warmup_steps": 100,
    "max_seq_length": 512,
    "negative_ratio": 1.0,
    "seed": 0,
}

#: Instruct-model LoRA defaults: rank-16 adapters on the attention and MLP
#: projections over a 4-bit quantized base, batch 128, sequences to 1024.
LORA_HYPERPARAMETERS = {
    "learning_rate": 2e-5,
    "epochs": 3,
    "batch_size": 128,
    "weight_decay": 0.01,
    "warmup_steps": 0,
    "max_seq_length": 1024,
    "quantization": "4bit",
    "adapter_rank": 16,
    "adapter_targets": [
        "q_proj", "k_proj", "v_proj", "o_proj", "gate_proj", "up_proj", "down_proj",
    ],
    "seed": 3047,
}

_REQUIRED_KEYS = {
    TASK_BINARY: (
        "learning_rate", "epochs", "batch_size", "weight_decay",
        "warmup_steps", "max_seq_length", "seed",
    ),
    TASK_LORA: (
        "learning_rate", "epochs", "batch_size", "weight_decay",
        "max_seq_length", "quantization", "adapter_rank", "adapter_targets", "seed",
    ),
}


@dataclass(frozen=True)
class FineTuneJobSpec:
    """One fine-tuning job: ordered train files, hyperparameters, and the
    benchmark file to predict on afterwards."""

    job_id: str
    base_model: str
    task: str
    train_files: tuple[str, ...]
    batches_used: int
    predict_on: str
    hyperparameters: Mapping[str, object]
    prompt_file: str | None = None

    def __post_init__(self):
        if self.task not in (TASK_BINARY, TASK_LORA):
            raise ValueError(f"unknown task {self.task!r}")
        missing = [
            key for key in _REQUIRED_KEYS[self.task] if key not in self.hyperparameters
        ]
        if missing:
            raise ValueError(
                f"job {self.job_id!r}: incomplete hyperparameters for {self.task}: "
                f"missing {missing}"
            )
        if self.batches_used < 0 or self.batches_used > len(self.train_files):
            raise ValueError(
                f"job {self.job_id!r}: batches_used {self.batches_used} inconsistent "
                f"with {len(self.train_files)} train files"
            )

    def to_dict(self) -> dict:
        out = {
            "job_id": self.job_id,
            "base_model": self.base_model,
            "task": self.task,
            "train_files": list(self.train_files),
            "batches_used": self.batches_used,
            "predict_on": self.predict_on,
            "hyperparameters": dict(self.hyperparameters),
        }
        if self.prompt_file is not None:
            out["prompt_file"] = self.prompt_file
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "FineTuneJobSpec":
        try:
            return cls(
                job_id=str(data["job_id"]),
                base_model=str(data["base_model"]),
                task=str(data["task"]),
                train_files=tuple(data["train_files"]),
                batches_used=int(data["batches_used"]),
                predict_on=str(data["predict_on"]),
                hyperparameters=dict(data["hyperparameters"]),
                prompt_file=data.get("prompt_file"),
            )
        except KeyError as exc:
            raise FormatError(f"job spec lacks field {exc.args[0]!r}") from None

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=2)
            + "\n",
            encoding="utf-8",
        )
        return path

    @classmethod
    def load(cls, path: str | Path) -> "FineTuneJobSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class BatchPolicy:
    """How curve batches are cut. The binary task uses plain 100-document
    batches; the LoRA task uses 50-document batches with 10 documents per
    foundation."""

    batch_size: int
    per_class_quota: int | None = None
    max_batches: int | None = None

    def check_task(self, task: str) -> None:
        if task == TASK_BINARY and (self.batch_size != 100 or self.per_class_quota):
            raise ValueError(
                "binary_per_foundation expects batch_size=100 without a class quota"
            )
        if task == TASK_LORA and (self.batch_size != 50 or self.per_class_quota != 10):
            raise ValueError(
                "multiclass_lora expects batch_size=50 with per_class_quota=10"
            )


def default_policy(task: str, max_batches: int | None = None) -> BatchPolicy:
    if task == TASK_BINARY:
        return BatchPolicy(batch_size=100, max_batches=max_batches)
    if task == TASK_LORA:
        return BatchPolicy(batch_size=50, per_class_quota=10, max_batches=max_batches)
    raise ValueError(f"unknown task {task!r}")


def emit_curve_jobs(
    train: Dataset,
    bench_path: str | Path,
    task: str,
    policy: BatchPolicy,
    seeds: Sequence[int],
    out_dir: str | Path,
    base_model: str,
    base_train_files: Sequence[str | Path] = (),
    prompt_file: str | Path | None = None,
    hyperparameters: Mapping[str, object] | None = None,
) -> tuple[list[FineTuneJobSpec], list[str]]:
    """Write batch data files and one job spec per (seed, batches_used).

    Job k trains on the base files plus the first k batches and predicts on
    the benchmark. When the data supports fewer batches than requested, the
    shorter curve is emitted with a warning instead of failing.
    """
    policy.check_task(task)
    out_dir = Path(out_dir)
    defaults = dict(
        BINARY_HYPERPARAMETERS if task == TASK_BINARY else LORA_HYPERPARAMETERS
    )
    if hyperparameters:
        defaults.update(hyperparameters)

    jobs: list[FineTuneJobSpec] = []
    warnings: list[str] = []
    for seed in seeds:
        batches = make_batches(
            train, policy.batch_size, per_class_quota=policy.per_class_quota, seed=seed
        )
        if policy.max_batches is not None:
            if len(batches) < policy.max_batches:
                warnings.append(
                    f"seed {seed}: data supports only {len(batches)} of "
                    f"{policy.max_batches} requested batches"
                )
            batches = batches[: policy.max_batches]
        if not batches:
            warnings.append(f"seed {seed}: no full batch available")
        batch_paths: list[str] = []
        for i, batch in enumerate(batches, start=1):
            path = out_dir / "data" / f"s{seed}-batch{i:03d}.jsonl"
            save_dataset(batch, path)
            batch_paths.append(str(path))
        for k in range(1, len(batches) + 1):
            hp = dict(defaults)
            hp["seed"] = seed
            spec = FineTuneJobSpec(
                job_id=f"{task}-s{seed}-b{k:03d}",
                base_model=base_model,
                task=task,
                train_files=tuple(str(p) for p in base_train_files) + tuple(batch_paths[:k]),
                batches_used=k,
                predict_on=str(bench_path),
                hyperparameters=hp,
                prompt_file=str(prompt_file) if prompt_file else None,
            )
            spec.save(out_dir / "jobs" / f"{spec.job_id}.json")
            jobs.append(spec)
    for message in warnings:
        logger.warning("%s", message)
    return jobs, warnings


def ingest_curve(
    job_files: Sequence[str | Path],
    predictions_dir: str | Path,
    bench: Dataset,
    thresholds: Sequence[float] = (0.70, 0.80),
    scope: str = "covered_only",
) -> tuple[LearningCurve, dict[float, int | None]]:
    """Assemble a learning curve from job specs plus their prediction files
    (``<predictions_dir>/<job_id>.jsonl``). Missing prediction files leave a
    flagged gap; they are never interpolated."""
    predictions_dir = Path(predictions_dir)
    specs: dict[str, FineTuneJobSpec] = {}
    for path in job_files:
        spec = FineTuneJobSpec.load(path)
        if spec.job_id in specs:
            raise ValueError(f"duplicate job id {spec.job_id!r}")
        specs[spec.job_id] = spec

    by_batches: dict[int, tuple[str, EvalReport]] = {}
    missing: list[str] = []
    for job_id, spec in specs.items():
        pred_path = predictions_dir / f"{job_id}.jsonl"
        if not pred_path.exists():
            missing.append(job_id)
            logger.warning("curve gap: no predictions for job %s", job_id)
            continue
        if spec.batches_used in by_batches:
            raise ValueError(
                f"jobs {by_batches[spec.batches_used][0]!r} and {job_id!r} both "
                f"cover batches_used={spec.batches_used}; ingest one seed at a time"
            )
        report = evaluate(bench, read_predictions(pred_path), scope=scope)
        by_batches[spec.batches_used] = (job_id, report)

    points = tuple(
        (batches_used, report)
        for batches_used, (_, report) in sorted(by_batches.items())
    )
    curve = LearningCurve(points=points, missing=tuple(missing))
    table = {t: batches_to_threshold(curve, t) if points else None for t in thresholds}
    return curve, table
