"""Job-spec consumer side of the exchange contract."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

TASK_BINARY = "binary_per_foundation"
TASK_LORA = "multiclass_lora"

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


class JobSpecError(ValueError):
    pass


@dataclass(frozen=True)
class JobSpec:
    job_id: str
    base_model: str
    task: str
    train_files: tuple[str, ...]
    batches_used: int
    predict_on: str
    hyperparameters: Mapping[str, object]
    prompt_file: str | None = None

    def validate(self) -> None:
        if self.task not in _REQUIRED_KEYS:
            raise JobSpecError(f"job {self.job_id!r}: unknown task {self.task!r}")
        missing = [k for k in _REQUIRED_KEYS[self.task] if k not in self.hyperparameters]
        if missing:
            raise JobSpecError(
                f"job {self.job_id!r}: hyperparameters incomplete for {self.task}: "
                f"missing {missing}"
            )
        if not self.train_files:
            raise JobSpecError(f"job {self.job_id!r}: no train files")
        if self.task == TASK_LORA and not self.prompt_file:
            raise JobSpecError(
                f"job {self.job_id!r}: multiclass_lora requires prompt_file for "
                "chat rendering"
            )

    @classmethod
    def load(cls, path: str | Path) -> "JobSpec":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        try:
            spec = cls(
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
            raise JobSpecError(f"{path}: job spec lacks field {exc.args[0]!r}") from None
        spec.validate()
        return spec
