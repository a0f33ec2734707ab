"""Trained-model records: what a job produced and how."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping


@dataclass(frozen=True)
class TrainedModelRecord:
    job_id: str
    base_model: str
    task: str
    checkpoint_path: str
    log_path: str
    hyperparameters: Mapping[str, object]
    seed: int
    details: Mapping[str, object] = field(default_factory=dict)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "job_id": self.job_id,
            "base_model": self.base_model,
            "task": self.task,
            "checkpoint_path": self.checkpoint_path,
            "log_path": self.log_path,
            "hyperparameters": dict(self.hyperparameters),
            "seed": self.seed,
            "details": dict(self.details),
        }
        path.write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        return path

    @classmethod
    def load(cls, path: str | Path) -> "TrainedModelRecord":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            job_id=data["job_id"],
            base_model=data["base_model"],
            task=data["task"],
            checkpoint_path=data["checkpoint_path"],
            log_path=data["log_path"],
            hyperparameters=data["hyperparameters"],
            seed=int(data["seed"]),
            details=data.get("details", {}),
        )
