"""Five per-foundation binary classifiers from one job spec."""

from __future__ import annotations

import logging
import random
from pathlib import Path

import torch
from torch import nn

from . import FOUNDATIONS
from .data import (
    TrainDoc,
    binary_reduce,
    load_ordered,
    load_train_file,
    prediction_record,
    write_predictions,
)
from .jobspec import TASK_BINARY, JobSpec
from .models import (
    HASH_BOW,
    HashBowClassifier,
    HashTokenizer,
    batch_bags,
    linear_warmup,
    load_hf_classifier,
)
from .records import TrainedModelRecord

logger = logging.getLogger(__name__)


def _train_hash_bow(
    pairs: list[tuple[TrainDoc, int]],
    hp: dict,
    seed: int,
    log_lines: list[str],
    foundation: str,
) -> dict:
    tokenizer = HashTokenizer()
    encoded = [tokenizer.encode(d.text, int(hp["max_seq_length"])) for d, _ in pairs]
    labels = [y for _, y in pairs]
    torch.manual_seed(seed)
    model = HashBowClassifier(buckets=tokenizer.buckets)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=float(hp["learning_rate"]),
        weight_decay=float(hp["weight_decay"]),
    )
    scheduler = linear_warmup(optimizer, int(hp["warmup_steps"]))
    loss_fn = nn.CrossEntropyLoss()
    batch_size = int(hp["batch_size"])
    order_rng = random.Random(seed)
    step = 0
    model.train()
    for epoch in range(int(hp["epochs"])):
        order = list(range(len(pairs)))
        order_rng.shuffle(order)
        for start in range(0, len(order), batch_size):
            chosen = order[start : start + batch_size]
            flat, offsets = batch_bags([encoded[i] for i in chosen])
            target = torch.tensor([labels[i] for i in chosen], dtype=torch.long)
            logits = model(flat, offsets)
            loss = loss_fn(logits, target)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            scheduler.step()
            log_lines.append(f"{foundation}\t{step}\t{loss.item():.6f}")
            step += 1
    return {
        "kind": HASH_BOW,
        "state_dict": model.state_dict(),
        "buckets": tokenizer.buckets,
    }


def _train_hf(
    pairs: list[tuple[TrainDoc, int]],
    hp: dict,
    seed: int,
    log_lines: list[str],
    foundation: str,
    base_model: str,
    device: str,
) -> dict:  # pragma: no cover - needs a reachable checkpoint
    tokenizer, model = load_hf_classifier(base_model, int(hp["max_seq_length"]))
    model.to(device)
    torch.manual_seed(seed)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=float(hp["learning_rate"]),
        weight_decay=float(hp["weight_decay"]),
    )
    scheduler = linear_warmup(optimizer, int(hp["warmup_steps"]))
    batch_size = int(hp["batch_size"])
    order_rng = random.Random(seed)
    step = 0
    model.train()
    for epoch in range(int(hp["epochs"])):
        order = list(range(len(pairs)))
        order_rng.shuffle(order)
        for start in range(0, len(order), batch_size):
            chosen = order[start : start + batch_size]
            enc = tokenizer(
                [pairs[i][0].text for i in chosen],
                truncation=True, padding=True,
                max_length=int(hp["max_seq_length"]), return_tensors="pt",
            ).to(device)
            target = torch.tensor([pairs[i][1] for i in chosen], device=device)
            loss = model(**enc, labels=target).loss
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            scheduler.step()
            log_lines.append(f"{foundation}\t{step}\t{loss.item():.6f}")
            step += 1
    return {"kind": "hf", "model": model, "tokenizer": tokenizer}


def train_binary(spec: JobSpec, out_dir: str | Path, device: str = "cpu") -> TrainedModelRecord:
    """Fine-tune one binary classifier per foundation and write a record.

    The negative class is under-sampled to ``negative_ratio`` (default 1.0)
    times the positive count; a foundation with no positive training
    document fails by name.
    """
    if spec.task != TASK_BINARY:
        raise ValueError(f"train_binary got task {spec.task!r}")
    spec.validate()
    hp = dict(spec.hyperparameters)
    seed = int(hp["seed"])
    docs = load_ordered(spec.train_files)

    out_dir = Path(out_dir)
    ckpt_dir = out_dir / "checkpoints" / spec.job_id
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    log_lines: list[str] = []

    for index, foundation in enumerate(FOUNDATIONS):
        pairs = binary_reduce(
            docs, foundation,
            negative_ratio=float(hp.get("negative_ratio", 1.0)),
            seed=seed + index,
        )
        logger.info(
            "job %s: %s with %d examples", spec.job_id, foundation, len(pairs)
        )
        if spec.base_model == HASH_BOW:
            payload = _train_hash_bow(pairs, hp, seed + index, log_lines, foundation)
            torch.save(payload, ckpt_dir / f"{foundation}.pt")
        else:
            payload = _train_hf(
                pairs, hp, seed + index, log_lines, foundation, spec.base_model, device
            )
            payload["model"].save_pretrained(ckpt_dir / foundation)
            payload["tokenizer"].save_pretrained(ckpt_dir / foundation)

    log_path = out_dir / "logs" / f"{spec.job_id}.log"
    log_path.parent.mkdir(parents=True, exist_ok=True)
    log_path.write_text("\n".join(log_lines) + "\n", encoding="utf-8")

    record = TrainedModelRecord(
        job_id=spec.job_id,
        base_model=spec.base_model,
        task=spec.task,
        checkpoint_path=str(ckpt_dir),
        log_path=str(log_path),
        hyperparameters=dict(spec.hyperparameters),
        seed=seed,
        details={
            "torch_version": torch.__version__,
            "determinism": "best-effort (seeded; CPU kernels)",
        },
    )
    record.save(out_dir / "records" / f"{spec.job_id}.json")
    return record


def _fire_hash_bow(ckpt: dict, texts: list[str], max_seq_length: int) -> list[bool]:
    tokenizer = HashTokenizer(buckets=int(ckpt["buckets"]))
    model = HashBowClassifier(buckets=tokenizer.buckets)
    model.load_state_dict(ckpt["state_dict"])
    model.eval()
    fired = []
    with torch.no_grad():
        for start in range(0, len(texts), 256):
            chunk = texts[start : start + 256]
            flat, offsets = batch_bags(
                [tokenizer.encode(t, max_seq_length) for t in chunk]
            )
            logits = model(flat, offsets)
            fired.extend(bool(x) for x in logits.argmax(dim=1).tolist())
    return fired


def predict_binary(
    record: TrainedModelRecord,
    bench_path: str | Path,
    out_dir: str | Path,
    device: str = "cpu",
) -> Path:
    """Emit per-foundation 0/1 streams plus the fused label set; returns the
    fused predictions path (``<out>/predictions/<job_id>.jsonl``)."""
    bench = load_train_file(bench_path)
    texts = [d.text for d in bench]
    max_seq_length = int(record.hyperparameters["max_seq_length"])
    out_dir = Path(out_dir)
    binary_dir = out_dir / "predictions" / f"{record.job_id}-binary"

    fired_by_foundation: dict[str, list[bool]] = {}
    for foundation in FOUNDATIONS:
        ckpt_path = Path(record.checkpoint_path) / f"{foundation}.pt"
        if ckpt_path.exists():
            ckpt = torch.load(ckpt_path, weights_only=False)
            fired = _fire_hash_bow(ckpt, texts, max_seq_length)
        else:  # pragma: no cover - HF checkpoint directory
            fired = _fire_hf(
                Path(record.checkpoint_path) / foundation, texts, max_seq_length, device
            )
        fired_by_foundation[foundation] = fired
        stream = [
            prediction_record(
                doc.id,
                [foundation] if fire else ["none"],
                approach=f"trainer:{record.task}:{foundation}",
                scores={foundation: 1.0 if fire else 0.0},
            )
            for doc, fire in zip(bench, fired)
        ]
        write_predictions(stream, binary_dir / f"{foundation}.jsonl")

    fused = []
    for i, doc in enumerate(bench):
        labels = [f for f in FOUNDATIONS if fired_by_foundation[f][i]]
        fused.append(
            prediction_record(
                doc.id,
                labels or ["none"],
                approach=f"trainer:{record.task}",
                scores={f: float(fired_by_foundation[f][i]) for f in FOUNDATIONS},
            )
        )
    return write_predictions(fused, out_dir / "predictions" / f"{record.job_id}.jsonl")


def _fire_hf(ckpt_dir: Path, texts: list[str], max_seq_length: int, device: str) -> list[bool]:  # pragma: no cover
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(ckpt_dir)
    model = AutoModelForSequenceClassification.from_pretrained(ckpt_dir).to(device)
    model.eval()
    fired = []
    with torch.no_grad():
        for start in range(0, len(texts), 64):
            enc = tokenizer(
                texts[start : start + 64], truncation=True, padding=True,
                max_length=max_seq_length, return_tensors="pt",
            ).to(device)
            fired.extend(bool(x) for x in model(**enc).logits.argmax(dim=1).tolist())
    return fired
