"""Training-data handling: exchange files, balancing, chat rendering."""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import GOLD_LABELS


@dataclass(frozen=True)
class TrainDoc:
    id: str
    text: str
    label: str
    language: str = "und"


def load_train_file(path: str | Path) -> list[TrainDoc]:
    path = Path(path)
    rows: Iterable[dict]
    if path.suffix.lower() == ".csv":
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    else:
        rows = []
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rows.append(json.loads(line))
    docs = []
    for rec in rows:
        label = str(rec["label"]).strip().lower()
        if label not in GOLD_LABELS:
            raise ValueError(f"{path}: unknown label {label!r} for record {rec.get('id')!r}")
        docs.append(
            TrainDoc(
                id=str(rec["id"]),
                text=str(rec["text"]),
                label=label,
                language=str(rec.get("language") or "und"),
            )
        )
    return docs


def load_ordered(paths: Sequence[str | Path]) -> list[TrainDoc]:
    """Concatenate train files preserving file order, then line order."""
    docs: list[TrainDoc] = []
    for path in paths:
        docs.extend(load_train_file(path))
    return docs


def binary_reduce(
    docs: Sequence[TrainDoc],
    foundation: str,
    negative_ratio: float = 1.0,
    seed: int = 0,
) -> list[tuple[TrainDoc, int]]:
    """Reduce to (doc, 0/1) pairs for one foundation, under-sampling the
    negative class to ``negative_ratio`` times the positives."""
    positives = [d for d in docs if d.label == foundation]
    negatives = [d for d in docs if d.label != foundation]
    if not positives:
        raise ValueError(f"class absent from train set: {foundation!r}")
    rng = random.Random(seed)
    pool = negatives[:]
    rng.shuffle(pool)
    keep = min(len(pool), int(round(negative_ratio * len(positives))))
    out = [(d, 1) for d in positives] + [(d, 0) for d in pool[:keep]]
    rng.shuffle(out)
    return out


def undersample_min_class(docs: Sequence[TrainDoc], seed: int = 0) -> list[TrainDoc]:
    """Downsample every present class to the smallest class count, without
    replacement, class pools shuffled in canonical label order; the same
    sampling specification the measurement toolkit uses."""
    by_class: dict[str, list[TrainDoc]] = {}
    for doc in docs:
        by_class.setdefault(doc.label, []).append(doc)
    floor_count = min(len(v) for v in by_class.values())
    rng = random.Random(seed)
    keep: set[str] = set()
    for label in GOLD_LABELS:
        pool = by_class.get(label)
        if not pool:
            continue
        pool = pool[:]
        rng.shuffle(pool)
        keep.update(d.id for d in pool[:floor_count])
    return [d for d in docs if d.id in keep]


# ---------------------------------------------------------------------------
# Chat rendering for the instruct task


def reply_json(label: str) -> str:
    return json.dumps({"rationale": "", "labels": label}, ensure_ascii=False)


def render_chat(system: str, user: str, assistant: str | None = None) -> str:
    """Plain-text llama-3 style chat rendering; the prompt ends at the
    assistant header so generation (or the loss mask) starts there."""
    prompt = (
        "<|begin_of_text|><|start_header_id|>system<|end_header_id|>\n\n"
        f"{system}<|eot_id|><|start_header_id|>user<|end_header_id|>\n\n"
        f"{user}<|eot_id|><|start_header_id|>assistant<|end_header_id|>\n\n"
    )
    if assistant is None:
        return prompt
    return prompt + assistant + "<|eot_id|>"


@dataclass(frozen=True)
class RenderedExample:
    doc_id: str
    prompt: str
    full: str


def prepare_chat_examples(
    docs: Sequence[TrainDoc],
    system: str,
    token_count: Callable[[str], int],
    max_seq_length: int,
) -> tuple[list[RenderedExample], int]:
    """Render every record; records whose full sequence exceeds the length
    budget are dropped and counted, preserving input order otherwise."""
    examples: list[RenderedExample] = []
    dropped = 0
    for doc in docs:
        prompt = render_chat(system, doc.text)
        full = render_chat(system, doc.text, reply_json(doc.label))
        if token_count(full) > max_seq_length:
            dropped += 1
            continue
        examples.append(RenderedExample(doc_id=doc.id, prompt=prompt, full=full))
    return examples, dropped


def write_predictions(records: Sequence[dict], path: str | Path) -> Path:
    """Exchange-format prediction JSONL."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
    return path


def prediction_record(
    doc_id: str,
    labels: Sequence[str],
    approach: str,
    scores: dict[str, float] | None = None,
    rationale: str | None = None,
) -> dict:
    rec = {"doc_id": doc_id, "labels": sorted(labels), "approach": approach}
    if scores is not None:
        rec["scores"] = {k: float(v) for k, v in sorted(scores.items())}
    if rationale is not None:
        rec["rationale"] = rationale
    return rec
