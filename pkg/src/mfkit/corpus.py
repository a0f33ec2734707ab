"""Labeled datasets, the canonical label set, and the prediction-exchange format.

Every measurement approach in the toolkit (and any external classifier)
interoperates through the two file contracts defined here:

* dataset files: CSV (header ``id,text,label[,language,source]``) or JSONL
  (one object per line, same field names, plus an optional ``tokens`` list
  for pre-segmented text);
* prediction files: JSONL with ``doc_id``, ``labels`` (list), optional
  ``scores`` map, optional ``rationale``, and an ``approach`` tag.

Datasets are immutable after load; the split/batch/undersample operations
are pure functions of (input, seed) and safe to call concurrently.
"""

from __future__ import annotations

import csv
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import FormatError


class FoundationLabel(str, Enum):
    CARE = "care"
    FAIRNESS = "fairness"
    LOYALTY = "loyalty"
    AUTHORITY = "authority"
    SANCTITY = "sanctity"
    NONMORAL = "nonmoral"
    NONE = "none"
    UNKNOWN = "unknown"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


#: The five moral foundations, in conventional theory order.
FOUNDATIONS: tuple[FoundationLabel, ...] = (
    FoundationLabel.CARE,
    FoundationLabel.FAIRNESS,
    FoundationLabel.LOYALTY,
    FoundationLabel.AUTHORITY,
    FoundationLabel.SANCTITY,
)

#: Labels admissible as gold annotations (nonmoral occurs in training data only).
GOLD_LABELS: tuple[FoundationLabel, ...] = FOUNDATIONS + (FoundationLabel.NONMORAL,)

#: Labels admissible in predictions (none/unknown occur in predictions only).
PREDICTION_LABELS: tuple[FoundationLabel, ...] = FOUNDATIONS + (
    FoundationLabel.NONE,
    FoundationLabel.UNKNOWN,
)

_CANONICAL_ORDER = {label: i for i, label in enumerate(FoundationLabel)}


def parse_label(raw: str, *, record_id: str | None = None) -> FoundationLabel:
    """Map a label string to the closed label set, or fail naming the record."""
    try:
        return FoundationLabel(raw.strip().lower())
    except ValueError:
        where = f" for record {record_id!r}" if record_id is not None else ""
        raise FormatError(f"unknown label {raw!r}{where}") from None


def sort_labels(labels: Iterable[FoundationLabel]) -> list[FoundationLabel]:
    return sorted(labels, key=_CANONICAL_ORDER.__getitem__)


@dataclass(frozen=True)
class Document:
    """One labeled text. ``gold`` is a single class; benchmark documents carry
    one of the five foundations, training data may also carry ``nonmoral``."""

    id: str
    text: str
    gold: FoundationLabel
    language: str = "und"
    source: str = ""
    tokens: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be non-empty")
        if not self.text.strip():
            raise ValueError(f"document {self.id!r}: text empty after trim")
        if self.gold not in GOLD_LABELS:
            raise ValueError(
                f"document {self.id!r}: {self.gold.value!r} is not a valid gold label"
            )


@dataclass(frozen=True)
class Dataset:
    """An ordered, immutable collection of documents with a verified histogram."""

    name: str
    documents: tuple[Document, ...]
    class_counts: Mapping[FoundationLabel, int] = field(init=False)

    def __post_init__(self):
        seen: set[str] = set()
        for doc in self.documents:
            if doc.id in seen:
                raise FormatError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)
        object.__setattr__(self, "documents", tuple(self.documents))
        object.__setattr__(self, "class_counts", self.recount())

    def recount(self) -> dict[FoundationLabel, int]:
        """Recompute the gold-label histogram from the documents."""
        return dict(Counter(doc.gold for doc in self.documents))

    def __len__(self) -> int:
        return len(self.documents)

    def ids(self) -> set[str]:
        return {doc.id for doc in self.documents}

    def by_id(self) -> dict[str, Document]:
        return {doc.id: doc for doc in self.documents}

    def replace(self, documents: Sequence[Document], name: str | None = None) -> "Dataset":
        return Dataset(name=name or self.name, documents=tuple(documents))


@dataclass(frozen=True)
class Prediction:
    """A label set for one document, as exchanged between approaches.

    ``none`` means "scored, no moral content found"; ``unknown`` means the
    approach could not produce a usable answer. Neither may co-occur with a
    foundation label.
    """

    doc_id: str
    labels: frozenset[FoundationLabel]
    scores: Mapping[FoundationLabel, float] | None = None
    rationale: str | None = None
    approach: str = ""

    def __post_init__(self):
        labels = frozenset(self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise ValueError(f"prediction for {self.doc_id!r}: empty label set")
        bad = labels - set(PREDICTION_LABELS)
        if bad:
            raise ValueError(
                f"prediction for {self.doc_id!r}: invalid labels "
                f"{sorted(l.value for l in bad)}"
            )
        sentinels = labels - set(FOUNDATIONS)
        if sentinels and labels - sentinels:
            raise ValueError(
                f"prediction for {self.doc_id!r}: none/unknown cannot co-occur "
                "with foundation labels"
            )
        if len(sentinels) > 1:
            raise ValueError(
                f"prediction for {self.doc_id!r}: none and unknown are exclusive"
            )

    @property
    def foundation_labels(self) -> frozenset[FoundationLabel]:
        return self.labels & frozenset(FOUNDATIONS)

    @property
    def is_covered(self) -> bool:
        """True when at least one moral-foundation label was assigned."""
        return bool(self.foundation_labels)


# ---------------------------------------------------------------------------
# File I/O


def _dataset_from_records(name: str, records: Iterable[dict], path: Path) -> Dataset:
    docs = []
    for rec in records:
        for key in ("id", "text", "label"):
            if rec.get(key) in (None, ""):
                raise FormatError(
                    f"{path}: record {rec.get('id') or '<missing id>'!r} lacks field {key!r}"
                )
        doc_id = str(rec["id"])
        tokens = rec.get("tokens")
        try:
            docs.append(
                Document(
                    id=doc_id,
                    text=str(rec["text"]),
                    gold=parse_label(str(rec["label"]), record_id=doc_id),
                    language=str(rec.get("language") or "und"),
                    source=str(rec.get("source") or name),
                    tokens=tuple(tokens) if tokens else None,
                )
            )
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    return Dataset(name=name, documents=tuple(docs))


def load_dataset(path: str | Path, format: str | None = None, name: str | None = None) -> Dataset:
    """Load and validate a dataset from CSV or JSONL (inferred from suffix)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    fmt = format or ("csv" if path.suffix.lower() == ".csv" else "jsonl")
    name = name or path.stem
    if fmt == "csv":
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"id", "text", "label"} <= set(reader.fieldnames):
                raise FormatError(f"{path}: CSV header must include id,text,label")
            return _dataset_from_records(name, reader, path)
    if fmt == "jsonl":
        records = []
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{path}: invalid JSON", line=lineno) from exc
        return _dataset_from_records(name, records, path)
    raise ValueError(f"unknown dataset format {fmt!r}")


def save_dataset(dataset: Dataset, path: str | Path, format: str | None = None) -> Path:
    """Serialize a dataset; round-trips through :func:`load_dataset`."""
    path = Path(path)
    fmt = format or ("csv" if path.suffix.lower() == ".csv" else "jsonl")
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "text", "label", "language", "source"])
            for doc in dataset.documents:
                writer.writerow([doc.id, doc.text, doc.gold.value, doc.language, doc.source])
    elif fmt == "jsonl":
        with path.open("w", encoding="utf-8") as fh:
            for doc in dataset.documents:
                rec = {
                    "id": doc.id,
                    "text": doc.text,
                    "label": doc.gold.value,
                    "language": doc.language,
                    "source": doc.source,
                }
                if doc.tokens is not None:
                    rec["tokens"] = list(doc.tokens)
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
    else:
        raise ValueError(f"unknown dataset format {fmt!r}")
    return path


def prediction_to_record(pred: Prediction) -> dict:
    rec: dict = {
        "doc_id": pred.doc_id,
        "labels": [l.value for l in sort_labels(pred.labels)],
        "approach": pred.approach,
    }
    if pred.scores is not None:
        rec["scores"] = {l.value: float(v) for l, v in sorted(
            pred.scores.items(), key=lambda kv: _CANONICAL_ORDER[kv[0]]
        )}
    if pred.rationale is not None:
        rec["rationale"] = pred.rationale
    return rec


def write_predictions(preds: Iterable[Prediction], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for pred in preds:
            fh.write(json.dumps(prediction_to_record(pred), ensure_ascii=False, sort_keys=True) + "\n")
    return path


def read_predictions(path: str | Path) -> list[Prediction]:
    """Read an exchange-format prediction file, validating every record."""
    path = Path(path)
    preds = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: invalid JSON", line=lineno) from exc
            if "doc_id" not in rec or "labels" not in rec:
                raise FormatError(f"{path}: record lacks doc_id/labels", line=lineno)
            raw_labels = rec["labels"]
            if isinstance(raw_labels, str):
                raw_labels = [raw_labels]
            labels = frozenset(parse_label(l, record_id=str(rec["doc_id"])) for l in raw_labels)
            scores = rec.get("scores")
            if scores is not None:
                scores = {parse_label(k): float(v) for k, v in scores.items()}
            try:
                preds.append(
                    Prediction(
                        doc_id=str(rec["doc_id"]),
                        labels=labels,
                        scores=scores,
                        rationale=rec.get("rationale"),
                        approach=str(rec.get("approach", "")),
                    )
                )
            except ValueError as exc:
                raise FormatError(f"{path}: {exc}", line=lineno) from exc
    return preds


# ---------------------------------------------------------------------------
# Sampling operations


def _exact_floor(fraction: float, n: int) -> int:
    # Fraction avoids double-rounding artifacts of floor(fraction * n).
    return int(Fraction(*float(fraction).as_integer_ratio()) * n)


def stratified_split(
    dataset: Dataset, bench_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Split into (train, bench) taking floor(fraction * per-class count) of
    every gold class into the benchmark side; deterministic per seed."""
    if not 0.0 <= bench_fraction <= 1.0:
        raise ValueError(f"bench_fraction must lie in [0, 1], got {bench_fraction}")
    rng = random.Random(seed)
    by_class: dict[FoundationLabel, list[int]] = {}
    for idx, doc in enumerate(dataset.documents):
        by_class.setdefault(doc.gold, []).append(idx)

    bench_indices: set[int] = set()
    for label in GOLD_LABELS:
        indices = by_class.get(label)
        if not indices:
            continue
        take = _exact_floor(bench_fraction, len(indices))
        shuffled = indices[:]
        rng.shuffle(shuffled)
        bench_indices.update(shuffled[:take])

    bench_docs = [d for i, d in enumerate(dataset.documents) if i in bench_indices]
    train_docs = [d for i, d in enumerate(dataset.documents) if i not in bench_indices]
    return (
        dataset.replace(train_docs, name=f"{dataset.name}/train"),
        dataset.replace(bench_docs, name=f"{dataset.name}/bench"),
    )


def make_batches(
    dataset: Dataset,
    batch_size: int,
    per_class_quota: int | None = None,
    seed: int = 0,
) -> list[Dataset]:
    """Partition into disjoint full batches; partial batches are dropped.

    With ``per_class_quota`` set, every batch holds exactly that many
    documents of each of the five foundations (batch_size must equal
    5 * quota); batch emission stops as soon as any foundation runs dry.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    rng = random.Random(seed)

    if per_class_quota is None:
        order = list(dataset.documents)
        rng.shuffle(order)
        n_batches = len(order) // batch_size
        return [
            dataset.replace(order[i * batch_size : (i + 1) * batch_size],
                            name=f"{dataset.name}/batch{i + 1:03d}")
            for i in range(n_batches)
        ]

    if per_class_quota < 1:
        raise ValueError("per_class_quota must be positive")
    if batch_size != 5 * per_class_quota:
        raise ValueError(
            f"batch_size must equal 5 * per_class_quota "
            f"({batch_size} != 5 * {per_class_quota})"
        )
    queues: dict[FoundationLabel, list[Document]] = {f: [] for f in FOUNDATIONS}
    for doc in dataset.documents:
        if doc.gold in queues:
            queues[doc.gold].append(doc)
    for docs in queues.values():
        rng.shuffle(docs)

    batches: list[Dataset] = []
    cursor = 0
    while all(len(queues[f]) - cursor * per_class_quota >= per_class_quota for f in FOUNDATIONS):
        chunk: list[Document] = []
        for f in FOUNDATIONS:
            start = cursor * per_class_quota
            chunk.extend(queues[f][start : start + per_class_quota])
        batches.append(
            dataset.replace(chunk, name=f"{dataset.name}/batch{cursor + 1:03d}")
        )
        cursor += 1
    return batches


def undersample(
    dataset: Dataset,
    target: str | Mapping[FoundationLabel, int] = "min_class",
    seed: int = 0,
) -> Dataset:
    """Downsample classes without replacement to balance the dataset.

    ``target`` is either ``"min_class"`` (every present class reduced to the
    smallest class count) or an explicit per-class count map.
    """
    counts = dataset.class_counts
    if target == "min_class":
        floor_count = min(counts.values())
        wanted = {label: floor_count for label in counts}
    elif isinstance(target, Mapping):
        wanted = dict(target)
        for label, n in wanted.items():
            have = counts.get(label, 0)
            if n > have:
                raise ValueError(
                    f"undersample target {n} exceeds {have} available for class "
                    f"{label.value!r}"
                )
    else:
        raise ValueError(f"unknown undersample target {target!r}")

    rng = random.Random(seed)
    keep: set[str] = set()
    by_class: dict[FoundationLabel, list[Document]] = {}
    for doc in dataset.documents:
        by_class.setdefault(doc.gold, []).append(doc)
    for label in GOLD_LABELS:
        docs = by_class.get(label)
        if docs is None or label not in wanted:
            continue
        pool = docs[:]
        rng.shuffle(pool)
        keep.update(d.id for d in pool[: wanted[label]])

    sampled = [d for d in dataset.documents if d.id in keep]
    return dataset.replace(sampled, name=f"{dataset.name}/undersampled")
