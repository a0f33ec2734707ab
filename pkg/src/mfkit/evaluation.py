"""The benchmark evaluation protocol.

Benchmark documents carry a single gold foundation while predictions may be
multi-label, so correctness is lenient: a prediction is correct when its
label set contains the gold label. Every predicted foundation still counts
as an assertion for precision purposes, so multi-label guessing is not
free.

Coverage is the fraction of documents that received at least one moral
foundation label (``none`` and ``unknown`` both count as uncovered).
Because several approaches abstain heavily, all headline metrics can be
computed under two scopes: over covered documents only (the default) or
over all documents. Reports carry both when emitted from a run.

The closed-form random baseline draws a label from the gold class prior;
its per-class precision, recall, and F1 all equal the class share p_c, its
accuracy and weighted F1 equal sum(p_c^2), and its macro F1 equals
mean(p_c).
"""

from __future__ import annotations

import csv
import io
import logging
import random
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import (
    FOUNDATIONS,
    Dataset,
    Document,
    FoundationLabel,
    Prediction,
)

logger = logging.getLogger(__name__)

#: Column order used by report tables (foundations alphabetically).
REPORT_ORDER: tuple[FoundationLabel, ...] = (
    FoundationLabel.AUTHORITY,
    FoundationLabel.CARE,
    FoundationLabel.FAIRNESS,
    FoundationLabel.LOYALTY,
    FoundationLabel.SANCTITY,
)

REPORT_COLUMNS = ("Auth", "Care", "Fair", "Loya", "Sanc", "Acc", "Cov", "Fw", "Fm")


@dataclass(frozen=True)
class ClassStats:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class Confusion:
    """Per-class counts; floats so expected (fractional) counts fit too."""

    tp: float
    fp: float
    fn: float


@dataclass(frozen=True)
class EvalReport:
    per_class: Mapping[FoundationLabel, ClassStats]
    accuracy: float
    coverage: float
    f1_weighted: float
    f1_macro: float
    confusion: Mapping[FoundationLabel, Confusion]
    n_documents: int
    n_covered: int
    scope: str
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "scope": self.scope,
            "accuracy": self.accuracy,
            "coverage": self.coverage,
            "f1_weighted": self.f1_weighted,
            "f1_macro": self.f1_macro,
            "n_documents": self.n_documents,
            "n_covered": self.n_covered,
            "per_class": {
                f.value: {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                }
                for f, s in sorted(self.per_class.items(), key=lambda kv: kv[0].value)
            },
            "confusion": {
                f.value: {"tp": c.tp, "fp": c.fp, "fn": c.fn}
                for f, c in sorted(self.confusion.items(), key=lambda kv: kv[0].value)
            },
            "notes": list(self.notes),
        }


def lenient_match(gold: FoundationLabel, pred: Prediction) -> bool:
    """Correct iff the gold foundation appears among the predicted labels."""
    if gold not in FOUNDATIONS:
        raise ValueError(f"gold label must be a moral foundation, got {gold.value!r}")
    return gold in pred.labels


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _pair(bench: Dataset, preds: Sequence[Prediction]) -> list[tuple[Document, Prediction]]:
    by_id: dict[str, Prediction] = {}
    for pred in preds:
        if pred.doc_id in by_id:
            raise ValueError(f"duplicate prediction for document {pred.doc_id!r}")
        by_id[pred.doc_id] = pred
    unknown_ids = set(by_id) - bench.ids()
    if unknown_ids:
        raise ValueError(
            f"predictions reference unknown documents: {sorted(unknown_ids)[:5]}"
        )
    missing = bench.ids() - set(by_id)
    if missing:
        raise ValueError(f"missing predictions for documents: {sorted(missing)[:5]}")
    return [(doc, by_id[doc.id]) for doc in bench.documents]


def evaluate(
    bench: Dataset,
    preds: Sequence[Prediction],
    scope: str = "covered_only",
) -> EvalReport:
    """Score predictions against a single-label benchmark.

    ``scope="covered_only"`` conditions accuracy and the F1 metrics on the
    documents that received at least one foundation label; ``scope="all"``
    computes them over every document (abstentions count as errors).
    """
    if scope not in ("covered_only", "all"):
        raise ValueError(f"unknown scope {scope!r}")
    pairs = _pair(bench, preds)
    n_documents = len(pairs)
    covered_pairs = [(d, p) for d, p in pairs if p.is_covered]
    n_covered = len(covered_pairs)
    coverage = n_covered / n_documents if n_documents else 0.0
    scoped = covered_pairs if scope == "covered_only" else pairs

    notes: tuple[str, ...] = ()
    if not scoped:
        notes = ("no covered documents",)
        zero_stats = {f: ClassStats(0.0, 0.0, 0.0, 0) for f in FOUNDATIONS}
        zero_conf = {f: Confusion(0, 0, 0) for f in FOUNDATIONS}
        return EvalReport(
            per_class=zero_stats,
            accuracy=0.0,
            coverage=coverage,
            f1_weighted=0.0,
            f1_macro=0.0,
            confusion=zero_conf,
            n_documents=n_documents,
            n_covered=n_covered,
            scope=scope,
            notes=notes,
        )

    confusion: dict[FoundationLabel, Confusion] = {}
    per_class: dict[FoundationLabel, ClassStats] = {}
    f1_weighted = 0.0
    f1_macro = 0.0
    total = len(scoped)
    for foundation in FOUNDATIONS:
        tp = fp = fn = support = 0
        for doc, pred in scoped:
            predicted = foundation in pred.labels
            if doc.gold is foundation:
                support += 1
                if predicted:
                    tp += 1
                else:
                    fn += 1
            elif predicted:
                fp += 1
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = _f1(precision, recall)
        confusion[foundation] = Confusion(tp, fp, fn)
        per_class[foundation] = ClassStats(precision, recall, f1, support)
        f1_weighted += (support / total) * f1
        f1_macro += f1 / len(FOUNDATIONS)

    correct = sum(1 for doc, pred in scoped if doc.gold in pred.labels)
    return EvalReport(
        per_class=per_class,
        accuracy=correct / total,
        coverage=coverage,
        f1_weighted=f1_weighted,
        f1_macro=f1_macro,
        confusion=confusion,
        n_documents=n_documents,
        n_covered=n_covered,
        scope=scope,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Random-guessing baseline


@dataclass(frozen=True)
class ClassPrior:
    """Gold class distribution over the five foundations."""

    p: Mapping[FoundationLabel, float]
    counts: Mapping[FoundationLabel, int] | None = None

    def __post_init__(self):
        total = sum(self.p.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"class prior must sum to 1, got {total}")
        if any(v < 0 for v in self.p.values()):
            raise ValueError("class prior must be nonnegative")
        extra = set(self.p) - set(FOUNDATIONS)
        if extra:
            raise ValueError(
                f"prior restricted to the five foundations, got {sorted(l.value for l in extra)}"
            )

    @classmethod
    def from_counts(cls, counts: Mapping[FoundationLabel, int]) -> "ClassPrior":
        extra = set(counts) - set(FOUNDATIONS)
        if extra:
            raise ValueError(
                f"baseline counts restricted to the five foundations, got "
                f"{sorted(l.value for l in extra)}"
            )
        total = sum(counts.values())
        if total <= 0:
            raise ValueError("counts must be positive")
        full = {f: counts.get(f, 0) for f in FOUNDATIONS}
        return cls(p={f: c / total for f, c in full.items()}, counts=full)

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "ClassPrior":
        return cls.from_counts(dataset.class_counts)


def baseline_expected(prior: ClassPrior) -> EvalReport:
    """Closed-form expected report for label-proportional random guessing.

    Guessing class c with probability p_c gives precision = recall = F1 =
    p_c per class, accuracy = weighted F1 = sum(p_c^2), macro F1 =
    mean(p_c), and full coverage. Confusion cells hold expected counts.
    """
    n = sum(prior.counts.values()) if prior.counts else 0
    per_class: dict[FoundationLabel, ClassStats] = {}
    confusion: dict[FoundationLabel, Confusion] = {}
    accuracy = 0.0
    f1_macro = 0.0
    for foundation in FOUNDATIONS:
        p = prior.p.get(foundation, 0.0)
        support = prior.counts.get(foundation, 0) if prior.counts else 0
        per_class[foundation] = ClassStats(p, p, p, support)
        confusion[foundation] = Confusion(n * p * p, n * p * (1 - p), n * p * (1 - p))
        accuracy += p * p
        f1_macro += p / len(FOUNDATIONS)
    return EvalReport(
        per_class=per_class,
        accuracy=accuracy,
        coverage=1.0,
        f1_weighted=accuracy,
        f1_macro=f1_macro,
        confusion=confusion,
        n_documents=n,
        n_covered=n,
        scope="expected",
    )


# ---------------------------------------------------------------------------
# Learning curves


@dataclass(frozen=True)
class LearningCurve:
    """Evaluation reports indexed by the number of training batches used."""

    points: tuple[tuple[int, EvalReport], ...]
    foundation: FoundationLabel | None = None
    missing: tuple[str, ...] = ()

    def __post_init__(self):
        used = [n for n, _ in self.points]
        if any(b <= a for a, b in zip(used, used[1:])):
            raise ValueError("batches_used must be strictly increasing")


def batches_to_threshold(curve: LearningCurve, threshold: float) -> int | None:
    """Smallest batches_used whose weighted F1 reaches the threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    if not curve.points:
        raise ValueError("empty learning curve")
    for batches_used, report in curve.points:
        if report.f1_weighted >= threshold:
            return batches_used
    return None


# ---------------------------------------------------------------------------
# Qualitative sampling


def sample_mislabeled(
    bench: Dataset,
    preds: Sequence[Prediction],
    n: int,
    foundations: Iterable[FoundationLabel] | None = None,
    seed: int = 0,
) -> list[tuple[Document, Prediction]]:
    """Uniform sample (without replacement) of records failing the lenient
    criterion, optionally restricted to a gold-label subset. Returns all
    mislabeled records with a warning when fewer than ``n`` exist."""
    wanted = set(foundations) if foundations is not None else None
    mislabeled = [
        (doc, pred)
        for doc, pred in _pair(bench, preds)
        if not lenient_match(doc.gold, pred)
        and (wanted is None or doc.gold in wanted)
    ]
    if n >= len(mislabeled):
        if n > len(mislabeled):
            logger.warning(
                "requested %d mislabeled records but only %d exist; returning all",
                n,
                len(mislabeled),
            )
        return mislabeled
    rng = random.Random(seed)
    return rng.sample(mislabeled, n)


# ---------------------------------------------------------------------------
# Per-foundation binary evaluation (five 0/1 streams)


@dataclass(frozen=True)
class BinaryClassReport:
    """One foundation's binary classifier scored against gold == foundation."""

    foundation: FoundationLabel
    f1_negative: float
    f1_positive: float
    accuracy: float
    f1_macro: float
    f1_weighted: float


@dataclass(frozen=True)
class BinaryReport:
    per_foundation: tuple[BinaryClassReport, ...]

    def averages(self) -> dict[str, float]:
        n = len(self.per_foundation)
        return {
            "f1_negative": sum(r.f1_negative for r in self.per_foundation) / n,
            "f1_positive": sum(r.f1_positive for r in self.per_foundation) / n,
            "accuracy": sum(r.accuracy for r in self.per_foundation) / n,
            "f1_macro": sum(r.f1_macro for r in self.per_foundation) / n,
            "f1_weighted": sum(r.f1_weighted for r in self.per_foundation) / n,
        }


def evaluate_binary(
    bench: Dataset,
    preds_by_foundation: Mapping[FoundationLabel, Sequence[Prediction]],
) -> BinaryReport:
    """Score five per-foundation binary streams; a stream predicts positive
    for a document when it assigns its foundation label."""
    rows = []
    for foundation in FOUNDATIONS:
        if foundation not in preds_by_foundation:
            raise ValueError(f"missing binary stream for {foundation.value!r}")
        pairs = _pair(bench, preds_by_foundation[foundation])
        tp = fp = fn = tn = 0
        for doc, pred in pairs:
            gold_pos = doc.gold is foundation
            pred_pos = foundation in pred.labels
            if gold_pos and pred_pos:
                tp += 1
            elif gold_pos:
                fn += 1
            elif pred_pos:
                fp += 1
            else:
                tn += 1
        total = tp + fp + fn + tn
        prec_pos = tp / (tp + fp) if tp + fp else 0.0
        rec_pos = tp / (tp + fn) if tp + fn else 0.0
        prec_neg = tn / (tn + fn) if tn + fn else 0.0
        rec_neg = tn / (tn + fp) if tn + fp else 0.0
        f1_pos = _f1(prec_pos, rec_pos)
        f1_neg = _f1(prec_neg, rec_neg)
        support_pos = tp + fn
        support_neg = tn + fp
        rows.append(
            BinaryClassReport(
                foundation=foundation,
                f1_negative=f1_neg,
                f1_positive=f1_pos,
                accuracy=(tp + tn) / total if total else 0.0,
                f1_macro=(f1_pos + f1_neg) / 2.0,
                f1_weighted=(
                    (support_neg * f1_neg + support_pos * f1_pos) / total
                    if total
                    else 0.0
                ),
            )
        )
    return BinaryReport(per_foundation=tuple(rows))


def fuse_binary(
    bench: Dataset,
    preds_by_foundation: Mapping[FoundationLabel, Sequence[Prediction]],
    approach: str = "binary_fused",
) -> list[Prediction]:
    """Combine five binary streams into 5-way predictions: the label set is
    the set of foundations whose stream fired (``none`` when empty)."""
    fired: dict[str, set[FoundationLabel]] = {doc.id: set() for doc in bench.documents}
    for foundation in FOUNDATIONS:
        if foundation not in preds_by_foundation:
            raise ValueError(f"missing binary stream for {foundation.value!r}")
        for doc, pred in _pair(bench, preds_by_foundation[foundation]):
            if foundation in pred.labels:
                fired[doc.id].add(foundation)
    out = []
    for doc in bench.documents:
        labels = frozenset(fired[doc.id]) or frozenset({FoundationLabel.NONE})
        scores = {f: 1.0 if f in fired[doc.id] else 0.0 for f in FOUNDATIONS}
        out.append(
            Prediction(doc_id=doc.id, labels=labels, scores=scores, approach=approach)
        )
    return out


# ---------------------------------------------------------------------------
# Rendering


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _report_row(report: EvalReport) -> list[str]:
    cells = [_fmt(report.per_class[f].f1) for f in REPORT_ORDER]
    cells += [
        _fmt(report.accuracy),
        _fmt(report.coverage),
        _fmt(report.f1_weighted),
        _fmt(report.f1_macro),
    ]
    return cells


def reports_to_csv(reports: Mapping[str, EvalReport]) -> str:
    """One row per named report, standard benchmark column order, 2 decimals."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("Method",) + REPORT_COLUMNS)
    for name, report in reports.items():
        writer.writerow([name] + _report_row(report))
    return buf.getvalue()


def reports_to_markdown(reports: Mapping[str, EvalReport]) -> str:
    lines = [
        "| Method | " + " | ".join(REPORT_COLUMNS) + " |",
        "|" + "---|" * (len(REPORT_COLUMNS) + 1),
    ]
    for name, report in reports.items():
        lines.append("| " + name + " | " + " | ".join(_report_row(report)) + " |")
    return "\n".join(lines) + "\n"


def binary_report_to_markdown(report: BinaryReport) -> str:
    heads = [f.value.capitalize()[:4] for f in REPORT_ORDER]
    by_f = {r.foundation: r for r in report.per_foundation}
    avg = report.averages()
    rows = [
        ("0", "f1_negative"),
        ("1", "f1_positive"),
        ("Acc", "accuracy"),
        ("Fm", "f1_macro"),
        ("Fw", "f1_weighted"),
    ]
    lines = [
        "| | " + " | ".join(heads) + " | Avg |",
        "|" + "---|" * (len(heads) + 2),
    ]
    for label, attr in rows:
        cells = [_fmt(getattr(by_f[f], attr)) for f in REPORT_ORDER]
        lines.append(f"| {label} | " + " | ".join(cells) + f" | {_fmt(avg[attr])} |")
    return "\n".join(lines) + "\n"
