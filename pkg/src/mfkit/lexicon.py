"""Dictionary-based moral-foundation scoring.

Two lexicon kinds:

* ``count``: each term names exactly one foundation (optionally with a
  virtue/vice polarity); a document is labeled with the most frequent
  foundation among its matches, ties kept as a multi-label set, and
  ``none`` when nothing matches.
* ``probability``: each term carries a probability for all five
  foundations; per-foundation probabilities are summed over matched tokens
  and the argmax set wins.

Terms ending in ``*`` match any token with that prefix (original-MFD style
stem entries). An exact entry beats a wildcard; among wildcards the longest
prefix wins.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import FOUNDATIONS, FoundationLabel, Prediction, parse_label
from .errors import FormatError


class Polarity(str, Enum):
    VIRTUE = "virtue"
    VICE = "vice"


class LexiconKind(str, Enum):
    COUNT = "count"
    PROBABILITY = "probability"


@dataclass(frozen=True)
class CountEntry:
    foundation: FoundationLabel
    polarity: Polarity | None = None


@dataclass(frozen=True)
class Lexicon:
    name: str
    kind: LexiconKind
    exact: Mapping[str, object]
    prefixes: Mapping[str, object]
    _prefix_order: tuple[str, ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_prefix_order",
            tuple(sorted(self.prefixes, key=len, reverse=True)),
        )

    def __len__(self) -> int:
        return len(self.exact) + len(self.prefixes)

    def foundations_present(self) -> set[FoundationLabel]:
        if self.kind is LexiconKind.COUNT:
            return {e.foundation for e in self.exact.values()} | {
                e.foundation for e in self.prefixes.values()
            }
        return set(FOUNDATIONS)

    def match(self, token: str) -> tuple[str, object] | None:
        """Resolve a token to its (term, entry) pair, or None."""
        entry = self.exact.get(token)
        if entry is not None:
            return token, entry
        for prefix in self._prefix_order:
            if token.startswith(prefix):
                return prefix + "*", self.prefixes[prefix]
        return None

    def terms(self, foundation: FoundationLabel | None = None,
              polarity: Polarity | None = None) -> list[str]:
        """Count-kind terms (wildcards suffixed with ``*``), optionally filtered."""
        if self.kind is not LexiconKind.COUNT:
            raise ValueError("terms() applies to count lexicons")
        out = []
        for term, entry in list(self.exact.items()) + [
            (p + "*", e) for p, e in self.prefixes.items()
        ]:
            if foundation is not None and entry.foundation is not foundation:
                continue
            if polarity is not None and entry.polarity is not polarity:
                continue
            out.append(term)
        return sorted(out)

    def with_polarity(self, polarity_of: Mapping[str, Polarity]) -> "Lexicon":
        """Copy of a count lexicon with polarities reassigned from a term map;
        terms absent from the map lose their polarity."""
        if self.kind is not LexiconKind.COUNT:
            raise ValueError("with_polarity() applies to count lexicons")
        exact = {
            t: CountEntry(e.foundation, polarity_of.get(t))
            for t, e in self.exact.items()
        }
        prefixes = {
            p: CountEntry(e.foundation, polarity_of.get(p))
            for p, e in self.prefixes.items()
        }
        return Lexicon(self.name, self.kind, exact, prefixes)


@dataclass(frozen=True)
class LexiconScore:
    """Raw per-foundation totals plus the multiset of matched terms."""

    per_foundation: Mapping[FoundationLabel, float]
    matched_terms: Mapping[tuple[str, FoundationLabel], int]

    @property
    def total_matches(self) -> int:
        return sum(self.matched_terms.values())


def _split_term(raw: str) -> tuple[str, bool]:
    term = raw.strip()
    if term.endswith("*"):
        return term[:-1], True
    return term, False


def load_lexicon(path: str | Path, kind: str | LexiconKind, name: str | None = None) -> Lexicon:
    """Load a lexicon file in the dialect for its kind.

    count: TSV ``term<TAB>foundation[<TAB>polarity]``;
    probability: CSV with header ``term,care,fairness,loyalty,authority,sanctity``.
    """
    path = Path(path)
    kind = LexiconKind(kind)
    name = name or path.stem
    exact: dict[str, object] = {}
    prefixes: dict[str, object] = {}

    def place(term: str, wildcard: bool, entry: object, lineno: int):
        bucket = prefixes if wildcard else exact
        if term in bucket:
            shown = term + "*" if wildcard else term
            raise FormatError(f"{path}: duplicate term {shown!r}", line=lineno)
        if not term:
            raise FormatError(f"{path}: empty term", line=lineno)
        bucket[term] = entry

    if kind is LexiconKind.COUNT:
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) not in (2, 3):
                    raise FormatError(
                        f"{path}: expected term<TAB>foundation[<TAB>polarity]",
                        line=lineno,
                    )
                term, wildcard = _split_term(parts[0])
                try:
                    foundation = parse_label(parts[1])
                except FormatError as exc:
                    raise FormatError(f"{path}: {exc}", line=lineno) from None
                if foundation not in FOUNDATIONS:
                    raise FormatError(
                        f"{path}: {parts[1]!r} is not a moral foundation", line=lineno
                    )
                polarity = None
                if len(parts) == 3 and parts[2].strip():
                    try:
                        polarity = Polarity(parts[2].strip().lower())
                    except ValueError:
                        raise FormatError(
                            f"{path}: unknown polarity {parts[2]!r}", line=lineno
                        ) from None
                place(term, wildcard, CountEntry(foundation, polarity), lineno)
        return Lexicon(name, kind, exact, prefixes)

    header = ["term"] + [f.value for f in FOUNDATIONS]
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows or [h.strip().lower() for h in rows[0]] != header:
        raise FormatError(f"{path}: probability header must be {','.join(header)}")
    for lineno, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != 6:
            raise FormatError(f"{path}: expected 6 columns", line=lineno)
        term, wildcard = _split_term(row[0])
        probs: dict[FoundationLabel, float] = {}
        for foundation, cell in zip(FOUNDATIONS, row[1:]):
            try:
                value = float(cell)
            except ValueError:
                raise FormatError(
                    f"{path}: {cell!r} is not a number", line=lineno
                ) from None
            if not 0.0 <= value <= 1.0:
                raise FormatError(
                    f"{path}: probability {value} for {term!r}/{foundation.value} "
                    "outside [0, 1]",
                    line=lineno,
                )
            probs[foundation] = value
        place(term, wildcard, probs, lineno)
    return Lexicon(name, kind, exact, prefixes)


def save_lexicon(lex: Lexicon, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    items = [(t, False, e) for t, e in lex.exact.items()] + [
        (p, True, e) for p, e in lex.prefixes.items()
    ]
    items.sort(key=lambda it: (it[0], it[1]))
    if lex.kind is LexiconKind.COUNT:
        with path.open("w", encoding="utf-8") as fh:
            for term, wildcard, entry in items:
                shown = term + "*" if wildcard else term
                cols = [shown, entry.foundation.value]
                if entry.polarity is not None:
                    cols.append(entry.polarity.value)
                fh.write("\t".join(cols) + "\n")
    else:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["term"] + [f.value for f in FOUNDATIONS])
            for term, wildcard, probs in items:
                shown = term + "*" if wildcard else term
                writer.writerow([shown] + [repr(float(probs[f])) for f in FOUNDATIONS])
    return path


def load_sentiment_scores(path: str | Path) -> dict[str, float]:
    """TSV ``term<TAB>score`` with score in [0, 1] (an external sentiment
    model's per-word output, consumed as data)."""
    path = Path(path)
    scores: dict[str, float] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}: expected term<TAB>score", line=lineno)
            try:
                value = float(parts[1])
            except ValueError:
                raise FormatError(f"{path}: {parts[1]!r} is not a number", line=lineno) from None
            if not 0.0 <= value <= 1.0:
                raise FormatError(f"{path}: score {value} outside [0, 1]", line=lineno)
            term, _ = _split_term(parts[0])
            if term in scores:
                raise FormatError(f"{path}: duplicate term {parts[0]!r}", line=lineno)
            scores[term] = value
    return scores


def polarity_from_sentiment(scores: Mapping[str, float], threshold: float = 0.5) -> dict[str, Polarity]:
    """Virtue iff sentiment score >= threshold, vice otherwise."""
    return {
        term: Polarity.VIRTUE if value >= threshold else Polarity.VICE
        for term, value in scores.items()
    }


# ---------------------------------------------------------------------------
# Scoring


def lexicon_hits(tokens: Iterable[str], lex: Lexicon) -> LexiconScore:
    """Accumulate per-foundation totals over every matched token."""
    per_foundation: dict[FoundationLabel, float] = {f: 0.0 for f in FOUNDATIONS}
    matched: Counter = Counter()
    for token in tokens:
        hit = lex.match(token)
        if hit is None:
            continue
        term, entry = hit
        if lex.kind is LexiconKind.COUNT:
            per_foundation[entry.foundation] += 1.0
            matched[(term, entry.foundation)] += 1
        else:
            for foundation, prob in entry.items():
                per_foundation[foundation] += prob
            # attribute the match to the entry's dominant foundation so the
            # matched-term multiset counts one hit per matched token
            top = max(FOUNDATIONS, key=lambda f: entry[f])
            matched[(term, top)] += 1
    return LexiconScore(per_foundation, dict(matched))


def _argmax_labels(per_foundation: Mapping[FoundationLabel, float]) -> frozenset[FoundationLabel]:
    best = max(per_foundation.values())
    return frozenset(f for f, v in per_foundation.items() if v == best)


def score_count(
    tokens: Iterable[str],
    lex: Lexicon,
    doc_id: str = "",
    approach: str | None = None,
) -> Prediction:
    """Label by most frequent foundation among matches; ties become a
    multi-label set; no matches yields ``none``."""
    if lex.kind is not LexiconKind.COUNT:
        raise ValueError(f"score_count requires a count lexicon, got {lex.kind.value}")
    score = lexicon_hits(tokens, lex)
    labels = (
        _argmax_labels(score.per_foundation)
        if score.total_matches
        else frozenset({FoundationLabel.NONE})
    )
    return Prediction(
        doc_id=doc_id,
        labels=labels,
        scores=dict(score.per_foundation),
        approach=approach or f"lexicon_count:{lex.name}",
    )


def score_prob(
    tokens: Iterable[str],
    lex: Lexicon,
    doc_id: str = "",
    approach: str | None = None,
) -> Prediction:
    """Sum each matched token's foundation probabilities and label with the
    argmax set; no matches yields ``none``."""
    if lex.kind is not LexiconKind.PROBABILITY:
        raise ValueError(f"score_prob requires a probability lexicon, got {lex.kind.value}")
    score = lexicon_hits(tokens, lex)
    labels = (
        _argmax_labels(score.per_foundation)
        if score.total_matches
        else frozenset({FoundationLabel.NONE})
    )
    return Prediction(
        doc_id=doc_id,
        labels=labels,
        scores=dict(score.per_foundation),
        approach=approach or f"lexicon_prob:{lex.name}",
    )
