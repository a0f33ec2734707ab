"""Embedding-based scoring: pseudo-document similarity and micro-frames.

Two approaches share an :class:`EmbeddingStore` parsed from word2vec text
format:

* semantic similarity: each foundation's lexicon terms form an anchor
  pseudo-document (mean vector); a document is labeled with the argmax of
  cosine similarity between its mean vector and the five anchors.

* micro-frames: each foundation gets an axis pointing from the centroid of
  its virtue-pole seed words to the centroid of its vice-pole seed words.
  A document's bias on a frame is the token-count-weighted mean cosine
  between token vectors and the axis, so bias always lies in [-1, 1]. A
  frame is significant when the bias deviates from a bootstrap null model
  (random pseudo-documents of matched length) by at least ``z_crit``
  standard deviations; the significant foundations become the label set.

Out-of-vocabulary (and zero-norm) tokens are skipped rather than
zero-vectored, since zero vectors distort means.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import FOUNDATIONS, FoundationLabel, Prediction
from .errors import FormatError
from .lexicon import Lexicon, LexiconKind, Polarity

DEFAULT_Z_CRIT = 1.96
MIN_BOOTSTRAP = 100
SAMPLE_SIZE_CLAMP = (10, 1000)

_FOUNDATION_INDEX = {f: i for i, f in enumerate(FOUNDATIONS)}


@dataclass
class EmbeddingStore:
    """token -> dense vector map with a single declared dimension."""

    dimension: int
    vectors: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def get(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token)

    def usable(self, token: str) -> bool:
        """In vocabulary with a nonzero vector (cosine-defined)."""
        vec = self.vectors.get(token)
        return vec is not None and bool(np.any(vec))


def load_vectors(path: str | Path) -> EmbeddingStore:
    """Parse word2vec text format: header ``<count> <dim>``, then one token
    plus ``dim`` decimals per line. Malformed rows fail with their line number.
    """
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    with path.open(encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise FormatError(f"{path}: header must be '<count> <dim>'", line=1)
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"{path}: header must be '<count> <dim>'", line=1) from None
        if count < 0 or dim < 1:
            raise FormatError(f"{path}: invalid header values {count} {dim}", line=1)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split(" ")
            fields = [f for f in fields if f != ""]
            if len(fields) != dim + 1:
                raise FormatError(
                    f"{path}: expected token + {dim} values, got {len(fields)} fields",
                    line=lineno,
                )
            token = fields[0]
            if token in vectors:
                raise FormatError(f"{path}: duplicate token {token!r}", line=lineno)
            try:
                vec = np.array([float(x) for x in fields[1:]], dtype=np.float64)
            except ValueError:
                raise FormatError(f"{path}: non-numeric vector component", line=lineno) from None
            if not np.all(np.isfinite(vec)):
                raise FormatError(f"{path}: non-finite vector component", line=lineno)
            vectors[token] = vec
    if len(vectors) != count:
        raise FormatError(f"{path}: header declares {count} rows, found {len(vectors)}")
    return EmbeddingStore(dimension=dim, vectors=vectors)


def save_vectors(store: EmbeddingStore, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{len(store.vectors)} {store.dimension}\n")
        for token, vec in store.vectors.items():
            fh.write(token + " " + " ".join(repr(float(x)) for x in vec) + "\n")
    return path


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def _expand_terms(terms: Iterable[str], store: EmbeddingStore) -> list[str]:
    """Resolve lexicon terms to store tokens; ``stem*`` entries expand to
    every vocabulary token with that prefix."""
    out: list[str] = []
    seen: set[str] = set()
    wildcards = []
    for term in terms:
        if term.endswith("*"):
            wildcards.append(term[:-1])
        elif store.usable(term) and term not in seen:
            seen.add(term)
            out.append(term)
    if wildcards:
        for token in store.vectors:
            if token in seen or not store.usable(token):
                continue
            if any(token.startswith(p) for p in wildcards):
                seen.add(token)
                out.append(token)
    return out


def semantic_similarity_score(
    tokens: Iterable[str],
    lex: Lexicon,
    store: EmbeddingStore,
    doc_id: str = "",
    approach: str | None = None,
) -> Prediction:
    """Label by cosine similarity between the document's mean vector and the
    five per-foundation anchor pseudo-documents."""
    if lex.kind is not LexiconKind.COUNT:
        raise ValueError("semantic similarity scoring requires a count lexicon")
    anchors: dict[FoundationLabel, np.ndarray] = {}
    for foundation in FOUNDATIONS:
        vocab_terms = _expand_terms(lex.terms(foundation), store)
        if not vocab_terms:
            raise ValueError(
                f"foundation {foundation.value!r} has no in-vocabulary lexicon terms"
            )
        anchors[foundation] = np.mean([store.vectors[t] for t in vocab_terms], axis=0)

    doc_vecs = [store.vectors[t] for t in tokens if store.usable(t)]
    if not doc_vecs:
        return Prediction(
            doc_id=doc_id,
            labels=frozenset({FoundationLabel.UNKNOWN}),
            approach=approach or f"semantic_sim:{lex.name}",
        )
    doc_vec = np.mean(doc_vecs, axis=0)
    scores = {f: cosine(doc_vec, anchors[f]) for f in FOUNDATIONS}
    best = max(scores.values())
    labels = frozenset(f for f, v in scores.items() if v == best)
    return Prediction(
        doc_id=doc_id,
        labels=labels,
        scores=scores,
        approach=approach or f"semantic_sim:{lex.name}",
    )


# ---------------------------------------------------------------------------
# Micro-frames


@dataclass(frozen=True)
class MicroFrame:
    """One virtue/vice axis: unit vector from virtue centroid to vice centroid."""

    foundation: FoundationLabel
    axis: np.ndarray
    virtue_terms: tuple[str, ...]
    vice_terms: tuple[str, ...]

    def __post_init__(self):
        norm = float(np.linalg.norm(self.axis))
        if not np.isclose(norm, 1.0, atol=1e-9):
            raise ValueError(f"axis for {self.foundation.value} is not unit length")


def build_microframe(
    lex: Lexicon, store: EmbeddingStore, foundation: FoundationLabel
) -> MicroFrame:
    virtue = _expand_terms(lex.terms(foundation, Polarity.VIRTUE), store)
    vice = _expand_terms(lex.terms(foundation, Polarity.VICE), store)
    for pole, terms in (("virtue", virtue), ("vice", vice)):
        if not terms:
            raise ValueError(
                f"foundation {foundation.value!r}: {pole} pole has no "
                "in-vocabulary terms"
            )
    virtue_centroid = np.mean([store.vectors[t] for t in virtue], axis=0)
    vice_centroid = np.mean([store.vectors[t] for t in vice], axis=0)
    diff = vice_centroid - virtue_centroid
    norm = float(np.linalg.norm(diff))
    if norm == 0.0:
        raise ValueError(f"foundation {foundation.value!r}: degenerate axis (poles coincide)")
    return MicroFrame(
        foundation=foundation,
        axis=diff / norm,
        virtue_terms=tuple(virtue),
        vice_terms=tuple(vice),
    )


def build_microframes(lex: Lexicon, store: EmbeddingStore) -> list[MicroFrame]:
    """One frame per foundation; fails naming the foundation and pole when a
    pole is empty after vocabulary filtering."""
    if lex.kind is not LexiconKind.COUNT:
        raise ValueError("micro-frames require a count lexicon with polarities")
    return [build_microframe(lex, store, f) for f in FOUNDATIONS]


@dataclass(frozen=True)
class NullModel:
    """Bootstrap distribution of bias over random pseudo-documents."""

    foundation: FoundationLabel
    sample_size: int
    mean: float
    stdev: float
    b: int
    seed: int


def clamp_sample_size(
    n_tokens: int, bounds: tuple[int, int] = SAMPLE_SIZE_CLAMP
) -> int:
    return max(bounds[0], min(bounds[1], n_tokens))


def frame_contributions(
    frame: MicroFrame, store: EmbeddingStore, tokens: Sequence[str]
) -> np.ndarray:
    """cosine(token vector, axis) for each usable token, in token order."""
    rows = [store.vectors[t] for t in tokens if store.usable(t)]
    if not rows:
        return np.empty(0, dtype=np.float64)
    mat = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=1)
    return (mat @ frame.axis) / norms


def build_null_model(
    background_tokens: Sequence[str],
    store: EmbeddingStore,
    frame: MicroFrame,
    sample_size: int,
    b: int = 1000,
    seed: int = 0,
) -> NullModel:
    """Bias distribution over ``b`` pseudo-documents of ``sample_size`` tokens
    drawn uniformly with replacement from the background.

    Each bootstrap sample draws from its own (seed, frame, index) RNG, so the
    result is independent of any parallel execution schedule.
    """
    if b < MIN_BOOTSTRAP:
        raise ValueError(f"bootstrap count must be >= {MIN_BOOTSTRAP}, got {b}")
    usable = [t for t in background_tokens if store.usable(t)]
    if len(set(usable)) < sample_size:
        raise ValueError(
            f"background vocabulary ({len(set(usable))} usable tokens) smaller "
            f"than sample size {sample_size}"
        )
    contributions = frame_contributions(frame, store, usable)
    frame_idx = _FOUNDATION_INDEX[frame.foundation]
    biases = np.empty(b, dtype=np.float64)
    for i in range(b):
        rng = np.random.default_rng((seed, frame_idx, i))
        idx = rng.integers(0, len(contributions), size=sample_size)
        biases[i] = contributions[idx].mean()
    return NullModel(
        foundation=frame.foundation,
        sample_size=sample_size,
        mean=float(biases.mean()),
        stdev=float(biases.std(ddof=1)) if b > 1 else 0.0,
        b=b,
        seed=seed,
    )


@dataclass(frozen=True)
class FrameAxisScore:
    """Per-frame bias, standardized z, and significance flags."""

    bias: Mapping[FoundationLabel, float]
    z: Mapping[FoundationLabel, float]
    significant: Mapping[FoundationLabel, bool]
    z_crit: float


def frameaxis_score(
    tokens: Iterable[str],
    frames: Sequence[MicroFrame],
    nulls: Mapping[FoundationLabel, NullModel],
    store: EmbeddingStore,
    z_crit: float = DEFAULT_Z_CRIT,
    doc_id: str = "",
    approach: str = "frameaxis",
) -> tuple[FrameAxisScore, Prediction]:
    """Label a document with the foundations whose bias is significant under
    a two-sided z-test against the frame's null model.

    bias(frame) = sum(count(w) * cos(v_w, axis)) / sum(count(w)) over usable
    tokens; z = (bias - null.mean) / null.stdev, defined as 0 when the null
    is degenerate (stdev 0). No significant frame yields ``none``; a document
    with no usable token yields ``unknown``.
    """
    counts = Counter(tokens)
    usable = [(t, c) for t, c in counts.items() if store.usable(t)]
    if not usable:
        return (
            FrameAxisScore({}, {}, {}, z_crit),
            Prediction(
                doc_id=doc_id,
                labels=frozenset({FoundationLabel.UNKNOWN}),
                approach=approach,
            ),
        )
    toks = [t for t, _ in usable]
    weights = np.array([c for _, c in usable], dtype=np.float64)
    total = float(weights.sum())

    bias: dict[FoundationLabel, float] = {}
    z: dict[FoundationLabel, float] = {}
    significant: dict[FoundationLabel, bool] = {}
    for frame in frames:
        contribs = frame_contributions(frame, store, toks)
        b = float(np.dot(weights, contribs) / total)
        null = nulls[frame.foundation]
        zz = 0.0 if null.stdev == 0.0 else (b - null.mean) / null.stdev
        bias[frame.foundation] = b
        z[frame.foundation] = zz
        significant[frame.foundation] = abs(zz) >= z_crit

    labels = frozenset(f for f, sig in significant.items() if sig)
    if not labels:
        labels = frozenset({FoundationLabel.NONE})
    prediction = Prediction(
        doc_id=doc_id, labels=labels, scores=dict(z), approach=approach
    )
    return FrameAxisScore(bias, z, significant, z_crit), prediction
