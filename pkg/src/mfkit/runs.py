"""End-to-end measurement runs.

A run loads a benchmark, produces predictions with one approach, evaluates
them under both scopes, and writes everything (predictions JSONL, report
CSV/Markdown/JSON, manifest with SHA-256 digests of all inputs and outputs)
into an output directory it owns exclusively for the duration (lockfile).
Outputs are staged in a quarantine subdirectory and moved into place only
on success, so a failed run never leaves half-written artifacts in the
final location. Given identical config, seed, and inputs, a rerun produces
byte-identical predictions and reports.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from . import __version__
from .corpus import (
    Dataset,
    Document,
    Prediction,
    load_dataset,
    read_predictions,
    write_predictions,
)
from .errors import RunLockedError
from .evaluation import (
    ClassPrior,
    EvalReport,
    baseline_expected,
    evaluate,
    reports_to_csv,
    reports_to_markdown,
)
from .lexicon import (
    Lexicon,
    LexiconKind,
    load_lexicon,
    load_sentiment_scores,
    polarity_from_sentiment,
    score_count,
    score_prob,
)
from .segment import tokenize

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

APPROACHES = (
    "lexicon_count",
    "lexicon_prob",
    "semantic_sim",
    "frameaxis",
    "llm_fewshot",
    "exchange_ingest",
)

_ENV_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _interpolate(value):
    if isinstance(value, str):
        def sub(match):
            name = match.group(1)
            if name not in os.environ:
                raise ValueError(f"config references unset environment variable {name!r}")
            return os.environ[name]

        return _ENV_RE.sub(sub, value)
    if isinstance(value, dict):
        return {k: _interpolate(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    return value


@dataclass
class RunConfig:
    """One measurement run, as described by a TOML config file."""

    approach: str
    dataset: Path
    out_dir: Path
    seed: int = 0
    dataset_format: str | None = None
    wordlist: Path | None = None
    lexicon_path: Path | None = None
    lexicon_kind: str | None = None
    vectors_path: Path | None = None
    sentiment_path: Path | None = None
    z_crit: float = 1.96
    bootstrap: int = 1000
    background: str = "benchmark"
    sample_clamp: tuple[int, int] = (10, 1000)
    endpoint: dict = field(default_factory=dict)
    prompt_language: str = "en"
    shots_path: Path | None = None
    max_tokens: int = 200
    exchange_predictions: Path | None = None
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: Path | None = None) -> "RunConfig":
        data = _interpolate(dict(data))
        base = Path(base_dir) if base_dir else Path.cwd()

        def path_of(value) -> Path | None:
            if value in (None, ""):
                return None
            p = Path(value)
            return p if p.is_absolute() else base / p

        dataset_sec = data.get("data", {})
        lexicon_sec = data.get("lexicon", {})
        vectors_sec = data.get("vectors", {})
        fa_sec = data.get("frameaxis", {})
        llm_sec = data.get("llm", {})
        exchange_sec = data.get("exchange", {})
        clamp = fa_sec.get("sample_clamp", [10, 1000])
        return cls(
            approach=data.get("approach", ""),
            dataset=path_of(dataset_sec.get("dataset")),
            out_dir=path_of(data.get("out", "run-out")),
            seed=int(data.get("seed", 0)),
            dataset_format=dataset_sec.get("format"),
            wordlist=path_of(dataset_sec.get("wordlist")),
            lexicon_path=path_of(lexicon_sec.get("path")),
            lexicon_kind=lexicon_sec.get("kind"),
            vectors_path=path_of(vectors_sec.get("path")),
            sentiment_path=path_of(fa_sec.get("sentiment")),
            z_crit=float(fa_sec.get("z_crit", 1.96)),
            bootstrap=int(fa_sec.get("bootstrap", 1000)),
            background=fa_sec.get("background", "benchmark"),
            sample_clamp=(int(clamp[0]), int(clamp[1])),
            endpoint=dict(data.get("endpoint", {})),
            prompt_language=llm_sec.get("prompt_language", "en"),
            shots_path=path_of(llm_sec.get("shots")),
            max_tokens=int(llm_sec.get("max_tokens", 200)),
            exchange_predictions=path_of(exchange_sec.get("predictions")),
            raw=dict(data),
        )

    @classmethod
    def from_toml(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        with path.open("rb") as fh:
            data = tomllib.load(fh)
        return cls.from_dict(data, base_dir=path.parent)

    def validate(self) -> None:
        if self.approach not in APPROACHES:
            raise ValueError(
                f"unknown approach {self.approach!r}; expected one of {APPROACHES}"
            )
        if self.dataset is None:
            raise ValueError("config lacks [data].dataset")
        required: list[tuple[str, Path | None]] = [("dataset", self.dataset)]
        if self.approach in ("lexicon_count", "lexicon_prob", "semantic_sim", "frameaxis"):
            required.append(("lexicon.path", self.lexicon_path))
            expected_kind = "probability" if self.approach == "lexicon_prob" else "count"
            if self.lexicon_kind is not None and self.lexicon_kind != expected_kind:
                raise ValueError(
                    f"approach {self.approach!r} uses a {expected_kind} lexicon, "
                    f"config declares kind {self.lexicon_kind!r}"
                )
        if self.approach in ("semantic_sim", "frameaxis"):
            required.append(("vectors.path", self.vectors_path))
        if self.approach == "exchange_ingest":
            required.append(("exchange.predictions", self.exchange_predictions))
        if self.wordlist is not None:
            required.append(("data.wordlist", self.wordlist))
        if self.sentiment_path is not None:
            required.append(("frameaxis.sentiment", self.sentiment_path))
        if self.shots_path is not None:
            required.append(("llm.shots", self.shots_path))
        for label, path in required:
            if path is None:
                raise ValueError(f"approach {self.approach!r} requires config key {label}")
            if not Path(path).exists():
                raise FileNotFoundError(f"{label}: file not found: {path}")
        if self.approach == "llm_fewshot" and not self.endpoint.get("url"):
            raise ValueError("approach 'llm_fewshot' requires [endpoint].url")

    def input_files(self) -> list[Path]:
        files = [self.dataset]
        for p in (
            self.wordlist,
            self.lexicon_path,
            self.vectors_path,
            self.sentiment_path,
            self.shots_path,
            self.exchange_predictions,
        ):
            if p is not None:
                files.append(p)
        return files


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


_VECTOR_CACHE: dict[tuple[str, int, int], object] = {}


def load_vectors_cached(path: str | Path):
    """Embedding stores are the expensive input; a long-running service
    reuses them across runs as long as the file is unchanged on disk."""
    from .embed import load_vectors

    path = Path(path).resolve()
    stat = path.stat()
    key = (str(path), stat.st_mtime_ns, stat.st_size)
    store = _VECTOR_CACHE.get(key)
    if store is None:
        store = load_vectors(path)
        _VECTOR_CACHE.clear()
        _VECTOR_CACHE[key] = store
    return store


def _config_fingerprint(config: RunConfig) -> str:
    blob = json.dumps(config.raw, ensure_ascii=False, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class _RunLock:
    def __init__(self, out_dir: Path):
        self.path = out_dir / ".lock"
        self._fd: int | None = None

    def __enter__(self):
        try:
            self._fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RunLockedError(
                f"output directory is locked by another run: {self.path}"
            ) from None
        os.write(self._fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc):
        if self._fd is not None:
            os.close(self._fd)
        self.path.unlink(missing_ok=True)


@dataclass
class RunResult:
    out_dir: Path
    predictions_path: Path
    report_paths: dict[str, Path]
    manifest_path: Path
    reports: dict[str, EvalReport]


def _vocabulary_for(config: RunConfig, lex: Lexicon | None, store=None) -> frozenset[str]:
    vocab: set[str] = set()
    if lex is not None:
        vocab.update(lex.exact)
        vocab.update(lex.prefixes)
    if store is not None:
        vocab.update(store.vectors)
    if config.wordlist is not None:
        for line in Path(config.wordlist).read_text(encoding="utf-8").splitlines():
            word = line.strip()
            if word:
                vocab.add(word)
    return frozenset(vocab)


def _doc_tokens(doc: Document, vocabulary: frozenset[str]) -> list[str]:
    if doc.tokens is not None:
        return list(doc.tokens)
    return list(tokenize(doc.text, doc.language, vocabulary or None).tokens)


def _predict_lexicon(config: RunConfig, bench: Dataset, kind: LexiconKind) -> list[Prediction]:
    lex = load_lexicon(config.lexicon_path, kind)
    vocab = _vocabulary_for(config, lex)
    scorer = score_count if kind is LexiconKind.COUNT else score_prob
    return [
        scorer(_doc_tokens(doc, vocab), lex, doc_id=doc.id, approach=config.approach)
        for doc in bench.documents
    ]


def _predict_semantic(config: RunConfig, bench: Dataset) -> list[Prediction]:
    from .embed import semantic_similarity_score

    lex = load_lexicon(config.lexicon_path, LexiconKind.COUNT)
    store = load_vectors_cached(config.vectors_path)
    vocab = _vocabulary_for(config, lex, store)
    return [
        semantic_similarity_score(
            _doc_tokens(doc, vocab), lex, store, doc_id=doc.id, approach=config.approach
        )
        for doc in bench.documents
    ]


def _predict_frameaxis(config: RunConfig, bench: Dataset) -> list[Prediction]:
    from .embed import (
        build_microframes,
        build_null_model,
        clamp_sample_size,
        frameaxis_score,
    )

    lex = load_lexicon(config.lexicon_path, LexiconKind.COUNT)
    if config.sentiment_path is not None:
        polarity = polarity_from_sentiment(load_sentiment_scores(config.sentiment_path))
        lex = lex.with_polarity(polarity)
    store = load_vectors_cached(config.vectors_path)
    vocab = _vocabulary_for(config, lex, store)
    frames = build_microframes(lex, store)

    doc_tokens = {doc.id: _doc_tokens(doc, vocab) for doc in bench.documents}
    if config.background == "vocabulary":
        background = sorted(store.vectors)
    else:
        background = [t for doc in bench.documents for t in doc_tokens[doc.id]]

    sizes_needed = set()
    usable_counts: dict[str, int] = {}
    for doc in bench.documents:
        n = sum(1 for t in doc_tokens[doc.id] if store.usable(t))
        usable_counts[doc.id] = n
        if n:
            sizes_needed.add(clamp_sample_size(n, config.sample_clamp))

    nulls_by_size = {
        size: {
            frame.foundation: build_null_model(
                background, store, frame, size, b=config.bootstrap, seed=config.seed
            )
            for frame in frames
        }
        for size in sorted(sizes_needed)
    }

    preds = []
    for doc in bench.documents:
        n = usable_counts[doc.id]
        if n == 0:
            _, pred = frameaxis_score(
                doc_tokens[doc.id], frames, {}, store,
                z_crit=config.z_crit, doc_id=doc.id, approach=config.approach,
            )
        else:
            nulls = nulls_by_size[clamp_sample_size(n, config.sample_clamp)]
            _, pred = frameaxis_score(
                doc_tokens[doc.id], frames, nulls, store,
                z_crit=config.z_crit, doc_id=doc.id, approach=config.approach,
            )
        preds.append(pred)
    return preds


def _predict_llm(config: RunConfig, bench: Dataset) -> tuple[list[Prediction], Dataset]:
    from .llm import ChatClient, EndpointConfig, Shot, build_prompt

    shots: list[Shot] = []
    if config.shots_path is not None:
        for line in Path(config.shots_path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            shots.append(
                Shot(
                    doc_id=str(rec["id"]),
                    text=str(rec["text"]),
                    language=str(rec.get("language", "und")),
                    reply=json.dumps(
                        {
                            "rationale": rec.get("rationale", ""),
                            "labels": rec["label"],
                        },
                        ensure_ascii=False,
                    ),
                )
            )
    shot_ids = {s.doc_id for s in shots}
    kept = [doc for doc in bench.documents if doc.id not in shot_ids]
    if len(kept) != len(bench.documents):
        logger.info(
            "excluded %d few-shot exemplars from the benchmark",
            len(bench.documents) - len(kept),
        )
        bench = bench.replace(kept)
    bench_ids = bench.ids()

    endpoint = EndpointConfig(
        url=config.endpoint["url"],
        model=config.endpoint.get("model", ""),
        auth_env=config.endpoint.get("auth_env"),
        timeout=float(config.endpoint.get("timeout", 30.0)),
        max_retries=int(config.endpoint.get("max_retries", 3)),
        max_parallel=int(config.endpoint.get("max_parallel", 4)),
        backoff_base=float(config.endpoint.get("backoff_base", 0.5)),
        audit_path=config.endpoint.get("audit"),
    )
    with ChatClient(endpoint) as client:
        preds = client.classify_batch(
            bench.documents,
            lambda doc: build_prompt(
                doc,
                config.prompt_language,
                shots,
                benchmark_ids=bench_ids,
                max_tokens=config.max_tokens,
            ),
            approach=config.approach,
        )
    return preds, bench


def run(config: RunConfig) -> RunResult:
    """Execute a run and write its artifacts atomically."""
    config.validate()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with _RunLock(out_dir):
        stage = out_dir / ".partial"
        stage.mkdir(exist_ok=True)
        try:
            result = _run_staged(config, out_dir, stage)
        except Exception:
            logger.error("run failed; partial outputs quarantined in %s", stage)
            raise
        for leftover in stage.iterdir():  # pragma: no cover - stage is emptied
            leftover.unlink()
        stage.rmdir()
        return result


def _run_staged(config: RunConfig, out_dir: Path, stage: Path) -> RunResult:
    bench = load_dataset(config.dataset, format=config.dataset_format)

    if config.approach == "lexicon_count":
        preds = _predict_lexicon(config, bench, LexiconKind.COUNT)
    elif config.approach == "lexicon_prob":
        preds = _predict_lexicon(config, bench, LexiconKind.PROBABILITY)
    elif config.approach == "semantic_sim":
        preds = _predict_semantic(config, bench)
    elif config.approach == "frameaxis":
        preds = _predict_frameaxis(config, bench)
    elif config.approach == "llm_fewshot":
        preds, bench = _predict_llm(config, bench)
    elif config.approach == "exchange_ingest":
        preds = read_predictions(config.exchange_predictions)
    else:  # pragma: no cover - validate() rejects earlier
        raise ValueError(config.approach)

    reports = {
        "covered_only": evaluate(bench, preds, scope="covered_only"),
        "all": evaluate(bench, preds, scope="all"),
    }

    staged: dict[str, Path] = {}
    staged["predictions.jsonl"] = write_predictions(preds, stage / "predictions.jsonl")
    report_json = {
        "approach": config.approach,
        "seed": config.seed,
        "dataset": str(config.dataset),
        "reports": {name: rep.to_dict() for name, rep in reports.items()},
    }
    (stage / "report.json").write_text(
        json.dumps(report_json, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    staged["report.json"] = stage / "report.json"
    named = {f"{config.approach} [{name}]": rep for name, rep in reports.items()}
    (stage / "report.csv").write_text(reports_to_csv(named), encoding="utf-8")
    staged["report.csv"] = stage / "report.csv"
    (stage / "report.md").write_text(reports_to_markdown(named), encoding="utf-8")
    staged["report.md"] = stage / "report.md"

    manifest = {
        "tool": {"name": "mfkit", "version": __version__},
        "approach": config.approach,
        "seed": config.seed,
        "config_sha256": _config_fingerprint(config),
        "inputs": {str(p): _sha256(Path(p)) for p in config.input_files()},
        "outputs": {name: _sha256(path) for name, path in sorted(staged.items())},
    }
    (stage / "manifest.json").write_text(
        json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    staged["manifest.json"] = stage / "manifest.json"

    final: dict[str, Path] = {}
    for name, path in staged.items():
        target = out_dir / name
        path.replace(target)
        final[name] = target

    return RunResult(
        out_dir=out_dir,
        predictions_path=final["predictions.jsonl"],
        report_paths={
            "json": final["report.json"],
            "csv": final["report.csv"],
            "md": final["report.md"],
        },
        manifest_path=final["manifest.json"],
        reports=reports,
    )


def baseline_from_counts(counts: Mapping[str, int]) -> EvalReport:
    """Closed-form random baseline from raw label-count pairs."""
    from .corpus import parse_label

    parsed = {parse_label(k): int(v) for k, v in counts.items()}
    return baseline_expected(ClassPrior.from_counts(parsed))
