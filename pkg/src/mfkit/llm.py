"""Remote annotation and machine-translation clients.

The chat wire contract is the common completion shape: POST JSON
``{model, messages, temperature, max_tokens}``; the first choice's message
content is the text to parse. The translation contract is POST JSON
``{q: [...], source, target}`` returning ``{translations: [...]}``. Auth is
a bearer token read from the environment variable named in the endpoint
config, so tokens never live in config files or request payloads we
persist. Every request/response pair can be appended to an audit JSONL.

Model replies are parsed in three stages: strict JSON, then JSON embedded
in prose, then a scan for canonical label names; anything still unreadable
degrades to ``unknown`` with the raw text preserved in the rationale.
"""

from __future__ import annotations

import json
import logging
import random
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import httpx

from .corpus import FOUNDATIONS, Document, FoundationLabel, Prediction
from .errors import AuthError, LeakageError
from .prompts import system_prompt

logger = logging.getLogger(__name__)

#: Prompt rule: at most this many foundations per document.
MAX_LABELS = 3

_LABEL_RE = re.compile(
    r"\b(care|fairness|loyalty|authority|sanctity|none|unknown)\b", re.IGNORECASE
)
_JSON_RE = re.compile(r"\{.*?\}", re.DOTALL)


@dataclass(frozen=True)
class Shot:
    """A few-shot exemplar: a document and the reply the model should give."""

    doc_id: str
    text: str
    language: str
    reply: str


def make_shot(doc: Document, rationale: str = "") -> Shot:
    reply = json.dumps(
        {"rationale": rationale, "labels": doc.gold.value}, ensure_ascii=False
    )
    return Shot(doc_id=doc.id, text=doc.text, language=doc.language, reply=reply)


@dataclass(frozen=True)
class PromptBundle:
    system: str
    shots: tuple[tuple[str, str], ...]
    target: str
    temperature: float = 0.0
    max_tokens: int = 200

    def to_messages(self) -> list[dict[str, str]]:
        messages = [{"role": "system", "content": self.system}]
        for text, reply in self.shots:
            messages.append({"role": "user", "content": text})
            messages.append({"role": "assistant", "content": reply})
        messages.append({"role": "user", "content": self.target})
        return messages


def build_prompt(
    doc: Document,
    language: str,
    shots: Sequence[Shot],
    benchmark_ids: Iterable[str] = (),
    temperature: float = 0.0,
    max_tokens: int = 200,
) -> PromptBundle:
    """Assemble the annotation prompt for one document.

    Shot documents must share the target document's language and must not
    belong to the evaluated benchmark (leakage guard, checked by id).
    """
    bench_ids = set(benchmark_ids)
    doc_base = doc.language.lower().split("-")[0]
    for shot in shots:
        if shot.doc_id in bench_ids:
            raise LeakageError(
                f"few-shot exemplar {shot.doc_id!r} belongs to the benchmark"
            )
        if shot.language.lower().split("-")[0] != doc_base:
            raise ValueError(
                f"shot {shot.doc_id!r} language {shot.language!r} does not match "
                f"document language {doc.language!r}"
            )
    return PromptBundle(
        system=system_prompt(language, doc.language),
        shots=tuple((s.text, s.reply) for s in shots),
        target=doc.text,
        temperature=temperature,
        max_tokens=max_tokens,
    )


# ---------------------------------------------------------------------------
# Response parsing


def _scan_names(text: str) -> list[str]:
    """Canonical label names in order of first appearance."""
    found: list[str] = []
    for match in _LABEL_RE.finditer(text):
        name = match.group(1).lower()
        if name not in found:
            found.append(name)
    return found


def _labels_from_names(names: Sequence[str]) -> frozenset[FoundationLabel] | None:
    foundations = [n for n in names if FoundationLabel(n) in FOUNDATIONS]
    if foundations:
        return frozenset(FoundationLabel(n) for n in foundations[:MAX_LABELS])
    if "none" in names:
        return frozenset({FoundationLabel.NONE})
    if "unknown" in names:
        return frozenset({FoundationLabel.UNKNOWN})
    return None


def _extract_from_object(obj: object) -> tuple[frozenset[FoundationLabel], str | None] | None:
    if not isinstance(obj, dict) or "labels" not in obj:
        return None
    raw = obj["labels"]
    if isinstance(raw, str):
        names = _scan_names(raw)
    elif isinstance(raw, list):
        names = []
        for item in raw:
            for name in _scan_names(str(item)):
                if name not in names:
                    names.append(name)
    else:
        return None
    labels = _labels_from_names(names)
    if labels is None:
        return None
    rationale = obj.get("rationale")
    return labels, (str(rationale) if rationale is not None else None)


def parse_response(text: str, doc_id: str = "", approach: str = "llm_fewshot") -> Prediction:
    """Parse a model reply into a prediction; never raises.

    Foundation label sets are truncated to the three first-listed, matching
    the prompt's cap; the model's own ordering is the only available rank.
    """
    candidates = []
    stripped = text.strip()
    try:
        candidates.append(json.loads(stripped))
    except (json.JSONDecodeError, ValueError):
        for blob in _JSON_RE.findall(stripped):
            try:
                candidates.append(json.loads(blob))
            except (json.JSONDecodeError, ValueError):
                continue
    for candidate in candidates:
        extracted = _extract_from_object(candidate)
        if extracted is not None:
            labels, rationale = extracted
            return Prediction(
                doc_id=doc_id, labels=labels, rationale=rationale, approach=approach
            )

    labels = _labels_from_names(_scan_names(text))
    if labels is not None:
        return Prediction(doc_id=doc_id, labels=labels, rationale=None, approach=approach)
    return Prediction(
        doc_id=doc_id,
        labels=frozenset({FoundationLabel.UNKNOWN}),
        rationale=text,
        approach=approach,
    )


# ---------------------------------------------------------------------------
# Endpoint clients


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model: str = ""
    auth_env: str | None = None
    timeout: float = 30.0
    max_retries: int = 3
    max_parallel: int = 4
    backoff_base: float = 0.5
    audit_path: str | None = None

    def __post_init__(self):
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


class _AuditLog:
    """Thread-safe JSONL append of request/response pairs."""

    def __init__(self, path: str | None):
        self._path = Path(path) if path else None
        self._lock = threading.Lock()
        if self._path:
            self._path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, record: dict) -> None:
        if self._path is None:
            return
        line = json.dumps(record, ensure_ascii=False, sort_keys=True)
        with self._lock:
            with self._path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")


def _bearer_headers(config: EndpointConfig) -> dict[str, str]:
    import os

    if not config.auth_env:
        return {}
    token = os.environ.get(config.auth_env)
    if not token:
        raise AuthError(
            f"endpoint auth requires environment variable {config.auth_env!r}"
        )
    return {"Authorization": f"Bearer {token}"}


class _EndpointClient:
    """Shared retry/backoff machinery for the chat and translation clients."""

    def __init__(self, config: EndpointConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self._headers = _bearer_headers(config)
        self._client = httpx.Client(
            transport=transport, timeout=config.timeout, headers=self._headers
        )
        self._audit = _AuditLog(config.audit_path)
        self._abort = threading.Event()

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _post_with_retries(self, payload: dict, tag: str) -> dict | None:
        """POST the payload, retrying transient failures with exponential
        backoff plus jitter; returns the response JSON or None after
        exhausting retries. Auth rejection aborts the whole run."""
        attempts = self.config.max_retries + 1
        for attempt in range(attempts):
            if self._abort.is_set():
                return None
            record = {"tag": tag, "attempt": attempt, "request": payload}
            try:
                response = self._client.post(self.config.url, json=payload)
            except httpx.HTTPError as exc:
                record["error"] = f"{type(exc).__name__}: {exc}"
                self._audit.write(record)
                logger.warning("%s attempt %d transport error: %s", tag, attempt, exc)
            else:
                record["status"] = response.status_code
                record["response"] = response.text
                self._audit.write(record)
                if response.status_code in (401, 403):
                    self._abort.set()
                    raise AuthError(
                        f"endpoint rejected credentials (HTTP {response.status_code})"
                    )
                if response.status_code == 200:
                    try:
                        return response.json()
                    except ValueError:
                        logger.warning("%s attempt %d: non-JSON body", tag, attempt)
                elif response.status_code < 500 and response.status_code != 429:
                    logger.warning(
                        "%s: HTTP %d, not retrying", tag, response.status_code
                    )
                    return None
                else:
                    logger.warning(
                        "%s attempt %d: HTTP %d", tag, attempt, response.status_code
                    )
            if attempt < attempts - 1:
                delay = self.config.backoff_base * (2**attempt)
                time.sleep(delay + random.uniform(0, self.config.backoff_base))
        return None


class ChatClient(_EndpointClient):
    """Bounded-concurrency document annotation against a chat endpoint."""

    def classify_batch(
        self,
        docs: Sequence[Document],
        bundle_factory: Callable[[Document], PromptBundle],
        approach: str = "llm_fewshot",
    ) -> list[Prediction]:
        """One prediction per document, in input order; per-document failures
        degrade to ``unknown`` after retries."""

        def classify_one(doc: Document) -> Prediction:
            bundle = bundle_factory(doc)
            payload = {
                "model": self.config.model,
                "messages": bundle.to_messages(),
                "temperature": bundle.temperature,
                "max_tokens": bundle.max_tokens,
            }
            data = self._post_with_retries(payload, tag=f"classify:{doc.id}")
            if data is None:
                logger.error("document %s: no usable response; marking unknown", doc.id)
                return Prediction(
                    doc_id=doc.id,
                    labels=frozenset({FoundationLabel.UNKNOWN}),
                    approach=approach,
                )
            try:
                content = data["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError):
                logger.error("document %s: malformed completion payload", doc.id)
                return Prediction(
                    doc_id=doc.id,
                    labels=frozenset({FoundationLabel.UNKNOWN}),
                    approach=approach,
                )
            return parse_response(str(content), doc_id=doc.id, approach=approach)

        with ThreadPoolExecutor(max_workers=self.config.max_parallel) as pool:
            futures = [pool.submit(classify_one, doc) for doc in docs]
            results: list[Prediction] = []
            for future in futures:
                results.append(future.result())
        return results


class TranslationClient(_EndpointClient):
    """Batch text translation with a persistent (text, source, target) cache."""

    CHUNK_SIZE = 64

    def __init__(
        self,
        config: EndpointConfig,
        cache_path: str | Path | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        super().__init__(config, transport=transport)
        self._cache_path = Path(cache_path) if cache_path else None
        self._cache: dict[str, str] = {}
        if self._cache_path and self._cache_path.exists():
            self._cache = json.loads(self._cache_path.read_text(encoding="utf-8"))

    @staticmethod
    def _key(text: str, source: str, target: str) -> str:
        return json.dumps([source, target, text], ensure_ascii=False)

    def _persist(self) -> None:
        if self._cache_path is None:
            return
        self._cache_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self._cache_path.with_suffix(".tmp")
        tmp.write_text(
            json.dumps(self._cache, ensure_ascii=False, sort_keys=True), encoding="utf-8"
        )
        tmp.replace(self._cache_path)

    def translate_batch(
        self, texts: Sequence[str], source: str, target: str
    ) -> list[str | None]:
        """Order-preserving translation; failed items come back as None and
        are meant to be excluded downstream."""
        pending: list[str] = []
        seen: set[str] = set()
        for text in texts:
            key = self._key(text, source, target)
            if key not in self._cache and key not in seen:
                seen.add(key)
                pending.append(text)

        for start in range(0, len(pending), self.CHUNK_SIZE):
            chunk = pending[start : start + self.CHUNK_SIZE]
            payload = {"q": chunk, "source": source, "target": target}
            data = self._post_with_retries(payload, tag=f"translate:{start}")
            translations = None
            if data is not None:
                translations = data.get("translations")
                if not isinstance(translations, list) or len(translations) != len(chunk):
                    logger.warning("translation response arity mismatch; dropping chunk")
                    translations = None
            if translations is None:
                logger.warning("%d items left untranslated", len(chunk))
                continue
            for text, translated in zip(chunk, translations):
                self._cache[self._key(text, source, target)] = str(translated)
        self._persist()

        out: list[str | None] = []
        for text in texts:
            out.append(self._cache.get(self._key(text, source, target)))
        return out
