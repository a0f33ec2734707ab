"""Reply parsing for generated annotations.

Independent implementation of the exchange repair rules: strict JSON, then
JSON embedded in prose, then a scan for canonical label names; at most
three foundations (first listed win); everything unreadable becomes
``unknown`` with the raw text kept for audit.
"""

from __future__ import annotations

import json
import re

from . import FOUNDATIONS

_NAME_RE = re.compile(
    r"\b(care|fairness|loyalty|authority|sanctity|none|unknown)\b", re.IGNORECASE
)
_OBJECT_RE = re.compile(r"\{.*?\}", re.DOTALL)
MAX_LABELS = 3


def _names_in(text: str) -> list[str]:
    seen = []
    for match in _NAME_RE.finditer(text):
        name = match.group(1).lower()
        if name not in seen:
            seen.append(name)
    return seen


def _resolve(names: list[str]) -> list[str] | None:
    foundations = [n for n in names if n in FOUNDATIONS]
    if foundations:
        return foundations[:MAX_LABELS]
    if "none" in names:
        return ["none"]
    if "unknown" in names:
        return ["unknown"]
    return None


def parse_reply(text: str) -> tuple[list[str], str | None]:
    """Returns (labels, rationale); labels is never empty."""
    blobs = []
    stripped = text.strip()
    try:
        blobs.append(json.loads(stripped))
    except (json.JSONDecodeError, ValueError):
        for chunk in _OBJECT_RE.findall(stripped):
            try:
                blobs.append(json.loads(chunk))
            except (json.JSONDecodeError, ValueError):
                continue
    for blob in blobs:
        if not isinstance(blob, dict) or "labels" not in blob:
            continue
        raw = blob["labels"]
        names = _names_in(" ".join(str(x) for x in raw) if isinstance(raw, list) else str(raw))
        labels = _resolve(names)
        if labels is not None:
            rationale = blob.get("rationale")
            return labels, (str(rationale) if rationale is not None else None)
    labels = _resolve(_names_in(text))
    if labels is not None:
        return labels, None
    return ["unknown"], text
