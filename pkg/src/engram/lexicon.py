"""Bundled word lists and the text scanning helpers built on them.

Everything here is lexical and deterministic: affect and urgency scoring,
polarity, fact-tuple extraction, and injection-attack pattern matching.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

_TOKEN_RE = re.compile(r"[a-z0-9_:.=-]+")
_FACT_RE = re.compile(r"([a-z0-9_.:-]+)=([a-z0-9_.-]+)")
_KEY_RE = re.compile(r"(?<![\w=.:-])([a-z0-9_.-]+:[a-z0-9_.-]+)(?![\w=.:-])")


def _load_words(name: str) -> frozenset[str]:
    text = resources.files("engram.lexicons").joinpath(name).read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def _load_lines(name: str) -> tuple[str, ...]:
    text = resources.files("engram.lexicons").joinpath(name).read_text("utf-8")
    return tuple(l.strip() for l in text.splitlines() if l.strip() and not l.startswith("#"))


AFFECT_POSITIVE = _load_words("affect_positive.txt")
AFFECT_NEGATIVE = _load_words("affect_negative.txt")
AFFECT_WORDS = AFFECT_POSITIVE | AFFECT_NEGATIVE
URGENCY_WORDS = _load_words("urgency.txt")
ATTACK_PATTERNS = _load_lines("attack_patterns.txt")


def tokenize(text: str) -> list[str]:
    return [t.strip(":.=-") for t in _TOKEN_RE.findall(text.lower()) if t.strip(":.=-")]


@lru_cache(maxsize=8192)
def parse_facts(text: str) -> tuple[tuple[str, str], ...]:
    """Extract key=value fact tuples in order of first appearance."""
    seen: dict[str, str] = {}
    for key, value in _FACT_RE.findall(text.lower()):
        key = key.strip(":.-")
        if key and key not in seen:
            seen[key] = value
    return tuple(seen.items())


def facts_dict(text: str) -> dict[str, str]:
    return dict(parse_facts(text))


def query_key(text: str) -> str | None:
    """First namespaced key mentioned without a value: that is what is asked."""
    match = _KEY_RE.search(text.lower())
    return match.group(1) if match else None


def affect_hits(tokens: list[str]) -> int:
    return sum(1 for t in tokens if t in AFFECT_WORDS)


def urgency_hits(tokens: list[str]) -> int:
    return sum(1 for t in tokens if t in URGENCY_WORDS)


def polarity(tokens: list[str]) -> float:
    """Signed affect balance in [-1, 1]; 0 when no affect words are present."""
    pos = sum(1 for t in tokens if t in AFFECT_POSITIVE)
    neg = sum(1 for t in tokens if t in AFFECT_NEGATIVE)
    if pos + neg == 0:
        return 0.0
    return (pos - neg) / (pos + neg)


def matches_attack_pattern(text: str) -> bool:
    lowered = " ".join(text.lower().split())
    return any(pattern in lowered for pattern in ATTACK_PATTERNS)
