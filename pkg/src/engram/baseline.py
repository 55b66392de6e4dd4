"""Similarity-retrieval baseline.

Stores every segment verbatim with no gating, no valence, and no priming;
retrieval happens only on an explicit query, ranked by term-frequency cosine.
Asserted facts come from the top match unconditionally, which is exactly what
makes it a meaningful comparison point.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from . import lexicon
from .model import ValidationError


@dataclass(frozen=True)
class BaselineHit:
    index: int
    text: str
    score: float


class BaselineRetriever:
    def __init__(self, k: int = 5):
        if k < 1:
            raise ValidationError("k must be >= 1")
        self.k = k
        self._texts: list[str] = []
        self._vectors: list[Counter] = []
        self._norms: list[float] = []

    def __len__(self) -> int:
        return len(self._texts)

    def store(self, text: str) -> int:
        vec = Counter(lexicon.tokenize(text))
        self._texts.append(text)
        self._vectors.append(vec)
        self._norms.append(math.sqrt(sum(c * c for c in vec.values())))
        return len(self._texts) - 1

    def retrieve(self, query: str, k: int | None = None) -> list[BaselineHit]:
        k = self.k if k is None else k
        if k < 1:
            raise ValidationError("k must be >= 1")
        qvec = Counter(lexicon.tokenize(query))
        qnorm = math.sqrt(sum(c * c for c in qvec.values()))
        hits = []
        for idx, (vec, norm) in enumerate(zip(self._vectors, self._norms)):
            if norm == 0.0 or qnorm == 0.0:
                score = 0.0
            else:
                dot = sum(count * vec.get(tok, 0) for tok, count in qvec.items())
                score = dot / (norm * qnorm)
            hits.append(BaselineHit(index=idx, text=self._texts[idx], score=score))
        # Ties resolve by insertion order.
        hits.sort(key=lambda h: (-h.score, h.index))
        return hits[:k]

    def answer(self, query: str, query_key: str | None) -> str | None:
        """Assert from the top match, unconditionally: the probed key gets
        whatever value the best-matching segment states, even when that
        segment is talking about something else."""
        top = self.retrieve(query, 1)
        if not top:
            return None
        facts = lexicon.parse_facts(top[0].text)
        if not facts:
            return None
        if query_key is not None:
            stated = dict(facts)
            if query_key in stated:
                return stated[query_key]
        return facts[0][1]
