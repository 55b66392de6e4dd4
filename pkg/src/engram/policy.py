"""Reasoning policy slot.

The engine only ever talks to a policy through two calls: compose a response
from pre-ranked candidate content, and judge whether one set of facts is
consistent with another. The bundled scripted policy is fully deterministic;
an external model can be attached over a line-delimited JSON stdio protocol
without any engine change.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from typing import Protocol

from . import lexicon
from .model import NodeId, StateError


@dataclass(frozen=True)
class Query:
    text: str
    concepts: tuple[NodeId, ...]
    key: str | None = None


@dataclass(frozen=True)
class Candidate:
    """One retrieval candidate the executive has already scored."""

    content: str
    kind: str                 # "segment" | "gist" | "episode" | "concept"
    node_id: NodeId | None
    match: float
    density: float
    precision: float


@dataclass(frozen=True)
class PolicyResponse:
    text: str
    facts: tuple[tuple[str, str], ...] = ()
    conclusion: str | None = None   # transient; logged, never stored


@dataclass(frozen=True)
class ConsistencyJudgment:
    consistent: bool
    intensity: float


class ExecutivePolicy(Protocol):
    def respond(self, query: Query, wm_view: list,
                search_results: list[Candidate] | None = None) -> PolicyResponse: ...

    def judge_consistency(self, candidate_facts: dict[str, str],
                          reference_facts: dict[str, str]) -> ConsistencyJudgment: ...


@dataclass
class ScriptedPolicy:
    """Lexical, deterministic stand-in for a reasoning model.

    Responses quote the first candidate that carries the queried fact;
    consistency is negation-by-value over shared fact keys.
    """

    contradiction_score: float = 0.9

    def respond(self, query: Query, wm_view: list,
                search_results: list[Candidate] | None = None) -> PolicyResponse:
        candidates = search_results or []
        if query.key is not None:
            for cand in candidates:
                value = lexicon.facts_dict(cand.content).get(query.key)
                if value is not None:
                    return PolicyResponse(
                        text=f"{query.key}={value}",
                        facts=((query.key, value),),
                        conclusion=f"answered {query.key} from {cand.kind} evidence",
                    )
            return PolicyResponse(text=f"no record of {query.key}",
                                  conclusion=f"no stored value for {query.key}")
        if candidates:
            best = candidates[0]
            return PolicyResponse(text=best.content,
                                  conclusion=f"summarized {best.kind} content")
        return PolicyResponse(text="no relevant memory",
                              conclusion="nothing surfaced for this query")

    def judge_consistency(self, candidate_facts: dict[str, str],
                          reference_facts: dict[str, str]) -> ConsistencyJudgment:
        shared = set(candidate_facts) & set(reference_facts)
        contradicted = [k for k in shared if candidate_facts[k] != reference_facts[k]]
        if contradicted:
            return ConsistencyJudgment(consistent=False, intensity=self.contradiction_score)
        return ConsistencyJudgment(consistent=True, intensity=0.0)


class StdioPolicy:
    """Policy backed by an external process speaking JSON lines on stdio.

    Request:  {"op": "respond", "query": {...}, "candidates": [...]}
              {"op": "judge", "candidate": {...}, "reference": {...}}
    Response: {"text": ..., "facts": [[k, v], ...], "conclusion": ...}
              {"consistent": bool, "intensity": float}
    """

    def __init__(self, argv: list[str]):
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1)

    def _call(self, payload: dict) -> dict:
        if self._proc.stdin is None or self._proc.stdout is None:
            raise StateError("policy process has no stdio pipes")
        self._proc.stdin.write(json.dumps(payload) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise StateError("policy process closed its stdout")
        return json.loads(line)

    def respond(self, query: Query, wm_view: list,
                search_results: list[Candidate] | None = None) -> PolicyResponse:
        raw = self._call({
            "op": "respond",
            "query": {"text": query.text, "concepts": list(query.concepts),
                      "key": query.key},
            "candidates": [
                {"content": c.content, "kind": c.kind, "node_id": c.node_id,
                 "match": c.match, "density": c.density, "precision": c.precision}
                for c in (search_results or [])
            ],
        })
        return PolicyResponse(
            text=str(raw.get("text", "")),
            facts=tuple((str(k), str(v)) for k, v in raw.get("facts", [])),
            conclusion=raw.get("conclusion"),
        )

    def judge_consistency(self, candidate_facts: dict[str, str],
                          reference_facts: dict[str, str]) -> ConsistencyJudgment:
        raw = self._call({"op": "judge", "candidate": candidate_facts,
                          "reference": reference_facts})
        return ConsistencyJudgment(consistent=bool(raw["consistent"]),
                                   intensity=float(raw.get("intensity", 0.0)))

    def close(self) -> None:
        if self._proc.stdin:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)

    def __enter__(self) -> "StdioPolicy":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
