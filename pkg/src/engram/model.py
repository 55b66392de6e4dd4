"""Shared value types: salience tags, valence vectors, scenario events, errors."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace


class EngineError(Exception):
    """Base class for all engine errors."""


class ValidationError(EngineError):
    """An input violated a documented precondition or range."""


class NotFoundError(EngineError):
    """A referenced node, item, or file does not exist."""


class StateError(EngineError):
    """An operation was invoked in a state that forbids it."""


class SchemaError(EngineError):
    """A file or record did not match its declared schema."""


NodeId = str

# The reserved always-active self concept. Exactly one per graph.
SELF_LABEL = "self"
SELF_ID = "c:self"

# Contextual label that marks a gist as self-referencing.
SELF_CONTEXT = "self"

CHANNELS = ("thematic", "emotional", "urgency", "novelty", "trust", "goal")


def _require_unit(name: str, value: float, lo: float = 0.0, hi: float = 1.0) -> None:
    if not (lo <= value <= hi):
        raise ValidationError(f"{name} must be in [{lo}, {hi}], got {value!r}")


@dataclass(frozen=True)
class SalienceTag:
    """Six-channel salience score. Any single channel can gate an item on its own,
    so the aggregate is the channel maximum, never a weighted blend."""

    thematic: float = 0.0
    emotional: float = 0.0
    urgency: float = 0.0
    novelty: float = 0.0
    trust: float = 0.0
    goal: float = 0.0

    def __post_init__(self) -> None:
        for name in CHANNELS:
            _require_unit(name, getattr(self, name))

    @property
    def aggregate(self) -> float:
        return max(self.thematic, self.emotional, self.urgency,
                   self.novelty, self.trust, self.goal)

    def with_channel(self, **changes: float) -> "SalienceTag":
        return replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in CHANNELS}

    @classmethod
    def from_dict(cls, data: dict) -> "SalienceTag":
        return cls(**{name: float(data.get(name, 0.0)) for name in CHANNELS})


# Bound on the associative component; keeps gist lookup constant-work.
MAX_ASSOCIATIVE = 8


@dataclass(frozen=True)
class ValenceVector:
    """Compressed gist attached to a concept node.

    valence/arousal summarize the emotional orientation, `associative` points at
    the strongest co-activated concepts, `contextual` records activation-context
    labels, `density` snapshots neighborhood interconnectedness, and `precision`
    is a static conviction snapshot: it changes only when the gist is rewritten.
    """

    valence: float = 0.0
    arousal: float = 0.0
    associative: tuple[tuple[NodeId, float], ...] = ()
    contextual: frozenset[str] = frozenset()
    density: float = 0.0
    precision: float = 0.0

    def __post_init__(self) -> None:
        _require_unit("valence", self.valence, -1.0, 1.0)
        _require_unit("arousal", self.arousal)
        _require_unit("density", self.density)
        _require_unit("precision", self.precision)
        if len(self.associative) > MAX_ASSOCIATIVE:
            raise ValidationError(
                f"associative component capped at {MAX_ASSOCIATIVE} entries")
        weights = [w for _, w in self.associative]
        for w in weights:
            if not (0.0 < w <= 1.0):
                raise ValidationError(f"associative weight must be in (0, 1], got {w!r}")
        if weights != sorted(weights, reverse=True):
            raise ValidationError("associative entries must be sorted by weight descending")

    @property
    def emotional(self) -> tuple[float, float]:
        return (self.valence, self.arousal)

    def as_dict(self) -> dict:
        return {
            "valence": self.valence,
            "arousal": self.arousal,
            "associative": [[n, w] for n, w in self.associative],
            "contextual": sorted(self.contextual),
            "density": self.density,
            "precision": self.precision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ValenceVector":
        return cls(
            valence=float(data["valence"]),
            arousal=float(data["arousal"]),
            associative=tuple((str(n), float(w)) for n, w in data.get("associative", [])),
            contextual=frozenset(data.get("contextual", [])),
            density=float(data["density"]),
            precision=float(data["precision"]),
        )


def canonical_json(obj) -> str:
    """Deterministic JSON encoding used everywhere byte-comparability matters."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def serialize_valence(gist: ValenceVector) -> str:
    return canonical_json(gist.as_dict())


EVENT_TYPES = ("utterance", "feedback", "query", "probe", "ground_truth", "attack")


@dataclass(frozen=True)
class ScenarioEvent:
    """One line of a scenario script."""

    turn: int
    type: str
    text: str = ""
    source: str = "user"
    concepts: tuple[str, ...] = ()
    affect: float = 0.0
    stakes: bool = False
    external: bool = False
    expected_answer: str | None = None

    def __post_init__(self) -> None:
        if self.type not in EVENT_TYPES:
            raise SchemaError(f"unknown event type {self.type!r}")
        if self.type == "probe" and self.expected_answer is None:
            raise SchemaError("probe events must carry expected_answer")
        _require_unit("affect", self.affect)

    def as_dict(self) -> dict:
        out = {
            "turn": self.turn,
            "type": self.type,
            "text": self.text,
            "source": self.source,
            "concepts": list(self.concepts),
        }
        if self.affect:
            out["affect"] = self.affect
        if self.stakes:
            out["stakes"] = True
        if self.external:
            out["external"] = True
        if self.expected_answer is not None:
            out["expected_answer"] = self.expected_answer
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioEvent":
        known = {"turn", "type", "text", "source", "concepts", "affect",
                 "stakes", "external", "expected_answer"}
        unknown = set(data) - known
        if unknown:
            raise SchemaError(f"unknown event field(s): {sorted(unknown)}")
        try:
            return cls(
                turn=int(data["turn"]),
                type=str(data["type"]),
                text=str(data.get("text", "")),
                source=str(data.get("source", "user")),
                concepts=tuple(str(c) for c in data.get("concepts", [])),
                affect=float(data.get("affect", 0.0)),
                stakes=bool(data.get("stakes", False)),
                external=bool(data.get("external", False)),
                expected_answer=data.get("expected_answer"),
            )
        except KeyError as exc:
            raise SchemaError(f"missing event field: {exc.args[0]}") from exc


def concept_id(label: str) -> NodeId:
    """Concept node ids are derived from labels, so re-adding a label is a no-op
    and ids stay stable across snapshot round-trips."""
    label = label.strip()
    if not label:
        raise ValidationError("concept label must be nonempty")
    return f"c:{label}"


def concept_label(node_id: NodeId) -> str:
    return node_id[2:] if node_id.startswith("c:") else node_id
