"""Thalamic gateway: mechanical tagging, gating, displacement, and segmentation.

The gateway scores and routes; it never judges content, never writes gists,
and never sees more of the graph than the read-only view it is constructed
with. Every method is a deterministic function of its inputs and the config.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import lexicon
from .graph import ActivationMap, GatewayGraphView
from .model import SELF_ID, NodeId, SalienceTag, ValenceVector, ValidationError
from .wm import WMItem


@dataclass
class GateConfig:
    channel_threshold: float = 0.6
    inbound_activation_threshold: float = 0.3
    identity_discount: float = 0.15
    promotion_threshold: float = 0.6
    boundary_threshold: float = 0.7
    displace_thematic: float = 0.2
    amplification: float = 0.5       # emotional boost = amplification * trigger
    affect_hit_strength: float = 0.3  # emotional score per affect-word hit
    urgency_hit_strength: float = 0.6
    trust_user: float = 1.0
    trust_system: float = 0.8
    trust_document: float = 0.5
    trust_unknown: float = 0.2
    goal_concepts: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not (0.0 <= self.identity_discount < self.channel_threshold):
            raise ValidationError("identity_discount must be below channel_threshold")

    def trust_table(self) -> dict[str, float]:
        return {"user": self.trust_user, "system": self.trust_system,
                "document": self.trust_document}


@dataclass(frozen=True)
class Segment:
    """One incoming unit: text plus its source and the concepts it mentions."""

    text: str
    source: str
    concept_refs: tuple[NodeId, ...]
    turn: int
    affect_hint: float = 0.0   # explicit affect annotation carried by the segment
    stakes: bool = False


@dataclass(frozen=True)
class Injection:
    node_id: NodeId
    gist: ValenceVector
    activation: float


@dataclass(frozen=True)
class SegmentBoundary:
    at_turn: int
    surprise: float


def concept_overlap(subject: frozenset[NodeId] | set[NodeId],
             reference: frozenset[NodeId] | set[NodeId]) -> float:
    if not subject:
        return 0.0
    return len(set(subject) & set(reference)) / len(set(subject))


Scorer = Callable[[Segment, "ScoringContext"], float]


@dataclass
class ScoringContext:
    wm_view: list[WMItem]
    active_topic: frozenset[NodeId]
    tokens: list[str]


class ThalamicGateway:
    def __init__(self, graph_view: GatewayGraphView, config: GateConfig | None = None,
                 scorers: dict[str, Scorer] | None = None):
        self.config = config or GateConfig()
        self._graph = graph_view
        self._scorers: dict[str, Scorer] = {
            "thematic": self._score_thematic,
            "emotional": self._score_emotional,
            "urgency": self._score_urgency,
            "novelty": self._score_novelty,
            "trust": self._score_trust,
            "goal": self._score_goal,
        }
        if scorers:
            unknown = set(scorers) - set(self._scorers)
            if unknown:
                raise ValidationError(f"unknown channel(s): {sorted(unknown)}")
            self._scorers.update(scorers)
        self.last_tag_ops = 0
        self.tag_ops_total = 0
        self.flagged_sources: list[tuple[int, str]] = []

    # ----------------------------------------------------------------- tagging

    def tag(self, segment: Segment, wm_view: list[WMItem],
            active_topic: frozenset[NodeId] | set[NodeId]) -> SalienceTag:
        """Score a segment on all six channels, immediately, from nothing but
        the present state. Work is linear in segment tokens plus WM size."""
        if not segment.text and not segment.concept_refs:
            raise ValidationError("segment must carry text or concepts")
        tokens = lexicon.tokenize(segment.text)
        ctx = ScoringContext(wm_view=wm_view,
                             active_topic=frozenset(active_topic),
                             tokens=tokens)
        tag = SalienceTag(**{name: scorer(segment, ctx)
                             for name, scorer in self._scorers.items()})
        self.last_tag_ops = len(tokens) + len(wm_view) + len(self._scorers)
        self.tag_ops_total += self.last_tag_ops
        return tag

    def _score_thematic(self, segment: Segment, ctx: ScoringContext) -> float:
        return concept_overlap(frozenset(segment.concept_refs), ctx.active_topic)

    def _score_emotional(self, segment: Segment, ctx: ScoringContext) -> float:
        lexical = min(1.0, self.config.affect_hit_strength * lexicon.affect_hits(ctx.tokens))
        return max(lexical, segment.affect_hint)

    def _score_urgency(self, segment: Segment, ctx: ScoringContext) -> float:
        return min(1.0, self.config.urgency_hit_strength * lexicon.urgency_hits(ctx.tokens))

    def _score_novelty(self, segment: Segment, ctx: ScoringContext) -> float:
        refs = segment.concept_refs
        if not refs:
            return 0.0
        known = self._graph.known_count(refs)
        return 1.0 - known / len(refs)

    def _score_trust(self, segment: Segment, ctx: ScoringContext) -> float:
        table = self.config.trust_table()
        if segment.source not in table:
            self.flagged_sources.append((segment.turn, segment.source))
            return self.config.trust_unknown
        return table[segment.source]

    def _score_goal(self, segment: Segment, ctx: ScoringContext) -> float:
        goal_ids = frozenset(self.config.goal_concepts)
        return concept_overlap(frozenset(segment.concept_refs), goal_ids)

    def gist_tag(self, injection: Injection,
                 active_topic: frozenset[NodeId] | set[NodeId]) -> SalienceTag:
        """Synthesize a tag for an injected gist. Trust mirrors the gist's own
        precision: a settled conviction is a trusted internal source."""
        refs = self._gist_refs(injection.node_id)
        topic = frozenset(active_topic) | {SELF_ID}
        return SalienceTag(
            thematic=concept_overlap(refs, topic),
            emotional=injection.gist.arousal,
            urgency=0.0,
            novelty=0.0,
            trust=injection.gist.precision,
            goal=concept_overlap(refs, frozenset(self.config.goal_concepts)),
        )

    def _gist_refs(self, node_id: NodeId) -> frozenset[NodeId]:
        refs = {node_id}
        if self._graph.self_linked(node_id):
            refs.add(SELF_ID)
        return frozenset(refs)

    # ------------------------------------------------------------------ gating

    def emotional_amplify(self, wm_view: list[WMItem],
                          trigger_tag: SalienceTag) -> list[tuple[str, SalienceTag]]:
        """An emotional event amplifies everything currently present, and only
        what is currently present."""
        if trigger_tag.emotional < self.config.channel_threshold:
            return []
        boost = self.config.amplification * trigger_tag.emotional
        updates = []
        for item in wm_view:
            new_emotional = min(1.0, item.tag.emotional + boost)
            if new_emotional != item.tag.emotional:
                updates.append((item.item_id, item.tag.with_channel(emotional=new_emotional)))
        return updates

    def gate_inbound(self, activation: ActivationMap) -> list[Injection]:
        """Pure threshold filter: activated nodes with a formed gist, strongest
        first. No judgment happens here."""
        injections = []
        for node_id, value in activation.ordered():
            if value < self.config.inbound_activation_threshold:
                continue
            if not self._graph.has_concept(node_id):
                continue
            gist = self._graph.gist_lookup(node_id)
            if gist is None:
                continue
            injections.append(Injection(node_id=node_id, gist=gist, activation=value))
        return injections

    def gate_outbound(self, wm_view: list[WMItem]) -> list[str]:
        """Select unpersisted items salient enough to promote to the graph.
        Identity-adjacent items pass the thematic/goal comparison at a
        discounted threshold."""
        identity = self._graph.identity_associations()
        out = []
        for item in wm_view:
            if item.persisted:
                continue
            threshold = self.config.promotion_threshold
            if item.concept_refs & identity:
                if max(item.tag.thematic, item.tag.goal) >= threshold - self.config.identity_discount:
                    out.append(item.item_id)
                    continue
            if item.tag.aggregate >= threshold:
                out.append(item.item_id)
        return out

    def displace(self, wm_view: list[WMItem],
                 active_topic_concepts: frozenset[NodeId] | set[NodeId]) -> list[str]:
        """List items to remove on a topic shift: thematically dead AND below
        the channel threshold on every channel. One strong channel protects an
        item outright; gists re-score against SELF, which is always active."""
        identity = self._graph.identity_associations()
        topic = frozenset(active_topic_concepts) | {SELF_ID}
        removals = []
        for item in wm_view:
            refs = item.concept_refs
            if item.kind == "gist" and self._graph.self_linked(item.ref):
                refs = refs | {SELF_ID}
            thematic_now = concept_overlap(refs, topic)
            if thematic_now >= self.config.displace_thematic:
                continue
            threshold = self.config.channel_threshold
            if refs & identity:
                threshold -= self.config.identity_discount
            if item.tag.aggregate < threshold:
                removals.append(item.item_id)
        return removals

    def detect_boundary(self, segment_concepts: frozenset[NodeId] | set[NodeId],
                        wm_view: list[WMItem], turn: int) -> SegmentBoundary | None:
        """Surprise is the fraction of segment concepts absent from WM; a high
        enough value marks an event boundary."""
        wm_concepts: set[NodeId] = set()
        for item in wm_view:
            wm_concepts.update(item.concept_refs)
        concepts = set(segment_concepts)
        surprise = 1.0 - len(concepts & wm_concepts) / max(1, len(concepts))
        if surprise >= self.config.boundary_threshold:
            return SegmentBoundary(at_turn=turn, surprise=surprise)
        return None
