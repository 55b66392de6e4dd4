"""Dual-process executive.

Routes queries between WM-only processing and deliberate graph search,
classifies graded retrieval confidence, runs curiosity-driven investigations
that are the only birth path for gists, applies cathartic updates that are the
only rewrite path, and holds override authority over gateway injections and
hostile input. Gist mutation happens nowhere else in the engine.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from . import lexicon
from .gateway import Injection, Segment, concept_overlap
from .graph import EpisodeNode, MemoryGraph
from .model import (
    SELF_ID,
    NodeId,
    SalienceTag,
    StateError,
    ValenceVector,
    ValidationError,
    concept_label,
)
from .policy import Candidate, ExecutivePolicy, Query
from .wm import WMItem

logger = logging.getLogger("engram.executive")


@dataclass
class ExecutiveConfig:
    density_escalation: float = 0.2   # mean query density below this forces S2
    novelty_escalation: float = 0.7
    investigation_salience: float = 0.6
    theta_base: float = 0.4           # cathartic threshold = base + slope * precision
    theta_slope: float = 0.5
    evidence_min: int = 10
    consistency_min: float = 0.7
    step_cap: int = 25
    abort_growth: float = 0.05        # density growth under this marks a non-converging loop
    density_close: float = 0.5
    match_precise: float = 0.8
    precision_precise: float = 0.6
    match_null: float = 0.1
    search_budget: int = 64
    emotional_blend: float = 0.5      # how far a cathartic rewrite moves toward evidence
    suppress_thematic: float = 0.1
    degraded_precision: float = 0.3   # precision credited to degraded episode content
    contradiction_score: float = 0.9  # scripted policy's raw intensity for a value clash


@dataclass(frozen=True)
class EscalationSignal:
    reason: str     # low_density | high_novelty | high_stakes | external_trigger
    value: float


@dataclass(frozen=True)
class EpistemicVerdict:
    state: str      # precise | approximate | null
    confidence: float
    basis: tuple[float, float, float]   # (match_score, density, precision)


@dataclass(frozen=True)
class EvidenceRecord:
    episode_id: str
    consistent: bool
    aggregate: float
    emotional: float
    valence: float
    context_labels: tuple[str, ...]
    concept_refs: tuple[NodeId, ...]
    turn: int

    def as_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "consistent": self.consistent,
            "aggregate": self.aggregate,
            "emotional": self.emotional,
            "valence": self.valence,
            "context_labels": list(self.context_labels),
            "concept_refs": list(self.concept_refs),
            "turn": self.turn,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvidenceRecord":
        return cls(
            episode_id=data["episode_id"],
            consistent=bool(data["consistent"]),
            aggregate=float(data["aggregate"]),
            emotional=float(data["emotional"]),
            valence=float(data["valence"]),
            context_labels=tuple(data["context_labels"]),
            concept_refs=tuple(data["concept_refs"]),
            turn=int(data["turn"]),
        )


@dataclass
class Investigation:
    id: str
    target_concept: NodeId
    opened_turn: int
    density_at_open: float
    evidence: list[EvidenceRecord] = field(default_factory=list)
    steps: int = 0
    status: str = "open"    # open | closed_gist | aborted

    def consistency_ratio(self) -> float:
        if not self.evidence:
            return 0.0
        return sum(1 for e in self.evidence if e.consistent) / len(self.evidence)

    def established_facts(self) -> dict[str, str]:
        """First-seen value per fact key across the evidence, in order."""
        facts: dict[str, str] = {}
        for record in self.evidence:
            for label in record.context_labels:
                if "=" in label:
                    key, value = label.split("=", 1)
                    facts.setdefault(key, value)
        return facts


@dataclass
class CathartisEvent:
    gist_node: NodeId
    contradiction_intensity: float
    threshold: float
    fired: bool
    old_precision: float
    new_precision: float | None = None
    segment_item_id: str | None = None


@dataclass(frozen=True)
class Response:
    text: str
    qualifier: str | None
    facts: tuple[tuple[str, str], ...]
    verdict: EpistemicVerdict
    mode: str
    signals: tuple[EscalationSignal, ...]


def episode_context_labels(content: str, concept_refs: tuple[NodeId, ...],
                           source: str) -> tuple[str, ...]:
    """Context labels for an episode: its source, its concept labels, and any
    fact tuples it states. This is what a gist's contextual component unions."""
    labels = {source}
    labels.update(concept_label(r) for r in concept_refs)
    labels.update(f"{k}={v}" for k, v in lexicon.parse_facts(content))
    return tuple(sorted(labels))


class Executive:
    def __init__(self, graph: MemoryGraph, policy: ExecutivePolicy,
                 config: ExecutiveConfig | None = None):
        self.config = config or ExecutiveConfig()
        self.graph = graph
        self.policy = policy
        self.investigations: dict[str, Investigation] = {}
        self._open_by_target: dict[NodeId, str] = {}
        self._inv_seq = 0

    # ----------------------------------------------------------------- routing

    def route(self, query_concepts: tuple[NodeId, ...],
              stakes_flag: bool = False,
              external_trigger: bool = False) -> tuple[str, list[EscalationSignal]]:
        signals: list[EscalationSignal] = []
        densities = [self.graph.local_density(c) if self.graph.has_concept(c) else 0.0
                     for c in query_concepts]
        mean_density = sum(densities) / len(densities) if densities else 0.0
        if mean_density < self.config.density_escalation:
            signals.append(EscalationSignal("low_density", mean_density))
        novelty = 0.0
        if query_concepts:
            known = self.graph.known_count(query_concepts)
            novelty = 1.0 - known / len(query_concepts)
        if novelty > self.config.novelty_escalation:
            signals.append(EscalationSignal("high_novelty", novelty))
        if stakes_flag:
            signals.append(EscalationSignal("high_stakes", 1.0))
        if external_trigger:
            signals.append(EscalationSignal("external_trigger", 1.0))
        return ("S2" if signals else "S1"), signals

    def classify_epistemic(self, match_score: float, density: float,
                           precision: float) -> EpistemicVerdict:
        for name, value in (("match_score", match_score), ("density", density),
                            ("precision", precision)):
            if not (0.0 <= value <= 1.0):
                raise ValidationError(f"{name} must be in [0, 1], got {value!r}")
        confidence = match_score * (0.5 * density + 0.5 * precision)
        if match_score < self.config.match_null:
            state = "null"
        elif match_score >= self.config.match_precise and precision >= self.config.precision_precise:
            state = "precise"
        else:
            state = "approximate"
        return EpistemicVerdict(state=state, confidence=confidence,
                                basis=(match_score, density, precision))

    def answer(self, query: Query, wm_view: list[WMItem], *,
               stakes_flag: bool = False, external_trigger: bool = False,
               exclude_item: str | None = None,
               exclude_episode: NodeId | None = None) -> Response:
        mode, signals = self.route(query.concepts, stakes_flag, external_trigger)
        if mode == "S1":
            candidates = self._wm_candidates(query, wm_view, exclude_item)
        else:
            candidates = self._search_candidates(query, exclude_episode)
        basis = self._verdict_basis(query, candidates)
        verdict = self.classify_epistemic(*basis)
        self.graph.meter.policy_calls += 1
        reply = self.policy.respond(query, wm_view, candidates)
        if reply.conclusion:
            # Transient executive output; logged and deliberately never stored.
            logger.debug("conclusion: %s", reply.conclusion)
        if verdict.state == "null":
            return Response(text=f"no record: {reply.text}", qualifier=None,
                            facts=(), verdict=verdict, mode=mode, signals=tuple(signals))
        if verdict.state == "approximate":
            return Response(text=f"(uncertain) {reply.text}", qualifier="uncertain",
                            facts=reply.facts, verdict=verdict, mode=mode,
                            signals=tuple(signals))
        return Response(text=reply.text, qualifier=None, facts=reply.facts,
                        verdict=verdict, mode=mode, signals=tuple(signals))

    def _wm_candidates(self, query: Query, wm_view: list[WMItem],
                       exclude_item: str | None) -> list[Candidate]:
        qset = frozenset(query.concepts)
        scored: list[tuple[float, int, int, Candidate]] = []
        for idx, item in enumerate(wm_view):
            if item.item_id == exclude_item:
                continue
            match = concept_overlap(qset, item.concept_refs)
            if match <= 0.0:
                continue
            if item.kind == "gist":
                gist = self.graph.gist_lookup(item.ref)
                if gist is None:
                    continue
                cand = Candidate(content=" ".join(sorted(gist.contextual)),
                                 kind="gist", node_id=item.ref, match=match,
                                 density=self.graph.local_density(item.ref),
                                 precision=gist.precision)
                rank_kind = 0
            else:
                cand = Candidate(content=item.ref, kind="segment", node_id=None,
                                 match=match, density=self._site_density(item.concept_refs),
                                 precision=1.0)
                rank_kind = 1
            scored.append((-match, rank_kind, idx, cand))
        scored.sort(key=lambda t: t[:3])
        return [c for *_, c in scored]

    def _search_candidates(self, query: Query,
                           exclude_episode: NodeId | None = None) -> list[Candidate]:
        ranked = self.graph.deliberate_search(query.concepts, self.config.search_budget)
        qset = frozenset(query.concepts)
        out: list[Candidate] = []
        for node_id, _score in ranked:
            if node_id == exclude_episode:
                continue   # the query's own echo is not evidence
            if self.graph.has_concept(node_id):
                gist = self.graph.gist_lookup(node_id)
                if gist is None:
                    continue
                out.append(Candidate(content=" ".join(sorted(gist.contextual)),
                                     kind="gist", node_id=node_id,
                                     match=concept_overlap(qset, {node_id}),
                                     density=self.graph.local_density(node_id),
                                     precision=gist.precision))
            else:
                episode = self.graph.episode(node_id)
                precision = (self.config.degraded_precision
                             if episode.degraded else 1.0)
                out.append(Candidate(content=episode.content, kind="episode",
                                     node_id=node_id,
                                     match=concept_overlap(qset, set(episode.concept_refs)),
                                     density=self.graph.local_density(node_id),
                                     precision=precision))
        out.sort(key=lambda c: (-c.match, c.kind, c.node_id or ""))
        return out

    def _verdict_basis(self, query: Query,
                       candidates: list[Candidate]) -> tuple[float, float, float]:
        if query.key is not None:
            carriers = [c for c in candidates
                        if query.key in lexicon.facts_dict(c.content)]
            if not carriers:
                return (0.0, 0.0, 0.0)
            best = carriers[0]
        elif candidates:
            best = candidates[0]
        else:
            return (0.0, 0.0, 0.0)
        return (best.match, best.density, best.precision)

    def _site_density(self, refs: frozenset[NodeId]) -> float:
        sites = [r for r in sorted(refs) if r != SELF_ID and self.graph.has_concept(r)]
        if not sites:
            return 0.0
        return sum(self.graph.local_density(r) for r in sites) / len(sites)

    # ----------------------------------------------------------- investigations

    def maybe_open_investigation(self, tag: SalienceTag,
                                 concept: NodeId) -> Investigation | None:
        """Curiosity gate: salient stimulus, no gist yet, not already under
        investigation. Anything below the salience bar is passed over."""
        if tag.aggregate < self.config.investigation_salience:
            return None
        if not self.graph.has_concept(concept):
            return None
        if self.graph.gist_lookup(concept) is not None:
            return None
        if concept in self._open_by_target:
            return None
        self._inv_seq += 1
        inv = Investigation(
            id=f"i{self._inv_seq:06d}",
            target_concept=concept,
            opened_turn=0,
            density_at_open=self.graph.local_density(concept),
        )
        self.investigations[inv.id] = inv
        self._open_by_target[concept] = inv.id
        return inv

    def step_investigation(self, inv: Investigation, new_evidence: EpisodeNode,
                           source: str = "user") -> Investigation:
        if inv.status != "open":
            raise StateError(f"investigation {inv.id} is {inv.status}")
        established = inv.established_facts()
        self.graph.meter.policy_calls += 1
        judgment = self.policy.judge_consistency(
            lexicon.facts_dict(new_evidence.content), established)
        tokens = lexicon.tokenize(new_evidence.content)
        record = EvidenceRecord(
            episode_id=new_evidence.id,
            consistent=judgment.consistent,
            aggregate=new_evidence.tag.aggregate,
            emotional=new_evidence.tag.emotional,
            valence=lexicon.polarity(tokens),
            context_labels=episode_context_labels(
                new_evidence.content, new_evidence.concept_refs, source),
            concept_refs=new_evidence.concept_refs,
            turn=new_evidence.turn,
        )
        inv.evidence.append(record)
        inv.steps += 1
        if not self.closure_ready(inv) and inv.steps >= self.config.step_cap:
            # Hard cap: an investigation that has not reached a determination by
            # now is a non-converging loop and is terminated without a gist.
            growth = self.graph.local_density(inv.target_concept) - inv.density_at_open
            inv.status = "aborted"
            self._open_by_target.pop(inv.target_concept, None)
            logger.debug("aborted %s on %s (density growth %.3f)",
                         inv.id, inv.target_concept, growth)
        return inv

    def closure_ready(self, inv: Investigation) -> bool:
        if inv.status != "open":
            return False
        if self.graph.local_density(inv.target_concept) >= self.config.density_close:
            return True
        return (len(inv.evidence) >= self.config.evidence_min
                and inv.consistency_ratio() >= self.config.consistency_min)

    def close_investigation(self, inv: Investigation, turn: int) -> ValenceVector:
        """Reach a determination: build the gist from the gathered evidence and
        write it. Exactly one gist per closed investigation."""
        if inv.status == "closed_gist":
            raise StateError(f"investigation {inv.id} already closed")
        if not self.closure_ready(inv):
            raise StateError(f"investigation {inv.id} has not reached a determination")
        gist, weight = self._build_gist(inv.target_concept, inv.evidence,
                                        precision=inv.consistency_ratio())
        self.graph.write_gist(inv.target_concept, gist, weight,
                              provenance=("investigation", inv.id), turn=turn)
        inv.status = "closed_gist"
        self._open_by_target.pop(inv.target_concept, None)
        return gist

    def _build_gist(self, target: NodeId, evidence: list[EvidenceRecord],
                    precision: float) -> tuple[ValenceVector, float]:
        total_w = sum(e.aggregate for e in evidence)
        if total_w > 0:
            arousal = sum(e.aggregate * e.emotional for e in evidence) / total_w
            valence = sum(e.aggregate * e.valence for e in evidence) / total_w
        else:
            arousal = valence = 0.0
        co_weight: dict[NodeId, float] = {}
        for record in evidence:
            for ref in record.concept_refs:
                if ref != target:
                    co_weight[ref] = co_weight.get(ref, 0.0) + record.aggregate
        top = sorted(co_weight.items(), key=lambda kv: (-kv[1], kv[0]))
        top = top[: self.graph.config.k_assoc]
        peak = top[0][1] if top else 1.0
        associative = tuple((n, max(1e-9, w / peak)) for n, w in top) if peak > 0 else ()
        # The determination keeps only what the consistent evidence supports;
        # rejected evidence contributes weight and affect, not context.
        contextual: set[str] = set()
        for record in evidence:
            if record.consistent:
                contextual.update(record.context_labels)
        weight = total_w / len(evidence) if evidence else 0.0
        gist = ValenceVector(
            valence=max(-1.0, min(1.0, valence)),
            arousal=max(0.0, min(1.0, arousal)),
            associative=associative,
            contextual=frozenset(contextual),
            density=self.graph.local_density(target),
            precision=max(0.0, min(1.0, precision)),
        )
        return gist, max(0.0, min(1.0, weight))

    # -------------------------------------------------------------- catharsis

    def detect_catharsis(self, wm_view: list[WMItem]) -> list[CathartisEvent]:
        """Scan co-present (gist, segment) pairs for contradictions. Evidence
        that is not currently in WM cannot fire anything."""
        events: list[CathartisEvent] = []
        gist_items = [it for it in wm_view if it.kind == "gist"]
        segment_items = [it for it in wm_view if it.kind == "segment"]
        for gist_item in gist_items:
            gist = self.graph.gist_lookup(gist_item.ref)
            if gist is None:
                continue
            gist_facts = self._gist_facts(gist)
            if not gist_facts:
                continue
            written = self.graph.gist_written_turn(gist_item.ref) or 0
            for seg in segment_items:
                if seg.entry_turn <= written:
                    # Already integrated at the last consolidation; lability
                    # needs a mismatch that is actually new.
                    continue
                seg_facts = lexicon.facts_dict(seg.ref)
                if not (set(seg_facts) & set(gist_facts)):
                    continue   # nothing shared, no judgment needed
                self.graph.meter.policy_calls += 1
                judgment = self.policy.judge_consistency(seg_facts, gist_facts)
                if judgment.consistent:
                    continue
                intensity = min(1.0, judgment.intensity * seg.tag.trust)
                threshold = self.config.theta_base + self.config.theta_slope * gist.precision
                events.append(CathartisEvent(
                    gist_node=gist_item.ref,
                    contradiction_intensity=intensity,
                    threshold=threshold,
                    fired=intensity >= threshold,
                    old_precision=gist.precision,
                    segment_item_id=seg.item_id,
                ))
        return events

    @staticmethod
    def _gist_facts(gist: ValenceVector) -> dict[str, str]:
        facts = {}
        for label in sorted(gist.contextual):
            if "=" in label:
                key, value = label.split("=", 1)
                facts.setdefault(key, value)
        return facts

    def apply_cathartic_update(self, event: CathartisEvent,
                               contradicting: list[WMItem], turn: int) -> None:
        """The sole gist rewrite: blend toward the contradicting evidence and
        recalculate precision from the episodes linked to the node right now."""
        if not event.fired:
            raise StateError("cathartic update requires a fired event")
        node = self.graph.concept(event.gist_node)
        old = node.gist
        if old is None:
            raise StateError(f"{event.gist_node} has no gist to update")
        ev_tokens = [lexicon.tokenize(it.ref) for it in contradicting]
        if contradicting:
            ev_valence = sum(lexicon.polarity(t) for t in ev_tokens) / len(contradicting)
            ev_arousal = sum(it.tag.emotional for it in contradicting) / len(contradicting)
        else:
            ev_valence, ev_arousal = old.valence, old.arousal
        blend = self.config.emotional_blend
        new_valence = old.valence + blend * (ev_valence - old.valence)
        new_arousal = old.arousal + blend * (ev_arousal - old.arousal)

        linked = self.graph.episodes_linked(event.gist_node)
        gist_facts = self._gist_facts(old)
        consistent = contradictory = 0
        rebuilt: list[EvidenceRecord] = []
        for eid in linked:
            episode = self.graph.episode(eid)
            ep_facts = lexicon.facts_dict(episode.content)
            if set(ep_facts) & set(gist_facts):
                self.graph.meter.policy_calls += 1
                ok = self.policy.judge_consistency(ep_facts, gist_facts).consistent
            else:
                ok = True
            consistent += ok
            contradictory += not ok
            rebuilt.append(EvidenceRecord(
                episode_id=eid, consistent=ok, aggregate=episode.tag.aggregate,
                emotional=episode.tag.emotional,
                valence=lexicon.polarity(lexicon.tokenize(episode.content)),
                context_labels=episode_context_labels(
                    episode.content, episode.concept_refs, "graph"),
                concept_refs=episode.concept_refs, turn=episode.turn))
        total = consistent + contradictory
        new_precision = consistent / total if total else 0.0
        rebuilt_gist, new_weight = self._build_gist(event.gist_node, rebuilt,
                                                    precision=new_precision)
        if not rebuilt:
            new_weight = node.weight

        contexts = set(old.contextual)
        evidence_facts: dict[str, str] = {}
        for item in contradicting:
            for k, v in lexicon.parse_facts(item.ref):
                evidence_facts.setdefault(k, v)
            contexts.update(concept_label(r) for r in item.concept_refs if r != SELF_ID)
        # Revision adopts the contradicting value: contradicted fact labels are
        # replaced, everything else unions in.
        for key, value in sorted(evidence_facts.items()):
            if key in gist_facts and gist_facts[key] != value:
                contexts = {l for l in contexts if not l.startswith(key + "=")}
            contexts.add(f"{key}={value}")
        gist = ValenceVector(
            valence=max(-1.0, min(1.0, new_valence)),
            arousal=max(0.0, min(1.0, new_arousal)),
            associative=rebuilt_gist.associative,
            contextual=frozenset(contexts),
            density=self.graph.local_density(event.gist_node),
            precision=new_precision,
        )
        self.graph.write_gist(event.gist_node, gist, new_weight,
                              provenance=("catharsis", f"{event.gist_node}@{turn}"),
                              turn=turn)
        event.new_precision = new_precision

    # -------------------------------------------------------------- overrides

    def override_injection(self, injection: Injection, tag: SalienceTag,
                           active_topic: frozenset[NodeId],
                           wm_view: list[WMItem]) -> str:
        """Accept or suppress a gateway injection. Suppression never writes
        anything back to the graph."""
        refs = {injection.node_id}
        if self.graph.self_linked(injection.node_id):
            refs.add(SELF_ID)
        thematic = concept_overlap(refs, frozenset(active_topic) | {SELF_ID})
        if thematic < self.config.suppress_thematic and tag.aggregate < 0.6:
            return "suppress"
        inj_facts = self._gist_facts(injection.gist)
        if inj_facts:
            for core in self.graph.identity_nodes():
                if core == injection.node_id:
                    continue
                core_gist = self.graph.gist_lookup(core)
                if core_gist is None:
                    continue
                core_facts = self._gist_facts(core_gist)
                if not (set(inj_facts) & set(core_facts)):
                    continue
                self.graph.meter.policy_calls += 1
                if not self.policy.judge_consistency(inj_facts, core_facts).consistent:
                    return "suppress"
        return "accept"

    def reject_injection_attack(self, segment: Segment, tag: SalienceTag) -> str:
        """Reject low-trust input that instructs modification of self-linked
        beliefs. Rejection leaves every gist bitwise untouched because the
        segment is simply never processed."""
        if tag.trust >= 0.8:
            return "process"
        if not self.graph.self_linked_nodes():
            return "process"
        if lexicon.matches_attack_pattern(segment.text):
            return "reject"
        return "process"

    # -------------------------------------------------------------- snapshots

    def open_investigations(self) -> list[Investigation]:
        return [self.investigations[iid] for iid in sorted(self.investigations)
                if self.investigations[iid].status == "open"]

    def snapshot_dict(self) -> dict:
        invs = []
        for iid in sorted(self.investigations):
            inv = self.investigations[iid]
            invs.append({
                "id": inv.id,
                "target": inv.target_concept,
                "opened_turn": inv.opened_turn,
                "density_at_open": inv.density_at_open,
                "steps": inv.steps,
                "status": inv.status,
                "evidence": [e.as_dict() for e in inv.evidence],
            })
        return {"investigations": invs}

    def restore(self, data: dict) -> None:
        self.investigations.clear()
        self._open_by_target.clear()
        for raw in data.get("investigations", []):
            inv = Investigation(
                id=raw["id"],
                target_concept=raw["target"],
                opened_turn=int(raw["opened_turn"]),
                density_at_open=float(raw["density_at_open"]),
                evidence=[EvidenceRecord.from_dict(e) for e in raw["evidence"]],
                steps=int(raw["steps"]),
                status=raw["status"],
            )
            self.investigations[inv.id] = inv
            if inv.status == "open":
                self._open_by_target[inv.target_concept] = inv.id
        self._inv_seq = max((int(i[1:]) for i in self.investigations), default=0)
