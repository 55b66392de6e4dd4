"""The turn loop: gateway in front, working memory in the middle, executive on top.

One scenario event is one turn. Every turn produces exactly one MetricsRecord
carrying every decision made during it. The loop is free of randomness: runs
are bit-reproducible from (events, config).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .config import EngineConfig
from .executive import Executive, Response
from .gateway import Segment, ThalamicGateway
from .graph import EpisodeNode, GatewayGraphView, MemoryGraph
from .model import (
    SELF_ID,
    NodeId,
    ScenarioEvent,
    SchemaError,
    ValidationError,
    concept_id,
)
from .policy import ExecutivePolicy, Query, ScriptedPolicy
from .wm import WMItem, WorkingMemory
from . import lexicon

logger = logging.getLogger("engram.engine")


@dataclass
class MetricsRecord:
    turn: int
    event_type: str
    mode: str = ""
    wm_size: int = 0
    injections: int = 0
    displacements: int = 0
    node_visits: int = 0
    policy_calls: int = 0
    cost: int = 0
    tag_ops: int = 0
    verdict: str = ""
    asserted_false: bool = False
    probe_correct: bool | None = None
    primed: bool = False
    identity_present: bool = False
    boundary: bool = False
    rejected: bool = False
    suppressed: int = 0
    catharsis_fired: int = 0
    compressed: int = 0
    gist_events: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        out = {
            "turn": self.turn,
            "event_type": self.event_type,
            "mode": self.mode,
            "wm_size": self.wm_size,
            "injections": self.injections,
            "displacements": self.displacements,
            "node_visits": self.node_visits,
            "policy_calls": self.policy_calls,
            "cost": self.cost,
            "tag_ops": self.tag_ops,
            "verdict": self.verdict,
            "asserted_false": self.asserted_false,
            "primed": self.primed,
            "identity_present": self.identity_present,
            "boundary": self.boundary,
            "rejected": self.rejected,
            "suppressed": self.suppressed,
            "catharsis_fired": self.catharsis_fired,
            "compressed": self.compressed,
            "gist_events": list(self.gist_events),
        }
        if self.probe_correct is not None:
            out["probe_correct"] = self.probe_correct
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsRecord":
        kwargs = dict(data)
        kwargs["gist_events"] = list(kwargs.get("gist_events", []))
        return cls(**kwargs)


class Engine:
    def __init__(self, config: EngineConfig | None = None,
                 policy: ExecutivePolicy | None = None,
                 journal_sink=None):
        self.config = config or EngineConfig()
        self.policy = policy or ScriptedPolicy(
            contradiction_score=self.config.executive.contradiction_score)
        self.graph = MemoryGraph(self.config.graph, journal_sink=journal_sink)
        self.wm = WorkingMemory(self.config.wm)
        self.gateway = ThalamicGateway(GatewayGraphView(self.graph), self.config.gateway)
        self.executive = Executive(self.graph, self.policy, self.config.executive)
        self.turn = 0
        self.active_topic: frozenset[NodeId] = frozenset()
        self.last_response: Response | None = None

    # ------------------------------------------------------------------- turns

    def process_event(self, event: ScenarioEvent) -> MetricsRecord:
        if event.turn < self.turn:
            raise ValidationError(
                f"event turns must be non-decreasing ({event.turn} after {self.turn})")
        self.turn = event.turn
        self.last_response = None
        record = MetricsRecord(turn=event.turn, event_type=event.type)
        visits0 = self.graph.meter.node_visits
        calls0 = self.graph.meter.policy_calls

        if event.type == "ground_truth":
            # Scoring metadata for the harness; the engine never sees its content.
            self._finish(record, visits0, calls0)
            return record

        segment = Segment(
            text=event.text,
            source=event.source,
            concept_refs=tuple(dict.fromkeys(concept_id(c) for c in event.concepts)),
            turn=event.turn,
            affect_hint=event.affect,
            stakes=event.stakes,
        )

        if event.type == "probe":
            record.primed = any(
                self.wm.contains_gist_for(concept)
                for concept in segment.concept_refs
                if self.graph.has_concept(concept))

        tag = self.gateway.tag(segment, self.wm.view(), self.active_topic)
        record.tag_ops = self.gateway.last_tag_ops

        if self.executive.reject_injection_attack(segment, tag) == "reject":
            record.rejected = True
            record.gist_events.append("attack_rejected")
            logger.debug("rejected segment from %s at turn %d", event.source, event.turn)
            self._finish(record, visits0, calls0)
            return record

        boundary = self.gateway.detect_boundary(
            frozenset(segment.concept_refs), self.wm.view(), event.turn)
        if boundary is not None:
            self.active_topic = frozenset(segment.concept_refs)
            record.boundary = True

        for label in event.concepts:
            self.graph.add_concept(label, event.turn)

        for item_id, new_tag in self.gateway.emotional_amplify(self.wm.view(), tag):
            self.wm.update_tag(item_id, new_tag)

        segment_item_id = f"s{event.turn:06d}"
        displaced = self.wm.insert(WMItem(
            item_id=segment_item_id,
            kind="segment",
            ref=event.text,
            concept_refs=frozenset(segment.concept_refs),
            tag=tag,
            activation=1.0,
            entry_turn=event.turn,
        ))
        displaced_nodes = {it.ref for it in displaced if it.kind == "gist"}
        record.displacements += len(displaced)

        if boundary is not None:
            removals = self.gateway.displace(self.wm.view(), self.active_topic)
            removed = self.wm.remove(removals)
            displaced_nodes.update(it.ref for it in removed if it.kind == "gist")
            record.displacements += len(removed)

        seeds = {SELF_ID: 1.0}
        for concept in segment.concept_refs:
            seeds[concept] = 1.0
        activation = self.graph.spread_activation(seeds)

        for injection in self.gateway.gate_inbound(activation):
            if injection.node_id in displaced_nodes:
                continue   # displaced items may come back next turn, not this one
            gist_tag = self.gateway.gist_tag(injection, self.active_topic)
            decision = self.executive.override_injection(
                injection, gist_tag, self.active_topic, self.wm.view())
            if decision == "suppress":
                record.suppressed += 1
                record.gist_events.append(f"injection_suppressed:{injection.node_id}")
                continue
            refs = {injection.node_id}
            if self.graph.self_linked(injection.node_id):
                refs.add(SELF_ID)
            displaced = self.wm.insert(WMItem(
                item_id=f"g:{injection.node_id}",
                kind="gist",
                ref=injection.node_id,
                concept_refs=frozenset(refs),
                tag=gist_tag,
                activation=injection.activation,
                entry_turn=event.turn,
                persisted=True,
            ))
            record.displacements += len(displaced)
            record.injections += 1
            self.graph.note_retrieval(injection.node_id, segment.concept_refs)

        promoted: dict[str, str] = {}
        for item_id in self.gateway.gate_outbound(self.wm.view()):
            item = self.wm.get(item_id)
            if item is None or item.kind != "segment":
                continue
            refs = sorted(item.concept_refs)
            if not refs:
                continue
            eid = self.graph.add_episode(item.ref, refs, item.tag, event.turn)
            self.wm.mark_persisted(item_id)
            promoted[item_id] = eid

        for concept in segment.concept_refs:
            inv = self.executive.maybe_open_investigation(tag, concept)
            if inv is not None:
                inv.opened_turn = event.turn
                record.gist_events.append(f"investigation_opened:{inv.id}")

        if event.type == "feedback":
            self._step_investigations(segment, tag, event, segment_item_id,
                                      promoted, record)

        catharted = self._run_catharsis(record)

        if event.type in ("query", "probe"):
            query = Query(text=event.text, concepts=segment.concept_refs,
                          key=lexicon.query_key(event.text))
            response = self.executive.answer(
                query, self.wm.view(),
                stakes_flag=event.stakes, external_trigger=event.external,
                exclude_item=segment_item_id,
                exclude_episode=promoted.get(segment_item_id))
            self.last_response = response
            record.mode = response.mode
            record.verdict = response.verdict.state

        for node in self.graph.noted_retrievals():
            self.graph.reconsolidate(node, window_closed_without_update=node not in catharted)

        self.wm.tick(self.active_topic | {SELF_ID})
        record.compressed = self.graph.compress_tick(event.turn)
        self._finish(record, visits0, calls0)
        return record

    def _step_investigations(self, segment: Segment, tag, event: ScenarioEvent,
                             segment_item_id: str, promoted: dict[str, str],
                             record: MetricsRecord) -> None:
        """Feedback is the only evidence that advances an investigation: reading
        about something is not engaging with it."""
        open_invs = [inv for inv in self.executive.open_investigations()
                     if inv.target_concept in segment.concept_refs]
        for inv in open_invs:
            if segment_item_id in promoted:
                episode = self.graph.episode(promoted[segment_item_id])
            else:
                # Observed but not salient enough to store: evidence without trace.
                episode = EpisodeNode(
                    id=f"obs{event.turn:06d}", content=event.text,
                    concept_refs=segment.concept_refs, tag=tag, turn=event.turn)
            self.executive.step_investigation(inv, episode, source=event.source)
            if inv.status == "aborted":
                record.gist_events.append(f"investigation_aborted:{inv.id}")
            elif self.executive.closure_ready(inv):
                self.executive.close_investigation(inv, event.turn)
                record.gist_events.append(f"gist_written:{inv.target_concept}")

    def _run_catharsis(self, record: MetricsRecord) -> set[NodeId]:
        events = self.executive.detect_catharsis(self.wm.view())
        fired: dict[NodeId, list] = {}
        for ev in events:
            if ev.fired:
                fired.setdefault(ev.gist_node, []).append(ev)
            else:
                record.gist_events.append(f"catharsis_resisted:{ev.gist_node}")
        catharted: set[NodeId] = set()
        for node in sorted(fired):
            best = max(fired[node], key=lambda e: e.contradiction_intensity)
            contradicting = [self.wm.get(e.segment_item_id) for e in fired[node]
                             if e.segment_item_id and self.wm.get(e.segment_item_id)]
            self.executive.apply_cathartic_update(best, contradicting, record.turn)
            record.catharsis_fired += 1
            record.gist_events.append(f"catharsis_fired:{node}")
            catharted.add(node)
        return catharted

    def _finish(self, record: MetricsRecord, visits0: int, calls0: int) -> None:
        record.wm_size = len(self.wm)
        record.node_visits = self.graph.meter.node_visits - visits0
        record.policy_calls = self.graph.meter.policy_calls - calls0
        record.cost = record.node_visits + record.policy_calls
        record.identity_present = self._identity_present()

    def _identity_present(self) -> bool:
        for item in self.wm.items():
            if item.kind != "gist":
                continue
            if not self.graph.self_linked(item.ref):
                continue
            if self.graph.concept(item.ref).weight >= self.config.graph.w_core:
                return True
        return False

    # -------------------------------------------------------------- snapshots

    def snapshot_dict(self) -> dict:
        return {
            "v": 1,
            "turn": self.turn,
            "active_topic": sorted(self.active_topic),
            "graph": self.graph.snapshot_dict(),
            "wm": self.wm.snapshot_dict(),
            "executive": self.executive.snapshot_dict(),
        }

    @classmethod
    def from_snapshot(cls, data: dict, config: EngineConfig | None = None,
                      policy: ExecutivePolicy | None = None,
                      journal_sink=None) -> "Engine":
        if data.get("v") != 1:
            raise SchemaError(f"unsupported snapshot version {data.get('v')!r}")
        engine = cls(config=config, policy=policy)
        try:
            graph = MemoryGraph.from_snapshot(data["graph"], engine.config.graph,
                                              journal_sink=journal_sink)
            wm = WorkingMemory.from_snapshot(data["wm"], engine.config.wm)
            engine.graph = graph
            engine.wm = wm
            engine.gateway = ThalamicGateway(GatewayGraphView(graph), engine.config.gateway)
            engine.executive = Executive(graph, engine.policy, engine.config.executive)
            engine.executive.restore(data["executive"])
            engine.turn = int(data["turn"])
            engine.active_topic = frozenset(data["active_topic"])
        except KeyError as exc:
            raise SchemaError(f"snapshot missing field {exc.args[0]!r}") from exc
        return engine
