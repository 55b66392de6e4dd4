"""Knowledge graph memory store.

Concept and episode nodes joined by weighted associative edges. The graph grows
by enrichment only (edges are created and reinforced, never deleted), exposes
constant-time gist lookup, spreads activation through its own structure, and
ages episode content into digests while leaving every gist untouched.
"""

from __future__ import annotations

import bisect
import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .model import (
    SELF_CONTEXT,
    SELF_ID,
    SELF_LABEL,
    NodeId,
    NotFoundError,
    SalienceTag,
    SchemaError,
    StateError,
    ValenceVector,
    ValidationError,
    canonical_json,
    concept_id,
    concept_label,
    serialize_valence,
)


@dataclass
class GraphConfig:
    """Tunables for growth, propagation, and aging."""

    w_init: float = 0.3              # first co-occurrence edge weight
    reinforce: float = 0.15         # per-co-occurrence reinforcement, capped at 1.0
    episode_edge_scale: float = 0.1  # episode->concept edge weight per unit salience
    edge_floor: float = 0.05        # minimum legal edge weight
    decay: float = 0.8              # per-hop activation decay
    hop_limit: int = 3
    floor: float = 0.05             # activation floor for spread results
    fanout_cap: int = 16            # neighbors expanded per node during traversal
    density_scale: float = 5.0      # density = 1 - exp(-S / density_scale)
    compress_age: int = 200         # turns before episode content degrades
    w_core: float = 0.9             # gist weight at which a self-referencing gist links to SELF
    k_assoc: int = 8
    testing_increment: float = 0.05  # reconsolidation edge reinforcement


@dataclass
class ConceptNode:
    id: NodeId
    label: str
    gist: ValenceVector | None = None
    weight: float = 0.0
    created_turn: int = 0


@dataclass
class EpisodeNode:
    id: NodeId
    content: str
    concept_refs: tuple[NodeId, ...]
    tag: SalienceTag
    turn: int
    degraded: bool = False


@dataclass
class AssociativeEdge:
    src: NodeId   # canonical: src <= dst
    dst: NodeId
    weight: float
    last_reinforced_turn: int


@dataclass
class ActivationMap:
    entries: dict[NodeId, float] = field(default_factory=dict)

    def ordered(self) -> list[tuple[NodeId, float]]:
        return sorted(self.entries.items(), key=lambda kv: (-kv[1], kv[0]))

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class CostMeter:
    """Operation counters used as the cost proxy; wall clock is never trusted."""

    node_visits: int = 0
    policy_calls: int = 0
    lookup_ops: int = 0


def _edge_key(a: NodeId, b: NodeId) -> tuple[NodeId, NodeId]:
    return (a, b) if a <= b else (b, a)


class MemoryGraph:
    """Single-writer graph store.

    All mutations go through the handful of writer methods below; read paths
    (gist_lookup, spread_activation, deliberate_search, local_density) never
    change state, so they can safely run against a stable snapshot.
    """

    def __init__(self, config: GraphConfig | None = None,
                 journal_sink: Callable[[dict], None] | None = None):
        self.config = config or GraphConfig()
        self.meter = CostMeter()
        self._journal = journal_sink
        self._concepts: dict[NodeId, ConceptNode] = {}
        self._episodes: dict[NodeId, EpisodeNode] = {}
        self._edges: dict[tuple[NodeId, NodeId], AssociativeEdge] = {}
        self._adj: dict[NodeId, dict[NodeId, float]] = {}
        self._neighbor_cache: dict[NodeId, list[tuple[NodeId, float]]] = {}
        self._episodes_by_concept: dict[NodeId, list[NodeId]] = {}
        self._pending_compress: list[tuple[int, NodeId]] = []  # (turn, episode id), sorted
        self._retrievals: dict[NodeId, tuple[NodeId, ...]] = {}
        self._gist_audit: list[dict] = []
        self._gist_turns: dict[NodeId, int] = {}
        self._episode_seq = 0
        self._bootstrap_self()

    def _bootstrap_self(self) -> None:
        node = ConceptNode(id=SELF_ID, label=SELF_LABEL, created_turn=0)
        self._concepts[SELF_ID] = node
        self._adj[SELF_ID] = {}

    # ------------------------------------------------------------------ writes

    def add_concept(self, label: str, turn: int) -> NodeId:
        nid = concept_id(label)
        if nid in self._concepts:
            return nid
        self._concepts[nid] = ConceptNode(id=nid, label=label.strip(), created_turn=turn)
        self._adj[nid] = {}
        self._log({"op": "add_concept", "turn": turn, "label": label.strip()})
        return nid

    def add_episode(self, content: str, concept_refs: Iterable[NodeId],
                    tag: SalienceTag, turn: int) -> NodeId:
        refs: list[NodeId] = []
        for ref in concept_refs:
            if ref not in self._concepts:
                raise NotFoundError(f"unknown concept {ref!r}")
            if ref not in refs:
                refs.append(ref)
        if not refs:
            raise ValidationError("episode must reference at least one concept")
        self._episode_seq += 1
        eid = f"e{self._episode_seq:06d}"
        episode = EpisodeNode(id=eid, content=content, concept_refs=tuple(refs),
                              tag=tag, turn=turn)
        self._episodes[eid] = episode
        self._adj[eid] = {}
        # Co-occurring concepts enrich each other; repeats reinforce, never duplicate.
        for i in range(len(refs)):
            for j in range(i + 1, len(refs)):
                self._bump_edge(refs[i], refs[j], turn)
        link_w = max(self.config.edge_floor,
                     min(1.0, self.config.episode_edge_scale * tag.aggregate))
        for ref in refs:
            self._set_edge(eid, ref, link_w, turn)
            self._episodes_by_concept.setdefault(ref, []).append(eid)
        bisect.insort(self._pending_compress, (turn, eid))
        self._log({"op": "add_episode", "turn": turn, "content": content,
                   "refs": refs, "tag": tag.as_dict()})
        return eid

    def write_gist(self, node_id: NodeId, gist: ValenceVector, weight: float,
                   provenance: tuple[str, str], turn: int) -> None:
        """Store a gist and its gateway-selection weight atomically.

        Only the executive's two rewrite paths may call this; `provenance`
        records which one did, and the audit trail keeps every write.
        """
        node = self._concept(node_id)
        if not (0.0 <= weight <= 1.0):
            raise ValidationError(f"gist weight must be in [0, 1], got {weight!r}")
        if len(gist.associative) > self.config.k_assoc:
            raise ValidationError(f"associative component capped at {self.config.k_assoc}")
        kind, ref = provenance
        if kind not in ("investigation", "catharsis"):
            raise ValidationError(f"unknown gist provenance kind {kind!r}")
        node.gist = gist
        node.weight = weight
        # A gist that references the self is wired to the SELF node; losing core
        # weight demotes the link to the gist weight instead of severing it.
        if SELF_CONTEXT in gist.contextual:
            key = _edge_key(SELF_ID, node_id)
            if weight >= self.config.w_core:
                self._set_edge(SELF_ID, node_id, 1.0, turn)
            elif key in self._edges:
                self._set_edge(SELF_ID, node_id, max(self.config.edge_floor, weight), turn)
        self._gist_audit.append({"turn": turn, "node": node_id, "kind": kind,
                                 "ref": ref, "weight": weight})
        self._gist_turns[node_id] = turn
        self._log({"op": "set_gist", "turn": turn, "node": node_id,
                   "gist": gist.as_dict(), "weight": weight,
                   "kind": kind, "ref": ref})

    def note_retrieval(self, node_id: NodeId, seeds: Iterable[NodeId]) -> None:
        """Record that `node_id` surfaced this turn via the given seeds."""
        if node_id not in self._concepts and node_id not in self._episodes:
            raise NotFoundError(f"unknown node {node_id!r}")
        self._retrievals[node_id] = tuple(sorted(set(seeds)))

    def noted_retrievals(self) -> list[NodeId]:
        return sorted(self._retrievals)

    def reconsolidate(self, node_id: NodeId, window_closed_without_update: bool) -> None:
        """Close a retrieval window. An unchallenged retrieval strengthens the
        edges back to its seeds (testing effect); a cathartic turn does not."""
        if node_id not in self._concepts and node_id not in self._episodes:
            raise NotFoundError(f"unknown node {node_id!r}")
        seeds = self._retrievals.pop(node_id, None)
        if seeds is None:
            raise StateError(f"{node_id!r} was not retrieved this turn")
        if not window_closed_without_update:
            return
        for seed in seeds:
            key = _edge_key(node_id, seed)
            edge = self._edges.get(key)
            if edge is None:
                continue
            new_w = min(1.0, edge.weight + self.config.testing_increment)
            if new_w != edge.weight:
                self._set_edge(node_id, seed, new_w, edge.last_reinforced_turn,
                               journal=True)

    def compress_tick(self, now: int) -> int:
        """Degrade episode content older than the compression age into a digest.
        Gists, precisions, and weights are never touched here."""
        count = 0
        while self._pending_compress and now - self._pending_compress[0][0] > self.config.compress_age:
            _, eid = self._pending_compress.pop(0)
            episode = self._episodes[eid]
            if episode.degraded:
                continue
            labels = ", ".join(concept_label(r) for r in episode.concept_refs)
            digest = hashlib.sha256(episode.content.encode("utf-8")).hexdigest()[:16]
            episode.content = f"[{labels}] sha256:{digest}"
            episode.degraded = True
            count += 1
        if count:
            self._log({"op": "compress", "turn": now})
        return count

    # ------------------------------------------------------------------- reads

    def has_node(self, node_id: NodeId) -> bool:
        return node_id in self._concepts or node_id in self._episodes

    def has_concept(self, node_id: NodeId) -> bool:
        return node_id in self._concepts

    def concept(self, node_id: NodeId) -> ConceptNode:
        return self._concept(node_id)

    def episode(self, episode_id: NodeId) -> EpisodeNode:
        ep = self._episodes.get(episode_id)
        if ep is None:
            raise NotFoundError(f"unknown episode {episode_id!r}")
        return ep

    def gist_lookup(self, node_id: NodeId) -> ValenceVector | None:
        # Two dict probes, independent of graph size.
        self.meter.lookup_ops += 2
        node = self._concepts.get(node_id)
        if node is None:
            raise NotFoundError(f"unknown concept {node_id!r}")
        return node.gist

    def spread_activation(self, seeds: dict[NodeId, float], *,
                          decay: float | None = None,
                          hop_limit: int | None = None,
                          floor: float | None = None) -> ActivationMap:
        """Propagate activation from the seeds through associative edges.

        activation(n) = min(1, sum over simple paths seed->n of
        seed_activation * prod(edge weights) * decay**path_length), truncated at
        the hop limit. Entries below the floor are dropped; seeds always appear.
        """
        decay = self.config.decay if decay is None else decay
        hop_limit = self.config.hop_limit if hop_limit is None else hop_limit
        floor = self.config.floor if floor is None else floor
        if not seeds:
            raise ValidationError("seeds must be nonempty")
        if not (0.0 < decay <= 1.0):
            raise ValidationError(f"decay must be in (0, 1], got {decay!r}")
        for nid, act in seeds.items():
            if not self.has_node(nid):
                raise NotFoundError(f"unknown seed {nid!r}")
            if not (0.0 < act <= 1.0):
                raise ValidationError(f"seed activation must be in (0, 1], got {act!r}")

        acc: dict[NodeId, float] = {}
        decay_pow = [decay ** d for d in range(hop_limit + 1)]

        def walk(node: NodeId, product: float, depth: int,
                 visited: set[NodeId], seed_act: float) -> None:
            acc[node] = acc.get(node, 0.0) + seed_act * product * decay_pow[depth]
            if depth >= hop_limit:
                return
            for nb, w in self._neighbors(node):
                if nb in visited:
                    continue
                visited.add(nb)
                walk(nb, product * w, depth + 1, visited, seed_act)
                visited.discard(nb)

        for nid in sorted(seeds):
            walk(nid, 1.0, 0, {nid}, seeds[nid])

        out: dict[NodeId, float] = {}
        for node in sorted(acc):
            value = min(1.0, acc[node])
            if value >= floor or node in seeds:
                out[node] = value
        return ActivationMap(out)

    def deliberate_search(self, query_concepts: Iterable[NodeId],
                          budget: int) -> list[tuple[NodeId, float]]:
        """Best-first traversal from the query concepts, ignoring every gate
        threshold and activation floor. Scores are maximum path products.
        Visits are charged to the cost meter."""
        if budget <= 0:
            raise ValidationError(f"budget must be positive, got {budget!r}")
        import heapq

        seeds = sorted({c for c in query_concepts if self.has_node(c)})
        heap: list[tuple[float, NodeId]] = [(-1.0, s) for s in seeds]
        heapq.heapify(heap)
        best_pushed = {s: 1.0 for s in seeds}
        visited: dict[NodeId, float] = {}
        while heap and len(visited) < budget:
            neg, node = heapq.heappop(heap)
            score = -neg
            if node in visited:
                continue
            visited[node] = score
            self.meter.node_visits += 1
            for nb, w in self._neighbors(node):
                if nb in visited:
                    continue
                ns = score * w
                if ns > best_pushed.get(nb, 0.0):
                    best_pushed[nb] = ns
                    heapq.heappush(heap, (-ns, nb))
        return sorted(visited.items(), key=lambda kv: (-kv[1], kv[0]))

    def local_density(self, node_id: NodeId) -> float:
        """Saturating function of total incident edge weight; 0 for an isolate."""
        if not self.has_node(node_id):
            raise NotFoundError(f"unknown node {node_id!r}")
        total = sum(self._adj.get(node_id, {}).values())
        return 1.0 - math.exp(-total / self.config.density_scale)

    def episodes_linked(self, node_id: NodeId) -> tuple[NodeId, ...]:
        return tuple(self._episodes_by_concept.get(node_id, ()))

    def gist_written_turn(self, node_id: NodeId) -> int | None:
        return self._gist_turns.get(node_id)

    def self_linked(self, node_id: NodeId) -> bool:
        return _edge_key(SELF_ID, node_id) in self._edges

    def self_linked_nodes(self) -> list[NodeId]:
        return sorted(n for n in self._concepts
                      if n != SELF_ID and self.self_linked(n))

    def identity_nodes(self) -> list[NodeId]:
        """Self-linked concepts whose gist weight is at core level."""
        return [n for n in self.self_linked_nodes()
                if self._concepts[n].gist is not None
                and self._concepts[n].weight >= self.config.w_core]

    def known_count(self, node_ids: Iterable[NodeId]) -> int:
        return sum(1 for n in node_ids if n in self._concepts)

    def edge_weight(self, a: NodeId, b: NodeId) -> float | None:
        edge = self._edges.get(_edge_key(a, b))
        return None if edge is None else edge.weight

    def concept_ids(self) -> list[NodeId]:
        return sorted(self._concepts)

    def episode_ids(self) -> list[NodeId]:
        return sorted(self._episodes)

    def gist_audit(self) -> list[dict]:
        return list(self._gist_audit)

    def gists_serialized(self) -> dict[NodeId, str]:
        return {n: serialize_valence(c.gist)
                for n, c in sorted(self._concepts.items()) if c.gist is not None}

    def identity_record(self) -> str:
        """Canonical serialization of every SELF-linked concept node (label,
        weight, gist). Edge state is deliberately excluded: retrieval may
        legitimately reinforce edges without touching the beliefs themselves."""
        nodes = {}
        for nid in self.self_linked_nodes():
            node = self._concepts[nid]
            nodes[nid] = {
                "label": node.label,
                "weight": node.weight,
                "gist": node.gist.as_dict() if node.gist else None,
            }
        return canonical_json(nodes)

    # -------------------------------------------------------------- internals

    def _concept(self, node_id: NodeId) -> ConceptNode:
        node = self._concepts.get(node_id)
        if node is None:
            raise NotFoundError(f"unknown concept {node_id!r}")
        return node

    def _neighbors(self, node: NodeId) -> list[tuple[NodeId, float]]:
        cached = self._neighbor_cache.get(node)
        if cached is None:
            adj = self._adj.get(node, {})
            cached = sorted(adj.items(), key=lambda kv: (-kv[1], kv[0]))
            if len(cached) > self.config.fanout_cap:
                cached = cached[: self.config.fanout_cap]
            self._neighbor_cache[node] = cached
        return cached

    def _bump_edge(self, a: NodeId, b: NodeId, turn: int) -> None:
        key = _edge_key(a, b)
        edge = self._edges.get(key)
        if edge is None:
            self._set_edge(a, b, self.config.w_init, turn)
        else:
            self._set_edge(a, b, min(1.0, edge.weight + self.config.reinforce), turn)

    def _set_edge(self, a: NodeId, b: NodeId, weight: float, turn: int,
                  journal: bool = False) -> None:
        if a == b and a != SELF_ID:
            raise ValidationError("self-loops are reserved for the SELF node")
        if not (0.0 < weight <= 1.0):
            raise ValidationError(f"edge weight must be in (0, 1], got {weight!r}")
        key = _edge_key(a, b)
        self._edges[key] = AssociativeEdge(src=key[0], dst=key[1], weight=weight,
                                           last_reinforced_turn=turn)
        self._adj.setdefault(a, {})[b] = weight
        self._adj.setdefault(b, {})[a] = weight
        self._neighbor_cache.pop(a, None)
        self._neighbor_cache.pop(b, None)
        if journal:
            self._log({"op": "edge_weight", "turn": turn, "src": key[0],
                       "dst": key[1], "weight": weight})

    def _log(self, record: dict) -> None:
        if self._journal is not None:
            self._journal(record)

    # ------------------------------------------------------------- snapshots

    def snapshot_dict(self) -> dict:
        concepts = {}
        for nid in sorted(self._concepts):
            node = self._concepts[nid]
            concepts[nid] = {
                "label": node.label,
                "gist": node.gist.as_dict() if node.gist else None,
                "weight": node.weight,
                "created_turn": node.created_turn,
            }
        episodes = {}
        for eid in sorted(self._episodes):
            ep = self._episodes[eid]
            episodes[eid] = {
                "content": ep.content,
                "refs": list(ep.concept_refs),
                "tag": ep.tag.as_dict(),
                "turn": ep.turn,
                "degraded": ep.degraded,
            }
        edges = []
        for key in sorted(self._edges):
            edge = self._edges[key]
            edges.append({"src": edge.src, "dst": edge.dst, "weight": edge.weight,
                          "last_reinforced_turn": edge.last_reinforced_turn})
        return {
            "v": 1,
            "concepts": concepts,
            "episodes": episodes,
            "edges": edges,
            "audit": list(self._gist_audit),
        }

    def serialize(self) -> str:
        return canonical_json(self.snapshot_dict())

    @classmethod
    def from_snapshot(cls, data: dict, config: GraphConfig | None = None,
                      journal_sink: Callable[[dict], None] | None = None) -> "MemoryGraph":
        if data.get("v") != 1:
            raise SchemaError(f"unsupported graph snapshot version {data.get('v')!r}")
        graph = cls(config=config, journal_sink=None)
        graph._concepts.clear()
        graph._adj.clear()
        try:
            for nid, raw in data["concepts"].items():
                gist = ValenceVector.from_dict(raw["gist"]) if raw.get("gist") else None
                graph._concepts[nid] = ConceptNode(
                    id=nid, label=raw["label"], gist=gist,
                    weight=float(raw["weight"]), created_turn=int(raw["created_turn"]))
                graph._adj[nid] = {}
            for eid, raw in data["episodes"].items():
                ep = EpisodeNode(id=eid, content=raw["content"],
                                 concept_refs=tuple(raw["refs"]),
                                 tag=SalienceTag.from_dict(raw["tag"]),
                                 turn=int(raw["turn"]), degraded=bool(raw["degraded"]))
                graph._episodes[eid] = ep
                graph._adj[eid] = {}
                for ref in ep.concept_refs:
                    if ref not in graph._concepts:
                        raise SchemaError(f"episode {eid} references unknown concept {ref!r}")
                    graph._episodes_by_concept.setdefault(ref, []).append(eid)
                if not ep.degraded:
                    bisect.insort(graph._pending_compress, (ep.turn, eid))
            for raw in data["edges"]:
                src, dst, w = raw["src"], raw["dst"], float(raw["weight"])
                if not graph.has_node(src) or not graph.has_node(dst):
                    raise SchemaError(f"edge references unknown node: {src!r}-{dst!r}")
                graph._edges[_edge_key(src, dst)] = AssociativeEdge(
                    src=src, dst=dst, weight=w,
                    last_reinforced_turn=int(raw["last_reinforced_turn"]))
                graph._adj[src][dst] = w
                graph._adj[dst][src] = w
            graph._gist_audit = [dict(r) for r in data.get("audit", [])]
            for entry in graph._gist_audit:
                graph._gist_turns[entry["node"]] = int(entry["turn"])
        except KeyError as exc:
            raise SchemaError(f"graph snapshot missing field {exc.args[0]!r}") from exc
        if SELF_ID not in graph._concepts:
            raise SchemaError("graph snapshot lacks the reserved SELF concept")
        seqs = [int(e[1:]) for e in graph._episodes]
        graph._episode_seq = max(seqs, default=0)
        graph._journal = journal_sink
        return graph


class GatewayGraphView:
    """Read-only facade handed to the gateway: no gist-write capability."""

    def __init__(self, graph: MemoryGraph):
        self._graph = graph

    def has_concept(self, node_id: NodeId) -> bool:
        return self._graph.has_concept(node_id)

    def known_count(self, node_ids: Iterable[NodeId]) -> int:
        return self._graph.known_count(node_ids)

    def gist_lookup(self, node_id: NodeId) -> ValenceVector | None:
        return self._graph.gist_lookup(node_id)

    def self_linked(self, node_id: NodeId) -> bool:
        return self._graph.self_linked(node_id)

    def identity_associations(self) -> frozenset[NodeId]:
        """Concepts tied to identity gists: the gisted SELF-linked nodes plus
        their associative pointers."""
        out: set[NodeId] = set()
        for nid in self._graph.self_linked_nodes():
            gist = self._graph.concept(nid).gist
            if gist is None:
                continue
            out.add(nid)
            out.update(n for n, _ in gist.associative)
        return frozenset(out)
