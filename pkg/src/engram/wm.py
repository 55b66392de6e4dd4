"""Capacity-limited working memory with drift, interference, and salience eviction."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .model import NodeId, SalienceTag, ValidationError


@dataclass
class WMConfig:
    capacity: int = 16
    drift_decay: float = 0.8
    interference_overlap: float = 0.6
    interference_penalty: float = 0.05

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValidationError("capacity must be >= 1")
        if not (0.0 < self.drift_decay <= 1.0):
            raise ValidationError("drift_decay must be in (0, 1]")


@dataclass
class WMItem:
    """One slot: a segment or an injected gist.

    There is deliberately no pin or permanence flag here; nothing survives
    eviction except by scoring high enough to stay.
    """

    item_id: str
    kind: str                      # "segment" | "gist"
    ref: str                       # inline text for segments, node id for gists
    concept_refs: frozenset[NodeId]
    tag: SalienceTag
    activation: float
    entry_turn: int
    persisted: bool = False


def eviction_score(item: WMItem) -> float:
    # Salience and activation are both necessary: the product makes either
    # collapse fatal.
    return item.tag.aggregate * item.activation


def _jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


class WorkingMemory:
    def __init__(self, config: WMConfig | None = None):
        self.config = config or WMConfig()
        self._items: dict[str, WMItem] = {}
        self._seq: dict[str, int] = {}
        self._next_seq = 0

    def __len__(self) -> int:
        return len(self._items)

    def insert(self, item: WMItem) -> list[WMItem]:
        """Insert (or refresh) an item, then evict lowest-score items until the
        size bound holds. Returns whatever was displaced."""
        if not (0.0 <= item.activation <= 1.0):
            raise ValidationError("activation must be in [0, 1]")
        if item.item_id in self._items:
            del self._items[item.item_id]
            del self._seq[item.item_id]
        self._items[item.item_id] = item
        self._seq[item.item_id] = self._next_seq
        self._next_seq += 1
        displaced: list[WMItem] = []
        while len(self._items) > self.config.capacity:
            victim = min(
                self._items.values(),
                key=lambda it: (eviction_score(it), it.entry_turn, self._seq[it.item_id]),
            )
            displaced.append(victim)
            del self._items[victim.item_id]
            del self._seq[victim.item_id]
        return displaced

    def tick(self, active_topic_concepts: frozenset[NodeId] | set[NodeId]) -> None:
        """Per-turn decay: items sharing nothing with the active topic drift,
        and near-duplicate pairs interfere with each other."""
        topic = frozenset(active_topic_concepts)
        items = self.items()
        for item in items:
            if not (item.concept_refs & topic):
                item.activation *= self.config.drift_decay
        penalty: dict[str, int] = {}
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                if _jaccard(items[i].concept_refs, items[j].concept_refs) > self.config.interference_overlap:
                    penalty[items[i].item_id] = penalty.get(items[i].item_id, 0) + 1
                    penalty[items[j].item_id] = penalty.get(items[j].item_id, 0) + 1
        for item_id, hits in penalty.items():
            item = self._items[item_id]
            item.activation = max(0.0, item.activation - hits * self.config.interference_penalty)

    def view(self) -> list[WMItem]:
        """Read-only copies, highest eviction score first."""
        ordered = sorted(
            self._items.values(),
            key=lambda it: (-eviction_score(it), it.entry_turn, self._seq[it.item_id]),
        )
        return [replace(it) for it in ordered]

    def items(self) -> list[WMItem]:
        """Live items in insertion order (writer-side use only)."""
        return sorted(self._items.values(), key=lambda it: self._seq[it.item_id])

    def get(self, item_id: str) -> WMItem | None:
        return self._items.get(item_id)

    def contains_gist_for(self, node_id: NodeId) -> bool:
        return any(it.kind == "gist" and it.ref == node_id for it in self._items.values())

    def remove(self, item_ids: list[str]) -> list[WMItem]:
        removed = []
        for item_id in item_ids:
            item = self._items.pop(item_id, None)
            if item is not None:
                self._seq.pop(item_id, None)
                removed.append(item)
        return removed

    def update_tag(self, item_id: str, tag: SalienceTag) -> None:
        item = self._items.get(item_id)
        if item is not None:
            item.tag = tag

    def mark_persisted(self, item_id: str) -> None:
        item = self._items.get(item_id)
        if item is not None:
            item.persisted = True

    # -------------------------------------------------------------- snapshots

    def snapshot_dict(self) -> dict:
        items = []
        for item in self.items():
            items.append({
                "item_id": item.item_id,
                "kind": item.kind,
                "ref": item.ref,
                "concept_refs": sorted(item.concept_refs),
                "tag": item.tag.as_dict(),
                "activation": item.activation,
                "entry_turn": item.entry_turn,
                "persisted": item.persisted,
            })
        return {"items": items}

    @classmethod
    def from_snapshot(cls, data: dict, config: WMConfig | None = None) -> "WorkingMemory":
        wm = cls(config=config)
        for raw in data["items"]:
            item = WMItem(
                item_id=raw["item_id"],
                kind=raw["kind"],
                ref=raw["ref"],
                concept_refs=frozenset(raw["concept_refs"]),
                tag=SalienceTag.from_dict(raw["tag"]),
                activation=float(raw["activation"]),
                entry_turn=int(raw["entry_turn"]),
                persisted=bool(raw["persisted"]),
            )
            wm._items[item.item_id] = item
            wm._seq[item.item_id] = wm._next_seq
            wm._next_seq += 1
        return wm
