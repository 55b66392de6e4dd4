"""Snapshot save/load and journal replay.

Snapshots are single UTF-8 JSON documents with deterministic key order, so
save -> load -> save is byte-identical. Loads fail closed: nothing is mutated
unless the whole document parses and validates.
"""

from __future__ import annotations

import json
from pathlib import Path
from .config import EngineConfig
from .engine import Engine
from .graph import GraphConfig, MemoryGraph
from .model import SalienceTag, SchemaError, ValenceVector, canonical_json
from .policy import ExecutivePolicy


def save_snapshot(engine: Engine, path: str | Path) -> None:
    Path(path).write_text(canonical_json(engine.snapshot_dict()) + "\n", "utf-8")


def load_snapshot(path: str | Path, config: EngineConfig | None = None,
                  policy: ExecutivePolicy | None = None) -> Engine:
    p = Path(path)
    if not p.exists():
        raise SchemaError(f"snapshot file not found: {p}")
    try:
        data = json.loads(p.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"snapshot {p} is corrupt: {exc}") from exc
    return Engine.from_snapshot(data, config=config, policy=policy)


class JournalWriter:
    """Append-only JSON-lines journal of graph mutations."""

    def __init__(self, path: str | Path):
        self._fh = open(path, "a", encoding="utf-8")

    def __call__(self, record: dict) -> None:
        self._fh.write(canonical_json(record) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def replay_journal(path: str | Path, config: GraphConfig | None = None) -> MemoryGraph:
    """Rebuild a graph by re-applying journaled mutations in order."""
    graph = MemoryGraph(config=config)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: corrupt journal line") from exc
            op = record.get("op")
            turn = int(record.get("turn", 0))
            if op == "add_concept":
                graph.add_concept(record["label"], turn)
            elif op == "add_episode":
                graph.add_episode(record["content"], record["refs"],
                                  SalienceTag.from_dict(record["tag"]), turn)
            elif op == "set_gist":
                graph.write_gist(record["node"],
                                 ValenceVector.from_dict(record["gist"]),
                                 float(record["weight"]),
                                 provenance=(record["kind"], record["ref"]),
                                 turn=turn)
            elif op == "edge_weight":
                graph._set_edge(record["src"], record["dst"],
                                float(record["weight"]), turn)
            elif op == "compress":
                graph.compress_tick(turn)
            else:
                raise SchemaError(f"{path}:{lineno}: unknown journal op {op!r}")
    return graph
