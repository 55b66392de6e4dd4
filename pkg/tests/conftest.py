from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from engram.graph import GraphConfig, MemoryGraph
from engram.model import SalienceTag


def build_graph(edges: list[tuple[str, str, float]],
                config: GraphConfig | None = None) -> tuple[MemoryGraph, dict[str, str]]:
    """Graph with the given weighted edges between label-named concepts."""
    graph = MemoryGraph(config=config)
    ids: dict[str, str] = {}
    for a, b, w in edges:
        for label in (a, b):
            ids.setdefault(label, graph.add_concept(label, turn=0))
        graph._set_edge(ids[a], ids[b], w, turn=0)
    return graph, ids


def tag(**channels) -> SalienceTag:
    return SalienceTag(**channels)


@pytest.fixture
def empty_graph() -> MemoryGraph:
    return MemoryGraph()
