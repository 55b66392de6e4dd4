"""engram: a desk-scale agent memory engine.

A valence-tagged knowledge graph with inherent spreading activation, a
mechanical salience gateway, a capacity-limited working memory, and a
dual-process executive, driven by a deterministic scenario harness.
"""

from .config import EngineConfig
from .engine import Engine, MetricsRecord
from .model import (
    EngineError,
    NotFoundError,
    SalienceTag,
    ScenarioEvent,
    SchemaError,
    StateError,
    ValenceVector,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "EngineConfig",
    "EngineError",
    "MetricsRecord",
    "NotFoundError",
    "SalienceTag",
    "ScenarioEvent",
    "SchemaError",
    "StateError",
    "ValenceVector",
    "ValidationError",
    "__version__",
]
