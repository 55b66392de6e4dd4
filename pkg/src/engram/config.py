"""Engine configuration: one flat JSON document with dotted keys per section.

Every threshold the engine consults lives here with a documented default.
Unknown keys are rejected outright. The config path can be overridden with the
ENGRAM_CONFIG environment variable.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .executive import ExecutiveConfig
from .gateway import GateConfig
from .graph import GraphConfig
from .model import SchemaError, ValidationError
from .wm import WMConfig

ENV_VAR = "ENGRAM_CONFIG"


@dataclass
class HarnessConfig:
    window: int = 100          # turns per reporting window
    baseline_k: int = 5


@dataclass
class EngineConfig:
    graph: GraphConfig = field(default_factory=GraphConfig)
    gateway: GateConfig = field(default_factory=GateConfig)
    wm: WMConfig = field(default_factory=WMConfig)
    executive: ExecutiveConfig = field(default_factory=ExecutiveConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)
    seed: int = 0

    _SECTIONS = ("graph", "gateway", "wm", "executive", "harness")

    def to_flat(self) -> dict:
        flat: dict = {"seed": self.seed}
        for section in self._SECTIONS:
            obj = getattr(self, section)
            for f in fields(obj):
                value = getattr(obj, f.name)
                if isinstance(value, tuple):
                    value = list(value)
                flat[f"{section}.{f.name}"] = value
        return dict(sorted(flat.items()))

    @classmethod
    def from_flat(cls, flat: dict) -> "EngineConfig":
        sections = {name: {} for name in cls._SECTIONS}
        seed = 0
        known = cls._known_keys()
        for key, value in flat.items():
            if key == "seed":
                seed = int(value)
                continue
            if key not in known:
                raise ValidationError(f"unknown config key {key!r}")
            section, name = key.split(".", 1)
            sections[section][name] = value
        def build(section_cls, raw):
            coerced = {}
            for f in fields(section_cls):
                if f.name not in raw:
                    continue
                value = raw[f.name]
                if f.type in ("float", float):
                    value = float(value)
                elif f.type in ("int", int):
                    value = int(value)
                elif isinstance(value, list):
                    value = tuple(str(v) for v in value)
                coerced[f.name] = value
            return section_cls(**coerced)
        return cls(
            graph=build(GraphConfig, sections["graph"]),
            gateway=build(GateConfig, sections["gateway"]),
            wm=build(WMConfig, sections["wm"]),
            executive=build(ExecutiveConfig, sections["executive"]),
            harness=build(HarnessConfig, sections["harness"]),
            seed=seed,
        )

    @classmethod
    def _known_keys(cls) -> set[str]:
        keys = set()
        for section, section_cls in (("graph", GraphConfig), ("gateway", GateConfig),
                                     ("wm", WMConfig), ("executive", ExecutiveConfig),
                                     ("harness", HarnessConfig)):
            for f in fields(section_cls):
                keys.add(f"{section}.{f.name}")
        return keys

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_flat(), indent=2, sort_keys=True) + "\n", "utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EngineConfig":
        p = Path(path)
        if not p.exists():
            raise SchemaError(f"config file not found: {p}")
        try:
            flat = json.loads(p.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"config file {p} is not valid JSON: {exc}") from exc
        if not isinstance(flat, dict):
            raise SchemaError("config file must hold a JSON object")
        return cls.from_flat(flat)

    @classmethod
    def resolve(cls, path_arg: str | None) -> "EngineConfig":
        """Load from an explicit path, the ENGRAM_CONFIG env var, or defaults."""
        path = path_arg or os.environ.get(ENV_VAR)
        if path:
            return cls.load(path)
        return cls()

    def copy(self) -> "EngineConfig":
        return EngineConfig.from_flat(self.to_flat())
