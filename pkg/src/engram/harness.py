"""Scenario runner, metrics files, and windowed reports.

Scenarios are JSON-lines, one event per line. Runs are bit-deterministic:
feeding the same scenario through the same config twice yields byte-identical
metrics files.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import lexicon
from .config import EngineConfig
from .engine import Engine, MetricsRecord
from .model import ScenarioEvent, SchemaError, canonical_json
from .policy import ExecutivePolicy


def load_scenario(path: str | Path) -> list[ScenarioEvent]:
    if not Path(path).exists():
        raise SchemaError(f"scenario file not found: {path}")
    events: list[ScenarioEvent] = []
    last_turn = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            try:
                event = ScenarioEvent.from_dict(raw)
            except SchemaError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
            if event.turn < last_turn:
                raise SchemaError(f"{path}:{lineno}: turns must be non-decreasing")
            last_turn = event.turn
            events.append(event)
    return events


def save_scenario(events: list[ScenarioEvent], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(canonical_json(event.as_dict()) + "\n")


@dataclass
class ProbeOutcome:
    turn: int
    key: str | None
    expected: str | None
    asserted: str | None
    verdict: str
    qualified: bool
    correct: bool
    asserted_false: bool


@dataclass
class RunResult:
    records: list[MetricsRecord]
    probes: list[ProbeOutcome]
    truth: dict[str, str]
    engine: Engine

    def metrics_lines(self) -> list[str]:
        return [canonical_json(r.as_dict()) for r in self.records]

    def write_metrics(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.metrics_lines()) + "\n", "utf-8")


def run_events(events: list[ScenarioEvent], config: EngineConfig | None = None,
               policy: ExecutivePolicy | None = None,
               engine: Engine | None = None) -> RunResult:
    """Feed events through the engine in order, scoring probe assertions
    against the scenario's ground-truth tuples as they accumulate."""
    engine = engine or Engine(config=config, policy=policy)
    truth: dict[str, str] = {}
    records: list[MetricsRecord] = []
    probes: list[ProbeOutcome] = []
    for event in events:
        if event.type == "ground_truth":
            truth.update(lexicon.facts_dict(event.text))
        record = engine.process_event(event)
        if event.type in ("query", "probe") and engine.last_response is not None:
            response = engine.last_response
            key = lexicon.query_key(event.text)
            asserted = dict(response.facts).get(key) if key else None
            qualified = response.qualifier is not None
            # A qualified assertion is excluded from false counts only when the
            # verdict is approximate; a confident false assertion always counts.
            false = (asserted is not None and key in truth and truth[key] != asserted
                     and response.verdict.state != "approximate")
            record.asserted_false = false
            if event.type == "probe":
                correct = (asserted is not None and asserted == event.expected_answer)
                record.probe_correct = correct
                probes.append(ProbeOutcome(
                    turn=event.turn, key=key, expected=event.expected_answer,
                    asserted=asserted, verdict=response.verdict.state,
                    qualified=qualified, correct=correct, asserted_false=false))
        records.append(record)
    return RunResult(records=records, probes=probes, truth=truth, engine=engine)


def run_scenario(path: str | Path, config: EngineConfig | None = None,
                 out_path: str | Path | None = None,
                 policy: ExecutivePolicy | None = None,
                 engine: Engine | None = None) -> RunResult:
    events = load_scenario(path)
    result = run_events(events, config=config, policy=policy, engine=engine)
    if out_path is not None:
        result.write_metrics(out_path)
    return result


def load_metrics(path: str | Path) -> list[MetricsRecord]:
    records = []
    required = {"turn", "event_type", "mode", "wm_size", "cost", "verdict"}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            missing = required - set(raw)
            if missing:
                raise SchemaError(
                    f"{path}:{lineno}: metrics record missing field {sorted(missing)[0]!r}")
            records.append(MetricsRecord.from_dict(raw))
    return records


# ------------------------------------------------------------------ reporting

@dataclass
class WindowSummary:
    window: int
    turns: int
    s2_fraction: float
    mean_cost: float
    hallucination_rate: float
    identity_presence_rate: float
    mean_wm_size: float

    def as_dict(self) -> dict:
        return {
            "window": self.window,
            "turns": self.turns,
            "s2_fraction": self.s2_fraction,
            "mean_cost": self.mean_cost,
            "hallucination_rate": self.hallucination_rate,
            "identity_presence_rate": self.identity_presence_rate,
            "mean_wm_size": self.mean_wm_size,
        }


def windowed_summary(records: list[MetricsRecord], window: int = 100) -> list[WindowSummary]:
    if window < 1:
        raise SchemaError("window must be >= 1")
    buckets: dict[int, list[MetricsRecord]] = {}
    for record in records:
        buckets.setdefault((record.turn - 1) // window, []).append(record)
    out = []
    for idx in sorted(buckets):
        rows = buckets[idx]
        routed = [r for r in rows if r.mode in ("S1", "S2")]
        s2 = sum(1 for r in routed if r.mode == "S2")
        probes = [r for r in rows if r.probe_correct is not None]
        false = sum(1 for r in rows if r.asserted_false)
        out.append(WindowSummary(
            window=idx,
            turns=len(rows),
            s2_fraction=s2 / len(routed) if routed else 0.0,
            mean_cost=sum(r.cost for r in rows) / len(rows),
            hallucination_rate=false / len(probes) if probes else 0.0,
            identity_presence_rate=sum(1 for r in rows if r.identity_present) / len(rows),
            mean_wm_size=sum(r.wm_size for r in rows) / len(rows),
        ))
    return out


def report(metrics_paths: list[str | Path], window: int = 100,
           csv_path: str | Path | None = None,
           json_path: str | Path | None = None) -> dict:
    """Aggregate one or more metrics files into per-window rows."""
    summary: dict = {"files": []}
    all_rows: list[tuple[str, WindowSummary]] = []
    for path in metrics_paths:
        records = load_metrics(path)
        windows = windowed_summary(records, window=window)
        summary["files"].append({
            "path": str(path),
            "records": len(records),
            "windows": [w.as_dict() for w in windows],
        })
        all_rows.extend((str(path), w) for w in windows)
    if csv_path is not None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["file", "window", "turns", "s2_fraction", "mean_cost",
                         "hallucination_rate", "identity_presence_rate", "mean_wm_size"])
        for path, w in all_rows:
            writer.writerow([path, w.window, w.turns, f"{w.s2_fraction:.6f}",
                             f"{w.mean_cost:.6f}", f"{w.hallucination_rate:.6f}",
                             f"{w.identity_presence_rate:.6f}", f"{w.mean_wm_size:.6f}"])
        Path(csv_path).write_text(buf.getvalue(), "utf-8")
    if json_path is not None:
        Path(json_path).write_text(canonical_json(summary) + "\n", "utf-8")
    return summary


# ----------------------------------------------------------------- statistics

def _ranks(values: list[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1   # average rank for ties, 1-based
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman_rho(xs: list[float], ys: list[float]) -> float:
    """Rank correlation with average ranks for ties; 0.0 on degenerate input."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise SchemaError("spearman_rho needs two equal-length series")
    rx, ry = _ranks(list(xs)), _ranks(list(ys))
    mx = sum(rx) / len(rx)
    my = sum(ry) / len(ry)
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    if vx == 0.0 or vy == 0.0:
        return 0.0
    return cov / (vx ** 0.5 * vy ** 0.5)
