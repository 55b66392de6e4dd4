"""The P1..P7 experiment suite: paired runs against the similarity baseline or
a fresh instance, each reduced to pass/fail assertions."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from . import scenarios
from .baseline import BaselineRetriever
from .config import EngineConfig
from .engine import Engine
from .harness import RunResult, run_events, spearman_rho, windowed_summary
from .model import ScenarioEvent, ValidationError, canonical_json, concept_id
from . import lexicon

EXPERIMENTS = ("P1", "P2", "P3", "P4", "P5", "P6", "P7")


@dataclass
class Assertion:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


@dataclass
class ExperimentReport:
    name: str
    assertions: list[Assertion] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, name: str, passed: bool, detail: str) -> None:
        self.assertions.append(Assertion(name, bool(passed), detail))

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "assertions": [{"name": a.name, "passed": a.passed, "detail": a.detail}
                           for a in self.assertions],
            "metrics": self.metrics,
        }


def _baseline_from_events(events: list[ScenarioEvent], k: int) -> BaselineRetriever:
    baseline = BaselineRetriever(k=k)
    for event in events:
        if event.type in ("utterance", "feedback", "attack"):
            baseline.store(event.text)
    return baseline


def run_experiment(name: str, config: EngineConfig | None = None,
                   out_dir: str | Path | None = None) -> ExperimentReport:
    config = config or EngineConfig()
    runner = {
        "P1": _run_p1, "P2": _run_p2, "P3": _run_p3, "P4": _run_p4,
        "P5": _run_p5, "P6": _run_p6, "P7": _run_p7,
    }.get(name)
    if runner is None:
        raise ValidationError(f"unknown experiment {name!r}; expected one of {EXPERIMENTS}")
    report = runner(config)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name.lower()}_report.json").write_text(
            canonical_json(report.as_dict()) + "\n", "utf-8")
    return report


# ------------------------------------------------------------------------- P1

def _run_p1(config: EngineConfig) -> ExperimentReport:
    report = ExperimentReport("P1")
    events, probe_pairs = scenarios.build_priming()
    result = run_events(events, config=config.copy())
    probe_records = [r for r in result.records if r.event_type == "probe"]
    primed = [r for r in probe_records if r.primed and r.mode == "S1" and r.node_visits == 0]
    rate = len(primed) / len(probe_records) if probe_records else 0.0
    report.metrics["primed_rate"] = rate
    report.metrics["baseline_primed_rate"] = 0.0   # no priming path exists there
    report.metrics["probes"] = len(probe_records)
    report.check("primed_before_query", rate >= 0.8,
                 f"{len(primed)}/{len(probe_records)} probes primed with S1 and 0 searches")
    correct = sum(1 for p in result.probes if p.correct)
    report.check("primed_answers_correct", correct == len(result.probes),
                 f"{correct}/{len(result.probes)} probe answers correct")
    return report


# ------------------------------------------------------------------------- P2

def _run_p2(config: EngineConfig) -> ExperimentReport:
    report = ExperimentReport("P2")
    exec_cfg = config.executive
    rng = random.Random(config.seed or 1234)
    violations = 0
    for _ in range(10_000):
        precision = rng.random()
        intensity = rng.random()
        theta = exec_cfg.theta_base + exec_cfg.theta_slope * precision
        fired = intensity >= theta
        higher_p = min(1.0, precision + rng.random() * (1.0 - precision))
        fired_higher_p = intensity >= exec_cfg.theta_base + exec_cfg.theta_slope * higher_p
        if fired_higher_p and not fired:
            violations += 1
        higher_i = min(1.0, intensity + rng.random() * (1.0 - intensity))
        if fired and not (higher_i >= theta):
            violations += 1
    report.metrics["monotonicity_violations"] = violations
    report.check("rigidity_monotone", violations == 0,
                 f"{violations} violations over 10000 sampled pairs")

    events, meta = scenarios.build_resistance()
    result = run_events(events, config=config.copy())
    by_turn = {r.turn: r for r in result.records}
    resisted = [t for t in meta["spaced_turns"]
                if any(ev.startswith("catharsis_resisted") for ev in by_turn[t].gist_events)]
    fired_records = [r for r in result.records if r.catharsis_fired > 0]
    report.metrics["resisted_turns"] = resisted
    report.metrics["fired_turns"] = [r.turn for r in fired_records]
    report.check("spaced_contradictions_resisted", len(resisted) >= 3,
                 f"{len(resisted)} spaced contradictions resisted without update")
    report.check("accumulation_fires_once",
                 len(fired_records) == 1 and fired_records[0].turn == meta["fire_turn"],
                 f"updates at turns {[r.turn for r in fired_records]}, expected [{meta['fire_turn']}]")
    node = concept_id("team_lead")
    gist = result.engine.graph.gist_lookup(node)
    report.check("precision_recalculated", gist is not None and 0.0 < gist.precision < 0.8,
                 f"precision now {gist.precision if gist else None}")
    return report


# ------------------------------------------------------------------------- P3

def _run_p3(config: EngineConfig) -> ExperimentReport:
    report = ExperimentReport("P3")
    events, meta = scenarios.build_emotional_retention()
    result = run_events(events, config=config.copy())
    probe = result.probes[0]
    report.metrics["framework_probe"] = probe.asserted
    report.check("disclosure_promoted",
                 any(e.content == meta["disclosure_text"]
                     for e in (result.engine.graph.episode(i)
                               for i in result.engine.graph.episode_ids())),
                 "emotional off-topic disclosure stored as an episode")
    report.check("framework_retrieves", probe.correct,
                 f"probe answered {probe.asserted!r}, expected {probe.expected!r}")
    baseline = _baseline_from_events(events, k=config.harness.baseline_k)
    probe_event = next(e for e in events if e.type == "probe")
    top = baseline.retrieve(probe_event.text, config.harness.baseline_k)
    in_top = any(hit.text == meta["disclosure_text"] for hit in top)
    report.metrics["baseline_top_k"] = [hit.text for hit in top]
    report.check("baseline_misses_disclosure", not in_top,
                 f"disclosure absent from baseline top-{config.harness.baseline_k}")

    rng = random.Random(config.seed or 99)
    independence_failures = 0
    from .model import SalienceTag, CHANNELS
    threshold = config.gateway.channel_threshold
    for _ in range(10_000):
        values = {ch: rng.random() for ch in CHANNELS}
        boosted = rng.choice(CHANNELS)
        values[boosted] = threshold + rng.random() * (1.0 - threshold)
        tag = SalienceTag(**values)
        if tag.aggregate < threshold:
            independence_failures += 1
    report.metrics["independence_failures"] = independence_failures
    report.check("channel_independence", independence_failures == 0,
                 f"{independence_failures} failures over 10000 random tags")
    return report


# ------------------------------------------------------------------------- P4

def _run_p4(config: EngineConfig) -> ExperimentReport:
    report = ExperimentReport("P4")
    events, _meta = scenarios.build_fact_recall()
    result = run_events(events, config=config.copy())
    fw_false = sum(1 for p in result.probes if p.asserted_false)
    fw_rate = fw_false / len(result.probes)
    baseline = _baseline_from_events(events, k=1)
    bl_false = 0
    for event in events:
        if event.type != "probe":
            continue
        key = lexicon.query_key(event.text)
        asserted = baseline.answer(event.text, key)
        if asserted is not None and key in result.truth and result.truth[key] != asserted:
            bl_false += 1
    bl_rate = bl_false / len(result.probes)
    report.metrics.update({"framework_false_rate": fw_rate,
                           "baseline_false_rate": bl_rate,
                           "probes": len(result.probes)})
    report.check("baseline_hallucinates", bl_rate > 0.0,
                 f"baseline false rate {bl_rate:.3f}")
    report.check("framework_halves_hallucination", fw_rate <= 0.5 * bl_rate,
                 f"framework {fw_rate:.3f} vs baseline {bl_rate:.3f}")
    approx = [p for p in result.probes if p.verdict == "approximate"]
    report.metrics["approximate_probes"] = len(approx)
    report.check("approximate_always_qualified",
                 len(approx) > 0 and all(p.qualified for p in approx),
                 f"{sum(p.qualified for p in approx)}/{len(approx)} approximate verdicts qualified")
    return report


# ------------------------------------------------------------------------- P5

def _run_p5(config: EngineConfig) -> ExperimentReport:
    report = ExperimentReport("P5")
    events, meta = scenarios.build_attack()
    engine = Engine(config=config.copy())
    pre_identity = None
    rejected = 0
    user_turn_rejected = None
    for event in events:
        record = engine.process_event(event)
        if event.turn == meta["snapshot_turn"]:
            pre_identity = engine.graph.identity_record()
        if record.rejected:
            rejected += 1
        if event.turn == meta["user_turn"]:
            user_turn_rejected = record.rejected
    post_identity = engine.graph.identity_record()
    report.metrics["rejected"] = rejected
    report.check("attacks_rejected", rejected == len(meta["attack_turns"]),
                 f"{rejected} of {len(meta['attack_turns'])} low-trust attacks rejected")
    report.check("user_instruction_processed", user_turn_rejected is False,
                 "trusted-source instruction processed, not rejected")
    report.check("identity_bytes_stable", pre_identity == post_identity,
                 "SELF-linked node serializations identical before and after attacks")

    gamble = scenarios.build_gambling()
    result = run_events(gamble, config=config.copy())
    target = concept_id("slot_machine")
    invs = [inv for inv in result.engine.executive.investigations.values()
            if inv.target_concept == target]
    report.metrics["gambling_steps"] = [inv.steps for inv in invs]
    # Curiosity may reopen after an abort; what matters is that every loop is
    # cut off within the step cap and no determination is ever reached.
    report.check("gambling_aborted",
                 any(inv.status == "aborted" for inv in invs)
                 and all(inv.steps <= config.executive.step_cap for inv in invs)
                 and not any(inv.status == "closed_gist" for inv in invs),
                 f"statuses {[inv.status for inv in invs]}, "
                 f"steps {[inv.steps for inv in invs]}")
    report.check("gambling_no_gist",
                 result.engine.graph.gist_lookup(target) is None,
                 "no gist written for the unpredictable pattern")
    return report


# ------------------------------------------------------------------------- P6

def _run_p6(config: EngineConfig) -> ExperimentReport:
    report = ExperimentReport("P6")
    active_events, passive_events, _meta = scenarios.build_active_formation()
    active = run_events(active_events, config=config.copy())
    passive = run_events(passive_events, config=config.copy())
    acc_active = sum(1 for p in active.probes if p.correct) / len(active.probes)
    acc_passive = sum(1 for p in passive.probes if p.correct) / len(passive.probes)
    report.metrics.update({"active_accuracy": acc_active,
                           "passive_accuracy": acc_passive})
    target = concept_id("af_protocol")
    report.check("active_forms_gist",
                 active.engine.graph.gist_lookup(target) is not None,
                 "investigation closed with a gist")
    report.check("passive_forms_none",
                 passive.engine.graph.gist_lookup(target) is None,
                 "passive exposure left no gist")
    report.check("accuracy_margin", acc_active - acc_passive >= 0.2,
                 f"active {acc_active:.2f} vs passive {acc_passive:.2f}")
    return report


# ------------------------------------------------------------------------- P7

def _run_p7(config: EngineConfig) -> ExperimentReport:
    report = ExperimentReport("P7")
    training = scenarios.build_regular_domain(seed=config.seed)
    mature_engine = Engine(config=config.copy())
    prefix = run_events(training, engine=mature_engine)
    suffix = scenarios.build_query_suffix(start_turn=training[-1].turn)
    mature = run_events(suffix, engine=mature_engine)
    fresh = run_events(suffix, config=config.copy())
    mature_cost = _mean_query_cost(mature)
    fresh_cost = _mean_query_cost(fresh)
    windows = windowed_summary(prefix.records, window=config.harness.window)
    rho = spearman_rho([float(w.window) for w in windows],
                       [w.s2_fraction for w in windows])
    report.metrics.update({"mature_cost": mature_cost, "fresh_cost": fresh_cost,
                           "s2_spearman": rho,
                           "s2_by_window": [w.s2_fraction for w in windows]})
    report.check("s2_declines", rho <= -0.8,
                 f"spearman(window, s2_fraction) = {rho:.3f}")
    report.check("mature_cheaper", mature_cost < 0.5 * fresh_cost,
                 f"mature {mature_cost:.2f} vs fresh {fresh_cost:.2f} per query")
    return report


def _mean_query_cost(result: RunResult) -> float:
    rows = [r for r in result.records if r.mode in ("S1", "S2")]
    return sum(r.cost for r in rows) / len(rows) if rows else 0.0
