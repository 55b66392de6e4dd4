import json

import pytest

from engram import scenarios
from engram.cli import main
from engram.config import ENV_VAR, EngineConfig
from engram.engine import Engine
from engram.harness import run_events, save_scenario
from engram.model import SchemaError, ValidationError
from engram.persistence import load_snapshot, save_snapshot


def _run_prefix(turns: int = 120) -> tuple[Engine, list]:
    events = scenarios.build_mixed_topics(turns=turns)
    result = run_events(events)
    return result.engine, events


# ------------------------------------------------------------------ snapshots

def test_save_load_save_is_byte_identical(tmp_path):
    engine, _ = _run_prefix()
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_snapshot(engine, p1)
    loaded = load_snapshot(p1)
    save_snapshot(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_rejects_version_mismatch(tmp_path):
    engine, _ = _run_prefix(20)
    path = tmp_path / "snap.json"
    save_snapshot(engine, path)
    data = json.loads(path.read_text("utf-8"))
    data["v"] = 2
    path.write_text(json.dumps(data), "utf-8")
    with pytest.raises(SchemaError, match="version"):
        load_snapshot(path)


def test_load_fails_closed_on_corrupt_file(tmp_path):
    path = tmp_path / "snap.json"
    path.write_text('{"v": 1, "turn": ', "utf-8")
    with pytest.raises(SchemaError, match="corrupt"):
        load_snapshot(path)
    with pytest.raises(SchemaError, match="not found"):
        load_snapshot(tmp_path / "missing.json")


def test_interrupted_run_equals_uninterrupted(tmp_path):
    events = scenarios.build_mixed_topics(turns=200)
    full = run_events(events)

    engine = Engine()
    half = run_events(events[:100], engine=engine)
    path = tmp_path / "mid.json"
    save_snapshot(engine, path)
    resumed_engine = load_snapshot(path)
    rest = run_events(events[100:], engine=resumed_engine)

    got = [r.as_dict() for r in half.records + rest.records]
    want = [r.as_dict() for r in full.records]
    assert got == want


def test_resumed_engine_matches_original_state(tmp_path):
    engine, events = _run_prefix(150)
    path = tmp_path / "snap.json"
    save_snapshot(engine, path)
    loaded = load_snapshot(path)
    assert loaded.graph.serialize() == engine.graph.serialize()
    assert loaded.wm.snapshot_dict() == engine.wm.snapshot_dict()
    assert loaded.executive.snapshot_dict() == engine.executive.snapshot_dict()
    assert loaded.active_topic == engine.active_topic


# --------------------------------------------------------------------- config

def test_config_round_trip_and_unknown_key(tmp_path):
    config = EngineConfig()
    config.wm.capacity = 24
    path = tmp_path / "config.json"
    config.save(path)
    loaded = EngineConfig.load(path)
    assert loaded.wm.capacity == 24
    flat = config.to_flat()
    flat["wm.bogus"] = 1
    with pytest.raises(ValidationError, match="wm.bogus"):
        EngineConfig.from_flat(flat)


def test_config_env_var_override(tmp_path, monkeypatch):
    path = tmp_path / "c.json"
    config = EngineConfig()
    config.graph.hop_limit = 5
    config.save(path)
    monkeypatch.setenv(ENV_VAR, str(path))
    assert EngineConfig.resolve(None).graph.hop_limit == 5
    monkeypatch.delenv(ENV_VAR)
    assert EngineConfig.resolve(None).graph.hop_limit == 3


def test_every_documented_threshold_is_reachable():
    flat = EngineConfig().to_flat()
    for key in [
        "graph.w_init", "graph.reinforce", "graph.decay", "graph.hop_limit",
        "graph.floor", "graph.density_scale", "graph.compress_age",
        "graph.w_core", "graph.k_assoc", "graph.testing_increment",
        "gateway.channel_threshold", "gateway.inbound_activation_threshold",
        "gateway.identity_discount", "gateway.promotion_threshold",
        "gateway.boundary_threshold", "gateway.trust_user",
        "wm.capacity", "wm.drift_decay", "wm.interference_overlap",
        "wm.interference_penalty",
        "executive.density_escalation", "executive.novelty_escalation",
        "executive.investigation_salience", "executive.theta_base",
        "executive.theta_slope", "executive.evidence_min",
        "executive.consistency_min", "executive.step_cap",
        "executive.match_precise", "executive.precision_precise",
        "executive.match_null", "executive.search_budget",
        "executive.contradiction_score",
        "harness.window", "harness.baseline_k",
    ]:
        assert key in flat, key


# ------------------------------------------------------------------------ CLI

def test_cli_init_writes_defaults(tmp_path):
    out = tmp_path / "engram.json"
    assert main(["init", "--out", str(out)]) == 0
    assert EngineConfig.load(out).wm.capacity == 16


def test_cli_unknown_subcommand_is_usage_error(capsys):
    assert main(["frobnicate"]) == 2
    assert main([]) == 2


def test_cli_run_and_report(tmp_path):
    scenario = tmp_path / "s.jsonl"
    save_scenario(scenarios.build_mixed_topics(turns=120), scenario)
    metrics = tmp_path / "m.jsonl"
    assert main(["run", str(scenario), "--out", str(metrics)]) == 0
    assert metrics.exists()
    assert main(["report", str(metrics), "--out-csv", str(tmp_path / "r.csv")]) == 0
    assert (tmp_path / "r.csv").exists()


def test_cli_run_missing_scenario_fails(tmp_path):
    assert main(["run", str(tmp_path / "absent.jsonl")]) == 1


def test_cli_snapshot_save_and_load(tmp_path):
    snap = tmp_path / "snap.json"
    assert main(["snapshot", "save", str(snap)]) == 0
    assert main(["snapshot", "load", str(snap)]) == 0
    assert main(["snapshot", "load", str(tmp_path / "absent.json")]) == 2


def test_cli_query_one_shot(capsys):
    assert main(["query", "anything about crop:orchard", "--concepts", "orchard"]) == 0
    out = capsys.readouterr().out
    assert "verdict=null" in out


def test_cli_experiment_exit_codes(tmp_path):
    assert main(["experiment", "P1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "p1_report.json").exists()


def test_cli_resume_matches_direct_run(tmp_path):
    events = scenarios.build_mixed_topics(turns=80)
    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_scenario(events[:40], first)
    save_scenario(events[40:], second)
    snap = tmp_path / "snap.json"
    m1, m2 = tmp_path / "m1.jsonl", tmp_path / "m2.jsonl"
    assert main(["run", str(first), "--out", str(m1), "--save", str(snap)]) == 0
    assert main(["run", str(second), "--out", str(m2), "--resume", str(snap)]) == 0

    whole = tmp_path / "w.jsonl"
    save_scenario(events, whole)
    mw = tmp_path / "mw.jsonl"
    assert main(["run", str(whole), "--out", str(mw)]) == 0
    joined = m1.read_text("utf-8") + m2.read_text("utf-8")
    assert joined == mw.read_text("utf-8")
