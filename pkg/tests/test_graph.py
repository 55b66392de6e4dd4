import math
import random

import pytest

from conftest import build_graph
from oracles import oracle_search, oracle_spread, random_graph

from engram.graph import MemoryGraph
from engram.model import (
    SELF_ID,
    NotFoundError,
    SalienceTag,
    StateError,
    ValenceVector,
    ValidationError,
    serialize_valence,
)


def _tag(**kw) -> SalienceTag:
    return SalienceTag(**kw)


# ------------------------------------------------------------------- concepts

def test_add_concept_initializes_fresh(empty_graph):
    nid = empty_graph.add_concept("cardiology", 1)
    node = empty_graph.concept(nid)
    assert node.weight == 0.0 and node.gist is None and node.created_turn == 1


def test_add_concept_idempotent_per_label(empty_graph):
    first = empty_graph.add_concept("cardiology", 1)
    again = empty_graph.add_concept("cardiology", 5)
    assert first == again


def test_add_concept_rejects_empty_label(empty_graph):
    with pytest.raises(ValidationError):
        empty_graph.add_concept("", 1)


def test_self_concept_exists_exactly_once(empty_graph):
    assert empty_graph.has_concept(SELF_ID)
    assert empty_graph.concept_ids().count(SELF_ID) == 1


# ------------------------------------------------------------------- episodes

def test_episode_bootstraps_edge_at_w_init(empty_graph):
    a = empty_graph.add_concept("a", 1)
    b = empty_graph.add_concept("b", 1)
    empty_graph.add_episode("a with b", [a, b], _tag(trust=1.0), 1)
    assert empty_graph.edge_weight(a, b) == 0.3


def test_second_episode_reinforces_edge(empty_graph):
    a = empty_graph.add_concept("a", 1)
    b = empty_graph.add_concept("b", 1)
    empty_graph.add_episode("one", [a, b], _tag(trust=1.0), 1)
    empty_graph.add_episode("two", [a, b], _tag(trust=1.0), 2)
    assert empty_graph.edge_weight(a, b) == pytest.approx(0.45)


def test_episode_with_unknown_concept_fails(empty_graph):
    with pytest.raises(NotFoundError):
        empty_graph.add_episode("x", ["c:ghost"], _tag(), 1)


def test_episode_concept_link_scales_with_salience(empty_graph):
    a = empty_graph.add_concept("a", 1)
    eid = empty_graph.add_episode("salient", [a], _tag(emotional=1.0), 1)
    assert empty_graph.edge_weight(eid, a) == pytest.approx(0.1)
    eid2 = empty_graph.add_episode("dull", [a], _tag(), 2)
    assert empty_graph.edge_weight(eid2, a) == pytest.approx(0.05)  # floor


# ---------------------------------------------------------------- gist lookup

def _gist(**kw) -> ValenceVector:
    base = dict(valence=0.2, arousal=0.4, contextual=frozenset({"self"}),
                density=0.1, precision=0.8)
    base.update(kw)
    return ValenceVector(**base)


def test_gist_lookup_absent_before_formation(empty_graph):
    nid = empty_graph.add_concept("a", 1)
    assert empty_graph.gist_lookup(nid) is None


def test_gist_lookup_returns_stored_value_bit_identical(empty_graph):
    nid = empty_graph.add_concept("a", 1)
    gist = _gist()
    empty_graph.write_gist(nid, gist, 0.5, ("investigation", "i1"), turn=2)
    assert serialize_valence(empty_graph.gist_lookup(nid)) == serialize_valence(gist)


def test_gist_lookup_unknown_id(empty_graph):
    with pytest.raises(NotFoundError):
        empty_graph.gist_lookup("c:ghost")


def test_gist_lookup_work_independent_of_graph_size():
    small = MemoryGraph()
    a = small.add_concept("a", 1)
    small.gist_lookup(a)
    small_cost = small.meter.lookup_ops

    big = MemoryGraph()
    a = big.add_concept("a", 1)
    for i in range(500):
        nid = big.add_concept(f"n{i}", 1)
        big.add_episode(f"ep {i}", [nid, a], _tag(trust=0.9), 1)
    big.meter.lookup_ops = 0
    big.gist_lookup(a)
    assert big.meter.lookup_ops == small_cost


# ---------------------------------------------------------------- activation

def test_spread_single_edge():
    graph, ids = build_graph([("a", "b", 0.5)])
    out = graph.spread_activation({ids["a"]: 1.0}, decay=1.0, hop_limit=1, floor=0.05)
    assert out.entries == {ids["a"]: 1.0, ids["b"]: 0.5}


def test_spread_chain_with_decay():
    # c = 1.0 * 0.5 * 0.5 * 0.8**2 = 0.16, frozen from the path-enumeration oracle
    graph, ids = build_graph([("a", "b", 0.5), ("b", "c", 0.5)])
    out = graph.spread_activation({ids["a"]: 1.0}, decay=0.8, hop_limit=2, floor=0.05)
    assert out.entries[ids["c"]] == pytest.approx(0.16, abs=1e-12)
    expected = oracle_spread([(ids["a"], ids["b"], 0.5), (ids["b"], ids["c"], 0.5)],
                             {ids["a"]: 1.0}, 0.8, 2, 0.05)
    assert out.entries == pytest.approx(expected, abs=1e-12)


def test_spread_diamond_sums_converging_paths():
    edges = [("a", "b", 0.5), ("a", "c", 0.5), ("b", "d", 0.5), ("c", "d", 0.5)]
    graph, ids = build_graph(edges)
    out = graph.spread_activation({ids["a"]: 1.0}, decay=1.0, hop_limit=2, floor=0.05)
    assert out.entries[ids["d"]] == pytest.approx(0.5, abs=1e-12)


def test_spread_drops_below_floor_but_keeps_seeds():
    graph, ids = build_graph([("a", "b", 0.05)])
    out = graph.spread_activation({ids["a"]: 0.04}, decay=1.0, hop_limit=2, floor=0.05)
    assert ids["a"] in out.entries and ids["b"] not in out.entries


def test_spread_validates_inputs(empty_graph):
    with pytest.raises(ValidationError):
        empty_graph.spread_activation({})
    a = empty_graph.add_concept("a", 1)
    with pytest.raises(ValidationError):
        empty_graph.spread_activation({a: 1.5})
    with pytest.raises(NotFoundError):
        empty_graph.spread_activation({"c:ghost": 1.0})


def test_spread_matches_oracle_on_random_graphs():
    rng = random.Random(42)
    for _ in range(60):
        names, edges = random_graph(rng)
        graph, ids = build_graph(edges)
        seeds = {ids[n]: round(rng.uniform(0.1, 1.0), 3)
                 for n in rng.sample(names, k=rng.randint(1, min(3, len(names))))
                 if n in ids}
        if not seeds:
            continue
        decay = rng.choice([0.6, 0.8, 1.0])
        hops = rng.randint(1, 4)
        got = graph.spread_activation(seeds, decay=decay, hop_limit=hops, floor=0.05)
        want = oracle_spread([(ids[a], ids[b], w) for a, b, w in edges],
                             seeds, decay, hops, 0.05)
        assert set(got.entries) == set(want)
        for node, value in want.items():
            assert abs(got.entries[node] - value) <= 1e-9


# ------------------------------------------------------------------- search

def test_search_isolated_concept(empty_graph):
    a = empty_graph.add_concept("a", 1)
    assert empty_graph.deliberate_search([a], budget=10) == [(a, 1.0)]


def test_search_budget_one_visits_only_seed():
    graph, ids = build_graph([("a", "b", 0.9)])
    result = graph.deliberate_search([ids["a"]], budget=1)
    assert result == [(ids["a"], 1.0)]


def test_search_counts_visits_into_meter():
    graph, ids = build_graph([("a", "b", 0.9), ("b", "c", 0.9)])
    before = graph.meter.node_visits
    graph.deliberate_search([ids["a"]], budget=10)
    assert graph.meter.node_visits - before == 3


def test_search_matches_exhaustive_oracle_on_random_graphs():
    rng = random.Random(7)
    for _ in range(60):
        names, edges = random_graph(rng)
        graph, ids = build_graph(edges)
        for n in names:
            ids.setdefault(n, graph.add_concept(n, 0))
        seeds = [ids[n] for n in rng.sample(names, k=min(2, len(names)))]
        got = graph.deliberate_search(seeds, budget=len(ids) + 5)
        want = oracle_search([(ids[a], ids[b], w) for a, b, w in edges], seeds)
        assert [n for n, _ in got] == [n for n, _ in want]
        for (gn, gs), (wn, ws) in zip(got, want):
            assert abs(gs - ws) <= 1e-9


def test_search_rejects_nonpositive_budget(empty_graph):
    with pytest.raises(ValidationError):
        empty_graph.deliberate_search([], budget=0)


# ------------------------------------------------------------------- density

def test_density_zero_for_isolate(empty_graph):
    a = empty_graph.add_concept("a", 1)
    assert empty_graph.local_density(a) == 0.0


def test_density_single_unit_edge():
    graph, ids = build_graph([("a", "b", 1.0)])
    assert graph.local_density(ids["a"]) == pytest.approx(1 - math.exp(-0.2))


def test_density_never_decreases_as_edges_accrue(empty_graph):
    a = empty_graph.add_concept("a", 1)
    last = empty_graph.local_density(a)
    for i in range(6):
        b = empty_graph.add_concept(f"b{i}", 1)
        empty_graph.add_episode(f"ep{i}", [a, b], _tag(trust=0.8), i)
        now = empty_graph.local_density(a)
        assert now >= last
        last = now


# ---------------------------------------------------------------- compression

def test_compress_fresh_graph_degrades_nothing(empty_graph):
    assert empty_graph.compress_tick(10) == 0


def test_compress_degrades_content_but_preserves_gists(empty_graph):
    a = empty_graph.add_concept("a", 1)
    gist = _gist(contextual=frozenset({"ctx"}))
    empty_graph.write_gist(a, gist, 0.4, ("investigation", "i1"), turn=1)
    eid = empty_graph.add_episode("the full detailed story", [a], _tag(trust=0.9), 1)
    before = serialize_valence(empty_graph.gist_lookup(a))
    weight_before = empty_graph.concept(a).weight

    assert empty_graph.compress_tick(202) == 1
    episode = empty_graph.episode(eid)
    assert episode.degraded and episode.content.startswith("[a] sha256:")
    assert serialize_valence(empty_graph.gist_lookup(a)) == before
    assert empty_graph.concept(a).weight == weight_before


def test_compress_is_idempotent_per_episode(empty_graph):
    a = empty_graph.add_concept("a", 1)
    empty_graph.add_episode("story", [a], _tag(trust=0.9), 1)
    assert empty_graph.compress_tick(300) == 1
    assert empty_graph.compress_tick(301) == 0


# ------------------------------------------------------------- reconsolidation

def test_reconsolidation_strengthens_seed_edges(empty_graph):
    a = empty_graph.add_concept("a", 1)
    b = empty_graph.add_concept("b", 1)
    empty_graph.add_episode("ab", [a, b], _tag(trust=1.0), 1)   # edge 0.3
    empty_graph.note_retrieval(a, [b])
    empty_graph.reconsolidate(a, window_closed_without_update=True)
    assert empty_graph.edge_weight(a, b) == pytest.approx(0.35)


def test_reconsolidation_skipped_after_update(empty_graph):
    a = empty_graph.add_concept("a", 1)
    b = empty_graph.add_concept("b", 1)
    empty_graph.add_episode("ab", [a, b], _tag(trust=1.0), 1)
    empty_graph.note_retrieval(a, [b])
    empty_graph.reconsolidate(a, window_closed_without_update=False)
    assert empty_graph.edge_weight(a, b) == pytest.approx(0.3)


def test_reconsolidation_caps_at_one(empty_graph):
    a = empty_graph.add_concept("a", 1)
    b = empty_graph.add_concept("b", 1)
    empty_graph._set_edge(a, b, 0.98, 1)
    empty_graph.note_retrieval(a, [b])
    empty_graph.reconsolidate(a, window_closed_without_update=True)
    assert empty_graph.edge_weight(a, b) == 1.0


def test_reconsolidation_requires_retrieval(empty_graph):
    a = empty_graph.add_concept("a", 1)
    with pytest.raises(StateError):
        empty_graph.reconsolidate(a, window_closed_without_update=True)
    with pytest.raises(NotFoundError):
        empty_graph.reconsolidate("c:ghost", window_closed_without_update=True)


# ----------------------------------------------------------------- write_gist

def test_core_self_gist_creates_identity_link(empty_graph):
    a = empty_graph.add_concept("a", 1)
    empty_graph.write_gist(a, _gist(), 0.95, ("investigation", "i1"), turn=1)
    assert empty_graph.self_linked(a)
    assert empty_graph.edge_weight(SELF_ID, a) == 1.0


def test_midweight_gist_gets_no_identity_link(empty_graph):
    a = empty_graph.add_concept("a", 1)
    empty_graph.write_gist(a, _gist(), 0.5, ("investigation", "i1"), turn=1)
    assert not empty_graph.self_linked(a)


def test_weight_drop_demotes_identity_link(empty_graph):
    a = empty_graph.add_concept("a", 1)
    empty_graph.write_gist(a, _gist(), 0.95, ("investigation", "i1"), turn=1)
    empty_graph.write_gist(a, _gist(), 0.7, ("catharsis", "x"), turn=2)
    assert empty_graph.edge_weight(SELF_ID, a) == pytest.approx(0.7)


def test_write_gist_validates_ranges_and_provenance(empty_graph):
    a = empty_graph.add_concept("a", 1)
    with pytest.raises(ValidationError):
        ValenceVector(precision=1.2)
    with pytest.raises(ValidationError):
        empty_graph.write_gist(a, _gist(), 1.5, ("investigation", "i1"), turn=1)
    with pytest.raises(ValidationError):
        empty_graph.write_gist(a, _gist(), 0.5, ("gateway", "x"), turn=1)
    with pytest.raises(NotFoundError):
        empty_graph.write_gist("c:ghost", _gist(), 0.5, ("catharsis", "x"), turn=1)


# ------------------------------------------------------------------ snapshots

def _populated_graph() -> MemoryGraph:
    graph = MemoryGraph()
    a = graph.add_concept("alpha", 1)
    b = graph.add_concept("beta", 2)
    graph.add_episode("alpha met beta k=v", [a, b], _tag(trust=0.9, emotional=0.4), 3)
    graph.write_gist(a, _gist(), 0.92, ("investigation", "i1"), turn=4)
    return graph


def test_snapshot_round_trip_is_byte_identical():
    graph = _populated_graph()
    first = graph.serialize()
    loaded = MemoryGraph.from_snapshot(graph.snapshot_dict())
    assert loaded.serialize() == first
    again = MemoryGraph.from_snapshot(loaded.snapshot_dict())
    assert again.serialize() == first


def test_snapshot_preserves_episode_counter():
    graph = _populated_graph()
    loaded = MemoryGraph.from_snapshot(graph.snapshot_dict())
    e_new = loaded.add_episode("later", [loaded.add_concept("alpha", 9)],
                               _tag(trust=0.5), 9)
    assert e_new == "e000002"


def test_snapshot_rejects_wrong_version():
    from engram.model import SchemaError
    data = _populated_graph().snapshot_dict()
    data["v"] = 2
    with pytest.raises(SchemaError):
        MemoryGraph.from_snapshot(data)


def test_journal_replay_reproduces_graph(tmp_path):
    from engram.persistence import JournalWriter, replay_journal
    journal_path = tmp_path / "graph.journal"
    writer = JournalWriter(journal_path)
    graph = MemoryGraph(journal_sink=writer)
    a = graph.add_concept("alpha", 1)
    b = graph.add_concept("beta", 1)
    graph.add_episode("alpha beta k=v", [a, b], _tag(trust=1.0), 2)
    graph.write_gist(a, _gist(), 0.95, ("investigation", "i1"), turn=3)
    graph.note_retrieval(a, [b])
    graph.reconsolidate(a, window_closed_without_update=True)
    graph.compress_tick(500)
    writer.close()

    replayed = replay_journal(journal_path)
    assert replayed.serialize() == graph.serialize()
